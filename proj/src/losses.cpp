#include "adaseg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace adaseg {

std::string_view to_string(CeMode mode)
{
    return mode == CeMode::binary ? "binary" : "literal";
}

std::string_view to_string(Weighting weighting)
{
    switch (weighting) {
    case Weighting::none: return "none";
    case Weighting::voxel: return "voxel";
    case Weighting::slice: return "slice";
    }
    return "?";
}

std::string_view to_string(WeightTransform transform)
{
    switch (transform) {
    case WeightTransform::identity: return "identity";
    case WeightTransform::inverse: return "inverse";
    case WeightTransform::complement: return "complement";
    }
    return "?";
}

CeMode parse_ce_mode(std::string_view text)
{
    if (text == "binary") return CeMode::binary;
    if (text == "literal") return CeMode::literal;
    throw std::invalid_argument("unknown CE mode '" + std::string(text) + "'");
}

Weighting parse_weighting(std::string_view text)
{
    if (text == "none") return Weighting::none;
    if (text == "voxel") return Weighting::voxel;
    if (text == "slice") return Weighting::slice;
    throw std::invalid_argument("unknown weighting '" + std::string(text) + "'");
}

WeightTransform parse_weight_transform(std::string_view text)
{
    if (text == "identity") return WeightTransform::identity;
    if (text == "inverse") return WeightTransform::inverse;
    if (text == "complement") return WeightTransform::complement;
    throw std::invalid_argument("unknown weight transform '" + std::string(text) + "'");
}

void LossConfig::validate() const
{
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("loss alpha must lie in [0,1]");
    if (!(epsilon > 0.0)) throw std::invalid_argument("loss epsilon must be > 0");
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("EWA beta must lie in (0,1)");
    if (!(prob_clamp >= 0.0 && prob_clamp < 0.5)) throw std::invalid_argument("prob_clamp must lie in [0,0.5)");
}

namespace {

void check_shapes(std::span<const std::uint8_t> truth, std::span<const double> pred, std::span<double> grad)
{
    if (truth.size() != pred.size()) {
        throw std::invalid_argument("loss shape mismatch: truth has " + std::to_string(truth.size()) +
                                    " pixels, prediction " + std::to_string(pred.size()));
    }
    if (!grad.empty() && grad.size() != pred.size()) throw std::invalid_argument("gradient buffer size mismatch");
}

}  // namespace

double soft_dsc_loss(std::span<const std::uint8_t> truth, std::span<const double> pred, double epsilon,
                     std::span<double> grad)
{
    check_shapes(truth, pred, grad);
    if (!(epsilon > 0.0)) throw std::invalid_argument("soft DSC epsilon must be > 0");
    double overlap = 0.0, truth_sum = 0.0, pred_sum = 0.0;
    for (std::size_t l = 0; l < pred.size(); ++l) {
        overlap += truth[l] * pred[l];
        truth_sum += truth[l];
        pred_sum += pred[l];
    }
    const double num = -2.0 * overlap - epsilon;
    const double den = truth_sum + pred_sum + epsilon;
    if (!grad.empty()) {
        const double den2 = den * den;
        for (std::size_t l = 0; l < pred.size(); ++l) grad[l] = (-2.0 * truth[l] * den - num) / den2;
    }
    return num / den;
}

double ce_loss(std::span<const std::uint8_t> truth, std::span<const double> pred, CeMode mode, double clamp,
               std::span<double> grad)
{
    check_shapes(truth, pred, grad);
    const double lo = clamp;
    const double hi = 1.0 - clamp;
    double total = 0.0;
    const double scale = mode == CeMode::binary && !pred.empty() ? 1.0 / static_cast<double>(pred.size()) : 1.0;
    for (std::size_t l = 0; l < pred.size(); ++l) {
        const double p = std::clamp(pred[l], lo, hi);
        const bool inside = pred[l] >= lo && pred[l] <= hi;
        const double y = truth[l];
        if (mode == CeMode::literal) {
            if (y != 0.0) total -= std::log(p);
            if (!grad.empty()) grad[l] = inside && y != 0.0 ? -1.0 / p : 0.0;
        } else {
            total -= y * std::log(p) + (1.0 - y) * std::log1p(-p);
            if (!grad.empty()) grad[l] = inside ? scale * (-y / p + (1.0 - y) / (1.0 - p)) : 0.0;
        }
    }
    return total * scale;
}

double combined_loss(std::span<const std::uint8_t> truth, std::span<const double> pred, const LossConfig& config,
                     std::span<double> grad)
{
    check_shapes(truth, pred, grad);
    const double a = config.alpha;
    if (grad.empty()) {
        return a * soft_dsc_loss(truth, pred, config.epsilon) +
               (1.0 - a) * ce_loss(truth, pred, config.ce_mode, config.prob_clamp);
    }
    std::vector<double> ce_grad(pred.size());
    const double dsc = soft_dsc_loss(truth, pred, config.epsilon, grad);
    const double ce = ce_loss(truth, pred, config.ce_mode, config.prob_clamp, ce_grad);
    for (std::size_t l = 0; l < pred.size(); ++l) grad[l] = a * grad[l] + (1.0 - a) * ce_grad[l];
    return a * dsc + (1.0 - a) * ce;
}

// ---------------------------------------------------------------------------

BatchPrediction::BatchPrediction(std::size_t n, std::size_t k, std::size_t p)
    : slices(n), structures(k), pixels(p), keys(n), probabilities(n * k * p, 0.0), truths(n * k)
{
}

void BatchPrediction::set_truth(std::size_t slice, std::size_t k, std::vector<std::uint8_t> mask)
{
    if (!mask.empty() && mask.size() != pixels) throw std::invalid_argument("truth mask size mismatch");
    truths.at(slice * structures + k) = std::move(mask);
}

void BatchPrediction::validate() const
{
    if (probabilities.size() != slices * structures * pixels) {
        throw std::invalid_argument("batch probability buffer does not match slices*structures*pixels");
    }
    if (truths.size() != slices * structures) throw std::invalid_argument("batch truth table has the wrong size");
    for (const auto& t : truths) {
        if (!t.empty() && t.size() != pixels) throw std::invalid_argument("batch truth mask shape mismatch");
        for (auto v : t) {
            if (v > 1) throw std::invalid_argument("batch truth mask is not binary");
        }
    }
    for (double p : probabilities) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("batch prediction outside [0,1]");
    }
}

BatchLoss class_weighted_loss(const BatchPrediction& batch, std::span<const double> weights,
                              const LossConfig& config)
{
    batch.validate();
    if (weights.size() != batch.structures) throw std::invalid_argument("one weight per structure required");

    BatchLoss out;
    out.gradient.assign(batch.probabilities.size(), 0.0);
    out.weights.assign(weights.begin(), weights.end());

    double denominator = 0.0;
    for (std::size_t i = 0; i < batch.slices; ++i) {
        for (std::size_t k = 0; k < batch.structures; ++k) {
            if (batch.available(i, k)) denominator += weights[k];
        }
    }
    if (denominator <= 0.0) {
        out.no_supervision = true;
        return out;
    }

    double numerator = 0.0;
    std::vector<double> grad(batch.pixels);
    for (std::size_t i = 0; i < batch.slices; ++i) {
        for (std::size_t k = 0; k < batch.structures; ++k) {
            if (!batch.available(i, k)) continue;
            const double term = combined_loss(batch.truth(i, k), batch.pred(i, k), config, grad);
            numerator += weights[k] * term;
            const double scale = weights[k] / denominator;
            double* g = out.gradient.data() + (i * batch.structures + k) * batch.pixels;
            for (std::size_t l = 0; l < batch.pixels; ++l) g[l] = scale * grad[l];
        }
    }
    out.value = numerator / denominator;
    return out;
}

BatchLoss data_adaptive_loss(const BatchPrediction& batch, const LossConfig& config)
{
    const std::vector<double> ones(batch.structures, 1.0);
    return class_weighted_loss(batch, ones, config);
}

// ---------------------------------------------------------------------------

ClassWeightState::ClassWeightState(std::size_t classes, double beta)
    : raw_(classes, 0.0), steps_(classes, 0), beta_(beta)
{
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("EWA beta must lie in (0,1)");
}

std::vector<double> ClassWeightState::update(std::span<const double> observation,
                                             std::span<const std::uint8_t> observed)
{
    if (observation.size() != raw_.size()) throw std::invalid_argument("observation has the wrong class count");
    if (!observed.empty() && observed.size() != raw_.size()) {
        throw std::invalid_argument("observed flags have the wrong class count");
    }
    for (double v : observation) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("class observation outside [0,1]");
    }
    for (std::size_t k = 0; k < raw_.size(); ++k) {
        if (!observed.empty() && observed[k] == 0) continue;
        raw_[k] = beta_ * raw_[k] + (1.0 - beta_) * observation[k];
        ++steps_[k];
    }
    return corrected();
}

std::vector<double> ClassWeightState::corrected() const
{
    std::vector<double> out(raw_.size(), 1.0);
    for (std::size_t k = 0; k < raw_.size(); ++k) {
        if (steps_[k] == 0) continue;
        const double bias = 1.0 - std::pow(beta_, static_cast<double>(steps_[k]));
        out[k] = std::clamp(raw_[k] / bias, kWeightFloor, 1.0);
    }
    return out;
}

void ClassWeightState::add_class()
{
    raw_.push_back(0.0);
    steps_.push_back(0);
}

ClassObservation voxel_frequencies(const BatchPrediction& batch)
{
    ClassObservation obs{std::vector<double>(batch.structures, 0.0), std::vector<std::uint8_t>(batch.structures, 0)};
    for (std::size_t k = 0; k < batch.structures; ++k) {
        std::size_t positive = 0, total = 0;
        for (std::size_t i = 0; i < batch.slices; ++i) {
            if (!batch.available(i, k)) continue;
            for (auto v : batch.truth(i, k)) positive += v;
            total += batch.pixels;
        }
        if (total > 0) {
            obs.value[k] = static_cast<double>(positive) / static_cast<double>(total);
            obs.observed[k] = 1;
        }
    }
    return obs;
}

ClassObservation positive_slice_frequencies(const BatchPrediction& batch)
{
    ClassObservation obs{std::vector<double>(batch.structures, 0.0), std::vector<std::uint8_t>(batch.structures, 0)};
    for (std::size_t k = 0; k < batch.structures; ++k) {
        std::size_t positive = 0, total = 0;
        for (std::size_t i = 0; i < batch.slices; ++i) {
            if (!batch.available(i, k)) continue;
            const auto t = batch.truth(i, k);
            positive += std::any_of(t.begin(), t.end(), [](std::uint8_t v) { return v != 0; }) ? 1 : 0;
            ++total;
        }
        if (total > 0) {
            obs.value[k] = static_cast<double>(positive) / static_cast<double>(total);
            obs.observed[k] = 1;
        }
    }
    return obs;
}

std::vector<double> transform_weights(std::span<const double> corrected, std::span<const std::size_t> steps,
                                      WeightTransform transform)
{
    if (corrected.size() != steps.size()) throw std::invalid_argument("weight/step size mismatch");
    std::vector<double> out(corrected.size(), 1.0);
    switch (transform) {
    case WeightTransform::identity:
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = steps[k] > 0 ? corrected[k] : 1.0;
        break;
    case WeightTransform::complement:
        for (std::size_t k = 0; k < out.size(); ++k) {
            out[k] = steps[k] > 0 ? std::max(1.0 - corrected[k], kWeightFloor) : 1.0;
        }
        break;
    case WeightTransform::inverse: {
        double smallest = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < out.size(); ++k) {
            if (steps[k] > 0) smallest = std::min(smallest, corrected[k]);
        }
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = steps[k] > 0 ? smallest / corrected[k] : 1.0;
        break;
    }
    }
    return out;
}

namespace {

BatchLoss ewa_weighted_loss(const BatchPrediction& batch, ClassWeightState& state, const LossConfig& config,
                            const ClassObservation& obs)
{
    if (state.classes() != batch.structures) throw std::invalid_argument("class weight state has the wrong size");
    const auto corrected = state.update(obs.value, obs.observed);
    const auto weights = transform_weights(corrected, state.steps(), config.transform);
    return class_weighted_loss(batch, weights, config);
}

}  // namespace

BatchLoss voxel_weighted_loss(const BatchPrediction& batch, ClassWeightState& mu, const LossConfig& config)
{
    batch.validate();
    return ewa_weighted_loss(batch, mu, config, voxel_frequencies(batch));
}

BatchLoss slice_weighted_loss(const BatchPrediction& batch, ClassWeightState& gamma, const LossConfig& config)
{
    batch.validate();
    return ewa_weighted_loss(batch, gamma, config, positive_slice_frequencies(batch));
}

BatchLoss batch_loss(const BatchPrediction& batch, const LossConfig& config, ClassWeightState* state)
{
    switch (config.weighting) {
    case Weighting::none:
        return data_adaptive_loss(batch, config);
    case Weighting::voxel:
    case Weighting::slice:
        if (state == nullptr) throw std::invalid_argument("weighted loss requires a class weight state");
        return config.weighting == Weighting::voxel ? voxel_weighted_loss(batch, *state, config)
                                                    : slice_weighted_loss(batch, *state, config);
    }
    throw std::logic_error("unhandled weighting");
}

}  // namespace adaseg
