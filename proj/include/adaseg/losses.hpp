#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace adaseg {

/// `binary` is the full two-term cross-entropy averaged over pixels;
/// `literal` is the summed single-term form -sum I*log(p).
enum class CeMode { binary, literal };

enum class Weighting { none, voxel, slice };

/// How bias-corrected class statistics become loss weights.
///   identity   w_k = m_k                  (statistic used as printed)
///   inverse    w_k = min_j m_j / m_k      (rarest class weighted 1)
///   complement w_k = max(1 - m_k, floor)
enum class WeightTransform { identity, inverse, complement };

std::string_view to_string(CeMode mode);
std::string_view to_string(Weighting weighting);
std::string_view to_string(WeightTransform transform);
CeMode parse_ce_mode(std::string_view text);
Weighting parse_weighting(std::string_view text);
WeightTransform parse_weight_transform(std::string_view text);

struct LossConfig {
    double alpha = 0.5;       // DSC share of the combined loss
    double epsilon = 1e-5;    // soft-DSC smoothing
    CeMode ce_mode = CeMode::binary;
    Weighting weighting = Weighting::none;
    WeightTransform transform = WeightTransform::inverse;
    double beta = 0.99;       // EWA decay of the class statistics
    double prob_clamp = 1e-7; // probabilities clamped to [c, 1-c] before logs

    void validate() const;
};

inline constexpr double kWeightFloor = 1e-6;

// ---------------------------------------------------------------------------
// Per-mask losses. Each takes an optional gradient buffer of the same length
// as `pred`; when non-empty it receives dLoss/dpred (overwritten).

double soft_dsc_loss(std::span<const std::uint8_t> truth, std::span<const double> pred, double epsilon,
                     std::span<double> grad = {});

double ce_loss(std::span<const std::uint8_t> truth, std::span<const double> pred, CeMode mode, double clamp,
               std::span<double> grad = {});

/// alpha * soft DSC + (1 - alpha) * CE.
double combined_loss(std::span<const std::uint8_t> truth, std::span<const double> pred, const LossConfig& config,
                     std::span<double> grad = {});

// ---------------------------------------------------------------------------
// Mini-batch losses over partially annotated slices.

struct SliceKey {
    std::string patient_id;
    int slice_index = 0;
};

/// Predictions for a mini-batch, laid out slice-major then structure then pixel.
struct BatchPrediction {
    std::size_t slices = 0;
    std::size_t structures = 0;
    std::size_t pixels = 0;
    std::vector<SliceKey> keys;
    /// slices*structures*pixels probabilities in [0,1].
    std::vector<double> probabilities;
    /// slices*structures binary masks; empty where the annotation is missing.
    std::vector<std::vector<std::uint8_t>> truths;

    BatchPrediction() = default;
    BatchPrediction(std::size_t n, std::size_t k, std::size_t p);

    [[nodiscard]] bool available(std::size_t slice, std::size_t k) const
    {
        return !truths[slice * structures + k].empty();
    }
    [[nodiscard]] std::span<const double> pred(std::size_t slice, std::size_t k) const
    {
        return std::span<const double>(probabilities).subspan((slice * structures + k) * pixels, pixels);
    }
    [[nodiscard]] std::span<double> pred(std::size_t slice, std::size_t k)
    {
        return std::span<double>(probabilities).subspan((slice * structures + k) * pixels, pixels);
    }
    [[nodiscard]] std::span<const std::uint8_t> truth(std::size_t slice, std::size_t k) const
    {
        return truths[slice * structures + k];
    }
    void set_truth(std::size_t slice, std::size_t k, std::vector<std::uint8_t> mask);

    /// Throws std::invalid_argument on inconsistent sizes or out-of-range values.
    void validate() const;
};

struct BatchLoss {
    double value = 0.0;
    /// dLoss/dprobabilities, same layout as BatchPrediction::probabilities.
    std::vector<double> gradient;
    /// Set when no (slice, structure) pair in the batch was annotated.
    bool no_supervision = false;
    /// Per-structure weights that were applied (all 1 for the unweighted loss).
    std::vector<double> weights;
};

/// Combined loss averaged over the annotated (slice, structure) pairs only.
BatchLoss data_adaptive_loss(const BatchPrediction& batch, const LossConfig& config);

/// Class-weighted variant: sum_k w_k sum_s avail*L / sum_k w_k sum_s avail.
BatchLoss class_weighted_loss(const BatchPrediction& batch, std::span<const double> weights,
                              const LossConfig& config);

/// Bias-corrected exponentially weighted class statistics.
///
/// Each class keeps its own step counter, so a class that has never been
/// observed is not corrected towards zero.
class ClassWeightState {
public:
    ClassWeightState() = default;
    ClassWeightState(std::size_t classes, double beta);

    /// raw <- beta*raw + (1-beta)*obs for classes flagged in `observed`
    /// (all classes when empty). Returns the corrected statistics.
    std::vector<double> update(std::span<const double> observation, std::span<const std::uint8_t> observed = {});

    /// raw/(1-beta^step) clamped into [kWeightFloor, 1]; 1 for unobserved classes.
    [[nodiscard]] std::vector<double> corrected() const;

    [[nodiscard]] std::size_t classes() const noexcept { return raw_.size(); }
    [[nodiscard]] double beta() const noexcept { return beta_; }
    [[nodiscard]] std::span<const double> raw() const noexcept { return raw_; }
    [[nodiscard]] std::span<const std::size_t> steps() const noexcept { return steps_; }

    /// Appends a class (used when a model gains an output channel).
    void add_class();

private:
    std::vector<double> raw_;
    std::vector<std::size_t> steps_;
    double beta_ = 0.99;
};

struct ClassObservation {
    std::vector<double> value;
    std::vector<std::uint8_t> observed;
};

/// Fraction of positive voxels among the annotated masks of each class.
ClassObservation voxel_frequencies(const BatchPrediction& batch);
/// Fraction of annotated slices whose mask of each class is non-empty.
ClassObservation positive_slice_frequencies(const BatchPrediction& batch);

/// Maps corrected statistics to loss weights. Classes never observed get 1.
std::vector<double> transform_weights(std::span<const double> corrected, std::span<const std::size_t> steps,
                                      WeightTransform transform);

/// Updates `mu` with this batch's voxel frequencies, then evaluates the weighted loss.
BatchLoss voxel_weighted_loss(const BatchPrediction& batch, ClassWeightState& mu, const LossConfig& config);
/// Updates `gamma` with this batch's positive-slice frequencies, then evaluates the weighted loss.
BatchLoss slice_weighted_loss(const BatchPrediction& batch, ClassWeightState& gamma, const LossConfig& config);

/// Dispatches on config.weighting; `state` is required for the weighted modes.
BatchLoss batch_loss(const BatchPrediction& batch, const LossConfig& config, ClassWeightState* state);

}  // namespace adaseg
