#include "adaseg/training.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "csv_util.hpp"

namespace adaseg {

std::string_view to_string(OptimizerKind kind)
{
    switch (kind) {
    case OptimizerKind::sgd_momentum: return "sgd_momentum";
    case OptimizerKind::rmsprop: return "rmsprop";
    case OptimizerKind::adam: return "adam";
    }
    return "?";
}

OptimizerKind parse_optimizer(std::string_view text)
{
    if (text == "sgd_momentum" || text == "sgd") return OptimizerKind::sgd_momentum;
    if (text == "rmsprop" || text == "rms") return OptimizerKind::rmsprop;
    if (text == "adam") return OptimizerKind::adam;
    throw std::invalid_argument("unknown optimizer '" + std::string(text) + "'");
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate) : kind_(kind), lr_(learning_rate)
{
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
}

void Optimizer::reset()
{
    t_ = 0;
    first_.clear();
    second_.clear();
}

void Optimizer::step(const std::vector<nn::Parameter*>& params)
{
    constexpr double momentum = 0.9, rho = 0.9, rms_eps = 1e-7;
    constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-7;
    if (first_.size() < params.size()) {
        first_.resize(params.size());
        second_.resize(params.size());
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (std::size_t j = 0; j < params.size(); ++j) {
        auto& p = *params[j];
        auto& m = first_[j];
        auto& v = second_[j];
        if (m.size() != p.size()) {
            m.assign(p.size(), 0.0);
            v.assign(p.size(), 0.0);
        }
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double g = p.grad[i];
            double value = p.value[i];
            switch (kind_) {
            case OptimizerKind::sgd_momentum:
                m[i] = momentum * m[i] - lr_ * g;
                value += m[i];
                break;
            case OptimizerKind::rmsprop:
                v[i] = rho * v[i] + (1.0 - rho) * g * g;
                value -= lr_ * g / std::sqrt(v[i] + rms_eps);
                break;
            case OptimizerKind::adam:
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                value -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + adam_eps);
                break;
            }
            p.value[i] = static_cast<float>(value);
        }
    }
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const
{
    if (!(learning_rate >= 1e-6 * (1 - 1e-12) && learning_rate <= 1e-1 * (1 + 1e-12))) {
        throw std::invalid_argument("learning rate must lie in [1e-6, 1e-1]");
    }
    if (batch_size < 1 || batch_size > 128) throw std::invalid_argument("batch size must lie in [1, 128]");
    if (epochs < 1 || epochs > 120) throw std::invalid_argument("epochs must lie in [1, 120]");
    if (eval_every < 1) throw std::invalid_argument("eval_every must be at least 1");
    loss.validate();
}

int default_epoch_added(int total_epochs)
{
    return std::max(1, static_cast<int>(std::lround(0.8 * total_epochs)));
}

// ---------------------------------------------------------------------------
// Learning curves

void LearningCurve::append(const LearningCurve& later)
{
    if (structures.empty() && rows.empty()) {
        *this = later;
        return;
    }
    // Earlier structures must be a prefix of the later ones.
    if (later.structures.size() < structures.size() ||
        !std::equal(structures.begin(), structures.end(), later.structures.begin())) {
        throw std::invalid_argument("appended curve does not extend the structure list");
    }
    for (auto& row : rows) row.dsc.resize(later.structures.size());
    structures = later.structures;
    rows.insert(rows.end(), later.rows.begin(), later.rows.end());
    if (later.epoch_added) epoch_added = later.epoch_added;
}

void LearningCurve::write_csv(std::ostream& out) const
{
    out << "epoch,loss";
    for (const auto& s : structures) out << ",dsc_" << s;
    out << "\n";
    for (const auto& row : rows) {
        out << row.epoch << "," << csv::format_value(row.loss);
        for (std::size_t k = 0; k < structures.size(); ++k) {
            out << "," << (k < row.dsc.size() ? csv::format_value(row.dsc[k]) : std::string());
        }
        out << "\n";
    }
}

LearningCurve LearningCurve::read_csv(std::istream& in)
{
    LearningCurve curve;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("learning curve CSV is empty");
    const auto header = csv::split_line(line);
    if (header.size() < 2 || header[0] != "epoch" || header[1] != "loss") {
        throw std::runtime_error("learning curve CSV has an unexpected header: " + line);
    }
    for (std::size_t i = 2; i < header.size(); ++i) {
        if (header[i].rfind("dsc_", 0) != 0) throw std::runtime_error("unexpected curve column '" + header[i] + "'");
        curve.structures.push_back(header[i].substr(4));
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = csv::split_line(line);
        if (cells.size() != header.size()) throw std::runtime_error("malformed curve row: " + line);
        CurveRow row;
        row.epoch = static_cast<int>(csv::parse_double(cells[0]));
        row.loss = csv::parse_double(cells[1]);
        for (std::size_t i = 2; i < cells.size(); ++i) row.dsc.push_back(csv::parse_optional(cells[i]));
        curve.rows.push_back(std::move(row));
    }
    if (!curve.rows.empty() && !curve.structures.empty()) {
        const std::size_t last = curve.structures.size() - 1;
        if (!curve.rows.front().dsc[last]) {
            for (const auto& row : curve.rows) {
                if (row.dsc[last]) {
                    curve.epoch_added = row.epoch;
                    break;
                }
            }
        }
    }
    return curve;
}

// ---------------------------------------------------------------------------

namespace {

/// Dataset structure index of every model output.
std::vector<std::size_t> channel_map(const Model& model, const Dataset& dataset)
{
    std::vector<std::size_t> map;
    for (const auto& name : model.structures()) {
        const auto k = dataset.find_structure(name);
        if (!k) {
            throw std::invalid_argument("dataset '" + dataset.name + "' has no structure '" + name +
                                        "' predicted by the model");
        }
        map.push_back(*k);
    }
    return map;
}

Tensor images_of(const Dataset& dataset, const std::vector<std::size_t>& indices)
{
    std::vector<const Image*> images;
    images.reserve(indices.size());
    for (auto i : indices) images.push_back(&dataset.samples[i].image);
    return stack_images(images);
}

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Runs inference over `indices` in chunks and hands each chunk's
/// probabilities to `sink(first position, probabilities)`.
template <class Sink>
void infer_chunks(const Model& model, const Dataset& dataset, const std::vector<std::size_t>& indices,
                  std::size_t batch_size, Sink sink)
{
    for (std::size_t start = 0; start < indices.size(); start += batch_size) {
        const std::size_t end = std::min(indices.size(), start + batch_size);
        const std::vector<std::size_t> chunk(indices.begin() + static_cast<std::ptrdiff_t>(start),
                                             indices.begin() + static_cast<std::ptrdiff_t>(end));
        sink(start, model.infer(images_of(dataset, chunk)));
    }
}

Mask threshold_plane(const Probabilities& p, std::size_t n, std::size_t k, double threshold)
{
    const auto& s = p.shape();
    Mask m(s.h, s.w);
    const double* src = p.plane(n, k);
    auto dst = m.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i] >= threshold ? 1 : 0;
    return m;
}

}  // namespace

std::vector<std::optional<double>> validation_dsc(const Model& model, const Dataset& dataset, Split split)
{
    const auto map = channel_map(model, dataset);
    const std::size_t K = map.size();
    std::vector<std::size_t> indices;
    for (auto i : dataset.split_indices(split)) {
        const auto& s = dataset.samples[i];
        if (std::any_of(map.begin(), map.end(), [&](std::size_t d) { return s.available(d); })) indices.push_back(i);
    }
    std::vector<double> sum(K, 0.0);
    std::vector<std::size_t> count(K, 0);
    infer_chunks(model, dataset, indices, 16, [&](std::size_t first, const Probabilities& p) {
        for (std::size_t n = 0; n < p.shape().n; ++n) {
            const auto& sample = dataset.samples[indices[first + n]];
            for (std::size_t k = 0; k < K; ++k) {
                if (!sample.available(map[k])) continue;
                sum[k] += dsc(BinaryVolume(*sample.masks[map[k]]), BinaryVolume(threshold_plane(p, n, k, 0.5)));
                ++count[k];
            }
        }
    });
    std::vector<std::optional<double>> out(K);
    for (std::size_t k = 0; k < K; ++k) {
        if (count[k] > 0) out[k] = sum[k] / static_cast<double>(count[k]);
    }
    return out;
}

LearningCurve train(Model& model, const Dataset& dataset, const TrainConfig& config, int first_epoch)
{
    config.validate();
    const auto map = channel_map(model, dataset);
    const std::size_t K = map.size();
    if (model.spec().rows != dataset.rows || model.spec().cols != dataset.cols) {
        throw std::invalid_argument("model input size does not match the dataset image size");
    }
    std::vector<std::size_t> pool;
    for (auto i : dataset.split_indices(Split::train)) {
        const auto& s = dataset.samples[i];
        if (std::any_of(map.begin(), map.end(), [&](std::size_t d) { return s.available(d); })) pool.push_back(i);
    }
    if (pool.empty()) throw std::invalid_argument("training split has no annotated slice for the model's structures");

    std::mt19937_64 rng(splitmix64(config.seed));
    model.seed_dropout(splitmix64(config.seed ^ 0xD1B54A32D192ED03ull));
    Optimizer optimizer(config.optimizer, config.learning_rate);
    ClassWeightState weights(K, config.loss.beta);
    const std::size_t pixels = dataset.rows * dataset.cols;

    LearningCurve curve;
    curve.structures = model.structures();
    for (int e = 0; e < config.epochs; ++e) {
        std::shuffle(pool.begin(), pool.end(), rng);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < pool.size(); start += config.batch_size) {
            const std::size_t end = std::min(pool.size(), start + config.batch_size);
            const std::vector<std::size_t> idx(pool.begin() + static_cast<std::ptrdiff_t>(start),
                                               pool.begin() + static_cast<std::ptrdiff_t>(end));
            const auto probs = model.forward(images_of(dataset, idx), Mode::train);

            BatchPrediction batch(idx.size(), K, pixels);
            std::copy(probs.values().begin(), probs.values().end(), batch.probabilities.begin());
            for (std::size_t n = 0; n < idx.size(); ++n) {
                const auto& sample = dataset.samples[idx[n]];
                batch.keys[n] = {sample.patient_id, sample.slice_index};
                for (std::size_t k = 0; k < K; ++k) {
                    if (!sample.available(map[k])) continue;
                    const auto v = sample.masks[map[k]]->values();
                    batch.set_truth(n, k, std::vector<std::uint8_t>(v.begin(), v.end()));
                }
            }
            const auto loss = batch_loss(batch, config.loss, &weights);
            if (loss.no_supervision) continue;
            if (!std::isfinite(loss.value)) {
                throw std::runtime_error("training loss became non-finite at epoch " + std::to_string(first_epoch + e));
            }
            Probabilities grad(probs.shape());
            std::copy(loss.gradient.begin(), loss.gradient.end(), grad.values().begin());
            model.zero_grad();
            model.backward(grad);
            optimizer.step(model.trainable_parameters());
            loss_sum += loss.value;
            ++batches;
        }
        CurveRow row;
        row.epoch = first_epoch + e;
        row.loss = batches > 0 ? loss_sum / static_cast<double>(batches) : 0.0;
        if ((e + 1) % config.eval_every == 0 || e + 1 == config.epochs) {
            row.dsc = validation_dsc(model, dataset, Split::validation);
        } else {
            row.dsc.assign(K, std::nullopt);
        }
        curve.rows.push_back(std::move(row));
    }
    return curve;
}

LearningCurve train_incremental(Model& model, const Dataset& dataset, const std::string& structure,
                                const TrainConfig& config, int epoch_added)
{
    if (!dataset.find_structure(structure)) {
        throw std::invalid_argument("dataset has no annotations for new structure '" + structure + "'");
    }
    if (epoch_added < 1) throw std::invalid_argument("epoch_added must be at least 1");
    if (dataset.structure_count() != model.structures().size() + 1) {
        throw std::invalid_argument("incremental dataset must hold exactly one structure more than the model");
    }
    model.extend_output(structure, splitmix64(config.seed ^ 0x8CB92BA72F3D8DD7ull));
    auto curve = train(model, dataset, config, epoch_added);
    curve.epoch_added = epoch_added;
    return curve;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<Mask>> predict(const Model& model, const Dataset& dataset, Split split, double threshold,
                                       std::size_t batch_size)
{
    const auto indices = dataset.split_indices(split);
    const std::size_t K = model.structures().size();
    std::vector<std::vector<Mask>> out(indices.size());
    infer_chunks(model, dataset, indices, std::max<std::size_t>(1, batch_size),
                 [&](std::size_t first, const Probabilities& p) {
                     for (std::size_t n = 0; n < p.shape().n; ++n) {
                         for (std::size_t k = 0; k < K; ++k) out[first + n].push_back(threshold_plane(p, n, k, threshold));
                     }
                 });
    return out;
}

EvalReport evaluate(const Model& model, const Dataset& dataset, Split split, double threshold)
{
    const auto map = channel_map(model, dataset);
    const auto indices = dataset.split_indices(split);
    const auto masks = predict(model, dataset, split, threshold);
    std::vector<CaseMetrics> cases;
    for (std::size_t k = 0; k < map.size(); ++k) {
        for (const auto& patient : dataset.patients(split)) {
            std::vector<std::pair<int, std::size_t>> slices;  // (slice index, position)
            for (std::size_t j = 0; j < indices.size(); ++j) {
                const auto& s = dataset.samples[indices[j]];
                if (s.patient_id == patient && s.available(map[k])) slices.emplace_back(s.slice_index, j);
            }
            if (slices.empty()) continue;
            std::sort(slices.begin(), slices.end());
            std::vector<Mask> truth, pred;
            for (const auto& [slice, j] : slices) {
                truth.push_back(*dataset.samples[indices[j]].masks[map[k]]);
                pred.push_back(masks[j][k]);
            }
            auto c = evaluate_case(BinaryVolume::stack(truth), BinaryVolume::stack(pred));
            c.patient_id = patient;
            c.structure = model.structures()[k];
            cases.push_back(std::move(c));
        }
    }
    return aggregate(std::move(cases));
}

// ---------------------------------------------------------------------------

Dataset pseudo_label(const std::vector<const Model*>& teachers, const Dataset& dataset, double threshold)
{
    Dataset out = dataset;
    const std::size_t K = dataset.structure_count();
    std::vector<const Model*> by_structure(K, nullptr);
    for (const auto* t : teachers) {
        if (t->structures().size() != 1) throw std::invalid_argument("teacher models must predict one structure");
        const auto k = dataset.find_structure(t->structures().front());
        if (!k) throw std::invalid_argument("teacher structure '" + t->structures().front() + "' is not in the dataset");
        if (by_structure[*k]) throw std::invalid_argument("two teachers for structure '" + dataset.structures[*k] + "'");
        by_structure[*k] = t;
    }
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<std::size_t> missing;
        for (auto i : dataset.split_indices(Split::train)) {
            if (!dataset.samples[i].available(k)) missing.push_back(i);
        }
        if (missing.empty()) continue;
        if (!by_structure[k]) throw std::invalid_argument("no teacher for structure '" + dataset.structures[k] + "'");
        infer_chunks(*by_structure[k], dataset, missing, 16, [&](std::size_t first, const Probabilities& p) {
            for (std::size_t n = 0; n < p.shape().n; ++n) {
                auto& sample = out.samples[missing[first + n]];
                sample.masks[k] = threshold_plane(p, n, 0, threshold);
                if (sample.pseudo.size() != K) sample.pseudo.assign(K, 0);
                sample.pseudo[k] = 1;
            }
        });
    }
    return out;
}

SemiResult train_semi(const ModelSpec& teacher_spec, const TrainConfig& teacher_config, const ModelSpec& student_spec,
                      const TrainConfig& student_config, const Dataset& dataset)
{
    SemiResult result;
    std::vector<const Model*> needed;
    for (std::size_t k = 0; k < dataset.structure_count(); ++k) {
        const auto train_idx = dataset.split_indices(Split::train);
        const bool complete = std::all_of(train_idx.begin(), train_idx.end(),
                                          [&](std::size_t i) { return dataset.samples[i].available(k); });
        if (complete) continue;  // nothing to fill, no teacher needed
        ModelSpec spec = teacher_spec;
        spec.out_channels = 1;
        TrainConfig cfg = teacher_config;
        cfg.seed = splitmix64(teacher_config.seed + k);
        cfg.loss.weighting = Weighting::none;
        result.teachers.push_back(Model::build(spec, {dataset.structures[k]}, cfg.seed));
        (void)train(result.teachers.back(), dataset, cfg);
    }
    for (const auto& t : result.teachers) needed.push_back(&t);
    result.labelled = pseudo_label(needed, dataset);

    ModelSpec spec = student_spec;
    spec.out_channels = dataset.structure_count();
    TrainConfig cfg = student_config;
    cfg.loss.weighting = Weighting::none;
    result.student = Model::build(spec, dataset.structures, cfg.seed);
    result.student_curve = train(result.student, result.labelled, cfg);
    result.report = evaluate(result.student, result.labelled, Split::test);
    return result;
}

Dataset select_structures(const Dataset& dataset, const std::vector<std::string>& structures)
{
    std::vector<std::size_t> keep;
    for (const auto& name : structures) keep.push_back(dataset.structure_index(name));
    Dataset out;
    out.name = dataset.name;
    out.structures = structures;
    out.rows = dataset.rows;
    out.cols = dataset.cols;
    for (const auto& s : dataset.samples) {
        SliceSample t;
        t.patient_id = s.patient_id;
        t.slice_index = s.slice_index;
        t.split = s.split;
        t.image = s.image;
        bool any_pseudo = false;
        for (auto k : keep) {
            t.masks.push_back(s.masks[k]);
            t.pseudo.push_back(s.pseudo.empty() ? 0 : s.pseudo[k]);
            any_pseudo = any_pseudo || t.pseudo.back();
        }
        if (!any_pseudo) t.pseudo.clear();
        out.samples.push_back(std::move(t));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Random search

ModelSpec TrialConfig::model_spec(std::size_t out_channels, std::size_t rows, std::size_t cols) const
{
    return ModelSpec{depth, base_filters, dropout, out_channels, rows, cols};
}

TrainConfig TrialConfig::train_config(const TrainConfig& base, std::uint64_t seed) const
{
    TrainConfig cfg = base;
    cfg.optimizer = optimizer;
    cfg.learning_rate = std::pow(10.0, log_lr);
    cfg.batch_size = batch_size;
    cfg.epochs = epochs;
    cfg.loss.alpha = alpha;
    cfg.seed = seed;
    return cfg;
}

void HPOSpace::validate() const
{
    if (depths.empty() || base_filters.empty() || optimizers.empty()) {
        throw std::invalid_argument("hyper-parameter space has an empty dimension");
    }
    for (int d : depths) {
        if (d < 3 || d > 5) throw std::invalid_argument("search depth outside {3,4,5}");
    }
    for (int f : base_filters) {
        if (f != 8 && f != 16 && f != 32 && f != 64) throw std::invalid_argument("search base filters outside {8,16,32,64}");
    }
    auto range = [](double lo, double hi, double min, double max, const char* what) {
        if (!(lo <= hi && lo >= min && hi <= max)) throw std::invalid_argument(std::string("invalid search range for ") + what);
    };
    range(dropout_min, dropout_max, 0.0, 0.75, "dropout");
    range(alpha_min, alpha_max, 0.0, 1.0, "alpha");
    range(static_cast<double>(batch_min), static_cast<double>(batch_max), 1, 128, "batch size");
    range(log_lr_min, log_lr_max, -6.0, -1.0, "log10 learning rate");
    range(epochs_min, epochs_max, 1, 120, "epochs");
}

bool HPOSpace::contains(const TrialConfig& t) const
{
    return std::find(depths.begin(), depths.end(), t.depth) != depths.end() &&
           std::find(base_filters.begin(), base_filters.end(), t.base_filters) != base_filters.end() &&
           t.dropout >= dropout_min && t.dropout <= dropout_max &&
           std::find(optimizers.begin(), optimizers.end(), t.optimizer) != optimizers.end() && t.alpha >= alpha_min &&
           t.alpha <= alpha_max && t.batch_size >= batch_min && t.batch_size <= batch_max && t.log_lr >= log_lr_min &&
           t.log_lr <= log_lr_max && t.epochs >= epochs_min && t.epochs <= epochs_max;
}

TrialConfig sample_trial(const HPOSpace& space, std::mt19937_64& rng)
{
    space.validate();
    auto pick = [&](const auto& values) {
        return values[std::uniform_int_distribution<std::size_t>(0, values.size() - 1)(rng)];
    };
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * std::generate_canonical<double, 53>(rng); };
    TrialConfig t;
    t.depth = pick(space.depths);
    t.base_filters = pick(space.base_filters);
    t.dropout = uniform(space.dropout_min, space.dropout_max);
    t.optimizer = pick(space.optimizers);
    t.alpha = uniform(space.alpha_min, space.alpha_max);
    t.batch_size = std::uniform_int_distribution<std::size_t>(space.batch_min, space.batch_max)(rng);
    t.log_lr = uniform(space.log_lr_min, space.log_lr_max);
    t.epochs = std::uniform_int_distribution<int>(space.epochs_min, space.epochs_max)(rng);
    return t;
}

std::uint64_t trial_seed(std::uint64_t seed, std::size_t index)
{
    return splitmix64(splitmix64(seed) + index);
}

HPOResult random_search(const HPOSpace& space, std::size_t budget, std::uint64_t seed, const Objective& objective)
{
    space.validate();
    if (budget < 1) throw std::invalid_argument("search budget must be at least 1");
    HPOResult result;
    for (std::size_t i = 0; i < budget; ++i) {
        Trial t;
        t.index = i;
        t.seed = trial_seed(seed, i);
        std::mt19937_64 rng(t.seed);
        t.config = sample_trial(space, rng);
        t.objective = objective(t.config, t.seed);
        if (!std::isfinite(t.objective)) t.objective = -std::numeric_limits<double>::infinity();
        result.trials.push_back(t);
    }
    std::stable_sort(result.trials.begin(), result.trials.end(),
                     [](const Trial& a, const Trial& b) { return a.objective > b.objective; });
    return result;
}

void HPOResult::write_csv(std::ostream& out) const
{
    out << "trial,seed,depth,base_filters,dropout,optimizer,alpha,batch_size,log_lr,epochs,objective\n";
    for (const auto& t : trials) {
        const auto& c = t.config;
        out << t.index << "," << t.seed << "," << c.depth << "," << c.base_filters << ","
            << csv::format_value(c.dropout) << "," << to_string(c.optimizer) << "," << csv::format_value(c.alpha)
            << "," << c.batch_size << "," << csv::format_value(c.log_lr) << "," << c.epochs << ","
            << csv::format_value(t.objective) << "\n";
    }
}

double validation_objective(const Dataset& dataset, const TrialConfig& trial, const TrainConfig& base,
                            std::uint64_t seed)
{
    auto model = Model::build(trial.model_spec(dataset.structure_count(), dataset.rows, dataset.cols),
                              dataset.structures, seed);
    (void)train(model, dataset, trial.train_config(base, seed));
    const auto scores = validation_dsc(model, dataset, Split::validation);
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : scores) {
        if (s) {
            sum += *s;
            ++n;
        }
    }
    return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace adaseg
