#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "adaseg/data.hpp"
#include "adaseg/losses.hpp"
#include "adaseg/metrics.hpp"
#include "adaseg/model.hpp"

namespace adaseg {

// ---------------------------------------------------------------------------
// Optimizers

enum class OptimizerKind { sgd_momentum, rmsprop, adam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view text);

/// First-order update rules with per-parameter state.
///
///   sgd_momentum  v <- 0.9 v - lr g;  p <- p + v
///   rmsprop       s <- 0.9 s + 0.1 g^2;  p <- p - lr g / sqrt(s + 1e-7)
///   adam          bias-corrected moments, beta1 0.9, beta2 0.999, eps 1e-7
class Optimizer {
public:
    Optimizer() = default;
    Optimizer(OptimizerKind kind, double learning_rate);

    /// Applies one update from the accumulated gradients. State is keyed by
    /// position; a parameter whose size changed starts from fresh state.
    void step(const std::vector<nn::Parameter*>& params);
    void reset();

    [[nodiscard]] OptimizerKind kind() const noexcept { return kind_; }
    [[nodiscard]] double learning_rate() const noexcept { return lr_; }
    [[nodiscard]] std::size_t steps() const noexcept { return t_; }

private:
    OptimizerKind kind_ = OptimizerKind::adam;
    double lr_ = 1e-3;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> first_, second_;
};

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    OptimizerKind optimizer = OptimizerKind::adam;
    double learning_rate = 1e-3;  // 10^gamma, gamma in [-6, -1]
    std::size_t batch_size = 8;   // [1, 128]
    int epochs = 20;              // at most 120; desk-scale runs may go below 10
    LossConfig loss;
    std::uint64_t seed = 0;
    int eval_every = 1;

    void validate() const;
};

struct CurveRow {
    int epoch = 0;
    double loss = 0.0;                       // mean training loss of supervised batches
    std::vector<std::optional<double>> dsc;  // per curve structure; empty before it joined
};

struct LearningCurve {
    std::vector<std::string> structures;
    std::vector<CurveRow> rows;
    /// First epoch at which the last structure was trained.
    std::optional<int> epoch_added;

    void append(const LearningCurve& later);
    void write_csv(std::ostream& out) const;
    /// Infers epoch_added from the first non-empty entry of a column that
    /// starts empty.
    static LearningCurve read_csv(std::istream& in);
};

/// Per-structure validation DSC: thresholded at 0.5, mean over the slices of
/// `split` where that structure is annotated. nullopt when none is.
std::vector<std::optional<double>> validation_dsc(const Model& model, const Dataset& dataset,
                                                  Split split = Split::validation);

/// Trains `model` on the train split with the configured loss. Dataset
/// structures are matched to model outputs by name; train slices without any
/// annotation for the model's structures are skipped. Curve epochs are
/// numbered from `first_epoch`.
LearningCurve train(Model& model, const Dataset& dataset, const TrainConfig& config, int first_epoch = 1);

/// Extends `model` with `structure`, then resumes training on `dataset`
/// (which must contain every model structure plus the new one) with a fresh
/// optimizer. The curve starts at `epoch_added`.
LearningCurve train_incremental(Model& model, const Dataset& dataset, const std::string& structure,
                                const TrainConfig& config, int epoch_added);

/// Default epoch at which the new structure joins: 80% of the total.
int default_epoch_added(int total_epochs);

// ---------------------------------------------------------------------------
// Inference and evaluation

/// Binary masks per sample of `split` (storage order) and per model structure.
std::vector<std::vector<Mask>> predict(const Model& model, const Dataset& dataset, Split split,
                                       double threshold = 0.5, std::size_t batch_size = 16);

/// One case per (patient, structure): slices where the structure is annotated
/// are stacked (in slice order) and compared with the thresholded prediction.
EvalReport evaluate(const Model& model, const Dataset& dataset, Split split, double threshold = 0.5);

// ---------------------------------------------------------------------------
// Semi-supervised pipeline

/// Fills every missing train-split mask with the thresholded prediction of the
/// teacher for that structure and flags it as pseudo. Teachers are matched
/// by structure name; each must predict exactly one structure.
Dataset pseudo_label(const std::vector<const Model*>& teachers, const Dataset& dataset, double threshold = 0.5);

struct SemiResult {
    std::vector<Model> teachers;
    Model student;
    Dataset labelled;
    LearningCurve student_curve;
    EvalReport report;
};

/// Teachers are single-structure models trained on each structure's
/// annotations; the student trains on the completed dataset with the plain
/// combined loss and is evaluated on the test split.
SemiResult train_semi(const ModelSpec& teacher_spec, const TrainConfig& teacher_config, const ModelSpec& student_spec,
                      const TrainConfig& student_config, const Dataset& dataset);

/// Dataset restricted to the named structures (in the given order).
Dataset select_structures(const Dataset& dataset, const std::vector<std::string>& structures);

// ---------------------------------------------------------------------------
// Random hyper-parameter search

struct TrialConfig {
    int depth = 3;
    int base_filters = 8;
    double dropout = 0.0;
    OptimizerKind optimizer = OptimizerKind::adam;
    double alpha = 0.5;
    std::size_t batch_size = 8;
    double log_lr = -3.0;
    int epochs = 10;

    [[nodiscard]] ModelSpec model_spec(std::size_t out_channels, std::size_t rows, std::size_t cols) const;
    /// Training settings; the loss settings other than alpha come from `base`.
    [[nodiscard]] TrainConfig train_config(const TrainConfig& base, std::uint64_t seed) const;
};

struct HPOSpace {
    std::vector<int> depths{3, 4, 5};
    std::vector<int> base_filters{8, 16, 32, 64};
    double dropout_min = 0.0, dropout_max = 0.6;
    std::vector<OptimizerKind> optimizers{OptimizerKind::sgd_momentum, OptimizerKind::rmsprop, OptimizerKind::adam};
    double alpha_min = 0.0, alpha_max = 1.0;
    std::size_t batch_min = 1, batch_max = 128;
    double log_lr_min = -6.0, log_lr_max = -1.0;
    int epochs_min = 10, epochs_max = 120;

    /// Throws std::invalid_argument for empty or out-of-range dimensions.
    void validate() const;
    [[nodiscard]] bool contains(const TrialConfig& trial) const;
};

TrialConfig sample_trial(const HPOSpace& space, std::mt19937_64& rng);

struct Trial {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    TrialConfig config;
    double objective = 0.0;
};

struct HPOResult {
    std::vector<Trial> trials;  // sorted by objective, best first; ties by index
    [[nodiscard]] const Trial& best() const { return trials.front(); }
    void write_csv(std::ostream& out) const;
};

/// Seed of trial `index`, independent of how many trials run before it.
std::uint64_t trial_seed(std::uint64_t seed, std::size_t index);

using Objective = std::function<double(const TrialConfig&, std::uint64_t trial_seed)>;
HPOResult random_search(const HPOSpace& space, std::size_t budget, std::uint64_t seed, const Objective& objective);

/// Mean validation DSC over structures of a model trained with `trial`.
double validation_objective(const Dataset& dataset, const TrialConfig& trial, const TrainConfig& base,
                            std::uint64_t seed);

}  // namespace adaseg
