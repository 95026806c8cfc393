// Command-line front end: dataset synthesis, training of every method
// variant, evaluation, statistics and plots.

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "adaseg/data.hpp"
#include "adaseg/metrics.hpp"
#include "adaseg/model.hpp"
#include "adaseg/plot.hpp"
#include "adaseg/stats.hpp"
#include "adaseg/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace adaseg;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

/// Errors in user input that CLI11 cannot see (bad combinations, ranges).
struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Options backed by an optional JSON config. Config values replace the
// built-in defaults before parsing, so explicit flags still win.

template <class T>
inline constexpr bool is_vector = false;
template <class T>
inline constexpr bool is_vector<std::vector<T>> = true;

class Options {
public:
    Options(CLI::App* app, const json& config) : app_(app), config_(config) {}

    template <class T>
    CLI::Option* add(const std::string& name, T& var, const std::string& help)
    {
        if (config_.contains(name)) {
            try {
                var = config_.at(name).get<T>();
            } catch (const json::exception& e) {
                throw UsageError("config entry '" + name + "': " + e.what());
            }
        }
        recorders_.emplace_back([name, &var](json& out) { out[name] = var; });
        auto* opt = app_->add_option("--" + name, var, help)->capture_default_str();
        if constexpr (is_vector<T>) opt->delimiter(',');
        return opt;
    }

    /// Required unless the config file supplies it.
    template <class T>
    CLI::Option* require(const std::string& name, T& var, const std::string& help)
    {
        auto* opt = add(name, var, help);
        if (!config_.contains(name)) opt->required();
        return opt;
    }

    CLI::Option* flag(const std::string& name, bool& var, const std::string& help)
    {
        if (config_.contains(name)) var = config_.at(name).get<bool>();
        recorders_.emplace_back([name, &var](json& out) { out[name] = var; });
        return app_->add_flag("--" + name + ",!--no-" + name, var, help);
    }

    /// Effective value of every option after parsing.
    [[nodiscard]] json snapshot() const
    {
        json out = json::object();
        for (const auto& r : recorders_) r(out);
        return out;
    }

private:
    CLI::App* app_;
    const json& config_;
    std::vector<std::function<void(json&)>> recorders_;
};

// ---------------------------------------------------------------------------
// Run records

std::string git_blob_sha1(const fs::path& file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + file.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string blob = "blob " + std::to_string(bytes.size()) + std::string(1, '\0') + bytes;
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(blob.data(), blob.size(), digest, &len, EVP_sha1(), nullptr) != 1) {
        throw std::runtime_error("SHA-1 digest failed");
    }
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return hex.str();
}

std::string utc_now()
{
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

struct RunRecord {
    RunRecord(std::string command_name, json snapshot) : command(std::move(command_name)), config(std::move(snapshot)) {}

    std::string command;
    json config;
    std::optional<fs::path> manifest;
    std::map<std::string, std::uint64_t> seeds;
    std::vector<fs::path> artifacts;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    std::string started_at = utc_now();

    void write(const fs::path& path) const
    {
        json r;
        r["command"] = command;
        r["config"] = config;
        if (manifest) {
            r["dataset_manifest"] = manifest->string();
            r["manifest_sha1"] = git_blob_sha1(*manifest);
        }
        r["seeds"] = json::object();
        for (const auto& [k, v] : seeds) r["seeds"][k] = v;
        r["artifacts"] = json::array();
        for (const auto& a : artifacts) r["artifacts"].push_back(a.string());
        r["started_at"] = started_at;
        r["wall_clock_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
        std::ofstream out(path);
        out << r.dump(2) << "\n";
        if (!out) throw std::runtime_error("cannot write " + path.string());
    }
};

template <class Writer>
fs::path write_file(const fs::path& path, Writer writer)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    writer(out);
    if (!out) throw std::runtime_error("failed writing " + path.string());
    return path;
}

fs::path write_text(const fs::path& path, const std::string& text)
{
    return write_file(path, [&](std::ostream& o) { o << text; });
}

std::vector<std::string> split_names(const std::string& csv)
{
    std::vector<std::string> out;
    std::stringstream s(csv);
    std::string item;
    while (std::getline(s, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shared model / training options

struct ModelFlags {
    int depth = 3;
    int filters = 8;
    double dropout = 0.0;

    void add(Options& o)
    {
        o.add("depth", depth, "U-Net encoder levels (3-5)");
        o.add("filters", filters, "filters of the first level (8, 16, 32, 64)");
        o.add("dropout", dropout, "spatial dropout rate");
    }
    [[nodiscard]] ModelSpec spec(std::size_t out, const Dataset& ds) const
    {
        ModelSpec s{depth, filters, dropout, out, ds.rows, ds.cols};
        s.validate();
        return s;
    }
};

struct TrainFlags {
    std::string optimizer = "adam";
    double lr = 1e-3;
    std::size_t batch = 8;
    int epochs = 20;
    double alpha = 0.5;
    double epsilon = 1e-5;
    std::string ce_mode = "binary";
    std::string transform = "inverse";
    double beta = 0.99;
    std::uint64_t seed = 0;
    int eval_every = 1;

    void add(Options& o)
    {
        o.add("optimizer", optimizer, "sgd_momentum, rmsprop or adam");
        o.add("lr", lr, "learning rate");
        o.add("batch", batch, "mini-batch size");
        o.add("epochs", epochs, "training epochs");
        o.add("alpha", alpha, "DSC share of the combined loss");
        o.add("epsilon", epsilon, "soft-DSC smoothing");
        o.add("ce-mode", ce_mode, "binary or literal cross entropy");
        o.add("transform", transform, "class weight transform: identity, inverse, complement");
        o.add("beta", beta, "EWA decay of the class statistics");
        o.add("seed", seed, "seed for initialization, shuffling and dropout");
        o.add("eval-every", eval_every, "epochs between validation evaluations");
    }
    [[nodiscard]] TrainConfig config(Weighting weighting) const
    {
        TrainConfig c;
        c.optimizer = parse_optimizer(optimizer);
        c.learning_rate = lr;
        c.batch_size = batch;
        c.epochs = epochs;
        c.loss.alpha = alpha;
        c.loss.epsilon = epsilon;
        c.loss.ce_mode = parse_ce_mode(ce_mode);
        c.loss.weighting = weighting;
        c.loss.transform = parse_weight_transform(transform);
        c.loss.beta = beta;
        c.seed = seed;
        c.eval_every = eval_every;
        c.validate();
        return c;
    }
};

Weighting method_weighting(const std::string& method)
{
    if (method == "adaptive_voxel") return Weighting::voxel;
    if (method == "adaptive_slice") return Weighting::slice;
    return Weighting::none;
}

void print_curve_tail(const LearningCurve& curve)
{
    if (curve.rows.empty()) return;
    const auto& last = curve.rows.back();
    std::cout << "epoch " << last.epoch << "  loss " << last.loss;
    for (std::size_t k = 0; k < curve.structures.size(); ++k) {
        if (k < last.dsc.size() && last.dsc[k]) std::cout << "  dsc_" << curve.structures[k] << " " << *last.dsc[k];
    }
    std::cout << "\n";
}

void print_report(const EvalReport& report)
{
    for (const auto& s : report.structures) {
        std::cout << s.structure << ": " << s.cases << " cases";
        for (auto m : kAllMetrics) {
            const auto& sum = s.get(m);
            std::cout << "  " << to_string(m) << " ";
            if (sum.mean) {
                std::cout << *sum.mean;
            } else {
                std::cout << "n/a";
            }
        }
        std::cout << "\n";
    }
}

void save_curve(const LearningCurve& curve, const fs::path& out, RunRecord& rec, const std::string& stem = "curve")
{
    rec.artifacts.push_back(write_file(out / (stem + ".csv"), [&](std::ostream& o) { curve.write_csv(o); }));
    rec.artifacts.push_back(write_text(out / (stem + ".svg"), learning_curve_svg(curve, stem)));
}

void save_report(const EvalReport& report, const fs::path& out, RunRecord& rec)
{
    rec.artifacts.push_back(write_file(out / "report.csv", [&](std::ostream& o) { write_report_csv(o, report); }));
    rec.artifacts.push_back(write_file(out / "cases.csv", [&](std::ostream& o) { write_cases_csv(o, report); }));
}

// ---------------------------------------------------------------------------
// Commands. Each registers its options and returns the action to run.

using Action = std::function<void(const json& snapshot)>;

struct Command {
    CLI::App* app = nullptr;
    std::unique_ptr<Options> options;
    Action action;
};

Action register_synth(CLI::App* app, Options& o)
{
    struct State {
        std::string out, name = "synthetic", structures = "disk,ellipse,ring";
        std::vector<std::size_t> patients{30, 10, 10};
        std::vector<double> avail, slice_dropout;
        std::size_t size = 64, slices = 8;
        double noise = 0.05;
        std::uint64_t seed = 0;
        bool complete_eval = false;
    };
    auto s = std::make_shared<State>();
    o.require("out", s->out, "output dataset directory");
    o.add("name", s->name, "dataset name");
    o.add("structures", s->structures, "comma-separated shapes: disk, ellipse, ring, nested");
    o.add("patients", s->patients, "train,validation,test patient counts");
    o.add("avail", s->avail, "per-structure patient availability rates");
    o.add("slice-dropout", s->slice_dropout, "per-structure slice dropout rates for available patients");
    o.add("size", s->size, "image side length");
    o.add("slices", s->slices, "slices per patient");
    o.add("noise", s->noise, "image noise standard deviation");
    o.add("seed", s->seed, "generator seed");
    o.flag("complete-eval", s->complete_eval, "keep every mask in the validation and test splits");
    (void)app;
    return [s](const json& snapshot) {
        RunRecord rec{"synth", snapshot};
        SynthConfig c;
        c.name = s->name;
        c.structures = structures_from_kinds(s->structures);
        if (s->patients.size() != 3) throw UsageError("--patients needs three counts");
        c.patients = {s->patients[0], s->patients[1], s->patients[2]};
        c.availability_rate = s->avail;
        c.per_slice_dropout = s->slice_dropout;
        c.image_size = s->size;
        c.slices_per_patient = s->slices;
        c.noise_std = s->noise;
        c.seed = s->seed;
        c.complete_eval_splits = s->complete_eval;
        try {
            c.validate();
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        const auto ds = generate_synthetic(c);
        const fs::path out = s->out;
        write_dataset(ds, out);
        std::cout << format_availability_table(ds);
        rec.manifest = manifest_path(out);
        rec.seeds["synth"] = s->seed;
        rec.artifacts.push_back(*rec.manifest);
        rec.write(fs::path(out.string() + ".run.json"));
    };
}

Action register_train(CLI::App* app, Options& o)
{
    struct State {
        std::string data, out, method = "adaptive", structure, structures;
        ModelFlags model;
        TrainFlags train;
        std::string split = "test";
    };
    auto s = std::make_shared<State>();
    o.require("data", s->data, "dataset directory or manifest");
    o.require("out", s->out, "output directory");
    o.add("method", s->method, "single, adaptive, adaptive_voxel, adaptive_slice or semi")
        ->check(CLI::IsMember({"single", "adaptive", "adaptive_voxel", "adaptive_slice", "semi"}));
    o.add("structure", s->structure, "structure of a single model");
    o.add("structures", s->structures, "comma-separated subset of structures (default: all)");
    o.add("eval-split", s->split, "split evaluated by the semi-supervised pipeline");
    s->model.add(o);
    s->train.add(o);
    (void)app;
    return [s](const json& snapshot) {
        RunRecord rec{"train", snapshot};
        const auto weighting = method_weighting(s->method);
        const auto cfg = s->train.config(weighting);
        if (s->method == "single" && s->structure.empty()) throw UsageError("--method single requires --structure");
        if (s->method != "single" && !s->structure.empty()) throw UsageError("--structure is only valid with --method single");
        rec.manifest = manifest_path(s->data);
        auto ds = load_manifest(s->data);
        std::vector<std::string> names = ds.structures;
        if (s->method == "single") names = {s->structure};
        if (!s->structures.empty()) {
            if (s->method == "single") throw UsageError("--structures cannot be combined with --method single");
            names = split_names(s->structures);
        }
        for (const auto& n : names) {
            if (!ds.find_structure(n)) throw UsageError("dataset has no structure '" + n + "'");
        }
        rec.seeds["seed"] = cfg.seed;
        const fs::path out = s->out;

        if (s->method == "semi") {
            if (names != ds.structures) ds = select_structures(ds, names);
            auto result = train_semi(s->model.spec(1, ds), cfg, s->model.spec(ds.structure_count(), ds), cfg, ds);
            for (const auto& t : result.teachers) {
                const auto dir = out / "teachers" / t.structures().front();
                t.save(dir);
                rec.artifacts.push_back(dir);
            }
            write_dataset(result.labelled, out / "labelled");
            rec.artifacts.push_back(out / "labelled");
            result.student.save(out / "model");
            rec.artifacts.push_back(out / "model");
            save_curve(result.student_curve, out, rec);
            const auto report = evaluate(result.student, result.labelled, parse_split(s->split));
            save_report(report, out, rec);
            print_curve_tail(result.student_curve);
            print_report(report);
        } else {
            auto model = Model::build(s->model.spec(names.size(), ds), names, cfg.seed);
            const auto curve = train(model, ds, cfg);
            model.save(out / "model");
            rec.artifacts.push_back(out / "model");
            save_curve(curve, out, rec);
            print_curve_tail(curve);
        }
        rec.write(out / "run.json");
    };
}

Action register_incremental(CLI::App* app, Options& o)
{
    struct State {
        std::string model, data, out, structure, base_curve, method = "adaptive";
        int epoch_added = 0;
        TrainFlags train;
    };
    auto s = std::make_shared<State>();
    o.require("model", s->model, "checkpoint of the (K-1)-structure model");
    o.require("data", s->data, "dataset with all K structures");
    o.require("structure", s->structure, "structure to add");
    o.require("out", s->out, "output directory");
    o.add("base-curve", s->base_curve, "learning curve of the base model to continue");
    o.add("epoch-added", s->epoch_added, "epoch at which the structure joins (default: after the base curve)");
    o.add("method", s->method, "adaptive, adaptive_voxel or adaptive_slice")
        ->check(CLI::IsMember({"adaptive", "adaptive_voxel", "adaptive_slice"}));
    s->train.add(o);
    (void)app;
    return [s](const json& snapshot) {
        RunRecord rec{"incremental", snapshot};
        const auto cfg = s->train.config(method_weighting(s->method));
        rec.manifest = manifest_path(s->data);
        const auto ds = load_manifest(s->data);
        auto model = Model::load(s->model);
        if (!ds.find_structure(s->structure)) throw UsageError("dataset has no structure '" + s->structure + "'");

        LearningCurve curve;
        if (!s->base_curve.empty()) {
            std::ifstream in(s->base_curve);
            if (!in) throw std::runtime_error("cannot read " + s->base_curve);
            curve = LearningCurve::read_csv(in);
        }
        int epoch_added = s->epoch_added;
        if (epoch_added == 0) epoch_added = curve.rows.empty() ? 1 : curve.rows.back().epoch + 1;
        if (epoch_added < 1) throw UsageError("--epoch-added must be positive");

        // Restrict the dataset to the model's structures plus the new one, in channel order.
        auto names = model.structures();
        names.push_back(s->structure);
        for (const auto& n : names) {
            if (!ds.find_structure(n)) throw UsageError("dataset has no structure '" + n + "'");
        }
        const auto view = names == ds.structures ? ds : select_structures(ds, names);
        rec.seeds["seed"] = cfg.seed;
        const auto resumed = train_incremental(model, view, s->structure, cfg, epoch_added);
        curve.append(resumed);
        curve.epoch_added = epoch_added;
        const fs::path out = s->out;
        model.save(out / "model");
        rec.artifacts.push_back(out / "model");
        save_curve(curve, out, rec);
        print_curve_tail(curve);
        rec.write(out / "run.json");
    };
}

Action register_eval(CLI::App* app, Options& o)
{
    struct State {
        std::string model, data, out, split = "test";
        double threshold = 0.5;
    };
    auto s = std::make_shared<State>();
    o.require("model", s->model, "checkpoint directory");
    o.require("data", s->data, "dataset directory or manifest");
    o.require("out", s->out, "output directory");
    o.add("split", s->split, "train, validation or test");
    o.add("threshold", s->threshold, "probability threshold");
    (void)app;
    return [s](const json& snapshot) {
        RunRecord rec{"eval", snapshot};
        Split split;
        try {
            split = parse_split(s->split);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        if (!(s->threshold > 0.0 && s->threshold < 1.0)) throw UsageError("--threshold must lie in (0, 1)");
        rec.manifest = manifest_path(s->data);
        const auto ds = load_manifest(s->data);
        const auto model = Model::load(s->model);
        const auto report = evaluate(model, ds, split, s->threshold);
        save_report(report, s->out, rec);
        print_report(report);
        rec.write(fs::path(s->out) / "run.json");
    };
}

Action register_hpo(CLI::App* app, Options& o)
{
    struct State {
        std::string data, out, method = "adaptive", structure;
        std::size_t budget = 10;
        std::uint64_t seed = 0;
        std::vector<int> depths{3, 4, 5}, filters{8, 16, 32, 64};
        std::vector<std::string> optimizers{"sgd_momentum", "rmsprop", "adam"};
        double dropout_max = 0.6;
        std::size_t batch_max = 128;
        int epochs_min = 10, epochs_max = 120;
        double log_lr_min = -6, log_lr_max = -1;
        TrainFlags train;
    };
    auto s = std::make_shared<State>();
    o.require("data", s->data, "dataset directory or manifest");
    o.require("out", s->out, "output directory");
    o.add("method", s->method, "single, adaptive, adaptive_voxel or adaptive_slice")
        ->check(CLI::IsMember({"single", "adaptive", "adaptive_voxel", "adaptive_slice"}));
    o.add("structure", s->structure, "structure of a single model");
    o.add("budget", s->budget, "number of trials");
    o.add("seed", s->seed, "search seed");
    o.add("depths", s->depths, "candidate depths");
    o.add("filter-choices", s->filters, "candidate base filter counts");
    o.add("optimizers", s->optimizers, "candidate optimizers");
    o.add("dropout-max", s->dropout_max, "upper bound of the dropout range");
    o.add("batch-max", s->batch_max, "upper bound of the batch size range");
    o.add("epochs-min", s->epochs_min, "lower bound of the epoch range");
    o.add("epochs-max", s->epochs_max, "upper bound of the epoch range");
    o.add("log-lr-min", s->log_lr_min, "lower bound of log10 learning rate");
    o.add("log-lr-max", s->log_lr_max, "upper bound of log10 learning rate");
    o.add("ce-mode", s->train.ce_mode, "binary or literal cross entropy");
    o.add("transform", s->train.transform, "class weight transform");
    (void)app;
    return [s](const json& snapshot) {
        RunRecord rec{"hpo", snapshot};
        HPOSpace space;
        space.depths = s->depths;
        space.base_filters = s->filters;
        space.optimizers.clear();
        for (const auto& name : s->optimizers) space.optimizers.push_back(parse_optimizer(name));
        space.dropout_max = s->dropout_max;
        space.batch_max = s->batch_max;
        space.epochs_min = s->epochs_min;
        space.epochs_max = s->epochs_max;
        space.log_lr_min = s->log_lr_min;
        space.log_lr_max = s->log_lr_max;
        try {
            space.validate();
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        if (s->method == "single" && s->structure.empty()) throw UsageError("--method single requires --structure");
        rec.manifest = manifest_path(s->data);
        auto ds = load_manifest(s->data);
        if (s->method == "single") ds = select_structures(ds, {s->structure});
        auto base = s->train;
        base.seed = s->seed;
        const auto base_cfg = base.config(method_weighting(s->method));
        rec.seeds["seed"] = s->seed;
        const auto result = random_search(space, s->budget, s->seed, [&](const TrialConfig& t, std::uint64_t seed) {
            const double v = validation_objective(ds, t, base_cfg, seed);
            std::cout << "trial seed " << seed << "  objective " << v << "\n";
            return v;
        });
        const fs::path out = s->out;
        rec.artifacts.push_back(write_file(out / "hpo.csv", [&](std::ostream& o) { result.write_csv(o); }));
        const auto& b = result.best().config;
        json best{{"trial", result.best().index},
                  {"seed", result.best().seed},
                  {"objective", result.best().objective},
                  {"depth", b.depth},
                  {"filters", b.base_filters},
                  {"dropout", b.dropout},
                  {"optimizer", std::string(to_string(b.optimizer))},
                  {"alpha", b.alpha},
                  {"batch", b.batch_size},
                  {"lr", std::pow(10.0, b.log_lr)},
                  {"epochs", b.epochs}};
        rec.artifacts.push_back(write_text(out / "best.json", best.dump(2) + "\n"));
        std::cout << "best trial " << result.best().index << "  objective " << result.best().objective << "\n";
        rec.write(out / "run.json");
    };
}

Action register_stats(CLI::App* app, Options& o)
{
    struct State {
        std::vector<std::string> cases, names;
        std::string metric = "dsc", out;
        double alpha = 0.05;
    };
    auto s = std::make_shared<State>();
    o.require("cases", s->cases, "per-case evaluation CSVs, one per method (at least two)");
    o.add("names", s->names, "method names (default: file stems)");
    o.add("metric", s->metric, "dsc, hd95, ravd or assd");
    o.add("alpha", s->alpha, "significance level: 0.10, 0.05 or 0.01");
    o.add("out", s->out, "output directory for verdict.csv and run.json");
    (void)app;
    return [s](const json& snapshot) {
        RunRecord rec{"stats", snapshot};
        if (s->cases.size() < 2) throw UsageError("--cases needs at least two files");
        auto names = s->names;
        if (names.empty()) {
            for (const auto& c : s->cases) {
                const fs::path p(c);
                names.push_back(p.stem() == "cases" && p.has_parent_path() ? p.parent_path().filename().string()
                                                                          : p.stem().string());
            }
        }
        if (names.size() != s->cases.size()) throw UsageError("--names must match --cases");
        Metric metric;
        try {
            metric = parse_metric(s->metric);
            (void)nemenyi_q(s->alpha, s->cases.size());
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        std::vector<std::vector<CaseMetrics>> per_method;
        for (const auto& c : s->cases) {
            std::ifstream in(c);
            if (!in) throw std::runtime_error("cannot read " + c);
            per_method.push_back(read_cases_csv(in));
        }
        const auto matrix = build_score_matrix(names, per_method, metric);
        const auto f = friedman(matrix);
        const auto v = nemenyi(matrix, s->alpha);
        std::cout << "metric " << matrix.metric_name << ", " << matrix.case_count() << " cases, " << matrix.method_count()
                  << " methods\n";
        std::cout << "Friedman chi2 " << f.statistic << "  p " << f.p_value << "\n";
        std::cout << "Nemenyi CD " << v.critical_difference << " (alpha " << s->alpha << ")\n";
        std::cout << v.format_table();
        if (!s->out.empty()) {
            const fs::path out = s->out;
            rec.artifacts.push_back(write_file(out / "verdict.csv", [&](std::ostream& o) { v.write_csv(o); }));
            json summary{{"metric", matrix.metric_name},
                         {"cases", matrix.case_count()},
                         {"statistic", f.statistic},
                         {"p_value", f.p_value},
                         {"mean_ranks", f.mean_ranks},
                         {"critical_difference", v.critical_difference}};
            rec.artifacts.push_back(write_text(out / "friedman.json", summary.dump(2) + "\n"));
            rec.write(out / "run.json");
        }
    };
}

Action register_report(CLI::App* app, Options& o)
{
    struct State {
        std::string curve, out, title, highlight;
    };
    auto s = std::make_shared<State>();
    o.require("curve", s->curve, "learning curve CSV");
    o.require("out", s->out, "SVG output path");
    o.add("title", s->title, "plot title");
    o.add("highlight", s->highlight, "structure drawn bold (default: the added one)");
    (void)app;
    return [s](const json& snapshot) {
        RunRecord rec{"report", snapshot};
        std::ifstream in(s->curve);
        if (!in) throw std::runtime_error("cannot read " + s->curve);
        const auto curve = LearningCurve::read_csv(in);
        rec.artifacts.push_back(write_text(s->out, learning_curve_svg(curve, s->title, s->highlight)));
        rec.write(fs::path(s->out + ".run.json"));
    };
}

// ---------------------------------------------------------------------------

using Registrar = Action (*)(CLI::App*, Options&);

const std::vector<std::tuple<std::string, std::string, Registrar>>& registry()
{
    static const std::vector<std::tuple<std::string, std::string, Registrar>> r{
        {"synth", "generate a synthetic multi-structure dataset", register_synth},
        {"train", "train a single, data-adaptive or semi-supervised model", register_train},
        {"incremental", "add a structure to a trained model and resume training", register_incremental},
        {"eval", "evaluate a checkpoint on a dataset split", register_eval},
        {"hpo", "random hyper-parameter search", register_hpo},
        {"stats", "Friedman and Nemenyi comparison of evaluation CSVs", register_stats},
        {"report", "plot a learning curve as SVG", register_report},
    };
    return r;
}

/// Loads the JSON object given by --config (scanned before parsing so its
/// values can become defaults).
json scan_config(int argc, char** argv)
{
    for (int i = 1; i < argc; ++i) {
        std::string a = argv[i];
        std::string path;
        if (a == "--config" && i + 1 < argc) path = argv[i + 1];
        if (a.rfind("--config=", 0) == 0) path = a.substr(9);
        if (path.empty()) continue;
        std::ifstream in(path);
        if (!in) throw UsageError("cannot read config file " + path);
        try {
            auto j = json::parse(in);
            if (!j.is_object()) throw UsageError("config file must hold a JSON object");
            return j;
        } catch (const json::exception& e) {
            throw UsageError("config file " + path + ": " + e.what());
        }
    }
    return json::object();
}

int run(int argc, char** argv, const json& config);

/// Re-executes the command of a run record with its recorded settings.
int replay(const fs::path& record_path, const std::string& out_override)
{
    std::ifstream in(record_path);
    if (!in) throw UsageError("cannot read run record " + record_path.string());
    json record;
    try {
        record = json::parse(in);
    } catch (const json::exception& e) {
        throw UsageError("run record " + record_path.string() + ": " + e.what());
    }
    if (!record.contains("command") || !record.contains("config")) throw UsageError("not a run record");
    json config = record["config"];
    if (!out_override.empty()) config["out"] = out_override;
    std::string command = record["command"].get<std::string>();
    std::vector<std::string> args{"adaseg", command};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return run(static_cast<int>(argv.size()), argv.data(), config);
}

int run(int argc, char** argv, const json& config)
{
    CLI::App app{"Multi-structure segmentation with partially annotated data"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON file with option defaults (flags take precedence)");

    std::vector<Command> commands;
    for (const auto& [name, help, reg] : registry()) {
        Command c;
        c.app = app.add_subcommand(name, help);
        c.app->add_option("--config", config_path, "JSON file with option defaults (flags take precedence)");
        c.options = std::make_unique<Options>(c.app, config);
        c.action = reg(c.app, *c.options);
        commands.push_back(std::move(c));
    }
    auto* replay_cmd = app.add_subcommand("replay", "re-run a command from its run record");
    std::string record, replay_out;
    replay_cmd->add_option("record", record, "run.json of an earlier command")->required();
    replay_cmd->add_option("--out", replay_out, "write outputs here instead of the recorded location");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }
    if (replay_cmd->parsed()) return replay(record, replay_out);
    for (auto& c : commands) {
        if (c.app->parsed()) {
            c.action(c.options->snapshot());
            return 0;
        }
    }
    return kExitValidation;
}

}  // namespace

int main(int argc, char** argv)
{
    try {
        return run(argc, argv, scan_config(argc, argv));
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return kExitRuntime;
    }
}
