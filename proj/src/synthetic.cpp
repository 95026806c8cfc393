#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "adaseg/data.hpp"

namespace adaseg {

std::string_view to_string(ShapeKind kind)
{
    switch (kind) {
    case ShapeKind::disk: return "disk";
    case ShapeKind::ellipse: return "ellipse";
    case ShapeKind::ring: return "ring";
    case ShapeKind::nested: return "nested";
    }
    return "?";
}

ShapeKind parse_shape(std::string_view text)
{
    if (text == "disk") return ShapeKind::disk;
    if (text == "ellipse") return ShapeKind::ellipse;
    if (text == "ring") return ShapeKind::ring;
    if (text == "nested" || text == "nested_pair") return ShapeKind::nested;
    throw std::invalid_argument("unknown shape generator '" + std::string(text) + "'");
}

std::vector<StructureSpec> structures_from_kinds(std::string_view csv)
{
    std::vector<StructureSpec> out;
    std::stringstream ss{std::string(csv)};
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        // Repeated kinds get a numeric suffix so names stay unique.
        std::string name = item;
        int repeat = 1;
        for (const auto& s : out) repeat += s.kind == parse_shape(item);
        if (repeat > 1) name += std::to_string(repeat);
        out.push_back({name, parse_shape(item)});
    }
    return out;
}

void SynthConfig::validate() const
{
    if (structures.empty()) throw std::invalid_argument("synthetic config has an empty structure list");
    if (image_size < 8) throw std::invalid_argument("image_size must be at least 8");
    if (slices_per_patient == 0) throw std::invalid_argument("slices_per_patient must be positive");
    if (patients[0] == 0) throw std::invalid_argument("synthetic config has zero training patients");
    if (noise_std < 0.0 || !std::isfinite(noise_std)) throw std::invalid_argument("noise_std must be >= 0");
    const auto K = structures.size();
    if (!availability_rate.empty() && availability_rate.size() != K) {
        throw std::invalid_argument("availability_rate needs one entry per structure");
    }
    if (!per_slice_dropout.empty() && per_slice_dropout.size() != K) {
        throw std::invalid_argument("per_slice_dropout needs one entry per structure");
    }
    bool has_complete = availability_rate.empty();
    for (double r : availability_rate) {
        if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("availability rate outside [0,1]");
        has_complete = has_complete || r == 1.0;
    }
    for (double d : per_slice_dropout) {
        if (!(d >= 0.0 && d <= 1.0)) throw std::invalid_argument("per-slice dropout outside [0,1]");
    }
    if (!has_complete) {
        throw std::invalid_argument("at least one structure must have availability rate 1.0 in the train split");
    }
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t j = 0; j < k; ++j) {
            if (structures[j].name == structures[k].name) {
                throw std::invalid_argument("duplicate structure name '" + structures[k].name + "'");
            }
        }
    }
}

namespace {

struct ShapeParams {
    double cy = 0, cx = 0;      // centre at the widest slice
    double dy = 0, dx = 0;      // centre drift per unit slice position
    double radius = 0;
    double orientation = 0;
    double z_center = 0;
    double z_extent = 1;
    double offset = 0;          // intensity added inside the structure
};

struct Ellipse {
    double cy, cx, a, b, cos_t, sin_t;

    [[nodiscard]] bool contains(double y, double x) const
    {
        const double u = (x - cx) * cos_t + (y - cy) * sin_t;
        const double v = -(x - cx) * sin_t + (y - cy) * cos_t;
        return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
    }
};

constexpr double kMinRadius = 2.5;

Mask rasterize(const Ellipse& e, std::size_t size)
{
    Mask m(size, size);
    for (std::size_t r = 0; r < size; ++r) {
        for (std::size_t c = 0; c < size; ++c) {
            m(r, c) = e.contains(static_cast<double>(r), static_cast<double>(c)) ? 1 : 0;
        }
    }
    return m;
}

// Structure-specific mask for one slice. `previous` is the preceding
// structure's mask on the same slice (used by the nested generator).
Mask draw_structure(ShapeKind kind, const ShapeParams& p, double t, std::size_t size, const Mask* previous,
                    const ShapeParams* previous_params)
{
    const double zt = (t - p.z_center) / p.z_extent;
    const double scale = std::sqrt(std::max(0.0, 1.0 - zt * zt));
    const double r = p.radius * scale;
    Mask out(size, size);
    if (r < kMinRadius) return out;
    const double cy = p.cy + p.dy * t;
    const double cx = p.cx + p.dx * t;
    const double ct = std::cos(p.orientation);
    const double st = std::sin(p.orientation);

    switch (kind) {
    case ShapeKind::disk:
        return rasterize({cy, cx, r, r, 1.0, 0.0}, size);
    case ShapeKind::ellipse:
        return rasterize({cy, cx, 1.5 * r, 0.65 * r, ct, st}, size);
    case ShapeKind::ring: {
        const Ellipse outer{cy, cx, 1.15 * r, 1.15 * r, 1.0, 0.0};
        const Ellipse inner{cy, cx, 0.55 * r, 0.55 * r, 1.0, 0.0};
        for (std::size_t y = 0; y < size; ++y) {
            for (std::size_t x = 0; x < size; ++x) {
                const auto fy = static_cast<double>(y), fx = static_cast<double>(x);
                out(y, x) = outer.contains(fy, fx) && !inner.contains(fy, fx) ? 1 : 0;
            }
        }
        return out;
    }
    case ShapeKind::nested: {
        // Superset of the previous structure plus an attached lobe, like a
        // breast outline extended towards the axilla.
        if (previous == nullptr || previous_params == nullptr) {
            return rasterize({cy, cx, r, r, 1.0, 0.0}, size);
        }
        const double py = previous_params->cy + previous_params->dy * t;
        const double px = previous_params->cx + previous_params->dx * t;
        const Ellipse lobe{py + 0.8 * r * st, px + 0.8 * r * ct, 1.3 * r, 0.8 * r, ct, st};
        out = rasterize(lobe, size);
        for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] |= previous->values()[i];
        return out;
    }
    }
    return out;
}

}  // namespace

Dataset generate_synthetic(const SynthConfig& config)
{
    config.validate();
    const std::size_t K = config.structures.size();
    const std::size_t S = config.image_size;
    const auto fs = static_cast<double>(S);
    std::vector<double> rate = config.availability_rate;
    if (rate.empty()) rate.assign(K, 1.0);
    std::vector<double> dropout = config.per_slice_dropout;
    if (dropout.empty()) dropout.assign(K, 0.0);

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    std::normal_distribution<double> noise(0.0, 1.0);

    Dataset ds;
    ds.name = config.name;
    ds.rows = S;
    ds.cols = S;
    for (const auto& s : config.structures) ds.structures.push_back(s.name);

    std::size_t patient_counter = 0;
    for (std::size_t split_i = 0; split_i < 3; ++split_i) {
        const Split split = kAllSplits[split_i];
        const bool apply_availability = split == Split::train || !config.complete_eval_splits;
        for (std::size_t p = 0; p < config.patients[split_i]; ++p) {
            std::ostringstream id;
            id << "P";
            id.width(4);
            id.fill('0');
            id << patient_counter++;

            // Per-patient geometry, drawn in a fixed order.
            std::vector<ShapeParams> params(K);
            for (std::size_t k = 0; k < K; ++k) {
                auto& sp = params[k];
                const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(K) -
                                     0.5 * std::numbers::pi + uniform(-0.25, 0.25);
                const double dist = K == 1 ? uniform(0.0, 0.08) * fs : uniform(0.19, 0.24) * fs;
                sp.cy = 0.5 * fs + dist * std::sin(angle);
                sp.cx = 0.5 * fs + dist * std::cos(angle);
                sp.dy = uniform(-0.04, 0.04) * fs;
                sp.dx = uniform(-0.04, 0.04) * fs;
                sp.radius = uniform(0.09, 0.13) * fs;
                sp.orientation = uniform(0.0, std::numbers::pi);
                sp.z_center = uniform(-0.15, 0.15);
                sp.z_extent = uniform(0.85, 1.1);
                sp.offset = uniform(0.1, 0.4);
            }
            std::vector<bool> patient_has(K);
            for (std::size_t k = 0; k < K; ++k) {
                const double u = unit(rng);
                patient_has[k] = !apply_availability || u < rate[k];
            }

            for (std::size_t j = 0; j < config.slices_per_patient; ++j) {
                const double t = -1.0 + 2.0 * (static_cast<double>(j) + 0.5) /
                                            static_cast<double>(config.slices_per_patient);
                std::vector<Mask> full(K);
                for (std::size_t k = 0; k < K; ++k) {
                    const bool has_prev = k > 0;
                    full[k] = draw_structure(config.structures[k].kind, params[k], t, S,
                                             has_prev ? &full[k - 1] : nullptr, has_prev ? &params[k - 1] : nullptr);
                }
                SliceSample s;
                s.patient_id = id.str();
                s.slice_index = static_cast<int>(j);
                s.split = split;
                s.image = Image(S, S);
                for (std::size_t i = 0; i < s.image.size(); ++i) {
                    double v = config.noise_std * noise(rng);
                    for (std::size_t k = 0; k < K; ++k) v += params[k].offset * full[k].values()[i];
                    s.image.values()[i] = static_cast<float>(v);
                }
                s.masks.resize(K);
                for (std::size_t k = 0; k < K; ++k) {
                    const double u = unit(rng);
                    const bool dropped = apply_availability && u < dropout[k];
                    if (patient_has[k] && !dropped) s.masks[k] = std::move(full[k]);
                }
                ds.samples.push_back(std::move(s));
            }
        }
    }
    ds.validate();
    return ds;
}

}  // namespace adaseg
