#include "adaseg/metrics.hpp"

#include "csv_util.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace adaseg {

BinaryVolume::BinaryVolume(std::size_t rows, std::size_t cols, std::size_t slices, std::array<double, 3> spacing)
    : rows_(rows), cols_(cols), slices_(slices), spacing_(spacing), voxels_(rows * cols * slices, 0)
{
    for (double s : spacing_) {
        if (!(s > 0.0)) throw std::invalid_argument("volume spacing must be positive");
    }
}

BinaryVolume::BinaryVolume(const Mask& slice, std::array<double, 2> spacing)
    : BinaryVolume(slice.rows(), slice.cols(), 1, {spacing[0], spacing[1], 1.0})
{
    for (std::size_t i = 0; i < slice.size(); ++i) {
        const auto v = slice.values()[i];
        if (v > 1) throw std::invalid_argument("binary volume values must be 0 or 1");
        voxels_[i] = v;
    }
}

BinaryVolume BinaryVolume::stack(const std::vector<Mask>& slices, std::array<double, 3> spacing)
{
    if (slices.empty()) return BinaryVolume(0, 0, 0, spacing);
    BinaryVolume v(slices.front().rows(), slices.front().cols(), slices.size(), spacing);
    const std::size_t plane = v.rows_ * v.cols_;
    for (std::size_t s = 0; s < slices.size(); ++s) {
        if (!slices[s].same_shape(v.rows_, v.cols_)) throw std::invalid_argument("stacked slices differ in shape");
        for (std::size_t i = 0; i < plane; ++i) {
            const auto x = slices[s].values()[i];
            if (x > 1) throw std::invalid_argument("binary volume values must be 0 or 1");
            v.voxels_[s * plane + i] = x;
        }
    }
    return v;
}

std::size_t BinaryVolume::count() const
{
    std::size_t n = 0;
    for (auto v : voxels_) n += v;
    return n;
}

namespace {

void require_same_shape(const BinaryVolume& a, const BinaryVolume& b)
{
    if (!a.same_shape(b)) throw std::invalid_argument("metric shape mismatch");
}

}  // namespace

double dsc(const BinaryVolume& truth, const BinaryVolume& pred)
{
    require_same_shape(truth, pred);
    std::size_t overlap = 0, a = 0, b = 0;
    for (std::size_t s = 0; s < truth.slices(); ++s) {
        for (std::size_t r = 0; r < truth.rows(); ++r) {
            for (std::size_t c = 0; c < truth.cols(); ++c) {
                const auto x = truth.at(r, c, s), y = pred.at(r, c, s);
                overlap += x & y;
                a += x;
                b += y;
            }
        }
    }
    if (a + b == 0) return 1.0;
    return 2.0 * static_cast<double>(overlap) / static_cast<double>(a + b);
}

std::vector<Point3> boundary(const BinaryVolume& v)
{
    std::vector<Point3> points;
    const auto& sp = v.spacing();
    const std::size_t R = v.rows(), C = v.cols();
    for (std::size_t s = 0; s < v.slices(); ++s) {
        for (std::size_t r = 0; r < R; ++r) {
            for (std::size_t c = 0; c < C; ++c) {
                if (!v.at(r, c, s)) continue;
                const bool edge = r == 0 || c == 0 || r + 1 == R || c + 1 == C || !v.at(r - 1, c, s) ||
                                  !v.at(r + 1, c, s) || !v.at(r, c - 1, s) || !v.at(r, c + 1, s);
                if (edge) {
                    points.push_back({static_cast<double>(c) * sp[1], static_cast<double>(r) * sp[0],
                                      static_cast<double>(s) * sp[2]});
                }
            }
        }
    }
    return points;
}

std::vector<double> directed_distances(const std::vector<Point3>& from, const std::vector<Point3>& to)
{
    std::vector<double> out(from.size(), std::numeric_limits<double>::infinity());
    if (to.empty()) return out;
    // Sweep over targets sorted by x; stop once the x-gap alone exceeds the best.
    std::vector<Point3> sorted = to;
    std::sort(sorted.begin(), sorted.end(), [](const Point3& a, const Point3& b) { return a.x < b.x; });
    for (std::size_t i = 0; i < from.size(); ++i) {
        const Point3& p = from[i];
        const auto start = std::lower_bound(sorted.begin(), sorted.end(), p.x,
                                            [](const Point3& q, double x) { return q.x < x; });
        double best = std::numeric_limits<double>::infinity();
        auto visit = [&](const Point3& q) {
            const double dx = p.x - q.x, dy = p.y - q.y, dz = p.z - q.z;
            best = std::min(best, dx * dx + dy * dy + dz * dz);
        };
        for (auto it = start; it != sorted.end(); ++it) {
            const double dx = it->x - p.x;
            if (dx * dx > best) break;
            visit(*it);
        }
        for (auto it = start; it != sorted.begin();) {
            --it;
            const double dx = p.x - it->x;
            if (dx * dx > best) break;
            visit(*it);
        }
        out[i] = std::sqrt(best);
    }
    return out;
}

double percentile(std::vector<double> values, double q)
{
    if (values.empty()) throw std::invalid_argument("percentile of an empty list");
    if (!(q >= 0.0 && q <= 100.0)) throw std::invalid_argument("percentile outside [0,100]");
    std::sort(values.begin(), values.end());
    const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

namespace {

struct DirectedPair {
    std::vector<double> forward, backward;
};

std::optional<DirectedPair> boundary_distances(const BinaryVolume& truth, const BinaryVolume& pred)
{
    require_same_shape(truth, pred);
    const auto a = boundary(truth);
    const auto b = boundary(pred);
    if (a.empty() || b.empty()) return std::nullopt;
    return DirectedPair{directed_distances(a, b), directed_distances(b, a)};
}

}  // namespace

std::optional<double> hd95(const BinaryVolume& truth, const BinaryVolume& pred)
{
    auto d = boundary_distances(truth, pred);
    if (!d) return std::nullopt;
    return std::max(percentile(std::move(d->forward), 95.0), percentile(std::move(d->backward), 95.0));
}

std::optional<double> hausdorff(const BinaryVolume& truth, const BinaryVolume& pred)
{
    auto d = boundary_distances(truth, pred);
    if (!d) return std::nullopt;
    return std::max(*std::max_element(d->forward.begin(), d->forward.end()),
                    *std::max_element(d->backward.begin(), d->backward.end()));
}

std::optional<double> assd(const BinaryVolume& truth, const BinaryVolume& pred)
{
    auto d = boundary_distances(truth, pred);
    if (!d) return std::nullopt;
    double sum = 0.0;
    for (double x : d->forward) sum += x;
    for (double x : d->backward) sum += x;
    return sum / static_cast<double>(d->forward.size() + d->backward.size());
}

std::optional<double> ravd_signed(const BinaryVolume& truth, const BinaryVolume& pred)
{
    require_same_shape(truth, pred);
    const auto t = static_cast<double>(truth.count());
    const auto p = static_cast<double>(pred.count());
    if (p == 0.0) return std::nullopt;
    return 100.0 * (t - p) / p;
}

// ---------------------------------------------------------------------------

std::string to_string(Metric metric)
{
    switch (metric) {
    case Metric::dsc: return "dsc";
    case Metric::hd95: return "hd95";
    case Metric::ravd: return "ravd";
    case Metric::assd: return "assd";
    }
    return "?";
}

Metric parse_metric(const std::string& text)
{
    for (auto m : kAllMetrics) {
        if (to_string(m) == text) return m;
    }
    throw std::invalid_argument("unknown metric '" + text + "'");
}

bool higher_is_better(Metric metric)
{
    return metric == Metric::dsc;
}

MetricSummary summarize(const std::vector<std::optional<double>>& values)
{
    MetricSummary s;
    double sum = 0.0;
    for (const auto& v : values) {
        if (v) {
            ++s.included;
            sum += *v;
        } else {
            ++s.excluded;
        }
    }
    if (s.included == 0) return s;
    const double n = static_cast<double>(s.included);
    const double mean = sum / n;
    s.mean = mean;
    if (s.included == 1) {
        s.se = 0.0;
        return s;
    }
    double ss = 0.0;
    for (const auto& v : values) {
        if (v) ss += (*v - mean) * (*v - mean);
    }
    s.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    return s;
}

CaseMetrics evaluate_case(const BinaryVolume& truth, const BinaryVolume& pred)
{
    CaseMetrics m;
    m.values[static_cast<std::size_t>(Metric::dsc)] = dsc(truth, pred);
    m.values[static_cast<std::size_t>(Metric::ravd)] = ravd_signed(truth, pred);
    if (auto d = boundary_distances(truth, pred)) {
        double sum = 0.0;
        for (double x : d->forward) sum += x;
        for (double x : d->backward) sum += x;
        m.values[static_cast<std::size_t>(Metric::assd)] =
            sum / static_cast<double>(d->forward.size() + d->backward.size());
        m.values[static_cast<std::size_t>(Metric::hd95)] =
            std::max(percentile(std::move(d->forward), 95.0), percentile(std::move(d->backward), 95.0));
    }
    return m;
}

EvalReport aggregate(std::vector<CaseMetrics> cases)
{
    EvalReport report;
    std::vector<std::string> order;
    for (const auto& c : cases) {
        if (std::find(order.begin(), order.end(), c.structure) == order.end()) order.push_back(c.structure);
    }
    for (const auto& name : order) {
        StructureSummary summary;
        summary.structure = name;
        for (auto metric : kAllMetrics) {
            std::vector<std::optional<double>> values;
            for (const auto& c : cases) {
                if (c.structure == name) values.push_back(c.get(metric));
            }
            summary.cases = values.size();
            summary.metrics[static_cast<std::size_t>(metric)] = summarize(values);
        }
        report.structures.push_back(std::move(summary));
    }
    report.cases = std::move(cases);
    return report;
}


void write_report_csv(std::ostream& out, const EvalReport& report)
{
    out << "structure,n_cases";
    for (auto m : kAllMetrics) out << "," << to_string(m) << "_mean," << to_string(m) << "_se";
    for (auto m : kAllMetrics) out << "," << to_string(m) << "_n";
    out << ",n_included,n_excluded\n";
    for (const auto& s : report.structures) {
        out << s.structure << "," << s.cases;
        for (auto m : kAllMetrics) out << "," << csv::format_value(s.get(m).mean) << "," << csv::format_value(s.get(m).se);
        for (auto m : kAllMetrics) out << "," << s.get(m).included;
        std::size_t complete = 0;
        for (const auto& c : report.cases) {
            if (c.structure != s.structure) continue;
            complete += std::all_of(c.values.begin(), c.values.end(), [](const auto& v) { return v.has_value(); });
        }
        out << "," << complete << "," << (s.cases - complete) << "\n";
    }
}

void write_cases_csv(std::ostream& out, const EvalReport& report)
{
    out << "patient_id,structure";
    for (auto m : kAllMetrics) out << "," << to_string(m);
    out << "\n";
    for (const auto& c : report.cases) {
        out << c.patient_id << "," << c.structure;
        for (const auto& v : c.values) out << "," << csv::format_value(v);
        out << "\n";
    }
}

std::vector<CaseMetrics> read_cases_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("cases CSV is empty");
    const auto header = csv::split_line(line);
    if (header.size() != 6 || header[0] != "patient_id" || header[1] != "structure") {
        throw std::runtime_error("cases CSV has an unexpected header: " + line);
    }
    std::vector<CaseMetrics> cases;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = csv::split_line(line);
        if (cells.size() != 6) throw std::runtime_error("malformed cases CSV row: " + line);
        CaseMetrics c;
        c.patient_id = cells[0];
        c.structure = cells[1];
        for (std::size_t m = 0; m < 4; ++m) {
            const auto& cell = cells[2 + m];
            if (cell.empty()) continue;
            c.values[m] = csv::parse_double(cell);
        }
        cases.push_back(std::move(c));
    }
    return cases;
}

}  // namespace adaseg
