#include "adaseg/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

#include "csv_util.hpp"

namespace adaseg {

void ScoreMatrix::validate() const
{
    if (methods.size() < 2) throw std::invalid_argument("score matrix needs at least two methods");
    if (cases.size() < 2) throw std::invalid_argument("score matrix needs at least two cases");
    if (scores.size() != cases.size()) throw std::invalid_argument("score matrix row count differs from the case count");
    for (const auto& row : scores) {
        if (row.size() != methods.size()) throw std::invalid_argument("score matrix row has the wrong number of methods");
        for (double v : row) {
            if (!std::isfinite(v)) throw std::invalid_argument("score matrix has a missing or non-finite entry");
        }
    }
}

namespace {

/// Ranks of one row, 1 for the highest value, ties averaged.
std::vector<double> rank_row(const std::vector<double>& row)
{
    std::vector<std::size_t> order(row.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
    std::vector<double> ranks(row.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && row[order[j + 1]] == row[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

FriedmanResult friedman(const ScoreMatrix& scores)
{
    scores.validate();
    const std::size_t M = scores.method_count();
    const double N = static_cast<double>(scores.case_count());
    FriedmanResult r;
    r.mean_ranks.assign(M, 0.0);
    for (const auto& row : scores.scores) {
        const auto ranks = rank_row(row);
        for (std::size_t j = 0; j < M; ++j) r.mean_ranks[j] += ranks[j];
    }
    for (auto& v : r.mean_ranks) v /= N;
    const double m = static_cast<double>(M);
    double ss = 0.0;
    for (double v : r.mean_ranks) ss += v * v;
    r.statistic = std::max(0.0, 12.0 * N / (m * (m + 1.0)) * (ss - m * (m + 1.0) * (m + 1.0) / 4.0));
    // Round-off can leave a tiny positive statistic for all-tied input.
    if (r.statistic < 1e-12) r.statistic = 0.0;
    r.p_value = r.statistic == 0.0 ? 1.0 : boost::math::gamma_q((m - 1.0) / 2.0, r.statistic / 2.0);
    return r;
}

double nemenyi_q(double alpha, std::size_t methods)
{
    // Two-tailed Nemenyi constants (studentized range / sqrt 2) for M = 2..10.
    static constexpr std::array<double, 9> q10{1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920};
    static constexpr std::array<double, 9> q05{1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164};
    static constexpr std::array<double, 9> q01{2.576, 2.913, 3.113, 3.255, 3.364, 3.452, 3.526, 3.590, 3.646};
    if (methods < 2 || methods > 10) throw std::invalid_argument("Nemenyi table covers 2 to 10 methods");
    const std::size_t i = methods - 2;
    if (std::abs(alpha - 0.05) < 1e-12) return q05[i];
    if (std::abs(alpha - 0.01) < 1e-12) return q01[i];
    if (std::abs(alpha - 0.10) < 1e-12) return q10[i];
    throw std::invalid_argument("Nemenyi alpha must be 0.10, 0.05 or 0.01");
}

double critical_difference(double alpha, std::size_t methods, std::size_t cases)
{
    if (cases < 1) throw std::invalid_argument("critical difference needs at least one case");
    const double m = static_cast<double>(methods);
    return nemenyi_q(alpha, methods) * std::sqrt(m * (m + 1.0) / (6.0 * static_cast<double>(cases)));
}

PairwiseVerdict nemenyi(const ScoreMatrix& scores, double alpha)
{
    const auto f = friedman(scores);
    const std::size_t M = scores.method_count();
    PairwiseVerdict v;
    v.methods = scores.methods;
    v.mean_ranks = f.mean_ranks;
    v.alpha = alpha;
    v.critical_difference = critical_difference(alpha, M, scores.case_count());
    v.cells.assign(M, std::vector<Verdict>(M, Verdict::tie));
    for (std::size_t a = 0; a < M; ++a) {
        for (std::size_t b = 0; b < M; ++b) {
            if (a == b) continue;
            const double gap = f.mean_ranks[b] - f.mean_ranks[a];
            if (std::abs(gap) >= v.critical_difference) v.cells[a][b] = gap > 0 ? Verdict::better : Verdict::worse;
        }
    }
    return v;
}

namespace {

const char* symbol(Verdict v)
{
    switch (v) {
    case Verdict::better: return "+";
    case Verdict::worse: return "-";
    case Verdict::tie: return "0";
    }
    return "?";
}

}  // namespace

std::string PairwiseVerdict::format_table() const
{
    std::size_t width = 1;
    for (const auto& m : methods) width = std::max(width, m.size());
    auto pad = [&](const std::string& s) { return s + std::string(width - s.size(), ' '); };
    std::ostringstream out;
    out << pad("");
    for (const auto& m : methods) out << "  " << pad(m);
    out << "\n";
    for (std::size_t a = 0; a < methods.size(); ++a) {
        out << pad(methods[a]);
        for (std::size_t b = 0; b < methods.size(); ++b) out << "  " << pad(a == b ? "" : symbol(cells[a][b]));
        out << "\n";
    }
    return out.str();
}

void PairwiseVerdict::write_csv(std::ostream& out) const
{
    out << "method";
    for (const auto& m : methods) out << "," << m;
    out << ",mean_rank\n";
    for (std::size_t a = 0; a < methods.size(); ++a) {
        out << methods[a];
        for (std::size_t b = 0; b < methods.size(); ++b) out << "," << (a == b ? "" : symbol(cells[a][b]));
        out << "," << csv::format_value(mean_ranks[a]) << "\n";
    }
}

ScoreMatrix build_score_matrix(const std::vector<std::string>& methods,
                               const std::vector<std::vector<CaseMetrics>>& cases, Metric metric)
{
    if (methods.size() != cases.size()) throw std::invalid_argument("one case list per method is required");
    if (methods.empty()) throw std::invalid_argument("no methods given");
    using Key = std::pair<std::string, std::string>;  // (structure, patient)
    std::vector<std::map<Key, std::optional<double>>> by_method(methods.size());
    for (std::size_t j = 0; j < methods.size(); ++j) {
        for (const auto& c : cases[j]) {
            if (!by_method[j].emplace(Key{c.structure, c.patient_id}, c.get(metric)).second) {
                throw std::invalid_argument("method '" + methods[j] + "' lists case " + c.patient_id + "/" +
                                            c.structure + " twice");
            }
        }
    }
    for (std::size_t j = 1; j < methods.size(); ++j) {
        const bool same = by_method[j].size() == by_method[0].size() &&
                          std::equal(by_method[j].begin(), by_method[j].end(), by_method[0].begin(),
                                     [](const auto& a, const auto& b) { return a.first == b.first; });
        if (!same) {
            throw std::invalid_argument("methods '" + methods[0] + "' and '" + methods[j] + "' cover different cases");
        }
    }
    ScoreMatrix m;
    m.methods = methods;
    m.metric_name = to_string(metric);
    const double sign = higher_is_better(metric) ? 1.0 : -1.0;
    for (const auto& [key, first] : by_method[0]) {
        std::vector<double> row;
        bool defined = true;
        for (const auto& method : by_method) {
            const auto& v = method.at(key);
            if (!v) {
                defined = false;
                break;
            }
            row.push_back(sign * (metric == Metric::ravd ? std::abs(*v) : *v));
        }
        if (!defined) continue;
        m.cases.push_back(key.second + "/" + key.first);
        m.scores.push_back(std::move(row));
    }
    return m;
}

}  // namespace adaseg
