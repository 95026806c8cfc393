#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "adaseg/metrics.hpp"

namespace adaseg {

/// scores[i][j]: case i, method j; higher is better.
struct ScoreMatrix {
    std::vector<std::string> methods;
    std::vector<std::string> cases;
    std::vector<std::vector<double>> scores;
    std::string metric_name;

    /// Throws std::invalid_argument unless M >= 2, N >= 2, shapes agree and
    /// every score is finite.
    void validate() const;
    [[nodiscard]] std::size_t method_count() const noexcept { return methods.size(); }
    [[nodiscard]] std::size_t case_count() const noexcept { return cases.size(); }
};

struct FriedmanResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::vector<double> mean_ranks;  // 1 = best
};

/// Per-case ranks with average ranks for ties; chi-square approximation with
/// M-1 degrees of freedom.
FriedmanResult friedman(const ScoreMatrix& scores);

/// Studentized-range based constant for the Nemenyi critical difference.
/// alpha must be 0.10, 0.05 or 0.01 and M in [2, 10].
double nemenyi_q(double alpha, std::size_t methods);
/// q * sqrt(M(M+1) / (6N)).
double critical_difference(double alpha, std::size_t methods, std::size_t cases);

enum class Verdict { worse = -1, tie = 0, better = 1 };

struct PairwiseVerdict {
    std::vector<std::string> methods;
    std::vector<double> mean_ranks;
    double alpha = 0.05;
    double critical_difference = 0.0;
    /// cells[a][b] is `better` when a ranks significantly better than b.
    /// The diagonal is `tie` and is printed empty.
    std::vector<std::vector<Verdict>> cells;

    /// Square table of method names with -, 0 and + cells.
    [[nodiscard]] std::string format_table() const;
    void write_csv(std::ostream& out) const;
};

/// Methods differ when their mean ranks are at least the critical difference apart.
PairwiseVerdict nemenyi(const ScoreMatrix& scores, double alpha = 0.05);

/// Per-case scores of one metric across methods. Cases are matched by
/// (patient, structure); cases where any method has an undefined value are
/// dropped. Lower-is-better metrics are negated (|RAVD| for RAVD).
/// Throws std::invalid_argument when the case sets differ.
ScoreMatrix build_score_matrix(const std::vector<std::string>& methods,
                               const std::vector<std::vector<CaseMetrics>>& cases, Metric metric);

}  // namespace adaseg
