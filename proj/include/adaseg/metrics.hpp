#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "adaseg/grid.hpp"

namespace adaseg {

/// Binary grid of one or more stacked 2-D slices with per-axis spacing
/// (row, column, slice).
class BinaryVolume {
public:
    BinaryVolume() = default;
    BinaryVolume(std::size_t rows, std::size_t cols, std::size_t slices, std::array<double, 3> spacing = {1, 1, 1});
    explicit BinaryVolume(const Mask& slice, std::array<double, 2> spacing = {1, 1});

    /// Stacks equally sized slices along the third axis.
    static BinaryVolume stack(const std::vector<Mask>& slices, std::array<double, 3> spacing = {1, 1, 1});

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] std::size_t slices() const noexcept { return slices_; }
    [[nodiscard]] const std::array<double, 3>& spacing() const noexcept { return spacing_; }

    std::uint8_t& at(std::size_t r, std::size_t c, std::size_t s = 0) { return voxels_[(s * rows_ + r) * cols_ + c]; }
    [[nodiscard]] std::uint8_t at(std::size_t r, std::size_t c, std::size_t s = 0) const
    {
        return voxels_[(s * rows_ + r) * cols_ + c];
    }
    [[nodiscard]] std::size_t count() const;
    [[nodiscard]] bool same_shape(const BinaryVolume& other) const noexcept
    {
        return rows_ == other.rows_ && cols_ == other.cols_ && slices_ == other.slices_;
    }

private:
    std::size_t rows_ = 0, cols_ = 0, slices_ = 0;
    std::array<double, 3> spacing_{1, 1, 1};
    std::vector<std::uint8_t> voxels_;
};

struct Point3 {
    double x = 0, y = 0, z = 0;
    friend bool operator==(const Point3&, const Point3&) = default;
};

/// 2*|A and B| / (|A| + |B|); 1 when both are empty.
double dsc(const BinaryVolume& truth, const BinaryVolume& pred);

/// Foreground voxels with at least one in-slice 4-neighbour in the background
/// (outside the grid counts as background), scaled by spacing.
std::vector<Point3> boundary(const BinaryVolume& volume);

/// Nearest-neighbour distance from every point of `from` to the set `to`.
std::vector<double> directed_distances(const std::vector<Point3>& from, const std::vector<Point3>& to);

/// Linear-interpolation percentile of an unsorted list, q in [0,100].
double percentile(std::vector<double> values, double q);

/// max of the two directed 95th percentiles; nullopt when either boundary is empty.
std::optional<double> hd95(const BinaryVolume& truth, const BinaryVolume& pred);
/// Mean of all boundary-to-boundary nearest distances in both directions.
std::optional<double> assd(const BinaryVolume& truth, const BinaryVolume& pred);
/// Exact (100th percentile) symmetric Hausdorff distance.
std::optional<double> hausdorff(const BinaryVolume& truth, const BinaryVolume& pred);

/// 100 * (|truth| - |pred|) / |pred| as printed, so a prediction smaller than
/// the truth gives a positive value. nullopt when the prediction is empty.
std::optional<double> ravd_signed(const BinaryVolume& truth, const BinaryVolume& pred);

// ---------------------------------------------------------------------------
// Aggregation

enum class Metric { dsc, hd95, ravd, assd };
inline constexpr std::array<Metric, 4> kAllMetrics{Metric::dsc, Metric::hd95, Metric::ravd, Metric::assd};
std::string to_string(Metric metric);
Metric parse_metric(const std::string& text);
/// DSC is higher-is-better; the distance metrics and |RAVD| are lower-is-better.
bool higher_is_better(Metric metric);

/// Metric values of one (patient, structure) evaluation case.
struct CaseMetrics {
    std::string patient_id;
    std::string structure;
    std::array<std::optional<double>, 4> values;  // indexed by Metric

    [[nodiscard]] const std::optional<double>& get(Metric m) const { return values[static_cast<std::size_t>(m)]; }
};

struct MetricSummary {
    std::optional<double> mean;
    std::optional<double> se;  // sample standard deviation / sqrt(n)
    std::size_t included = 0;
    std::size_t excluded = 0;
};

struct StructureSummary {
    std::string structure;
    std::size_t cases = 0;
    std::array<MetricSummary, 4> metrics;  // indexed by Metric

    [[nodiscard]] const MetricSummary& get(Metric m) const { return metrics[static_cast<std::size_t>(m)]; }
};

struct EvalReport {
    std::vector<StructureSummary> structures;
    std::vector<CaseMetrics> cases;
};

MetricSummary summarize(const std::vector<std::optional<double>>& values);

/// All four metrics of one case.
CaseMetrics evaluate_case(const BinaryVolume& truth, const BinaryVolume& pred);

/// Groups cases by structure (first-appearance order) and summarizes them.
EvalReport aggregate(std::vector<CaseMetrics> cases);

/// One row per structure: means, SEs, and included/excluded counts.
void write_report_csv(std::ostream& out, const EvalReport& report);
/// One row per case with all four metric values (empty when undefined).
void write_cases_csv(std::ostream& out, const EvalReport& report);
std::vector<CaseMetrics> read_cases_csv(std::istream& in);

}  // namespace adaseg
