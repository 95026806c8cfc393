#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "adaseg/stats.hpp"
#include "oracles.hpp"

using namespace adaseg;

namespace {

ScoreMatrix matrix(std::vector<std::vector<double>> scores)
{
    ScoreMatrix m;
    for (std::size_t j = 0; j < scores.front().size(); ++j) m.methods.push_back("m" + std::to_string(j));
    for (std::size_t i = 0; i < scores.size(); ++i) m.cases.push_back("c" + std::to_string(i));
    m.scores = std::move(scores);
    m.metric_name = "dsc";
    return m;
}

ScoreMatrix random_matrix(std::size_t n, std::size_t m, std::mt19937_64& rng, bool ties = false)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> coarse(0, 3);
    std::vector<std::vector<double>> s(n, std::vector<double>(m));
    for (auto& row : s) {
        for (auto& v : row) v = ties ? coarse(rng) : u(rng);
    }
    return matrix(std::move(s));
}

CaseMetrics make_case(std::string patient, std::string structure, double dsc, std::optional<double> hd,
                      std::optional<double> ravd)
{
    CaseMetrics c;
    c.patient_id = std::move(patient);
    c.structure = std::move(structure);
    c.values = {dsc, hd, ravd, hd};
    return c;
}

}  // namespace

TEST_CASE("friedman: consistent ordering A > B > C over four cases")
{
    const auto m = matrix({{0.9, 0.8, 0.7}, {0.6, 0.5, 0.1}, {0.95, 0.9, 0.2}, {0.3, 0.2, 0.1}});
    const auto f = friedman(m);
    CHECK(f.statistic == 8.0);
    CHECK(f.mean_ranks == std::vector<double>{1.0, 2.0, 3.0});
    // Two degrees of freedom: survival function exp(-x/2).
    CHECK(f.p_value == doctest::Approx(std::exp(-4.0)).epsilon(1e-12));
}

TEST_CASE("friedman: all ties give statistic 0 and p 1")
{
    const auto f = friedman(matrix({{0.5, 0.5, 0.5, 0.5}, {0.1, 0.1, 0.1, 0.1}, {0.7, 0.7, 0.7, 0.7}}));
    CHECK(f.statistic == 0.0);
    CHECK(f.p_value == 1.0);
    CHECK(f.mean_ranks == std::vector<double>(4, 2.5));
}

TEST_CASE("friedman statistic matches the counting oracle, ties included")
{
    std::mt19937_64 rng(12);
    for (int t = 0; t < 200; ++t) {
        const auto m = random_matrix(2 + rng() % 12, 2 + rng() % 8, rng, t % 2 == 0);
        const auto f = friedman(m);
        CHECK(f.statistic == doctest::Approx(oracle::friedman_stat(m.scores)).epsilon(1e-12));
        CHECK(f.statistic >= 0.0);
        CHECK(f.p_value >= 0.0);
        CHECK(f.p_value <= 1.0);
    }
}

TEST_CASE("friedman p-value follows the chi-square survival function")
{
    std::mt19937_64 rng(13);
    for (int t = 0; t < 50; ++t) {
        const auto m3 = random_matrix(6, 3, rng);
        const auto f3 = friedman(m3);
        CHECK(f3.p_value == doctest::Approx(std::exp(-f3.statistic / 2)).epsilon(1e-10));
        // Four degrees of freedom: (1 + x/2) exp(-x/2).
        const auto m5 = random_matrix(6, 5, rng);
        const auto f5 = friedman(m5);
        if (f5.statistic > 0) {
            CHECK(f5.p_value ==
                  doctest::Approx((1 + f5.statistic / 2) * std::exp(-f5.statistic / 2)).epsilon(1e-10));
        }
    }
}

TEST_CASE("friedman p-value agrees with permutations when cases are plentiful")
{
    std::mt19937_64 rng(14);
    for (int t = 0; t < 3; ++t) {
        const auto m = random_matrix(30, 4, rng);
        const double perm = oracle::friedman_permutation_p(m.scores, 20000, 100 + t);
        CHECK(std::abs(friedman(m).p_value - perm) < 0.02);
    }
}

TEST_CASE("friedman rejects degenerate matrices")
{
    CHECK_THROWS_AS(friedman(matrix({{0.1}, {0.2}})), std::invalid_argument);
    CHECK_THROWS_AS(friedman(matrix({{0.1, 0.2}})), std::invalid_argument);
    auto m = matrix({{0.1, 0.2}, {0.3, NAN}});
    CHECK_THROWS_AS(friedman(m), std::invalid_argument);
    m = matrix({{0.1, 0.2}, {0.3, 0.4}});
    m.scores[1].pop_back();
    CHECK_THROWS_AS(friedman(m), std::invalid_argument);
}

TEST_CASE("nemenyi constants and critical difference")
{
    CHECK(nemenyi_q(0.05, 5) == 2.728);
    CHECK(nemenyi_q(0.01, 3) == 2.913);
    CHECK(nemenyi_q(0.10, 10) == 2.920);
    CHECK_THROWS_AS(nemenyi_q(0.05, 11), std::invalid_argument);
    CHECK_THROWS_AS(nemenyi_q(0.05, 1), std::invalid_argument);
    CHECK_THROWS_AS(nemenyi_q(0.02, 4), std::invalid_argument);
    CHECK(critical_difference(0.05, 5, 30) == doctest::Approx(2.728 * std::sqrt(5.0 * 6.0 / 180.0)));
    CHECK(critical_difference(0.05, 5, 30) == doctest::Approx(1.1139).epsilon(1e-3));
}

TEST_CASE("nemenyi: a uniformly worst method loses to every other")
{
    std::mt19937_64 rng(15);
    std::uniform_real_distribution<double> u(0.5, 1.0);
    std::vector<std::vector<double>> s(30, std::vector<double>(5));
    for (auto& row : s) {
        for (std::size_t j = 0; j < 4; ++j) row[j] = u(rng);
        row[4] = u(rng) - 1.0;
    }
    const auto v = nemenyi(matrix(s), 0.05);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(v.cells[4][j] == Verdict::worse);
        CHECK(v.cells[j][4] == Verdict::better);
    }
    CHECK(v.mean_ranks[4] == 5.0);
}

TEST_CASE("nemenyi: identical scores give an all-zero table")
{
    const auto v = nemenyi(matrix({{1, 1, 1}, {2, 2, 2}, {3, 3, 3}}));
    for (const auto& row : v.cells) {
        for (auto c : row) CHECK(c == Verdict::tie);
    }
    const auto table = v.format_table();
    CHECK(table.find('+') == std::string::npos);
    CHECK(table.find('-') == std::string::npos);
}

TEST_CASE("nemenyi verdicts are antisymmetric and rank invariant")
{
    std::mt19937_64 rng(16);
    for (int t = 0; t < 50; ++t) {
        auto m = random_matrix(10 + rng() % 20, 2 + rng() % 6, rng);
        // Push method 0 up so some verdicts are non-zero.
        for (auto& row : m.scores) row[0] += 0.4;
        const auto v = nemenyi(m);
        const std::size_t M = m.method_count();
        for (std::size_t a = 0; a < M; ++a) {
            CHECK(v.cells[a][a] == Verdict::tie);
            for (std::size_t b = 0; b < M; ++b) {
                CHECK(static_cast<int>(v.cells[a][b]) == -static_cast<int>(v.cells[b][a]));
            }
        }
        // A strictly increasing transform per case changes nothing.
        auto warped = m;
        for (auto& row : warped.scores) {
            for (auto& x : row) x = std::exp(3 * x) + std::cbrt(x);
        }
        const auto fw = friedman(warped);
        CHECK(fw.statistic == doctest::Approx(friedman(m).statistic).epsilon(1e-12));
        CHECK(nemenyi(warped).cells == v.cells);
    }
}

TEST_CASE("shifting one method moves its verdicts monotonically")
{
    std::mt19937_64 rng(17);
    const auto base = random_matrix(40, 4, rng);
    std::vector<std::vector<int>> history(4);
    for (double c = -1.0; c <= 1.0; c += 0.05) {
        auto m = base;
        for (auto& row : m.scores) row[0] += c;
        const auto v = nemenyi(m);
        for (std::size_t b = 1; b < 4; ++b) history[b].push_back(static_cast<int>(v.cells[0][b]));
    }
    for (std::size_t b = 1; b < 4; ++b) {
        CHECK(history[b].front() == -1);
        CHECK(history[b].back() == 1);
        for (std::size_t i = 1; i < history[b].size(); ++i) {
            CHECK(history[b][i] >= history[b][i - 1]);
            CHECK(history[b][i] - history[b][i - 1] <= 1);
        }
    }
}

TEST_CASE("verdict table and CSV layout")
{
    auto m = matrix({{3, 2, 1}, {3, 2, 1}, {3, 2, 1}, {3, 2, 1}, {3, 2, 1}, {3, 2, 1}, {3, 2, 1}, {3, 2, 1}});
    m.methods = {"adaptive", "semi", "single"};
    const auto v = nemenyi(m);
    // CD = 2.343 * sqrt(12/48) = 1.17: only the two-rank gap is significant.
    CHECK(v.cells[0][2] == Verdict::better);
    CHECK(v.cells[0][1] == Verdict::tie);
    std::stringstream csv;
    v.write_csv(csv);
    std::string line;
    std::getline(csv, line);
    CHECK(line == "method,adaptive,semi,single,mean_rank");
    std::getline(csv, line);
    CHECK(line == "adaptive,,0,+,1");
    std::getline(csv, line);
    CHECK(line == "semi,0,,0,2");
    std::getline(csv, line);
    CHECK(line == "single,-,0,,3");
    CHECK(v.format_table().find("adaptive") != std::string::npos);
}

TEST_CASE("score matrices from evaluation cases")
{
    const std::vector<CaseMetrics> a{make_case("p1", "disk", 0.9, 2.0, -5.0), make_case("p2", "disk", 0.8, 3.0, 10.0),
                                     make_case("p3", "disk", 0.7, std::nullopt, std::nullopt)};
    const std::vector<CaseMetrics> b{make_case("p2", "disk", 0.6, 1.0, -20.0), make_case("p1", "disk", 0.5, 4.0, 1.0),
                                     make_case("p3", "disk", 0.4, 5.0, 3.0)};
    const auto dsc = build_score_matrix({"a", "b"}, {a, b}, Metric::dsc);
    REQUIRE(dsc.case_count() == 3);
    CHECK(dsc.cases[0] == "p1/disk");
    CHECK(dsc.scores[0] == std::vector<double>{0.9, 0.5});
    CHECK(dsc.scores[1] == std::vector<double>{0.8, 0.6});

    const auto hd = build_score_matrix({"a", "b"}, {a, b}, Metric::hd95);
    REQUIRE(hd.case_count() == 2);  // p3 undefined for method a
    CHECK(hd.scores[0] == std::vector<double>{-2.0, -4.0});
    CHECK(hd.scores[1] == std::vector<double>{-3.0, -1.0});

    const auto ravd = build_score_matrix({"a", "b"}, {a, b}, Metric::ravd);
    CHECK(ravd.scores[0] == std::vector<double>{-5.0, -1.0});
    CHECK(ravd.scores[1] == std::vector<double>{-10.0, -20.0});

    auto c = b;
    c.back().patient_id = "p4";
    CHECK_THROWS_AS(build_score_matrix({"a", "c"}, {a, c}, Metric::dsc), std::invalid_argument);
    c = b;
    c.pop_back();
    CHECK_THROWS_AS(build_score_matrix({"a", "c"}, {a, c}, Metric::dsc), std::invalid_argument);
    CHECK_THROWS_AS(build_score_matrix({"a"}, {a, b}, Metric::dsc), std::invalid_argument);
}
