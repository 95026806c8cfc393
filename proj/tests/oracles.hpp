#pragma once

// Brute-force reference implementations. They follow the textbook formulas
// directly and share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

inline double soft_dsc(const std::vector<std::uint8_t>& t, const std::vector<double>& p, double eps)
{
    double inter = 0, st = 0, sp = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        inter += t[i] * p[i];
        st += t[i];
        sp += p[i];
    }
    return -(2 * inter + eps) / (st + sp + eps);
}

inline double ce_binary(const std::vector<std::uint8_t>& t, const std::vector<double>& p, double clamp)
{
    double s = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double q = std::min(std::max(p[i], clamp), 1 - clamp);
        s += t[i] ? -std::log(q) : -std::log(1 - q);
    }
    return s / static_cast<double>(t.size());
}

inline double ce_literal(const std::vector<std::uint8_t>& t, const std::vector<double>& p, double clamp)
{
    double s = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i]) s -= std::log(std::min(std::max(p[i], clamp), 1 - clamp));
    }
    return s;
}

/// One slice x structure cell of a random partially annotated batch.
struct Cell {
    bool available = false;
    std::vector<std::uint8_t> truth;
    std::vector<double> pred;
};

/// cells[i][k]; weights w_k. Returns sum_k w_k sum_i a L / sum_k w_k sum_i a.
inline double weighted_batch_loss(const std::vector<std::vector<Cell>>& cells, const std::vector<double>& w,
                                  double alpha, double eps, bool literal, double clamp)
{
    double num = 0, den = 0;
    for (const auto& slice : cells) {
        for (std::size_t k = 0; k < slice.size(); ++k) {
            if (!slice[k].available) continue;
            const auto& c = slice[k];
            const double ce = literal ? ce_literal(c.truth, c.pred, clamp) : ce_binary(c.truth, c.pred, clamp);
            num += w[k] * (alpha * soft_dsc(c.truth, c.pred, eps) + (1 - alpha) * ce);
            den += w[k];
        }
    }
    return den > 0 ? num / den : 0.0;
}

// ---------------------------------------------------------------------------
// Class statistics of the weighted losses.

enum class Transform { identity, inverse, complement };

/// Fresh-state EWA weights after one observation, computed from scratch.
inline std::vector<double> ewa_weights(const std::vector<double>& obs, const std::vector<bool>& seen, double beta,
                                       Transform transform)
{
    const std::size_t K = obs.size();
    std::vector<double> corrected(K, 1.0);
    for (std::size_t k = 0; k < K; ++k) {
        if (!seen[k]) continue;
        const double raw = (1 - beta) * obs[k];
        corrected[k] = std::min(1.0, std::max(1e-6, raw / (1 - beta)));
    }
    double smallest = 1e300;
    for (std::size_t k = 0; k < K; ++k) {
        if (seen[k]) smallest = std::min(smallest, corrected[k]);
    }
    std::vector<double> w(K, 1.0);
    for (std::size_t k = 0; k < K; ++k) {
        if (!seen[k]) continue;
        switch (transform) {
        case Transform::identity: w[k] = corrected[k]; break;
        case Transform::inverse: w[k] = smallest / corrected[k]; break;
        case Transform::complement: w[k] = std::max(1e-6, 1 - corrected[k]); break;
        }
    }
    return w;
}

/// Per-class observation computed by brute force over the oracle cells.
inline void class_observations(const std::vector<std::vector<Cell>>& cells, bool per_slice, std::vector<double>& obs,
                               std::vector<bool>& seen)
{
    const std::size_t K = cells.front().size();
    obs.assign(K, 0.0);
    seen.assign(K, false);
    for (std::size_t k = 0; k < K; ++k) {
        double hits = 0, total = 0;
        for (const auto& slice : cells) {
            if (!slice[k].available) continue;
            seen[k] = true;
            const double pos = std::accumulate(slice[k].truth.begin(), slice[k].truth.end(), 0.0);
            if (per_slice) {
                hits += pos > 0 ? 1 : 0;
                total += 1;
            } else {
                hits += pos;
                total += static_cast<double>(slice[k].truth.size());
            }
        }
        if (total > 0) obs[k] = hits / total;
    }
}

// ---------------------------------------------------------------------------
// Surface distances on a stack of slices (row-major, slice-major).

struct Pt {
    double x, y, z;
};

inline std::vector<Pt> edge_points(const std::vector<std::uint8_t>& v, int rows, int cols, int slices,
                                   double sr = 1, double sc = 1, double ss = 1)
{
    auto at = [&](int r, int c, int s) {
        if (r < 0 || c < 0 || r >= rows || c >= cols) return 0;
        return static_cast<int>(v[(static_cast<std::size_t>(s) * rows + r) * cols + c]);
    };
    std::vector<Pt> out;
    for (int s = 0; s < slices; ++s) {
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                if (!at(r, c, s)) continue;
                if (at(r - 1, c, s) && at(r + 1, c, s) && at(r, c - 1, s) && at(r, c + 1, s)) continue;
                out.push_back({c * sc, r * sr, s * ss});
            }
        }
    }
    return out;
}

inline std::vector<double> all_pairs_nearest(const std::vector<Pt>& a, const std::vector<Pt>& b)
{
    std::vector<double> out;
    for (const auto& p : a) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : b) {
            best = std::min(best, std::sqrt((p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y) +
                                            (p.z - q.z) * (p.z - q.z)));
        }
        out.push_back(best);
    }
    return out;
}

/// numpy-style "linear" percentile.
inline double pct(std::vector<double> v, double q)
{
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1) * q / 100.0;
    const auto i = static_cast<std::size_t>(h);
    if (i + 1 >= v.size()) return v.back();
    return v[i] + (h - static_cast<double>(i)) * (v[i + 1] - v[i]);
}

inline double hd95(const std::vector<Pt>& a, const std::vector<Pt>& b)
{
    return std::max(pct(all_pairs_nearest(a, b), 95), pct(all_pairs_nearest(b, a), 95));
}

inline double assd(const std::vector<Pt>& a, const std::vector<Pt>& b)
{
    double s = 0;
    for (double d : all_pairs_nearest(a, b)) s += d;
    for (double d : all_pairs_nearest(b, a)) s += d;
    return s / static_cast<double>(a.size() + b.size());
}

// ---------------------------------------------------------------------------
// Friedman statistic; scores[i][j] for case i and method j, higher is better.

inline double friedman_stat(const std::vector<std::vector<double>>& scores)
{
    const double n = static_cast<double>(scores.size());
    const std::size_t m = scores.front().size();
    std::vector<double> mean_rank(m, 0.0);
    for (const auto& row : scores) {
        for (std::size_t j = 0; j < m; ++j) {
            double better = 0, tied = 0;
            for (std::size_t l = 0; l < m; ++l) {
                if (l == j) continue;
                if (row[l] > row[j]) better += 1;
                if (row[l] == row[j]) tied += 1;
            }
            mean_rank[j] += (1 + better + tied / 2) / n;
        }
    }
    const double M = static_cast<double>(m);
    double ss = 0;
    for (double r : mean_rank) ss += r * r;
    return 12 * n / (M * (M + 1)) * (ss - M * (M + 1) * (M + 1) / 4);
}

/// Monte Carlo p-value: within-case permutations of the scores.
inline double friedman_permutation_p(const std::vector<std::vector<double>>& scores, int draws, std::uint64_t seed)
{
    const double observed = friedman_stat(scores);
    std::mt19937_64 rng(seed);
    auto shuffled = scores;
    int hits = 0;
    for (int b = 0; b < draws; ++b) {
        for (auto& row : shuffled) std::shuffle(row.begin(), row.end(), rng);
        if (friedman_stat(shuffled) >= observed - 1e-9) ++hits;
    }
    return static_cast<double>(hits) / draws;
}

}  // namespace oracle
