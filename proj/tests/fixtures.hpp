#pragma once

// Random inputs shared by the unit and acceptance tests.

#include <cmath>
#include <random>
#include <vector>

#include "adaseg/losses.hpp"
#include "adaseg/metrics.hpp"
#include "oracles.hpp"

namespace fixture {

struct RandomBatch {
    adaseg::BatchPrediction batch;
    std::vector<std::vector<oracle::Cell>> cells;  // [slice][structure]
};

/// n slices, k structures, p pixels. Each cell is annotated with probability
/// `avail`; masks have a random foreground density (sometimes empty).
inline RandomBatch random_batch(std::mt19937_64& rng, std::size_t n, std::size_t k, std::size_t p, double avail = 0.6,
                                double p_lo = 0.0, double p_hi = 1.0)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RandomBatch out{adaseg::BatchPrediction(n, k, p), std::vector<std::vector<oracle::Cell>>(n, std::vector<oracle::Cell>(k))};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < k; ++c) {
            auto& cell = out.cells[i][c];
            auto pred = out.batch.pred(i, c);
            for (auto& v : pred) v = p_lo + (p_hi - p_lo) * u(rng);
            cell.pred.assign(pred.begin(), pred.end());
            cell.available = u(rng) < avail;
            if (!cell.available) continue;
            const double density = u(rng) < 0.15 ? 0.0 : u(rng);
            cell.truth.resize(p);
            for (auto& t : cell.truth) t = u(rng) < density ? 1 : 0;
            out.batch.set_truth(i, c, cell.truth);
        }
    }
    return out;
}

/// Largest |library - brute force| over the unweighted, fixed-weight, and
/// voxel / slice EWA-weighted losses (three transforms each) of one random
/// batch with n <= 8, K <= 4 and grids up to 16x16.
inline double loss_oracle_gap(std::mt19937_64& rng, int trial)
{
    using namespace adaseg;
    std::uniform_real_distribution<double> u(0, 1);
    const std::size_t n = 1 + rng() % 8, K = 1 + rng() % 4, side = 1 + rng() % 16;
    auto rb = random_batch(rng, n, K, side * side);
    LossConfig c;
    c.alpha = u(rng);
    c.ce_mode = trial % 2 ? CeMode::literal : CeMode::binary;
    const bool literal = c.ce_mode == CeMode::literal;
    auto expected = [&](const std::vector<double>& w) {
        return oracle::weighted_batch_loss(rb.cells, w, c.alpha, c.epsilon, literal, c.prob_clamp);
    };

    double gap = std::abs(data_adaptive_loss(rb.batch, c).value - expected(std::vector<double>(K, 1.0)));
    std::vector<double> w(K);
    for (auto& x : w) x = 0.01 + u(rng);
    gap = std::max(gap, std::abs(class_weighted_loss(rb.batch, w, c).value - expected(w)));

    const std::pair<WeightTransform, oracle::Transform> transforms[] = {
        {WeightTransform::identity, oracle::Transform::identity},
        {WeightTransform::inverse, oracle::Transform::inverse},
        {WeightTransform::complement, oracle::Transform::complement}};
    for (const auto& [transform, reference] : transforms) {
        c.transform = transform;
        for (bool per_slice : {false, true}) {
            std::vector<double> obs;
            std::vector<bool> seen;
            oracle::class_observations(rb.cells, per_slice, obs, seen);
            ClassWeightState state(K, c.beta);
            const auto got = per_slice ? slice_weighted_loss(rb.batch, state, c) : voxel_weighted_loss(rb.batch, state, c);
            gap = std::max(gap, std::abs(got.value - expected(oracle::ewa_weights(obs, seen, c.beta, reference))));
        }
    }
    return gap;
}

/// Random blob-like mask on a rows x cols grid, possibly empty.
inline std::vector<std::uint8_t> random_mask(std::mt19937_64& rng, std::size_t rows, std::size_t cols)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::uint8_t> m(rows * cols, 0);
    if (u(rng) < 0.05) return m;
    const int blobs = 1 + static_cast<int>(u(rng) * 3);
    for (int b = 0; b < blobs; ++b) {
        const double cr = u(rng) * rows, cc = u(rng) * cols, rad = 1 + u(rng) * rows / 3.0;
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                if ((r - cr) * (r - cr) + (c - cc) * (c - cc) <= rad * rad) m[r * cols + c] = 1;
            }
        }
    }
    // Speckle so boundaries are irregular.
    for (auto& v : m) {
        if (u(rng) < 0.05) v ^= 1;
    }
    return m;
}

inline adaseg::BinaryVolume to_volume(const std::vector<std::uint8_t>& m, std::size_t rows, std::size_t cols,
                                      std::size_t slices = 1, std::array<double, 3> spacing = {1, 1, 1})
{
    adaseg::BinaryVolume v(rows, cols, slices, spacing);
    for (std::size_t s = 0; s < slices; ++s) {
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) v.at(r, c, s) = m[(s * rows + r) * cols + c];
        }
    }
    return v;
}

}  // namespace fixture
