#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "adaseg/losses.hpp"
#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace adaseg;
using fixture::random_batch;

namespace {

using Bytes = std::vector<std::uint8_t>;
using Reals = std::vector<double>;

}  // namespace

// ---------------------------------------------------------------------------
// Worked examples

TEST_CASE("soft DSC worked examples")
{
    CHECK(soft_dsc_loss(Bytes{1, 0}, Reals{1, 0}, 1e-5) == doctest::Approx(-1.0).epsilon(1e-5));
    CHECK(soft_dsc_loss(Bytes{0, 0}, Reals{0, 0}, 1e-5) == -1.0);
    CHECK(soft_dsc_loss(Bytes{1, 1, 0, 0}, Reals{1, 0, 0, 0}, 1e-5) == doctest::Approx(-0.6666678).epsilon(1e-7));
    CHECK_THROWS_AS(soft_dsc_loss(Bytes{1}, Reals{1, 0}, 1e-5), std::invalid_argument);
    CHECK_THROWS_AS(soft_dsc_loss(Bytes{1}, Reals{1}, 0.0), std::invalid_argument);
}

TEST_CASE("cross entropy worked examples")
{
    CHECK(ce_loss(Bytes{1}, Reals{0.5}, CeMode::literal, 1e-7) == doctest::Approx(0.693147).epsilon(1e-6));
    CHECK(ce_loss(Bytes{1, 0}, Reals{0.5, 0.5}, CeMode::binary, 1e-7) == doctest::Approx(0.693147).epsilon(1e-6));
    CHECK(ce_loss(Bytes{1}, Reals{1.0}, CeMode::binary, 1e-7) <= 1.1e-7);
    CHECK(ce_loss(Bytes{1}, Reals{1.0}, CeMode::binary, 1e-7) >= 0.0);
    CHECK_THROWS_AS(ce_loss(Bytes{1, 0}, Reals{1}, CeMode::binary, 1e-7), std::invalid_argument);
}

TEST_CASE("combined loss endpoints and worked example")
{
    const Bytes t{1, 1, 0, 0};
    const Reals p{1, 0, 0, 0};
    LossConfig c;
    c.ce_mode = CeMode::literal;
    c.alpha = 1.0;
    CHECK(combined_loss(t, p, c) == soft_dsc_loss(t, p, c.epsilon));
    c.alpha = 0.0;
    CHECK(combined_loss(t, p, c) == ce_loss(t, p, CeMode::literal, c.prob_clamp));
    c.alpha = 0.5;
    CHECK(combined_loss(t, p, c) == doctest::Approx(7.7257140).epsilon(1e-7));
    CHECK(combined_loss(t, p, c) ==
          doctest::Approx(0.5 * oracle::soft_dsc(t, p, 1e-5) + 0.5 * oracle::ce_literal(t, p, 1e-7)).epsilon(1e-12));
}

TEST_CASE("loss config validation")
{
    LossConfig c;
    CHECK_NOTHROW(c.validate());
    c.alpha = 1.5;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = LossConfig{};
    c.epsilon = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = LossConfig{};
    c.beta = 1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    CHECK(parse_weighting("slice") == Weighting::slice);
    CHECK(parse_weight_transform("complement") == WeightTransform::complement);
    CHECK(parse_ce_mode("literal") == CeMode::literal);
    CHECK_THROWS_AS(parse_weighting("focal"), std::invalid_argument);
}

TEST_CASE("data-adaptive loss: definitional examples")
{
    LossConfig c;
    BatchPrediction b(2, 2, 4);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 1);
    for (auto& v : b.probabilities) v = u(rng);
    b.set_truth(0, 0, {1, 0, 0, 1});
    b.set_truth(1, 0, {0, 1, 1, 0});
    b.set_truth(1, 1, {1, 1, 0, 0});
    const double la1 = combined_loss(b.truth(0, 0), b.pred(0, 0), c);
    const double lb1 = combined_loss(b.truth(1, 0), b.pred(1, 0), c);
    const double lb2 = combined_loss(b.truth(1, 1), b.pred(1, 1), c);
    const auto r = data_adaptive_loss(b, c);
    CHECK(r.value == doctest::Approx((la1 + lb1 + lb2) / 3).epsilon(1e-14));
    CHECK_FALSE(r.no_supervision);
    // The missing cell's gradient is exactly zero.
    for (std::size_t i = 0; i < 4; ++i) CHECK(r.gradient[(0 * 2 + 1) * 4 + i] == 0.0);

    BatchPrediction empty(2, 2, 4);
    const auto z = data_adaptive_loss(empty, c);
    CHECK(z.no_supervision);
    CHECK(z.value == 0.0);
    CHECK(std::all_of(z.gradient.begin(), z.gradient.end(), [](double g) { return g == 0.0; }));
}

TEST_CASE("data-adaptive loss with full availability is the plain mean")
{
    std::mt19937_64 rng(2);
    for (int t = 0; t < 50; ++t) {
        auto rb = random_batch(rng, 4, 3, 16, 1.0);
        LossConfig c;
        double sum = 0;
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t k = 0; k < 3; ++k) sum += combined_loss(rb.batch.truth(i, k), rb.batch.pred(i, k), c);
        }
        CHECK(std::abs(data_adaptive_loss(rb.batch, c).value - sum / 12) < 1e-12);
    }
}

// ---------------------------------------------------------------------------
// Oracle agreement

TEST_CASE("batch losses agree with brute-force loops")
{
    std::mt19937_64 rng(3);
    double worst = 0;
    for (int t = 0; t < 1000; ++t) worst = std::max(worst, fixture::loss_oracle_gap(rng, t));
    CHECK(worst < 1e-10);
}

TEST_CASE("class-weighted loss: two structures with weights 1 and 0.5")
{
    std::mt19937_64 rng(4);
    auto rb = random_batch(rng, 3, 2, 9, 1.0);
    LossConfig c;
    double l1 = 0, l2 = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        l1 += combined_loss(rb.batch.truth(i, 0), rb.batch.pred(i, 0), c);
        l2 += combined_loss(rb.batch.truth(i, 1), rb.batch.pred(i, 1), c);
    }
    const std::vector<double> w{1.0, 0.5};
    CHECK(std::abs(class_weighted_loss(rb.batch, w, c).value - (l1 + 0.5 * l2) / (3 + 0.5 * 3)) < 1e-10);
    // Equal weights cancel.
    const std::vector<double> same{0.3, 0.3};
    CHECK(std::abs(class_weighted_loss(rb.batch, same, c).value - data_adaptive_loss(rb.batch, c).value) < 1e-14);
}

// ---------------------------------------------------------------------------
// Class statistics

TEST_CASE("EWA statistics with bias correction")
{
    ClassWeightState s(2, 0.9);
    auto c = s.update(std::vector<double>{1.0, 0.0});
    CHECK(s.raw()[0] == doctest::Approx(0.1));
    CHECK(c[0] == doctest::Approx(1.0));
    CHECK(c[1] == kWeightFloor);
    c = s.update(std::vector<double>{1.0, 0.0});
    CHECK(s.raw()[0] == doctest::Approx(0.19));
    CHECK(c[0] == doctest::Approx(1.0));
    CHECK(s.steps()[0] == 2);

    // Step counters are per class.
    ClassWeightState g(3, 0.99);
    g.update(std::vector<double>{0.2, 0.0, 0.5}, std::vector<std::uint8_t>{1, 0, 1});
    CHECK(g.steps()[1] == 0);
    CHECK(g.raw()[1] == 0.0);
    CHECK(g.corrected()[1] == 1.0);
    CHECK(g.corrected()[0] == doctest::Approx(0.2));
    g.add_class();
    CHECK(g.classes() == 4);
    CHECK(g.steps()[3] == 0);
    CHECK_THROWS_AS(g.update(std::vector<double>{0.2, 0.1, 1.5, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(g.update(std::vector<double>{0.2}), std::invalid_argument);
}

TEST_CASE("class observations")
{
    BatchPrediction b(3, 2, 4);
    b.set_truth(0, 0, {1, 1, 0, 0});
    b.set_truth(1, 0, {0, 0, 0, 0});
    b.set_truth(2, 1, {1, 1, 1, 0});
    const auto slice = positive_slice_frequencies(b);
    CHECK(slice.value[0] == 0.5);
    CHECK(slice.value[1] == 1.0);
    CHECK(slice.observed == std::vector<std::uint8_t>{1, 1});
    const auto voxel = voxel_frequencies(b);
    CHECK(voxel.value[0] == 0.25);
    CHECK(voxel.value[1] == 0.75);

    BatchPrediction none(2, 2, 4);
    none.set_truth(0, 0, {1, 0, 0, 0});
    const auto obs = voxel_frequencies(none);
    CHECK(obs.observed == std::vector<std::uint8_t>{1, 0});

    // A class that never appears keeps an untouched accumulator.
    ClassWeightState mu(2, 0.99);
    LossConfig c;
    for (int i = 0; i < 5; ++i) (void)voxel_weighted_loss(none, mu, c);
    CHECK(mu.steps()[1] == 0);
    CHECK(mu.raw()[1] == 0.0);
    CHECK(mu.steps()[0] == 5);
}

TEST_CASE("weight transforms")
{
    const std::vector<double> corrected{0.5, 0.25, 1.0};
    const std::vector<std::size_t> steps{1, 1, 0};
    CHECK(transform_weights(corrected, steps, WeightTransform::identity) == std::vector<double>{0.5, 0.25, 1.0});
    CHECK(transform_weights(corrected, steps, WeightTransform::inverse) == std::vector<double>{0.5, 1.0, 1.0});
    CHECK(transform_weights(corrected, steps, WeightTransform::complement) == std::vector<double>{0.5, 0.75, 1.0});
}

// ---------------------------------------------------------------------------
// Properties

TEST_CASE("loss ranges and convexity")
{
    std::mt19937_64 rng(5);
    for (int t = 0; t < 300; ++t) {
        auto rb = random_batch(rng, 1, 1, 64, 1.0);
        const auto& cell = rb.cells[0][0];
        const double d = soft_dsc_loss(cell.truth, cell.pred, 1e-5);
        CHECK(d >= -1.0);
        CHECK(d < 0.0);
        const double ce = ce_loss(cell.truth, cell.pred, CeMode::binary, 1e-7);
        CHECK(ce >= 0.0);
        LossConfig c;
        c.alpha = std::uniform_real_distribution<double>(0, 1)(rng);
        const double comb = combined_loss(cell.truth, cell.pred, c);
        CHECK(comb >= std::min(d, ce) - 1e-12);
        CHECK(comb <= std::max(d, ce) + 1e-12);
    }
}

TEST_CASE("data-adaptive loss is invariant to slice and structure permutations")
{
    std::mt19937_64 rng(6);
    LossConfig c;
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 2 + rng() % 5, K = 2 + rng() % 3, P = 9;
        auto rb = random_batch(rng, n, K, P);
        const double base = data_adaptive_loss(rb.batch, c).value;

        std::vector<std::size_t> sp(n), kp(K);
        std::iota(sp.begin(), sp.end(), 0);
        std::iota(kp.begin(), kp.end(), 0);
        std::shuffle(sp.begin(), sp.end(), rng);
        std::shuffle(kp.begin(), kp.end(), rng);
        BatchPrediction perm(n, K, P);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < K; ++k) {
                const auto src = rb.batch.pred(sp[i], kp[k]);
                std::copy(src.begin(), src.end(), perm.pred(i, k).begin());
                const auto tr = rb.batch.truth(sp[i], kp[k]);
                perm.set_truth(i, k, Bytes(tr.begin(), tr.end()));
            }
        }
        CHECK(std::abs(data_adaptive_loss(perm, c).value - base) < 1e-12);

        // Appending a slice without any annotation changes nothing.
        BatchPrediction more(n + 1, K, P);
        std::copy(rb.batch.probabilities.begin(), rb.batch.probabilities.end(), more.probabilities.begin());
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < K; ++k) {
                const auto tr = rb.batch.truth(i, k);
                more.set_truth(i, k, Bytes(tr.begin(), tr.end()));
            }
        }
        for (auto& v : more.pred(n, 0)) v = 0.9;
        CHECK(data_adaptive_loss(more, c).value == data_adaptive_loss(rb.batch, c).value);
    }
}

// ---------------------------------------------------------------------------
// Gradients

TEST_CASE("per-mask loss gradients match central differences")
{
    std::mt19937_64 rng(7);
    double worst = 0;
    for (int t = 0; t < 100; ++t) {
        auto rb = random_batch(rng, 1, 1, 64, 1.0, 0.02, 0.98);
        const auto truth = rb.cells[0][0].truth;
        auto x = rb.cells[0][0].pred;
        std::vector<double> g(x.size());
        LossConfig c;
        c.alpha = 0.3;

        (void)soft_dsc_loss(truth, x, 1e-5, g);
        worst = std::max(worst, gradcheck::max_fd_error(x, g, [&](const Reals& p) { return soft_dsc_loss(truth, p, 1e-5); }));
        (void)ce_loss(truth, x, CeMode::binary, 1e-7, g);
        worst = std::max(worst,
                         gradcheck::max_fd_error(x, g, [&](const Reals& p) { return ce_loss(truth, p, CeMode::binary, 1e-7); }));
        (void)ce_loss(truth, x, CeMode::literal, 1e-7, g);
        worst = std::max(worst,
                         gradcheck::max_fd_error(x, g, [&](const Reals& p) { return ce_loss(truth, p, CeMode::literal, 1e-7); }));
        (void)combined_loss(truth, x, c, g);
        worst = std::max(worst, gradcheck::max_fd_error(x, g, [&](const Reals& p) { return combined_loss(truth, p, c); }));
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("batch loss gradients match central differences")
{
    std::mt19937_64 rng(8);
    double worst = 0;
    for (int t = 0; t < 100; ++t) {
        auto rb = random_batch(rng, 2, 3, 16, 0.6, 0.02, 0.98);
        LossConfig c;
        c.alpha = 0.6;
        c.weighting = static_cast<Weighting>(t % 3);
        ClassWeightState state(3, c.beta);
        auto probe_state = state;
        const auto loss = batch_loss(rb.batch, c, &probe_state);
        if (loss.no_supervision) continue;
        auto x = rb.batch.probabilities;
        worst = std::max(worst, gradcheck::max_fd_error(x, loss.gradient, [&](const Reals& p) {
                             auto b = rb.batch;
                             b.probabilities = p;
                             auto s = state;  // same statistics for every probe
                             return batch_loss(b, c, &s).value;
                         }));
    }
    CHECK(worst < 1e-3);
}
