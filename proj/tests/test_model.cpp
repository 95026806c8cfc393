#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "adaseg/losses.hpp"
#include "adaseg/model.hpp"
#include "gradcheck.hpp"

using namespace adaseg;

namespace {

Tensor random_images(std::size_t n, std::size_t rows, std::size_t cols, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    Tensor t({n, 1, rows, cols});
    for (auto& v : t.values()) v = u(rng);
    return t;
}

}  // namespace

TEST_CASE("model parameter count for depth 3, base 8")
{
    auto m = Model::build({3, 8, 0.0, 2, 64, 64}, {"a", "b"}, 1);
    // Encoder 1->8->8, 8->16->16, 16->32->32; kernels plus BN scale/offset.
    const std::size_t enc = (9 * 1 * 8 + 9 * 8 * 8 + 2 * 16) + (9 * 8 * 16 + 9 * 16 * 16 + 2 * 32) +
                            (9 * 16 * 32 + 9 * 32 * 32 + 2 * 64);
    const std::size_t up = (4 * 32 * 16 + 16) + (4 * 16 * 8 + 8);
    const std::size_t dec = (9 * 32 * 16 + 9 * 16 * 16 + 2 * 32) + (9 * 16 * 8 + 9 * 8 * 8 + 2 * 16);
    const std::size_t head = 8 * 2 + 2;
    CHECK(m.trainable_count() == enc + up + dec + head);
}

TEST_CASE("model build validates the spec")
{
    CHECK_THROWS_AS(Model::build({3, 8, 0.0, 1, 62, 64}, {"a"}, 1), std::invalid_argument);
    CHECK_THROWS_AS(Model::build({6, 8, 0.0, 1, 64, 64}, {"a"}, 1), std::invalid_argument);
    CHECK_THROWS_AS(Model::build({3, 12, 0.0, 1, 64, 64}, {"a"}, 1), std::invalid_argument);
    CHECK_THROWS_AS(Model::build({3, 8, 0.8, 1, 64, 64}, {"a"}, 1), std::invalid_argument);
    CHECK_THROWS_AS(Model::build({3, 8, 0.0, 2, 64, 64}, {"a"}, 1), std::invalid_argument);
    CHECK_NOTHROW(Model::build({5, 8, 0.75, 1, 16, 16}, {"a"}, 1));
}

TEST_CASE("model forward shape, range and determinism")
{
    const ModelSpec spec{3, 8, 0.3, 3, 32, 32};
    auto a = Model::build(spec, {"a", "b", "c"}, 7);
    auto b = Model::build(spec, {"a", "b", "c"}, 7);
    auto pa = a.parameters();
    auto pb = b.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);

    const auto x = random_images(2, 32, 32, 3);
    const auto y = a.forward(x, Mode::eval);
    CHECK(y.shape() == Shape{2, 3, 32, 32});
    for (double v : y.values()) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
    CHECK(a.forward(x, Mode::eval) == y);
    CHECK_THROWS_AS(a.forward(random_images(1, 16, 32, 1), Mode::eval), std::invalid_argument);
}

TEST_CASE("eval forward leaves the model untouched and train forward updates running statistics")
{
    auto m = Model::build({3, 8, 0.0, 1, 16, 16}, {"a"}, 2);
    const auto x = random_images(2, 16, 16, 4);
    const auto before = m.parameters()[3]->value;  // enc0.bn1.running_mean
    (void)m.forward(x, Mode::eval);
    CHECK(m.parameters()[3]->value == before);
    (void)m.forward(x, Mode::train);
    CHECK(m.parameters()[3]->value != before);
}

TEST_CASE("extend_output keeps old channels bit-identical")
{
    auto m = Model::build({3, 8, 0.2, 2, 32, 32}, {"a", "b"}, 11);
    const auto x = random_images(3, 32, 32, 5);
    (void)m.forward(x, Mode::train);  // non-trivial running statistics
    const auto before = m.infer(x);
    m.extend_output("c", 99);
    CHECK(m.structures() == std::vector<std::string>{"a", "b", "c"});
    CHECK(m.spec().out_channels == 3);
    const auto after = m.infer(x);
    REQUIRE(after.shape() == Shape{3, 3, 32, 32});
    for (std::size_t n = 0; n < 3; ++n) {
        for (std::size_t k = 0; k < 2; ++k) {
            CHECK(std::equal(before.plane(n, k), before.plane(n, k) + 32 * 32, after.plane(n, k)));
        }
    }
    CHECK_THROWS_AS(m.extend_output("a", 1), std::invalid_argument);
}

TEST_CASE("checkpoint round trip")
{
    const auto dir = std::filesystem::temp_directory_path() / "adaseg_model_roundtrip";
    std::filesystem::remove_all(dir);
    auto m = Model::build({4, 8, 0.1, 1, 16, 16}, {"a"}, 3);
    const auto x = random_images(2, 16, 16, 6);
    (void)m.forward(x, Mode::train);
    m.extend_output("b", 4);
    m.save(dir);
    auto r = Model::load(dir);
    CHECK(r.spec() == m.spec());
    CHECK(r.structures() == m.structures());
    CHECK(r.infer(x) == m.infer(x));
    // Dropout stream resumes where it left off.
    CHECK(r.forward(x, Mode::train) == m.forward(x, Mode::train));
    std::filesystem::remove_all(dir);
}

TEST_CASE("backpropagation matches finite differences")
{
    auto m = Model::build({3, 8, 0.0, 2, 16, 16}, {"a", "b"}, 21);
    const auto x = random_images(2, 16, 16, 8);
    std::mt19937_64 rng(9);
    std::vector<std::vector<std::uint8_t>> truths(4);
    for (std::size_t i = 0; i < 4; ++i) {
        if (i == 1) continue;  // one missing annotation
        truths[i].resize(256);
        for (auto& v : truths[i]) v = rng() % 3 == 0;
    }
    const auto check = gradcheck::model_gradients(m, x, truths, LossConfig{}, rng);
    for (const auto& p : check.probes) {
        INFO(p.name << " analytic " << p.analytic << " numeric " << p.numeric);
        CHECK(p.rel < 1e-2);
    }
    CHECK(check.probes.size() == 20);
    CHECK(check.resampled <= 5);
    MESSAGE("worst relative error " << check.worst << ", " << check.resampled << " parameters on a switch resampled");
}
