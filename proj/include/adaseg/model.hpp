#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "adaseg/grid.hpp"
#include "adaseg/nn.hpp"
#include "adaseg/tensor.hpp"

namespace adaseg {

struct ModelSpec {
    int depth = 3;            // encoder levels, 3..5
    int base_filters = 8;     // 8, 16, 32 or 64
    double dropout = 0.0;     // spatial dropout rate in [0, 0.75]
    std::size_t out_channels = 1;
    std::size_t rows = 64;
    std::size_t cols = 64;

    /// Throws std::invalid_argument for out-of-range fields or an input size
    /// not divisible by 2^(depth-1).
    void validate() const;
    [[nodiscard]] std::size_t filters(int level) const { return static_cast<std::size_t>(base_filters) << level; }

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

enum class Mode { train, eval };

/// U-Net with one independent sigmoid output per structure.
class Model {
public:
    Model() = default;

    /// Fresh He-uniform initialization. `structures` names the output channels
    /// and must have spec.out_channels entries.
    static Model build(const ModelSpec& spec, std::vector<std::string> structures, std::uint64_t seed);

    [[nodiscard]] const ModelSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] const std::vector<std::string>& structures() const noexcept { return structures_; }

    /// images: n x 1 x H x W. Train mode samples dropout channels, uses batch
    /// statistics and caches activations for `backward`.
    Probabilities forward(const Tensor& images, Mode mode);
    /// Eval-mode forward without touching any model state.
    [[nodiscard]] Probabilities infer(const Tensor& images) const;
    /// Accumulates parameter gradients from dLoss/dprobabilities of the last
    /// train-mode forward.
    void backward(const Probabilities& grad);

    /// Every parameter array, including running batch-norm statistics.
    std::vector<nn::Parameter*> parameters();
    [[nodiscard]] std::vector<const nn::Parameter*> parameters() const;
    std::vector<nn::Parameter*> trainable_parameters();
    [[nodiscard]] std::size_t trainable_count() const;
    void zero_grad();

    /// Appends an output channel for `structure`; everything else is kept.
    void extend_output(const std::string& structure, std::uint64_t seed);

    /// ReLU on/off states and max-pool choices of the last train-mode forward.
    /// Two inputs with equal patterns lie on the same linear piece of the network.
    [[nodiscard]] std::vector<std::uint32_t> activation_pattern() const;

    void seed_dropout(std::uint64_t seed) { dropout_rng_.seed(seed); }

    /// Directory with spec.json, index.json and params/<name>.f32.
    void save(const std::filesystem::path& dir) const;
    static Model load(const std::filesystem::path& dir);

private:
    struct ConvBlock {
        nn::Conv3x3 conv1, conv2;
        nn::BatchNorm bn1, bn2;
        Tensor act1, act2;

        ConvBlock() = default;
        ConvBlock(const std::string& name, std::size_t in, std::size_t out);
        Tensor forward(const Tensor& x);
        [[nodiscard]] Tensor infer(const Tensor& x) const;
        Tensor backward(const Tensor& dy);
        void collect(std::vector<nn::Parameter*>& out);
    };

    void check_input(const Tensor& images) const;
    void initialize(std::uint64_t seed);

    ModelSpec spec_;
    std::vector<std::string> structures_;
    std::vector<ConvBlock> encoder_;             // depth levels
    std::vector<nn::MaxPool2> pools_;            // depth-1
    std::vector<nn::SpatialDropout> pool_drop_;  // depth-1
    std::vector<nn::UpConv2x2> ups_;             // depth-1, indexed by target level
    std::vector<nn::SpatialDropout> cat_drop_;   // depth-1
    std::vector<ConvBlock> decoder_;             // depth-1, indexed by target level
    nn::Head1x1 head_;
    Probabilities output_;
    std::mt19937_64 dropout_rng_;
};

/// Wraps single-channel images as an n x 1 x H x W tensor.
Tensor stack_images(const std::vector<const Grid<float>*>& images);

}  // namespace adaseg
