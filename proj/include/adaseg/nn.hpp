#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <string>
#include <vector>

#include "adaseg/tensor.hpp"

namespace adaseg::nn {

/// Named parameter array with its gradient accumulator.
struct Parameter {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<float> value;
    std::vector<float> grad;
    bool trainable = true;

    Parameter() = default;
    Parameter(std::string name, std::vector<std::size_t> shape, bool trainable = true);

    [[nodiscard]] std::size_t size() const noexcept { return value.size(); }
    void zero_grad();
};

/// He-uniform draw: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
void he_uniform(std::span<float> values, std::size_t fan_in, std::mt19937_64& rng);

// Layers cache what their backward pass needs during `forward`; `infer` is the
// cache-free evaluation path and is safe to call concurrently.

/// 3x3 convolution, stride 1, zero "same" padding, no bias (batch norm follows).
class Conv3x3 {
public:
    Conv3x3() = default;
    Conv3x3(const std::string& name, std::size_t in_channels, std::size_t out_channels);

    Tensor forward(const Tensor& x);
    [[nodiscard]] Tensor infer(const Tensor& x) const;
    Tensor backward(const Tensor& dy);

    Parameter kernel;  // [out, in, 3, 3]

private:
    std::size_t in_ = 0, out_ = 0;
    Tensor input_;
};

/// Per-channel batch normalization over N, H, W.
class BatchNorm {
public:
    BatchNorm() = default;
    BatchNorm(const std::string& name, std::size_t channels, float momentum = 0.99f, float epsilon = 1e-3f);

    /// Training mode: normalizes with batch statistics and updates running ones.
    Tensor forward(const Tensor& x);
    /// Running statistics.
    [[nodiscard]] Tensor infer(const Tensor& x) const;
    Tensor backward(const Tensor& dy);

    Parameter gamma, beta, running_mean, running_var;

private:
    float momentum_ = 0.99f, epsilon_ = 1e-3f;
    Tensor xhat_;
    std::vector<double> inv_std_;
};

class MaxPool2 {
public:
    Tensor forward(const Tensor& x);
    [[nodiscard]] Tensor infer(const Tensor& x) const;
    Tensor backward(const Tensor& dy) const;
    /// Flat input index chosen for each output element by the last `forward`.
    [[nodiscard]] const std::vector<std::uint32_t>& argmax() const noexcept { return argmax_; }

private:
    Shape input_shape_;
    std::vector<std::uint32_t> argmax_;
};

/// Drops whole channels per sample with probability `rate` and rescales the rest.
class SpatialDropout {
public:
    explicit SpatialDropout(double rate = 0.0) : rate_(rate) {}

    Tensor forward(const Tensor& x, std::mt19937_64& rng);
    Tensor backward(const Tensor& dy) const;
    [[nodiscard]] double rate() const noexcept { return rate_; }

private:
    double rate_ = 0.0;
    Shape shape_;
    std::vector<float> scale_;  // one per (n, c)
};

/// 2x2 stride-2 transposed convolution with bias.
class UpConv2x2 {
public:
    UpConv2x2() = default;
    UpConv2x2(const std::string& name, std::size_t in_channels, std::size_t out_channels);

    Tensor forward(const Tensor& x);
    [[nodiscard]] Tensor infer(const Tensor& x) const;
    Tensor backward(const Tensor& dy);

    Parameter kernel;  // [out, 2, 2, in]
    Parameter bias;    // [out]

private:
    std::size_t in_ = 0, out_ = 0;
    Tensor input_;
};

/// 1x1 convolution producing one logit per output channel.
///
/// Each output channel is summed independently in a fixed input-channel order,
/// so appending a channel leaves the existing logits bit-identical.
class Head1x1 {
public:
    Head1x1() = default;
    Head1x1(const std::string& name, std::size_t in_channels, std::size_t out_channels);

    Tensor forward(const Tensor& x);
    [[nodiscard]] Tensor infer(const Tensor& x) const;
    Tensor backward(const Tensor& dy);

    /// Appends one He-initialized kernel row and a zero bias.
    void add_channel(std::mt19937_64& rng);
    [[nodiscard]] std::size_t out_channels() const noexcept { return out_; }

    Parameter kernel;  // [out, in]
    Parameter bias;    // [out]

private:
    std::size_t in_ = 0, out_ = 0;
    Tensor input_;
};

Tensor relu(const Tensor& x);
/// dy masked by the positive entries of the ReLU output.
Tensor relu_backward(const Tensor& dy, const Tensor& y);

Tensor concat_channels(const Tensor& a, const Tensor& b);
/// Splits a channel-concatenated gradient back into its two parts.
std::pair<Tensor, Tensor> split_channels(const Tensor& d, std::size_t first_channels);

}  // namespace adaseg::nn
