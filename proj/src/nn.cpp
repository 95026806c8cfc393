#include "adaseg/nn.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

namespace adaseg {

std::string to_string(const Shape& s)
{
    return "[" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) + "," +
           std::to_string(s.w) + "]";
}

}  // namespace adaseg

namespace adaseg::nn {
namespace {

using MatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<MatRM>;
using ConstMap = Eigen::Map<const MatRM>;

void require_channels(const Tensor& x, std::size_t channels, const char* layer)
{
    if (x.shape().c != channels) {
        throw std::invalid_argument(std::string(layer) + ": expected " + std::to_string(channels) +
                                    " input channels, got " + to_string(x.shape()));
    }
}

// Column matrix [in*9, h*w] of one sample for a 3x3 same-padded convolution.
void im2col3x3(const float* x, std::size_t channels, std::size_t h, std::size_t w, float* col)
{
    const std::size_t hw = h * w;
    for (std::size_t c = 0; c < channels; ++c) {
        const float* src = x + c * hw;
        for (std::size_t kr = 0; kr < 3; ++kr) {
            for (std::size_t kc = 0; kc < 3; ++kc) {
                float* row = col + ((c * 9) + kr * 3 + kc) * hw;
                for (std::size_t y = 0; y < h; ++y) {
                    const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + kr) - 1;
                    float* dst = row + y * w;
                    if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) {
                        std::fill(dst, dst + w, 0.0f);
                        continue;
                    }
                    const float* line = src + static_cast<std::size_t>(sy) * w;
                    for (std::size_t x0 = 0; x0 < w; ++x0) {
                        const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x0 + kc) - 1;
                        dst[x0] = (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) ? 0.0f
                                                                                  : line[static_cast<std::size_t>(sx)];
                    }
                }
            }
        }
    }
}

void col2im3x3(const float* col, std::size_t channels, std::size_t h, std::size_t w, float* dx)
{
    const std::size_t hw = h * w;
    for (std::size_t c = 0; c < channels; ++c) {
        float* dst = dx + c * hw;
        for (std::size_t kr = 0; kr < 3; ++kr) {
            for (std::size_t kc = 0; kc < 3; ++kc) {
                const float* row = col + ((c * 9) + kr * 3 + kc) * hw;
                for (std::size_t y = 0; y < h; ++y) {
                    const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + kr) - 1;
                    if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
                    float* line = dst + static_cast<std::size_t>(sy) * w;
                    const float* src = row + y * w;
                    for (std::size_t x0 = 0; x0 < w; ++x0) {
                        const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x0 + kc) - 1;
                        if (sx >= 0 && sx < static_cast<std::ptrdiff_t>(w)) line[static_cast<std::size_t>(sx)] += src[x0];
                    }
                }
            }
        }
    }
}

Tensor conv3x3(const Tensor& x, const Parameter& kernel, std::size_t in, std::size_t out)
{
    const auto& s = x.shape();
    const std::size_t hw = s.plane();
    Tensor y({s.n, out, s.h, s.w});
    std::vector<float> col(in * 9 * hw);
    ConstMap W(kernel.value.data(), static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in * 9));
    for (std::size_t n = 0; n < s.n; ++n) {
        im2col3x3(x.sample(n), in, s.h, s.w, col.data());
        ConstMap C(col.data(), static_cast<Eigen::Index>(in * 9), static_cast<Eigen::Index>(hw));
        Map Y(y.sample(n), static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(hw));
        Y.noalias() = W * C;
    }
    return y;
}

}  // namespace

Parameter::Parameter(std::string name_, std::vector<std::size_t> shape_, bool trainable_)
    : name(std::move(name_)), shape(std::move(shape_)), trainable(trainable_)
{
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    value.assign(n, 0.0f);
    grad.assign(n, 0.0f);
}

void Parameter::zero_grad()
{
    std::fill(grad.begin(), grad.end(), 0.0f);
}

void he_uniform(std::span<float> values, std::size_t fan_in, std::mt19937_64& rng)
{
    const double limit = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& v : values) v = static_cast<float>(dist(rng));
}

// ---------------------------------------------------------------------------

Conv3x3::Conv3x3(const std::string& name, std::size_t in_channels, std::size_t out_channels)
    : kernel(name + ".kernel", {out_channels, in_channels, 3, 3}), in_(in_channels), out_(out_channels)
{
}

Tensor Conv3x3::forward(const Tensor& x)
{
    require_channels(x, in_, "conv3x3");
    input_ = x;
    return conv3x3(x, kernel, in_, out_);
}

Tensor Conv3x3::infer(const Tensor& x) const
{
    require_channels(x, in_, "conv3x3");
    return conv3x3(x, kernel, in_, out_);
}

Tensor Conv3x3::backward(const Tensor& dy)
{
    const auto& s = input_.shape();
    const std::size_t hw = s.plane();
    const auto rows = static_cast<Eigen::Index>(in_ * 9);
    Tensor dx(s);
    std::vector<float> col(in_ * 9 * hw);
    std::vector<float> dcol(in_ * 9 * hw);
    ConstMap W(kernel.value.data(), static_cast<Eigen::Index>(out_), rows);
    Map dW(kernel.grad.data(), static_cast<Eigen::Index>(out_), rows);
    for (std::size_t n = 0; n < s.n; ++n) {
        im2col3x3(input_.sample(n), in_, s.h, s.w, col.data());
        ConstMap C(col.data(), rows, static_cast<Eigen::Index>(hw));
        ConstMap D(dy.sample(n), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(hw));
        dW.noalias() += D * C.transpose();
        Map DC(dcol.data(), rows, static_cast<Eigen::Index>(hw));
        DC.noalias() = W.transpose() * D;
        col2im3x3(dcol.data(), in_, s.h, s.w, dx.sample(n));
    }
    return dx;
}

// ---------------------------------------------------------------------------

BatchNorm::BatchNorm(const std::string& name, std::size_t channels, float momentum, float epsilon)
    : gamma(name + ".gamma", {channels}),
      beta(name + ".beta", {channels}),
      running_mean(name + ".running_mean", {channels}, false),
      running_var(name + ".running_var", {channels}, false),
      momentum_(momentum),
      epsilon_(epsilon)
{
    std::fill(gamma.value.begin(), gamma.value.end(), 1.0f);
    std::fill(running_var.value.begin(), running_var.value.end(), 1.0f);
}

Tensor BatchNorm::forward(const Tensor& x)
{
    const auto& s = x.shape();
    require_channels(x, gamma.size(), "batchnorm");
    const std::size_t hw = s.plane();
    const double count = static_cast<double>(s.n * hw);
    Tensor y(s);
    xhat_ = Tensor(s);
    inv_std_.assign(s.c, 0.0);
    for (std::size_t c = 0; c < s.c; ++c) {
        double sum = 0.0;
        for (std::size_t n = 0; n < s.n; ++n) {
            const float* p = x.plane(n, c);
            for (std::size_t i = 0; i < hw; ++i) sum += p[i];
        }
        const double mean = sum / count;
        double sq = 0.0;
        for (std::size_t n = 0; n < s.n; ++n) {
            const float* p = x.plane(n, c);
            for (std::size_t i = 0; i < hw; ++i) sq += (p[i] - mean) * (p[i] - mean);
        }
        const double var = sq / count;
        // Mean and scale stay in double: rounding them to float would shift
        // the whole channel coherently.
        const double inv = 1.0 / std::sqrt(var + epsilon_);
        inv_std_[c] = inv;
        const float g = gamma.value[c], b = beta.value[c];
        for (std::size_t n = 0; n < s.n; ++n) {
            const float* p = x.plane(n, c);
            float* xh = xhat_.plane(n, c);
            float* q = y.plane(n, c);
            for (std::size_t i = 0; i < hw; ++i) {
                xh[i] = static_cast<float>((p[i] - mean) * inv);
                q[i] = g * xh[i] + b;
            }
        }
        running_mean.value[c] = momentum_ * running_mean.value[c] + (1.0f - momentum_) * static_cast<float>(mean);
        running_var.value[c] = momentum_ * running_var.value[c] + (1.0f - momentum_) * static_cast<float>(var);
    }
    return y;
}

Tensor BatchNorm::infer(const Tensor& x) const
{
    const auto& s = x.shape();
    require_channels(x, gamma.size(), "batchnorm");
    Tensor y(s);
    for (std::size_t c = 0; c < s.c; ++c) {
        const float inv = 1.0f / std::sqrt(running_var.value[c] + epsilon_);
        const float scale = gamma.value[c] * inv;
        const float shift = beta.value[c] - running_mean.value[c] * scale;
        for (std::size_t n = 0; n < s.n; ++n) {
            const float* p = x.plane(n, c);
            float* q = y.plane(n, c);
            for (std::size_t i = 0; i < s.plane(); ++i) q[i] = p[i] * scale + shift;
        }
    }
    return y;
}

Tensor BatchNorm::backward(const Tensor& dy)
{
    const auto& s = dy.shape();
    const std::size_t hw = s.plane();
    const double count = static_cast<double>(s.n * hw);
    Tensor dx(s);
    for (std::size_t c = 0; c < s.c; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t n = 0; n < s.n; ++n) {
            const float* d = dy.plane(n, c);
            const float* xh = xhat_.plane(n, c);
            for (std::size_t i = 0; i < hw; ++i) {
                sum_dy += d[i];
                sum_dy_xhat += static_cast<double>(d[i]) * xh[i];
            }
        }
        beta.grad[c] += static_cast<float>(sum_dy);
        gamma.grad[c] += static_cast<float>(sum_dy_xhat);
        const double k = gamma.value[c] * inv_std_[c] / count;
        const double mean_dy = sum_dy, mean_dy_xhat = sum_dy_xhat;
        for (std::size_t n = 0; n < s.n; ++n) {
            const float* d = dy.plane(n, c);
            const float* xh = xhat_.plane(n, c);
            float* out = dx.plane(n, c);
            for (std::size_t i = 0; i < hw; ++i) {
                out[i] = static_cast<float>(k * (count * d[i] - mean_dy - xh[i] * mean_dy_xhat));
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------

Tensor MaxPool2::forward(const Tensor& x)
{
    const auto& s = x.shape();
    input_shape_ = s;
    Tensor y({s.n, s.c, s.h / 2, s.w / 2});
    argmax_.assign(y.size(), 0);
    std::size_t o = 0;
    for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t c = 0; c < s.c; ++c) {
            const float* p = x.plane(n, c);
            for (std::size_t i = 0; i < s.h / 2; ++i) {
                for (std::size_t j = 0; j < s.w / 2; ++j, ++o) {
                    std::size_t best = (2 * i) * s.w + 2 * j;
                    for (std::size_t a = 0; a < 2; ++a) {
                        for (std::size_t b = 0; b < 2; ++b) {
                            const std::size_t idx = (2 * i + a) * s.w + 2 * j + b;
                            if (p[idx] > p[best]) best = idx;
                        }
                    }
                    argmax_[o] = static_cast<std::uint32_t>(best);
                    y.values()[o] = p[best];
                }
            }
        }
    }
    return y;
}

Tensor MaxPool2::infer(const Tensor& x) const
{
    const auto& s = x.shape();
    Tensor y({s.n, s.c, s.h / 2, s.w / 2});
    for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t c = 0; c < s.c; ++c) {
            const float* p = x.plane(n, c);
            float* q = y.plane(n, c);
            for (std::size_t i = 0; i < s.h / 2; ++i) {
                for (std::size_t j = 0; j < s.w / 2; ++j) {
                    const float* r0 = p + 2 * i * s.w + 2 * j;
                    const float* r1 = r0 + s.w;
                    q[i * (s.w / 2) + j] = std::max(std::max(r0[0], r0[1]), std::max(r1[0], r1[1]));
                }
            }
        }
    }
    return y;
}

Tensor MaxPool2::backward(const Tensor& dy) const
{
    Tensor dx(input_shape_);
    const std::size_t planes = input_shape_.n * input_shape_.c;
    const std::size_t out_plane = dy.shape().plane();
    for (std::size_t p = 0; p < planes; ++p) {
        float* dst = dx.values().data() + p * input_shape_.plane();
        for (std::size_t i = 0; i < out_plane; ++i) {
            const std::size_t o = p * out_plane + i;
            dst[argmax_[o]] += dy.values()[o];
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------

Tensor SpatialDropout::forward(const Tensor& x, std::mt19937_64& rng)
{
    const auto& s = x.shape();
    shape_ = s;
    scale_.assign(s.n * s.c, 1.0f);
    if (rate_ <= 0.0) return x;
    std::bernoulli_distribution drop(rate_);
    const auto keep_scale = static_cast<float>(1.0 / (1.0 - rate_));
    for (auto& v : scale_) v = drop(rng) ? 0.0f : keep_scale;
    Tensor y(s);
    for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t c = 0; c < s.c; ++c) {
            const float f = scale_[n * s.c + c];
            const float* p = x.plane(n, c);
            float* q = y.plane(n, c);
            for (std::size_t i = 0; i < s.plane(); ++i) q[i] = p[i] * f;
        }
    }
    return y;
}

Tensor SpatialDropout::backward(const Tensor& dy) const
{
    if (rate_ <= 0.0) return dy;
    Tensor dx(shape_);
    for (std::size_t n = 0; n < shape_.n; ++n) {
        for (std::size_t c = 0; c < shape_.c; ++c) {
            const float f = scale_[n * shape_.c + c];
            const float* p = dy.plane(n, c);
            float* q = dx.plane(n, c);
            for (std::size_t i = 0; i < shape_.plane(); ++i) q[i] = p[i] * f;
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------

namespace {

Tensor upconv(const Tensor& x, const Parameter& kernel, const Parameter& bias, std::size_t in, std::size_t out)
{
    const auto& s = x.shape();
    const std::size_t hw = s.plane();
    Tensor y({s.n, out, 2 * s.h, 2 * s.w});
    std::vector<float> z(out * 4 * hw);
    ConstMap W(kernel.value.data(), static_cast<Eigen::Index>(out * 4), static_cast<Eigen::Index>(in));
    const std::size_t ow = 2 * s.w;
    for (std::size_t n = 0; n < s.n; ++n) {
        ConstMap X(x.sample(n), static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(hw));
        Map Z(z.data(), static_cast<Eigen::Index>(out * 4), static_cast<Eigen::Index>(hw));
        Z.noalias() = W * X;
        for (std::size_t co = 0; co < out; ++co) {
            float* dst = y.plane(n, co);
            const float b = bias.value[co];
            for (std::size_t ab = 0; ab < 4; ++ab) {
                const std::size_t a = ab / 2, bb = ab % 2;
                const float* src = z.data() + (co * 4 + ab) * hw;
                for (std::size_t i = 0; i < s.h; ++i) {
                    for (std::size_t j = 0; j < s.w; ++j) dst[(2 * i + a) * ow + 2 * j + bb] = src[i * s.w + j] + b;
                }
            }
        }
    }
    return y;
}

}  // namespace

UpConv2x2::UpConv2x2(const std::string& name, std::size_t in_channels, std::size_t out_channels)
    : kernel(name + ".kernel", {out_channels, 2, 2, in_channels}),
      bias(name + ".bias", {out_channels}),
      in_(in_channels),
      out_(out_channels)
{
}

Tensor UpConv2x2::forward(const Tensor& x)
{
    require_channels(x, in_, "upconv2x2");
    input_ = x;
    return upconv(x, kernel, bias, in_, out_);
}

Tensor UpConv2x2::infer(const Tensor& x) const
{
    require_channels(x, in_, "upconv2x2");
    return upconv(x, kernel, bias, in_, out_);
}

Tensor UpConv2x2::backward(const Tensor& dy)
{
    const auto& s = input_.shape();
    const std::size_t hw = s.plane();
    const std::size_t ow = 2 * s.w;
    Tensor dx(s);
    std::vector<float> dz(out_ * 4 * hw);
    ConstMap W(kernel.value.data(), static_cast<Eigen::Index>(out_ * 4), static_cast<Eigen::Index>(in_));
    Map dW(kernel.grad.data(), static_cast<Eigen::Index>(out_ * 4), static_cast<Eigen::Index>(in_));
    for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t co = 0; co < out_; ++co) {
            const float* src = dy.plane(n, co);
            double db = 0.0;
            for (std::size_t ab = 0; ab < 4; ++ab) {
                const std::size_t a = ab / 2, b = ab % 2;
                float* dst = dz.data() + (co * 4 + ab) * hw;
                for (std::size_t i = 0; i < s.h; ++i) {
                    for (std::size_t j = 0; j < s.w; ++j) {
                        dst[i * s.w + j] = src[(2 * i + a) * ow + 2 * j + b];
                        db += dst[i * s.w + j];
                    }
                }
            }
            bias.grad[co] += static_cast<float>(db);
        }
        ConstMap DZ(dz.data(), static_cast<Eigen::Index>(out_ * 4), static_cast<Eigen::Index>(hw));
        ConstMap X(input_.sample(n), static_cast<Eigen::Index>(in_), static_cast<Eigen::Index>(hw));
        dW.noalias() += DZ * X.transpose();
        Map DX(dx.sample(n), static_cast<Eigen::Index>(in_), static_cast<Eigen::Index>(hw));
        DX.noalias() = W.transpose() * DZ;
    }
    return dx;
}

// ---------------------------------------------------------------------------

namespace {

Tensor head(const Tensor& x, const Parameter& kernel, const Parameter& bias, std::size_t in, std::size_t out)
{
    const auto& s = x.shape();
    const std::size_t hw = s.plane();
    Tensor y({s.n, out, s.h, s.w});
    for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t k = 0; k < out; ++k) {
            float* dst = y.plane(n, k);
            std::fill(dst, dst + hw, 0.0f);
            for (std::size_t c = 0; c < in; ++c) {
                const float w = kernel.value[k * in + c];
                const float* src = x.plane(n, c);
                for (std::size_t i = 0; i < hw; ++i) dst[i] += w * src[i];
            }
            const float b = bias.value[k];
            for (std::size_t i = 0; i < hw; ++i) dst[i] += b;
        }
    }
    return y;
}

}  // namespace

Head1x1::Head1x1(const std::string& name, std::size_t in_channels, std::size_t out_channels)
    : kernel(name + ".kernel", {out_channels, in_channels}),
      bias(name + ".bias", {out_channels}),
      in_(in_channels),
      out_(out_channels)
{
}

Tensor Head1x1::forward(const Tensor& x)
{
    require_channels(x, in_, "head1x1");
    input_ = x;
    return head(x, kernel, bias, in_, out_);
}

Tensor Head1x1::infer(const Tensor& x) const
{
    require_channels(x, in_, "head1x1");
    return head(x, kernel, bias, in_, out_);
}

Tensor Head1x1::backward(const Tensor& dy)
{
    const auto& s = input_.shape();
    const std::size_t hw = s.plane();
    Tensor dx(s);
    for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t k = 0; k < out_; ++k) {
            const float* d = dy.plane(n, k);
            double db = 0.0;
            for (std::size_t i = 0; i < hw; ++i) db += d[i];
            bias.grad[k] += static_cast<float>(db);
            for (std::size_t c = 0; c < in_; ++c) {
                const float* src = input_.plane(n, c);
                double dw = 0.0;
                for (std::size_t i = 0; i < hw; ++i) dw += static_cast<double>(d[i]) * src[i];
                kernel.grad[k * in_ + c] += static_cast<float>(dw);
                const float w = kernel.value[k * in_ + c];
                float* out = dx.plane(n, c);
                for (std::size_t i = 0; i < hw; ++i) out[i] += w * d[i];
            }
        }
    }
    return dx;
}

void Head1x1::add_channel(std::mt19937_64& rng)
{
    std::vector<float> row(in_);
    he_uniform(row, in_, rng);
    kernel.value.insert(kernel.value.end(), row.begin(), row.end());
    kernel.grad.resize(kernel.value.size(), 0.0f);
    bias.value.push_back(0.0f);
    bias.grad.push_back(0.0f);
    ++out_;
    kernel.shape = {out_, in_};
    bias.shape = {out_};
}

// ---------------------------------------------------------------------------

Tensor relu(const Tensor& x)
{
    Tensor y(x.shape());
    auto src = x.values();
    auto dst = y.values();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > 0.0f ? src[i] : 0.0f;
    return y;
}

Tensor relu_backward(const Tensor& dy, const Tensor& y)
{
    Tensor dx(dy.shape());
    auto d = dy.values();
    auto out = y.values();
    auto dst = dx.values();
    for (std::size_t i = 0; i < d.size(); ++i) dst[i] = out[i] > 0.0f ? d[i] : 0.0f;
    return dx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b)
{
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
        throw std::invalid_argument("concat shape mismatch " + to_string(sa) + " vs " + to_string(sb));
    }
    Tensor y({sa.n, sa.c + sb.c, sa.h, sa.w});
    const std::size_t na = sa.c * sa.plane(), nb = sb.c * sb.plane();
    for (std::size_t n = 0; n < sa.n; ++n) {
        std::copy_n(a.sample(n), na, y.sample(n));
        std::copy_n(b.sample(n), nb, y.sample(n) + na);
    }
    return y;
}

std::pair<Tensor, Tensor> split_channels(const Tensor& d, std::size_t first_channels)
{
    const auto& s = d.shape();
    Tensor a({s.n, first_channels, s.h, s.w});
    Tensor b({s.n, s.c - first_channels, s.h, s.w});
    const std::size_t na = first_channels * s.plane(), nb = (s.c - first_channels) * s.plane();
    for (std::size_t n = 0; n < s.n; ++n) {
        std::copy_n(d.sample(n), na, a.sample(n));
        std::copy_n(d.sample(n) + na, nb, b.sample(n));
    }
    return {std::move(a), std::move(b)};
}

}  // namespace adaseg::nn
