#include <algorithm>

#include "adaseg/data.hpp"

namespace adaseg {

Image preprocess_ct(const Image& hounsfield)
{
    Image out(hounsfield.rows(), hounsfield.cols());
    auto src = hounsfield.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double v = std::max(static_cast<double>(src[i]), kHuFloor);
        dst[i] = static_cast<float>((v - kHuFloor) / kHuScale);
    }
    return out;
}

namespace {

void check_factor(std::size_t rows, std::size_t cols, std::size_t factor)
{
    if (factor == 0 || rows % factor != 0 || cols % factor != 0) {
        throw std::invalid_argument("downsample factor " + std::to_string(factor) + " does not divide " +
                                    std::to_string(rows) + "x" + std::to_string(cols));
    }
}

}  // namespace

Image downsample(const Image& image, std::size_t factor)
{
    check_factor(image.rows(), image.cols(), factor);
    Image out(image.rows() / factor, image.cols() / factor);
    const double inv = 1.0 / static_cast<double>(factor * factor);
    for (std::size_t r = 0; r < out.rows(); ++r) {
        for (std::size_t c = 0; c < out.cols(); ++c) {
            double sum = 0.0;
            for (std::size_t i = 0; i < factor; ++i) {
                for (std::size_t j = 0; j < factor; ++j) sum += image(r * factor + i, c * factor + j);
            }
            out(r, c) = static_cast<float>(sum * inv);
        }
    }
    return out;
}

Mask downsample(const Mask& mask, std::size_t factor)
{
    check_factor(mask.rows(), mask.cols(), factor);
    Mask out(mask.rows() / factor, mask.cols() / factor);
    for (std::size_t r = 0; r < out.rows(); ++r) {
        for (std::size_t c = 0; c < out.cols(); ++c) {
            std::uint8_t v = 0;
            for (std::size_t i = 0; i < factor; ++i) {
                for (std::size_t j = 0; j < factor; ++j) v = std::max(v, mask(r * factor + i, c * factor + j));
            }
            out(r, c) = v != 0 ? 1 : 0;
        }
    }
    return out;
}

}  // namespace adaseg
