#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace adaseg {

/// NCHW extents.
struct Shape {
    std::size_t n = 0, c = 0, h = 0, w = 0;

    [[nodiscard]] std::size_t size() const noexcept { return n * c * h * w; }
    [[nodiscard]] std::size_t plane() const noexcept { return h * w; }
    friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

template <class T>
class BasicTensor {
public:
    BasicTensor() = default;
    explicit BasicTensor(Shape shape, T fill = T{}) : shape_(shape), data_(shape.size(), fill) {}

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

    T* plane(std::size_t n, std::size_t c) { return data_.data() + (n * shape_.c + c) * shape_.plane(); }
    const T* plane(std::size_t n, std::size_t c) const { return data_.data() + (n * shape_.c + c) * shape_.plane(); }
    /// All channels of sample n.
    T* sample(std::size_t n) { return data_.data() + n * shape_.c * shape_.plane(); }
    const T* sample(std::size_t n) const { return data_.data() + n * shape_.c * shape_.plane(); }

    T& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x)
    {
        return data_[((n * shape_.c + c) * shape_.h + y) * shape_.w + x];
    }
    const T& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const
    {
        return data_[((n * shape_.c + c) * shape_.h + y) * shape_.w + x];
    }

    [[nodiscard]] std::span<T> values() noexcept { return data_; }
    [[nodiscard]] std::span<const T> values() const noexcept { return data_; }
    std::vector<T>& storage() noexcept { return data_; }
    const std::vector<T>& storage() const noexcept { return data_; }

    friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

private:
    Shape shape_;
    std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Probabilities = BasicTensor<double>;

}  // namespace adaseg
