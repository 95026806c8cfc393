#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace adaseg {

/// Dense row-major 2-D grid.
template <class T>
class Grid {
public:
    using value_type = T;

    Grid() = default;
    Grid(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
    Grid(std::size_t rows, std::size_t cols, std::vector<T> values)
        : rows_(rows), cols_(cols), values_(std::move(values))
    {
        if (values_.size() != rows_ * cols_) {
            throw std::invalid_argument("grid value count " + std::to_string(values_.size()) +
                                        " does not match " + std::to_string(rows_) + "x" +
                                        std::to_string(cols_));
        }
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] bool empty() const noexcept { return values_.empty(); }

    T& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    [[nodiscard]] std::span<T> values() noexcept { return values_; }
    [[nodiscard]] std::span<const T> values() const noexcept { return values_; }
    [[nodiscard]] const std::vector<T>& storage() const noexcept { return values_; }

    [[nodiscard]] bool same_shape(std::size_t rows, std::size_t cols) const noexcept
    {
        return rows_ == rows && cols_ == cols;
    }
    template <class U>
    [[nodiscard]] bool same_shape(const Grid<U>& other) const noexcept
    {
        return rows_ == other.rows() && cols_ == other.cols();
    }

    friend bool operator==(const Grid& a, const Grid& b) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> values_;
};

using Image = Grid<float>;
using Mask = Grid<std::uint8_t>;

/// Number of foreground (non-zero) pixels.
inline std::size_t count_foreground(const Mask& mask)
{
    std::size_t n = 0;
    for (auto v : mask.values()) n += v != 0;
    return n;
}

}  // namespace adaseg
