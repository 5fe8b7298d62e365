#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace stressfuse {

using Vector = std::vector<double>;

/// Dense row-major 2-D array. Invariant: data.size() == rows * cols.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) {
        return std::span<double>(data.data() + r * cols, cols);
    }
    std::span<const double> row(std::size_t r) const {
        return std::span<const double>(data.data() + r * cols, cols);
    }

    Vector row_vector(std::size_t r) const {
        auto s = row(r);
        return Vector(s.begin(), s.end());
    }

    bool all_finite() const;

    static Matrix identity(std::size_t n);

    Matrix take_rows(std::span<const std::size_t> indices) const;

    bool operator==(const Matrix& other) const = default;
};

bool all_finite(std::span<const double> values);

} // namespace stressfuse
