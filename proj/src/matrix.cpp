#include "stressfuse/matrix.hpp"

#include <cmath>

#include "stressfuse/errors.hpp"

namespace stressfuse {

bool all_finite(std::span<const double> values) {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

bool Matrix::all_finite() const {
    return stressfuse::all_finite(std::span<const double>(data));
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

Matrix Matrix::take_rows(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= rows)
            fail(ErrorKind::invalid_argument,
                 "row index " + std::to_string(indices[i]) + " out of range (" +
                     std::to_string(rows) + " rows)");
        auto src = row(indices[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

} // namespace stressfuse
