#include "gcnn/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "gcnn/errors.hpp"

namespace gcnn {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = static_cast<int>(rows.size());
    cols_ = rows_ > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    data_.reserve(static_cast<std::size_t>(rows_) * cols_);
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != cols_)
            throw ShapeMismatch("ragged initializer list");
        data_.insert(data_.end(), row.begin(), row.end());
    }
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ShapeMismatch("matmul: " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " * " +
                            std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
    Matrix out(a.rows(), b.cols());
    const int n = a.rows(), k = a.cols(), m = b.cols();
    for (int i = 0; i < n; ++i) {
        for (int p = 0; p < k; ++p) {
            const double v = a(i, p);
            if (v == 0.0) continue;
            for (int j = 0; j < m; ++j) out(i, j) += v * b(p, j);
        }
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

void add_scaled(Matrix& a, const Matrix& b, double s) {
    if (!a.same_shape(b)) throw ShapeMismatch("add_scaled shape mismatch");
    double* pa = a.data();
    const double* pb = b.data();
    for (std::size_t i = 0; i < a.size(); ++i) pa[i] += s * pb[i];
}

bool all_finite(const Matrix& a) {
    for (double v : a.values())
        if (!std::isfinite(v)) return false;
    return true;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw ShapeMismatch("max_abs_diff shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::fabs(a.values()[i] - b.values()[i]));
    return m;
}

}  // namespace gcnn
