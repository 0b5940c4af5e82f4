#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace gcnn {

// Dense row-major matrix of doubles. All numeric work in the library runs in
// double precision; this type is deliberately minimal.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols)
        : rows_(rows), cols_(cols),
          data_(static_cast<std::size_t>(rows) * cols, 0.0) {}
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(int n);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return data_.empty(); }
    std::size_t size() const { return data_.size(); }

    double& operator()(int r, int c) {
        return data_[static_cast<std::size_t>(r) * cols_ + c];
    }
    double operator()(int r, int c) const {
        return data_[static_cast<std::size_t>(r) * cols_ + c];
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    void fill(double v);
    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

// a += s * b (shapes must match)
void add_scaled(Matrix& a, const Matrix& b, double s);

bool all_finite(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace gcnn
