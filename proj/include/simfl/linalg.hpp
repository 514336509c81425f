#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace simfl {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> data() const { return data_; }

  Matrix transposed() const;
  double frobenius_norm() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);

struct EigenDecomposition {
  std::vector<double> values;  // ascending
  Matrix vectors;              // column k pairs with values[k]
};

// Cyclic Jacobi rotations on a symmetric matrix. Stops when the off-diagonal
// Frobenius norm falls below 1e-12 * ||A||_F or after 100 sweeps. Throws
// ArgError if `a` is empty, not square, or asymmetric beyond 1e-10.
EigenDecomposition eigh_jacobi(const Matrix& a);

double squared_distance(std::span<const double> x, std::span<const double> y);

}  // namespace simfl
