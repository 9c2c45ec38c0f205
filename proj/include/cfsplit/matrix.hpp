#ifndef CFSPLIT_MATRIX_HPP_
#define CFSPLIT_MATRIX_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "cfsplit/errors.hpp"
#include "cfsplit/kernels.hpp"

namespace cfsplit {

// Dense row-major matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) throw DimensionError("DenseMatrix: size");
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> all() const { return data_; }
  std::span<double> all() { return data_; }

  void mul(std::span<const double> x, std::span<double> y) const {
    kern::gemv(data_, rows_, cols_, x, y);
  }
  void mul_t(std::span<const double> x, std::span<double> y) const {
    kern::gemv_t(data_, rows_, cols_, x, y);
  }
  // y += alpha * A[:, c0:c0+w] * x  (column block times small vector)
  void add_col_block_times(double alpha, std::size_t c0, std::size_t w,
                           std::span<const double> x, std::span<double> y) const {
    for (std::size_t r = 0; r < rows_; ++r) {
      const double* row = data_.data() + r * cols_ + c0;
      double s = 0.0;
      for (std::size_t j = 0; j < w; ++j) s += row[j] * x[j];
      y[r] += alpha * s;
    }
    ops::add(2 * rows_ * (w + 1));
  }
  // out = A[:, c0:c0+w]^T * x
  void col_block_t_times(std::size_t c0, std::size_t w,
                         std::span<const double> x, std::span<double> out) const {
    for (std::size_t j = 0; j < w; ++j) out[j] = 0.0;
    for (std::size_t r = 0; r < rows_; ++r) {
      const double* row = data_.data() + r * cols_ + c0;
      const double xr = x[r];
      for (std::size_t j = 0; j < w; ++j) out[j] += xr * row[j];
    }
    ops::add(2 * rows_ * w);
  }

  DenseMatrix transposed() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t.at(c, r) = at(r, c);
    return t;
  }

  // A^T A (used by the precomputed-normal regime)
  DenseMatrix gram() const {
    DenseMatrix g(cols_, cols_);
    for (std::size_t i = 0; i < cols_; ++i)
      for (std::size_t j = i; j < cols_; ++j) {
        double s = 0.0;
        for (std::size_t r = 0; r < rows_; ++r) s += at(r, i) * at(r, j);
        g.at(i, j) = s;
        g.at(j, i) = s;
      }
    return g;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

// Sparse matrix stored in both CSR and CSC form so that rows and columns are
// cheap to traverse (the overlap machinery needs I(j) and J(i) sets).
class SparseMatrix {
 public:
  struct Triplet {
    std::size_t row, col;
    double value;
  };

  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<Triplet> entries);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  // CSR traversal
  std::size_t row_begin(std::size_t r) const { return row_ptr_[r]; }
  std::size_t row_end(std::size_t r) const { return row_ptr_[r + 1]; }
  std::size_t row_col(std::size_t k) const { return col_idx_[k]; }
  double row_val(std::size_t k) const { return values_[k]; }

  // CSC traversal
  std::size_t col_begin(std::size_t c) const { return col_ptr_[c]; }
  std::size_t col_end(std::size_t c) const { return col_ptr_[c + 1]; }
  std::size_t col_row(std::size_t k) const { return row_idx_[k]; }
  double col_val(std::size_t k) const { return cvalues_[k]; }

  void mul(std::span<const double> x, std::span<double> y) const;
  void mul_t(std::span<const double> x, std::span<double> y) const;
  // y += alpha * A[:, c]
  void add_scaled_col(double alpha, std::size_t c, std::span<double> y) const;
  // dot of column c with x
  double col_dot(std::size_t c, std::span<const double> x) const;
  double row_dot(std::size_t r, std::span<const double> x) const;

  DenseMatrix to_dense() const;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<std::size_t> row_ptr_, col_idx_;
  std::vector<double> values_;
  std::vector<std::size_t> col_ptr_, row_idx_;
  std::vector<double> cvalues_;
};

}  // namespace cfsplit

#endif  // CFSPLIT_MATRIX_HPP_
