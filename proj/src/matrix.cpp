#include "cfsplit/matrix.hpp"

#include <algorithm>

namespace cfsplit {

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols,
                           std::vector<Triplet> entries)
    : rows_(rows), cols_(cols) {
  for (const auto& t : entries)
    if (t.row >= rows || t.col >= cols)
      throw DimensionError("SparseMatrix: entry out of range");

  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  row_ptr_.assign(rows_ + 1, 0);
  col_idx_.reserve(entries.size());
  values_.reserve(entries.size());
  for (const auto& t : entries) {
    row_ptr_[t.row + 1]++;
    col_idx_.push_back(t.col);
    values_.push_back(t.value);
  }
  for (std::size_t r = 0; r < rows_; ++r) row_ptr_[r + 1] += row_ptr_[r];

  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.col != b.col ? a.col < b.col : a.row < b.row;
  });
  col_ptr_.assign(cols_ + 1, 0);
  row_idx_.reserve(entries.size());
  cvalues_.reserve(entries.size());
  for (const auto& t : entries) {
    col_ptr_[t.col + 1]++;
    row_idx_.push_back(t.row);
    cvalues_.push_back(t.value);
  }
  for (std::size_t c = 0; c < cols_; ++c) col_ptr_[c + 1] += col_ptr_[c];
}

void SparseMatrix::mul(std::span<const double> x, std::span<double> y) const {
  for (std::size_t r = 0; r < rows_; ++r) {
    double s = 0.0;
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      s += values_[k] * x[col_idx_[k]];
    y[r] = s;
  }
  ops::add(2 * nnz());
}

void SparseMatrix::mul_t(std::span<const double> x, std::span<double> y) const {
  std::fill(y.begin(), y.end(), 0.0);
  for (std::size_t r = 0; r < rows_; ++r) {
    const double xr = x[r];
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      y[col_idx_[k]] += xr * values_[k];
  }
  ops::add(2 * nnz());
}

void SparseMatrix::add_scaled_col(double alpha, std::size_t c,
                                  std::span<double> y) const {
  for (std::size_t k = col_ptr_[c]; k < col_ptr_[c + 1]; ++k)
    y[row_idx_[k]] += alpha * cvalues_[k];
  ops::add(2 * (col_ptr_[c + 1] - col_ptr_[c]));
}

double SparseMatrix::col_dot(std::size_t c, std::span<const double> x) const {
  double s = 0.0;
  for (std::size_t k = col_ptr_[c]; k < col_ptr_[c + 1]; ++k)
    s += cvalues_[k] * x[row_idx_[k]];
  ops::add(2 * (col_ptr_[c + 1] - col_ptr_[c]));
  return s;
}

double SparseMatrix::row_dot(std::size_t r, std::span<const double> x) const {
  double s = 0.0;
  for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
    s += values_[k] * x[col_idx_[k]];
  ops::add(2 * (row_ptr_[r + 1] - row_ptr_[r]));
  return s;
}

DenseMatrix SparseMatrix::to_dense() const {
  DenseMatrix d(rows_, cols_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      d.at(r, col_idx_[k]) = values_[k];
  return d;
}

}  // namespace cfsplit
