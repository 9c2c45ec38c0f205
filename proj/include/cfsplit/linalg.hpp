#ifndef CFSPLIT_LINALG_HPP_
#define CFSPLIT_LINALG_HPP_

#include <functional>
#include <span>
#include <vector>

#include "cfsplit/matrix.hpp"

// Dense factorizations and spectral estimates.  Backed by Eigen; these are
// setup/audit paths, not iteration kernels, so they do not count flops.

namespace cfsplit::linalg {

std::vector<double> solve(const DenseMatrix& a, std::span<const double> b);
std::vector<double> lstsq(const DenseMatrix& a, std::span<const double> b);
DenseMatrix inverse(const DenseMatrix& a);

struct SymEig {
  std::vector<double> values;  // ascending
  double min() const { return values.front(); }
  double max() const { return values.back(); }
};
SymEig sym_eig(const DenseMatrix& a);

// ||A||_2 via power iteration on A^T A (50 iterations or 1e-6 relative change).
double spectral_norm(const DenseMatrix& a, std::size_t max_iter = 50,
                     double tol = 1e-6);
double spectral_norm_power(
    const std::function<void(std::span<const double>, std::span<double>)>& mul,
    const std::function<void(std::span<const double>, std::span<double>)>& mul_t,
    std::size_t rows, std::size_t cols, std::size_t max_iter = 50,
    double tol = 1e-6);

}  // namespace cfsplit::linalg

#endif  // CFSPLIT_LINALG_HPP_
