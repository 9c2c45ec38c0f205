#include "cfsplit/linalg.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "cfsplit/errors.hpp"
#include "cfsplit/rng.hpp"

namespace cfsplit::linalg {

namespace {
Eigen::MatrixXd to_eigen(const DenseMatrix& a) {
  Eigen::MatrixXd m(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) m(r, c) = a.at(r, c);
  return m;
}
}  // namespace

std::vector<double> solve(const DenseMatrix& a, std::span<const double> b) {
  if (a.rows() != a.cols() || a.rows() != b.size())
    throw DimensionError("solve: shape mismatch");
  Eigen::MatrixXd m = to_eigen(a);
  Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(b.data(), b.size());
  Eigen::VectorXd x = m.partialPivLu().solve(rhs);
  return {x.data(), x.data() + x.size()};
}

std::vector<double> lstsq(const DenseMatrix& a, std::span<const double> b) {
  Eigen::MatrixXd m = to_eigen(a);
  Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(b.data(), b.size());
  Eigen::VectorXd x = m.colPivHouseholderQr().solve(rhs);
  return {x.data(), x.data() + x.size()};
}

DenseMatrix inverse(const DenseMatrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("inverse: not square");
  Eigen::MatrixXd inv = to_eigen(a).partialPivLu().inverse();
  DenseMatrix out(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out.at(r, c) = inv(r, c);
  return out;
}

SymEig sym_eig(const DenseMatrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("sym_eig: not square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(a));
  if (es.info() != Eigen::Success) throw std::runtime_error("sym_eig failed");
  SymEig r;
  r.values.assign(es.eigenvalues().data(),
                  es.eigenvalues().data() + es.eigenvalues().size());
  return r;
}

double spectral_norm_power(const std::function<void(std::span<const double>, std::span<double>)>& mul,
                           const std::function<void(std::span<const double>, std::span<double>)>& mul_t,
                           std::size_t rows, std::size_t cols,
                           std::size_t max_iter, double tol) {
  // power iteration on A^T A
  Rng rng(0x5eedULL);
  std::vector<double> v(cols), av(rows), atav(cols);
  rng.fill_gaussian(v);
  double nv = kern::nrm2(v);
  if (nv == 0.0) return 0.0;
  kern::scal(1.0 / nv, v);
  double lambda = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    mul(v, av);
    mul_t(av, atav);
    double next = kern::nrm2(atav);
    if (next == 0.0) return 0.0;
    for (std::size_t i = 0; i < cols; ++i) v[i] = atav[i] / next;
    if (it > 0 && std::abs(next - lambda) <= tol * std::max(1.0, next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(lambda);
}

double spectral_norm(const DenseMatrix& a, std::size_t max_iter, double tol) {
  return spectral_norm_power(
      [&](std::span<const double> x, std::span<double> y) { a.mul(x, y); },
      [&](std::span<const double> x, std::span<double> y) { a.mul_t(x, y); },
      a.rows(), a.cols(), max_iter, tol);
}

}  // namespace cfsplit::linalg
