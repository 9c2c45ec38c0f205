#include "cfsplit/kernels.hpp"

#include <algorithm>
#include <cassert>

namespace cfsplit::ops {

namespace {
thread_local std::uint64_t g_count = 0;
thread_local int g_suspended = 0;
}  // namespace

std::uint64_t count() noexcept { return g_count; }
void reset() noexcept { g_count = 0; }
void add(std::uint64_t n) noexcept {
  if (g_suspended == 0) g_count += n;
}

SuspendCounting::SuspendCounting() noexcept { ++g_suspended; }
SuspendCounting::~SuspendCounting() { --g_suspended; }

}  // namespace cfsplit::ops

namespace cfsplit::kern {

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  ops::add(2 * a.size());
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
  ops::add(2 * x.size());
}

void scal(double alpha, std::span<double> x) {
  for (double& v : x) v *= alpha;
  ops::add(x.size());
}

void copy(std::span<const double> src, std::span<double> dst) {
  assert(src.size() == dst.size());
  std::copy(src.begin(), src.end(), dst.begin());
}

void fill(std::span<double> x, double v) { std::fill(x.begin(), x.end(), v); }

void sub(std::span<const double> a, std::span<const double> b, std::span<double> z) {
  assert(a.size() == b.size() && a.size() == z.size());
  for (std::size_t i = 0; i < a.size(); ++i) z[i] = a[i] - b[i];
  ops::add(a.size());
}

double nrm2sq(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  ops::add(2 * x.size());
  return s;
}

double nrm2(std::span<const double> x) {
  ops::add(1);
  return std::sqrt(nrm2sq(x));
}

double amax(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  ops::add(x.size());
  return m;
}

void gemv(std::span<const double> A, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y) {
  assert(A.size() == rows * cols && x.size() == cols && y.size() == rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    const double* row = A.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) s += row[c] * x[c];
    y[r] = s;
  }
  ops::add(2 * rows * cols);
}

void gemv_t(std::span<const double> A, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y) {
  assert(A.size() == rows * cols && x.size() == rows && y.size() == cols);
  std::fill(y.begin(), y.end(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = A.data() + r * cols;
    const double xr = x[r];
    for (std::size_t c = 0; c < cols; ++c) y[c] += xr * row[c];
  }
  ops::add(2 * rows * cols);
}

bool all_finite(std::span<const double> x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace cfsplit::kern
