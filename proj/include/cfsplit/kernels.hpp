#ifndef CFSPLIT_KERNELS_HPP_
#define CFSPLIT_KERNELS_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

// Vector kernels with floating-point operation counting.  All hot-path
// arithmetic in the library goes through these so that per-coordinate cost
// claims can be checked against actual counts instead of wall time.

namespace cfsplit::ops {

// Thread-local cumulative flop counter.
std::uint64_t count() noexcept;
void reset() noexcept;
void add(std::uint64_t n) noexcept;

// Temporarily stops counting (monitoring, oracles, audits).
class SuspendCounting {
 public:
  SuspendCounting() noexcept;
  ~SuspendCounting();
  SuspendCounting(const SuspendCounting&) = delete;
  SuspendCounting& operator=(const SuspendCounting&) = delete;
};

// Counts ops accumulated while alive.
class Section {
 public:
  Section() noexcept : start_(count()) {}
  std::uint64_t elapsed() const noexcept { return count() - start_; }

 private:
  std::uint64_t start_;
};

}  // namespace cfsplit::ops

namespace cfsplit::kern {

double dot(std::span<const double> a, std::span<const double> b);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
// x *= alpha
void scal(double alpha, std::span<double> x);
void copy(std::span<const double> src, std::span<double> dst);
void fill(std::span<double> x, double v);
// z = a - b
void sub(std::span<const double> a, std::span<const double> b, std::span<double> z);
double nrm2(std::span<const double> x);
double nrm2sq(std::span<const double> x);
// max_i |x_i|
double amax(std::span<const double> x);

// Dense row-major matrix-vector products.  A is rows x cols.
void gemv(std::span<const double> A, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y);
// y = A^T x
void gemv_t(std::span<const double> A, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y);

bool all_finite(std::span<const double> x);

}  // namespace cfsplit::kern

#endif  // CFSPLIT_KERNELS_HPP_
