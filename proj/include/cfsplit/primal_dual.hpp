#ifndef CFSPLIT_PRIMAL_DUAL_HPP_
#define CFSPLIT_PRIMAL_DUAL_HPP_

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "cfsplit/fixed_point.hpp"
#include "cfsplit/matrix.hpp"
#include "cfsplit/prox.hpp"

// Condat-Vu operators for minimize f(x) + g(x) + h(Ax), their coordinate
// forms with maintained Ax / A^T s, the Jacobi-style update for Ax = b
// coupling, and the overlapping-block scheme.

namespace cfsplit {

// ---- smooth term (f) with a CF-declared gradient ----
class SmoothTerm {
 public:
  virtual ~SmoothTerm() = default;
  virtual std::size_t dim() const = 0;
  virtual double beta() const = 0;  // Lipschitz constant of the gradient
  virtual std::vector<CacheEntrySpec> cache_schema() const { return {}; }
  virtual void init_cache(std::span<const double> x, MaintainedCache&) const {
    (void)x;
  }
  virtual void grad_full(std::span<const double> x, const MaintainedCache& c,
                         std::span<double> out) const = 0;
  // gradient entries [off, off+w)
  virtual void grad_block(std::span<const double> x, std::size_t off,
                          std::size_t w, const MaintainedCache& c,
                          std::span<double> out) const = 0;
  virtual void refresh(std::size_t off, std::span<const double> old_block,
                       std::span<const double> new_block, MaintainedCache&) const {
    (void)off;
    (void)old_block;
    (void)new_block;
  }
  virtual std::optional<double> value(std::span<const double> x) const {
    (void)x;
    return std::nullopt;
  }
};

using SmoothPtr = std::shared_ptr<const SmoothTerm>;

SmoothPtr make_zero_smooth(std::size_t dim);
// f(x) = 0.5 x'Ux + c'x (U symmetric PSD); maintains the gradient
SmoothPtr make_quadratic_smooth(DenseMatrix u, std::vector<double> c);
// f(x) = sum_j phi_j((Ax)_j + b_j); maintains Ax + b.  beta supplied by the
// caller (||A||^2 * max phi'').
SmoothPtr make_scalar_affine_smooth(
    DenseMatrix a, std::vector<double> b,
    std::function<double(std::size_t, double)> dphi, double beta,
    std::function<double(std::size_t, double)> phi = nullptr);
SmoothPtr make_scalar_affine_smooth_sparse(
    SparseMatrix a, std::vector<double> b,
    std::function<double(std::size_t, double)> dphi, double beta,
    std::function<double(std::size_t, double)> phi = nullptr);
// f = 0.5 ||Ax - b||^2 via the scalar-affine structure
SmoothPtr make_least_squares_smooth(DenseMatrix a, std::vector<double> b);

// ---- linear coupling with block access on both sides ----
class LinearCoupling {
 public:
  LinearCoupling() = default;
  LinearCoupling(DenseMatrix a, PartitionPtr xpart, PartitionPtr spart);
  LinearCoupling(SparseMatrix a, PartitionPtr xpart, PartitionPtr spart);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const BlockPartition& xpart() const { return *xpart_; }
  const BlockPartition& spart() const { return *spart_; }
  PartitionPtr xpart_ptr() const { return xpart_; }
  PartitionPtr spart_ptr() const { return spart_; }
  bool dense() const { return std::holds_alternative<DenseMatrix>(a_); }

  void mul(std::span<const double> x, std::span<double> y) const;
  void mul_t(std::span<const double> s, std::span<double> out) const;
  // (A x)_{block j}
  void row_block_times(std::size_t j, std::span<const double> x,
                       std::span<double> out) const;
  // (A^T s)_{block i}
  void col_block_t_times(std::size_t i, std::span<const double> s,
                         std::span<double> out) const;
  // y += A[:, block i] * delta
  void add_col_block_times(std::size_t i, std::span<const double> delta,
                           std::span<double> y) const;
  // out += A[block j, :]^T * delta
  void add_row_block_t_times(std::size_t j, std::span<const double> delta,
                             std::span<double> out) const;
  // out += scale * (A[block j rows, block i cols])^T v   (v has block-j size)
  void add_subblock_t_times(std::size_t i, std::size_t j, double scale,
                            std::span<const double> v, std::span<double> out) const;

  // dual blocks j with A[block j, block i] != 0
  const std::vector<std::size_t>& duals_touching(std::size_t i) const;
  // primal blocks i with A[block j, block i] != 0
  const std::vector<std::size_t>& primals_touching(std::size_t j) const;

  double spectral_norm_estimate() const;  // power method, cached
  DenseMatrix to_dense() const;

 private:
  std::variant<std::monostate, DenseMatrix, SparseMatrix> a_;
  PartitionPtr xpart_, spart_;
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<std::vector<std::size_t>> duals_of_, primals_of_;
  mutable double norm_cache_ = -1.0;
};

// ---- problem description (Assumption 1: g, h* separable and proximable) ----
struct PrimalDualProblem {
  LinearCoupling a;
  SmoothPtr f;                  // null = 0
  std::vector<ProxFn> prox_g;   // per x-block; empty element = identity
  std::vector<ProxFn> prox_h;   // per s-block; prox of h_j (h* via Moreau)
  std::function<double(std::span<const double> x)> objective;  // optional

  void validate() const;
};

struct MetricReport {
  bool valid = false;
  double norm_estimate = 0.0;  // ||A||_2 (inflated by the 1.01 safety factor)
  double margin = 0.0;         // 1 - eta*gamma*||A||^2
};

// valid iff eta * gamma * ||A||_2^2 < 1 (power-method estimate, inflated 1.01)
MetricReport validate_metric(const LinearCoupling& a, double eta, double gamma);
MetricReport validate_metric(const DenseMatrix& a, double eta, double gamma);

// dense M = [[I/eta, sign*A'], [sign*A, I/gamma]]; sign = +1 for the
// dual-first ordering, -1 for the swapped one
DenseMatrix build_metric(const DenseMatrix& a, double eta, double gamma,
                         int sign = +1);
// lambda_max / lambda_min of M via dense symmetric eigensolve; audits above
// dim 500 are refused
double metric_condition_number(const DenseMatrix& m);

enum class CvOrder {
  kDualFirst,    // s then x (uses maintained Ax)
  kPrimalFirst,  // x then s (uses maintained A^T s)
};

// Fixed-point operator over z = [x; s] with m + p block units.
class CondatVuOperator final : public FixedPointOperator {
 public:
  CondatVuOperator(PrimalDualProblem prob, double eta, double gamma,
                   CvOrder order, bool check_metric = true);

  const BlockPartition& partition() const override { return *zpart_; }
  const OperatorDescriptor& descriptor() const override { return desc_; }
  std::vector<CacheEntrySpec> cache_schema() const override;

  void apply_full(const BlockVector& z, BlockVector& out) const override;
  void coordinate_value(const BlockVector& z, std::size_t unit,
                        const MaintainedCache& cache,
                        std::span<double> out) const override;
  void init_cache(const BlockVector& z, MaintainedCache& cache) const override;
  void refresh_cache(const BlockVector& z, std::size_t unit,
                     std::span<const double> old_block,
                     std::span<const double> new_block,
                     MaintainedCache& cache) const override;
  std::optional<double> objective(const BlockVector& z) const override;

  std::size_t num_primal() const { return prob_.a.xpart().num_blocks(); }
  std::size_t num_dual() const { return prob_.a.spart().num_blocks(); }
  double eta() const { return eta_; }
  double gamma() const { return gamma_; }
  CvOrder order() const { return order_; }
  const PrimalDualProblem& problem() const { return prob_; }

  std::span<const double> x_view(const BlockVector& z) const;
  std::span<const double> s_view(const BlockVector& z) const;
  PartitionPtr zpart_ptr() const { return zpart_; }

  // prox_{gamma h*_j} via the Moreau identity
  void prox_h_conj(std::size_t j, std::span<const double> in,
                   std::span<double> out) const;
  void prox_g_block(std::size_t i, std::span<const double> in,
                    std::span<double> out) const;

 private:
  void primal_value(const BlockVector& z, std::size_t i,
                    const MaintainedCache& cache, std::span<double> out) const;
  void dual_value(const BlockVector& z, std::size_t j,
                  const MaintainedCache& cache, std::span<double> out) const;

  PrimalDualProblem prob_;
  double eta_, gamma_;
  CvOrder order_;
  PartitionPtr zpart_;
  OperatorDescriptor desc_;
};

using CondatVuPtr = std::shared_ptr<CondatVuOperator>;

// Jacobi-style operator for minimize g(x) + f(x) s.t. Ax = b:
//   s' = s + gamma (Ax - b)
//   x' = prox_{eta g}(x - eta (grad f + A's + 2 gamma A'Ax - 2 gamma A'b))
// x' does not depend on s'.
class EmpOperator final : public FixedPointOperator {
 public:
  EmpOperator(PrimalDualProblem prob, std::vector<double> b, double eta,
              double gamma, bool check_metric = true);

  const BlockPartition& partition() const override { return *zpart_; }
  const OperatorDescriptor& descriptor() const override { return desc_; }
  std::vector<CacheEntrySpec> cache_schema() const override;
  void apply_full(const BlockVector& z, BlockVector& out) const override;
  void coordinate_value(const BlockVector& z, std::size_t unit,
                        const MaintainedCache& cache,
                        std::span<double> out) const override;
  void init_cache(const BlockVector& z, MaintainedCache& cache) const override;
  void refresh_cache(const BlockVector& z, std::size_t unit,
                     std::span<const double> old_block,
                     std::span<const double> new_block,
                     MaintainedCache& cache) const override;
  std::optional<double> objective(const BlockVector& z) const override;

  std::size_t num_primal() const { return prob_.a.xpart().num_blocks(); }
  std::size_t num_dual() const { return prob_.a.spart().num_blocks(); }
  PartitionPtr zpart_ptr() const { return zpart_; }
  std::span<const double> x_view(const BlockVector& z) const;
  const std::vector<double>& rhs() const { return b_; }

 private:
  PrimalDualProblem prob_;
  std::vector<double> b_;
  double eta_, gamma_;
  PartitionPtr zpart_;
  DenseMatrix normal_;          // A^T A
  std::vector<double> atb_;
  OperatorDescriptor desc_;
};

// ---- overlapping blocks (Eq. 31 / Algorithm 2) ----

// rho_{i,j} >= 0 supported on the nonzero pattern of A^T, summing to 1 over
// i in I(j) for every dual block j.
class OverlapWeights {
 public:
  OverlapWeights() = default;
  OverlapWeights(const LinearCoupling& a,
                 std::map<std::pair<std::size_t, std::size_t>, double> rho);
  static OverlapWeights uniform(const LinearCoupling& a);  // rho = 1/m_j

  double rho(std::size_t i, std::size_t j) const;

 private:
  std::map<std::pair<std::size_t, std::size_t>, double> rho_;
};

// One overlapping-block unit: selecting primal block i computes s~_j for all
// j in J(i) and x~_i from the read snapshot, then commits x_i (full weight)
// and each s_j with relaxation rho_{i,j}, as one indivisible unit.
class OverlapCondatVu {
 public:
  OverlapCondatVu(PrimalDualProblem prob, double eta, double gamma,
                  OverlapWeights weights, bool check_metric = true);

  std::size_t num_units() const { return cv_->num_primal(); }
  const CondatVuOperator& cv() const { return *cv_; }
  CondatVuPtr cv_ptr() const { return cv_; }
  PartitionPtr zpart_ptr() const { return cv_->zpart_ptr(); }

  void init_cache(const BlockVector& z, MaintainedCache& cache) const {
    cv_->init_cache(z, cache);
  }
  // weight scales both the x_i delta and (with rho) the s_j deltas; the x
  // block is staged first, then the touched duals
  void compute_unit(const BlockVector& z_read, const MaintainedCache& cache_read,
                    std::size_t i, double weight, StagedUpdate& out) const;
  void commit_update(const StagedUpdate& u, BlockVector& z,
                     MaintainedCache& cache) const;
  void update_unit(const BlockVector& z_read, const MaintainedCache& cache_read,
                   std::size_t i, double weight, BlockVector& z,
                   MaintainedCache& cache) const;

 private:
  CondatVuPtr cv_;
  OverlapWeights weights_;
};

}  // namespace cfsplit

#endif  // CFSPLIT_PRIMAL_DUAL_HPP_
