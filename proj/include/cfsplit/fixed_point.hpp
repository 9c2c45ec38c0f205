#ifndef CFSPLIT_FIXED_POINT_HPP_
#define CFSPLIT_FIXED_POINT_HPP_

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cfsplit/block.hpp"
#include "cfsplit/cache.hpp"
#include "cfsplit/descriptor.hpp"
#include "cfsplit/matrix.hpp"

namespace cfsplit {

struct CacheEntrySpec {
  std::string name;
  std::size_t size;
};

// A staged multi-block additive update (z.block(b) += delta), committed as
// one indivisible unit together with its cache refreshes.
struct StagedUpdate {
  std::vector<std::size_t> blocks;
  std::vector<std::vector<double>> deltas;
  void clear() {
    blocks.clear();
    deltas.clear();
  }
  std::vector<double>& stage(std::size_t block, std::size_t size) {
    blocks.push_back(block);
    deltas.emplace_back(size, 0.0);
    return deltas.back();
  }
};

// Fixed-point operator T over a block-partitioned space.  x* solves the
// problem iff x* = T x*.  Coordinate form: coordinate_value(x, i) must equal
// block i of apply_full(x); commits go through refresh_cache so the operator
// owns its refresh rule (the driver only forwards old/new blocks).
class FixedPointOperator {
 public:
  virtual ~FixedPointOperator() = default;

  virtual const BlockPartition& partition() const = 0;
  virtual const OperatorDescriptor& descriptor() const = 0;
  virtual std::vector<CacheEntrySpec> cache_schema() const { return {}; }

  virtual void apply_full(const BlockVector& x, BlockVector& out) const = 0;

  // Block i of T x.  `cache` must be valid for x when the schema is nonempty.
  virtual void coordinate_value(const BlockVector& x, std::size_t i,
                                const MaintainedCache& cache,
                                std::span<double> out) const = 0;

  // Rebuild every maintained quantity from scratch for the given iterate.
  virtual void init_cache(const BlockVector& x, MaintainedCache& cache) const;

  // Incremental refresh after block i changed old_block -> new_block.
  // x holds the post-commit iterate.
  virtual void refresh_cache(const BlockVector& x, std::size_t i,
                             std::span<const double> old_block,
                             std::span<const double> new_block,
                             MaintainedCache& cache) const;

  // Optional objective (monitoring only).
  virtual std::optional<double> objective(const BlockVector& x) const {
    (void)x;
    return std::nullopt;
  }

  // Optional per-block scores for the greedy rule (e.g. maintained gradient
  // norms).  Returns false when the operator cannot supply them cheaply.
  virtual bool scores(const BlockVector& x, const MaintainedCache& cache,
                      std::span<double> out) const {
    (void)x;
    (void)cache;
    (void)out;
    return false;
  }

  BlockVector apply(const BlockVector& x) const;
};

using OperatorPtr = std::shared_ptr<FixedPointOperator>;

// One coordinate update at eta = 1: x_i <- (T x)_i, cache refreshed to M(x+).
void apply_coordinate(const FixedPointOperator& op, BlockVector& x,
                      std::size_t i, MaintainedCache& cache);

// Damped commit: x_i <- x_i - weight * (x_i - (T x)_i); refreshes the cache
// for the committed (damped) block.  Returns the undamped coordinate value.
void damped_coordinate_commit(const FixedPointOperator& op, BlockVector& x,
                              std::size_t i, double weight,
                              MaintainedCache& cache,
                              std::span<double> scratch);

// Max over cache entries of ||cached - recomputed|| / (1 + ||recomputed||).
double cache_audit(const FixedPointOperator& op, const BlockVector& x,
                   const MaintainedCache& cache);

// ||x - T x||
double fixed_point_residual(const FixedPointOperator& op, const BlockVector& x);

// ---- linear gradient-descent operators (least squares) ----
// T x = x - eta * A^T (A x - b), with three cache regimes.
enum class LinearGradientRegime {
  kPrecomputedNormal,  // A^T A formed; coordinate cost O(m); no cache
  kMaintainTx,         // maintain T x; O(1) read + O(m) rank-1 refresh
  kMaintainAx,         // maintain A x; O(p) coordinate + O(p) refresh
};

OperatorPtr make_linear_gradient(const DenseMatrix& a,
                                 std::span<const double> b, double eta,
                                 LinearGradientRegime regime,
                                 PartitionPtr partition = nullptr);

// Diagonally scaled residual operator for least squares:
// (T x)_i = x_i - grad_i f(x) / (A^T A)_{ii}; coordinate update with eta = 1
// is exact coordinate minimization.  Maintains the gradient, which doubles as
// the Gauss-Southwell score vector.
OperatorPtr make_coordinate_least_squares(const DenseMatrix& a,
                                          std::span<const double> b,
                                          PartitionPtr partition = nullptr);

// Identity (test plumbing).
OperatorPtr make_identity_operator(PartitionPtr partition);

// Wrap a full-update map as a (non-CF) operator: coordinate values fall back
// to a full application.
OperatorPtr make_full_update_operator(
    PartitionPtr partition,
    std::function<void(std::span<const double>, std::span<double>)> step,
    OperatorDescriptor descriptor,
    std::function<double(std::span<const double>)> objective = nullptr);

// (1 - eta) I + eta T
OperatorPtr km_relax(OperatorPtr op, double eta);

}  // namespace cfsplit

#endif  // CFSPLIT_FIXED_POINT_HPP_
