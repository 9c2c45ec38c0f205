#include "cfsplit/fixed_point.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <functional>

#include "cfsplit/kernels.hpp"

namespace cfsplit {

void FixedPointOperator::init_cache(const BlockVector& x,
                                    MaintainedCache& cache) const {
  (void)x;
  if (!cache_schema().empty())
    throw CacheInvalidError("operator declares a cache schema but no init");
  cache.clear();
}

void FixedPointOperator::refresh_cache(const BlockVector&, std::size_t,
                                       std::span<const double>,
                                       std::span<const double>,
                                       MaintainedCache&) const {
  if (!cache_schema().empty())
    throw CacheInvalidError("operator declares a cache schema but no refresh");
}

BlockVector FixedPointOperator::apply(const BlockVector& x) const {
  BlockVector out(x.partition_ptr());
  apply_full(x, out);
  return out;
}

void apply_coordinate(const FixedPointOperator& op, BlockVector& x,
                      std::size_t i, MaintainedCache& cache) {
  if (i >= x.num_blocks()) throw DimensionError("apply_coordinate: block index");
  std::vector<double> value(x.partition().block_size(i));
  op.coordinate_value(x, i, cache, value);
  std::vector<double> old(x.block(i).begin(), x.block(i).end());
  kern::copy(value, x.block(i));
  op.refresh_cache(x, i, old, value, cache);
  cache.bump_epoch();
}

void damped_coordinate_commit(const FixedPointOperator& op, BlockVector& x,
                              std::size_t i, double weight,
                              MaintainedCache& cache,
                              std::span<double> scratch) {
  const std::size_t w = x.partition().block_size(i);
  assert(scratch.size() >= 2 * w);
  std::span<double> value = scratch.subspan(0, w);
  std::span<double> old = scratch.subspan(w, w);
  op.coordinate_value(x, i, cache, value);
  auto xi = x.block(i);
  kern::copy(xi, old);
  for (std::size_t j = 0; j < w; ++j) xi[j] = xi[j] - weight * (xi[j] - value[j]);
  ops::add(3 * w);
  op.refresh_cache(x, i, old, xi, cache);
  cache.bump_epoch();
}

double cache_audit(const FixedPointOperator& op, const BlockVector& x,
                   const MaintainedCache& cache) {
  ops::SuspendCounting pause;
  MaintainedCache fresh;
  op.init_cache(x, fresh);
  double worst = 0.0;
  for (const auto& spec : op.cache_schema()) {
    if (!cache.has(spec.name))
      throw CacheInvalidError("cache_audit: missing entry " + spec.name);
    auto have = cache.entry(spec.name);
    auto want = fresh.entry(spec.name);
    if (have.size() != want.size())
      throw CacheInvalidError("cache_audit: shape mismatch for " + spec.name);
    double diff = 0.0, ref = 0.0;
    for (std::size_t k = 0; k < have.size(); ++k) {
      const double d = have[k] - want[k];
      diff += d * d;
      ref += want[k] * want[k];
    }
    worst = std::max(worst, std::sqrt(diff) / (1.0 + std::sqrt(ref)));
  }
  return worst;
}

double fixed_point_residual(const FixedPointOperator& op, const BlockVector& x) {
  ops::SuspendCounting pause;
  BlockVector tx = op.apply(x);
  double s = 0.0;
  for (std::size_t k = 0; k < x.dim(); ++k) {
    const double d = x.all()[k] - tx.all()[k];
    s += d * d;
  }
  return std::sqrt(s);
}

namespace {

PartitionPtr default_partition(PartitionPtr p, std::size_t m) {
  if (p) {
    if (p->total_dim() != m)
      throw DimensionError("partition does not cover the variable");
    return p;
  }
  return make_partition(std::vector<std::size_t>(m, 1));
}

class LinearGradientOp final : public FixedPointOperator {
 public:
  LinearGradientOp(const DenseMatrix& a, std::span<const double> b, double eta,
                   LinearGradientRegime regime, PartitionPtr partition)
      : a_(a),
        b_(b.begin(), b.end()),
        eta_(eta),
        regime_(regime),
        part_(default_partition(std::move(partition), a.cols())) {
    if (a.rows() == 0 || a.cols() == 0)
      throw DimensionError("linear gradient: zero-size A");
    if (b.size() != a.rows()) throw DimensionError("linear gradient: b size");
    if (eta <= 0.0) throw ConfigError("linear gradient: eta must be > 0");
    atb_.assign(a.cols(), 0.0);
    a_.mul_t(b_, atb_);
    if (regime_ != LinearGradientRegime::kMaintainAx) normal_ = a_.gram();
    const std::size_t m = a.cols(), p = a.rows();
    switch (regime_) {
      case LinearGradientRegime::kPrecomputedNormal:
        desc_ = {SepClass::kNonSeparable, CfClass::kType1, 2 * m * m,
                 2 * m * (m / part_->num_blocks() + 1)};
        break;
      case LinearGradientRegime::kMaintainTx:
        desc_ = {SepClass::kNonSeparable, CfClass::kType2, 2 * m * m,
                 3 * m * (m / part_->num_blocks() + 1)};
        break;
      case LinearGradientRegime::kMaintainAx:
        desc_ = {SepClass::kNonSeparable, CfClass::kCfWithCache, 4 * m * p,
                 5 * p * (m / part_->num_blocks() + 1)};
        break;
    }
  }

  const BlockPartition& partition() const override { return *part_; }
  const OperatorDescriptor& descriptor() const override { return desc_; }

  std::vector<CacheEntrySpec> cache_schema() const override {
    switch (regime_) {
      case LinearGradientRegime::kPrecomputedNormal: return {};
      case LinearGradientRegime::kMaintainTx: return {{"Tx", a_.cols()}};
      case LinearGradientRegime::kMaintainAx: return {{"Ax", a_.rows()}};
    }
    return {};
  }

  void apply_full(const BlockVector& x, BlockVector& out) const override {
    check_dims(x);
    const std::size_t m = a_.cols();
    if (regime_ == LinearGradientRegime::kMaintainAx) {
      std::vector<double> ax(a_.rows());
      a_.mul(x.all(), ax);
      kern::axpy(-1.0, b_, ax);
      std::vector<double> grad(m);
      a_.mul_t(ax, grad);
      for (std::size_t i = 0; i < m; ++i) out.all()[i] = x.all()[i] - eta_ * grad[i];
      ops::add(2 * m);
    } else {
      std::vector<double> nx(m);
      normal_.mul(x.all(), nx);
      for (std::size_t i = 0; i < m; ++i)
        out.all()[i] = x.all()[i] - eta_ * (nx[i] - atb_[i]);
      ops::add(3 * m);
    }
  }

  void coordinate_value(const BlockVector& x, std::size_t i,
                        const MaintainedCache& cache,
                        std::span<double> out) const override {
    check_dims(x);
    const std::size_t off = part_->offset(i), w = part_->block_size(i);
    switch (regime_) {
      case LinearGradientRegime::kPrecomputedNormal: {
        for (std::size_t j = 0; j < w; ++j) {
          const double g = kern::dot(normal_.row(off + j), x.all()) - atb_[off + j];
          out[j] = x.all()[off + j] - eta_ * g;
        }
        ops::add(3 * w);
        break;
      }
      case LinearGradientRegime::kMaintainTx: {
        auto tx = cache.entry("Tx");
        kern::copy(tx.subspan(off, w), out);
        break;
      }
      case LinearGradientRegime::kMaintainAx: {
        auto ax = cache.entry("Ax");
        std::vector<double> r(a_.rows());
        kern::sub(ax, b_, r);
        a_.col_block_t_times(off, w, r, out);
        for (std::size_t j = 0; j < w; ++j)
          out[j] = x.all()[off + j] - eta_ * out[j];
        ops::add(2 * w);
        break;
      }
    }
  }

  void init_cache(const BlockVector& x, MaintainedCache& cache) const override {
    check_dims(x);
    cache.clear();
    if (regime_ == LinearGradientRegime::kMaintainTx) {
      auto& tx = cache.create("Tx", a_.cols());
      BlockVector out(x.partition_ptr());
      apply_full(x, out);
      std::copy(out.all().begin(), out.all().end(), tx.begin());
    } else if (regime_ == LinearGradientRegime::kMaintainAx) {
      auto& ax = cache.create("Ax", a_.rows());
      a_.mul(x.all(), ax);
    }
  }

  void refresh_cache(const BlockVector& x, std::size_t i,
                     std::span<const double> old_block,
                     std::span<const double> new_block,
                     MaintainedCache& cache) const override {
    (void)x;
    const std::size_t off = part_->offset(i), w = part_->block_size(i);
    if (regime_ == LinearGradientRegime::kMaintainTx) {
      // T x+ = T x + (x+ - x) - eta * delta * (A^T A)_{:,i}
      auto tx = cache.entry("Tx");
      std::vector<double> delta(w);
      for (std::size_t j = 0; j < w; ++j) {
        delta[j] = new_block[j] - old_block[j];
        tx[off + j] += delta[j];
      }
      ops::add(2 * w);
      normal_.add_col_block_times(-eta_, off, w, delta, tx);
    } else if (regime_ == LinearGradientRegime::kMaintainAx) {
      // A x+ = A x + delta * A_{:,i}
      auto ax = cache.entry("Ax");
      std::vector<double> delta(w);
      for (std::size_t j = 0; j < w; ++j) delta[j] = new_block[j] - old_block[j];
      ops::add(w);
      a_.add_col_block_times(1.0, off, w, delta, ax);
    }
  }

  std::optional<double> objective(const BlockVector& x) const override {
    ops::SuspendCounting pause;
    std::vector<double> r(a_.rows());
    a_.mul(x.all(), r);
    kern::axpy(-1.0, b_, r);
    return 0.5 * kern::nrm2sq(r);
  }

  bool scores(const BlockVector& x, const MaintainedCache& cache,
              std::span<double> out) const override {
    if (regime_ != LinearGradientRegime::kMaintainTx) return false;
    // || x_i - (Tx)_i || = eta * ||grad_i f||: same argmax as Gauss-Southwell
    auto tx = cache.entry("Tx");
    for (std::size_t i = 0; i < part_->num_blocks(); ++i) {
      const std::size_t off = part_->offset(i), w = part_->block_size(i);
      double s = 0.0;
      for (std::size_t j = 0; j < w; ++j) {
        const double d = x.all()[off + j] - tx[off + j];
        s += d * d;
      }
      out[i] = std::sqrt(s);
    }
    ops::add(3 * x.dim());
    return true;
  }

 private:
  void check_dims(const BlockVector& x) const {
    if (x.dim() != a_.cols()) throw DimensionError("linear gradient: x size");
  }

  DenseMatrix a_;
  std::vector<double> b_, atb_;
  double eta_;
  LinearGradientRegime regime_;
  PartitionPtr part_;
  DenseMatrix normal_;
  OperatorDescriptor desc_;
};

class CoordinateLeastSquaresOp final : public FixedPointOperator {
 public:
  CoordinateLeastSquaresOp(const DenseMatrix& a, std::span<const double> b,
                           PartitionPtr partition)
      : a_(a),
        b_(b.begin(), b.end()),
        part_(default_partition(std::move(partition), a.cols())) {
    if (a.rows() == 0 || a.cols() == 0)
      throw DimensionError("least squares: zero-size A");
    normal_ = a_.gram();
    atb_.assign(a_.cols(), 0.0);
    a_.mul_t(b_, atb_);
    diag_.resize(a_.cols());
    for (std::size_t i = 0; i < a_.cols(); ++i) {
      diag_[i] = normal_.at(i, i);
      if (diag_[i] <= 0.0)
        throw DimensionError("least squares: zero column in A");
    }
    const std::size_t m = a_.cols();
    desc_ = {SepClass::kNonSeparable, CfClass::kCfWithCache, 2 * m * m,
             3 * m * (m / part_->num_blocks() + 1)};
  }

  const BlockPartition& partition() const override { return *part_; }
  const OperatorDescriptor& descriptor() const override { return desc_; }
  std::vector<CacheEntrySpec> cache_schema() const override {
    return {{"grad", a_.cols()}};
  }

  void apply_full(const BlockVector& x, BlockVector& out) const override {
    std::vector<double> g(a_.cols());
    normal_.mul(x.all(), g);
    for (std::size_t i = 0; i < a_.cols(); ++i)
      out.all()[i] = x.all()[i] - (g[i] - atb_[i]) / diag_[i];
    ops::add(3 * a_.cols());
  }

  void coordinate_value(const BlockVector& x, std::size_t i,
                        const MaintainedCache& cache,
                        std::span<double> out) const override {
    auto g = cache.entry("grad");
    const std::size_t off = part_->offset(i), w = part_->block_size(i);
    for (std::size_t j = 0; j < w; ++j)
      out[j] = x.all()[off + j] - g[off + j] / diag_[off + j];
    ops::add(2 * w);
  }

  void init_cache(const BlockVector& x, MaintainedCache& cache) const override {
    cache.clear();
    auto& g = cache.create("grad", a_.cols());
    normal_.mul(x.all(), g);
    for (std::size_t i = 0; i < a_.cols(); ++i) g[i] -= atb_[i];
    ops::add(a_.cols());
  }

  void refresh_cache(const BlockVector& x, std::size_t i,
                     std::span<const double> old_block,
                     std::span<const double> new_block,
                     MaintainedCache& cache) const override {
    (void)x;
    auto g = cache.entry("grad");
    const std::size_t off = part_->offset(i), w = part_->block_size(i);
    std::vector<double> delta(w);
    for (std::size_t j = 0; j < w; ++j) delta[j] = new_block[j] - old_block[j];
    ops::add(w);
    normal_.add_col_block_times(1.0, off, w, delta, g);
  }

  std::optional<double> objective(const BlockVector& x) const override {
    ops::SuspendCounting pause;
    std::vector<double> r(a_.rows());
    a_.mul(x.all(), r);
    kern::axpy(-1.0, b_, r);
    return 0.5 * kern::nrm2sq(r);
  }

  bool scores(const BlockVector& x, const MaintainedCache& cache,
              std::span<double> out) const override {
    (void)x;
    auto g = cache.entry("grad");
    for (std::size_t i = 0; i < part_->num_blocks(); ++i) {
      const std::size_t off = part_->offset(i), w = part_->block_size(i);
      double s = 0.0;
      for (std::size_t j = 0; j < w; ++j) s += g[off + j] * g[off + j];
      out[i] = std::sqrt(s);
    }
    ops::add(2 * x.dim());
    return true;
  }

 private:
  DenseMatrix a_, normal_;
  std::vector<double> b_, atb_, diag_;
  PartitionPtr part_;
  OperatorDescriptor desc_;
};

class IdentityOp final : public FixedPointOperator {
 public:
  explicit IdentityOp(PartitionPtr p) : part_(std::move(p)) {
    desc_ = {SepClass::kSeparable, CfClass::kType1, part_->total_dim(), 1};
  }
  const BlockPartition& partition() const override { return *part_; }
  const OperatorDescriptor& descriptor() const override { return desc_; }
  void apply_full(const BlockVector& x, BlockVector& out) const override {
    kern::copy(x.all(), out.all());
  }
  void coordinate_value(const BlockVector& x, std::size_t i,
                        const MaintainedCache&, std::span<double> out) const override {
    kern::copy(x.block(i), out);
  }

 private:
  PartitionPtr part_;
  OperatorDescriptor desc_;
};

class FullUpdateOp final : public FixedPointOperator {
 public:
  FullUpdateOp(PartitionPtr p,
               std::function<void(std::span<const double>, std::span<double>)> step,
               OperatorDescriptor d,
               std::function<double(std::span<const double>)> obj)
      : part_(std::move(p)), step_(std::move(step)), desc_(d), obj_(std::move(obj)) {}

  const BlockPartition& partition() const override { return *part_; }
  const OperatorDescriptor& descriptor() const override { return desc_; }
  void apply_full(const BlockVector& x, BlockVector& out) const override {
    step_(x.all(), out.all());
  }
  void coordinate_value(const BlockVector& x, std::size_t i,
                        const MaintainedCache&, std::span<double> out) const override {
    std::vector<double> full(x.dim());
    step_(x.all(), full);
    const std::size_t off = part_->offset(i);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = full[off + j];
  }
  std::optional<double> objective(const BlockVector& x) const override {
    if (!obj_) return std::nullopt;
    ops::SuspendCounting pause;
    return obj_(x.all());
  }

 private:
  PartitionPtr part_;
  std::function<void(std::span<const double>, std::span<double>)> step_;
  OperatorDescriptor desc_;
  std::function<double(std::span<const double>)> obj_;
};

class KmRelaxOp final : public FixedPointOperator {
 public:
  KmRelaxOp(OperatorPtr inner, double eta) : inner_(std::move(inner)), eta_(eta) {
    if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("km_relax: eta in (0,1]");
    desc_ = inner_->descriptor();
  }
  const BlockPartition& partition() const override { return inner_->partition(); }
  const OperatorDescriptor& descriptor() const override { return desc_; }
  std::vector<CacheEntrySpec> cache_schema() const override {
    return inner_->cache_schema();
  }
  void apply_full(const BlockVector& x, BlockVector& out) const override {
    inner_->apply_full(x, out);
    for (std::size_t k = 0; k < x.dim(); ++k)
      out.all()[k] = (1.0 - eta_) * x.all()[k] + eta_ * out.all()[k];
    ops::add(3 * x.dim());
  }
  void coordinate_value(const BlockVector& x, std::size_t i,
                        const MaintainedCache& cache,
                        std::span<double> out) const override {
    inner_->coordinate_value(x, i, cache, out);
    auto xi = x.block(i);
    for (std::size_t j = 0; j < out.size(); ++j)
      out[j] = (1.0 - eta_) * xi[j] + eta_ * out[j];
    ops::add(3 * out.size());
  }
  void init_cache(const BlockVector& x, MaintainedCache& c) const override {
    inner_->init_cache(x, c);
  }
  void refresh_cache(const BlockVector& x, std::size_t i,
                     std::span<const double> o, std::span<const double> n,
                     MaintainedCache& c) const override {
    inner_->refresh_cache(x, i, o, n, c);
  }
  std::optional<double> objective(const BlockVector& x) const override {
    return inner_->objective(x);
  }
  bool scores(const BlockVector& x, const MaintainedCache& c,
              std::span<double> out) const override {
    return inner_->scores(x, c, out);
  }

 private:
  OperatorPtr inner_;
  double eta_;
  OperatorDescriptor desc_;
};

}  // namespace

OperatorPtr make_linear_gradient(const DenseMatrix& a, std::span<const double> b,
                                 double eta, LinearGradientRegime regime,
                                 PartitionPtr partition) {
  if (a.rows() == 0 || a.cols() == 0)
    throw DimensionError("linear gradient: zero-size A");
  return std::make_shared<LinearGradientOp>(a, b, eta, regime, std::move(partition));
}

OperatorPtr make_coordinate_least_squares(const DenseMatrix& a,
                                          std::span<const double> b,
                                          PartitionPtr partition) {
  return std::make_shared<CoordinateLeastSquaresOp>(a, b, std::move(partition));
}

OperatorPtr make_identity_operator(PartitionPtr partition) {
  return std::make_shared<IdentityOp>(std::move(partition));
}

OperatorPtr make_full_update_operator(
    PartitionPtr partition,
    std::function<void(std::span<const double>, std::span<double>)> step,
    OperatorDescriptor descriptor,
    std::function<double(std::span<const double>)> objective) {
  return std::make_shared<FullUpdateOp>(std::move(partition), std::move(step),
                                        descriptor, std::move(objective));
}

OperatorPtr km_relax(OperatorPtr op, double eta) {
  return std::make_shared<KmRelaxOp>(std::move(op), eta);
}

}  // namespace cfsplit
