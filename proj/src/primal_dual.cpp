#include "cfsplit/primal_dual.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "cfsplit/kernels.hpp"
#include "cfsplit/linalg.hpp"

namespace cfsplit {

// ---- smooth terms ----

namespace {

class ZeroSmooth final : public SmoothTerm {
 public:
  explicit ZeroSmooth(std::size_t n) : n_(n) {}
  std::size_t dim() const override { return n_; }
  double beta() const override { return 0.0; }
  void grad_full(std::span<const double>, const MaintainedCache&,
                 std::span<double> out) const override {
    kern::fill(out, 0.0);
  }
  void grad_block(std::span<const double>, std::size_t, std::size_t,
                  const MaintainedCache&, std::span<double> out) const override {
    kern::fill(out, 0.0);
  }
  std::optional<double> value(std::span<const double>) const override {
    return 0.0;
  }

 private:
  std::size_t n_;
};

// f = 0.5 x'Ux + c'x with the gradient Ux + c maintained
class QuadraticSmooth final : public SmoothTerm {
 public:
  QuadraticSmooth(DenseMatrix u, std::vector<double> c)
      : u_(std::move(u)), c_(std::move(c)) {
    if (u_.rows() != u_.cols() || u_.rows() != c_.size())
      throw DimensionError("quadratic smooth: shape");
    beta_ = linalg::spectral_norm(u_);
  }
  std::size_t dim() const override { return c_.size(); }
  double beta() const override { return beta_; }
  std::vector<CacheEntrySpec> cache_schema() const override {
    return {{"f.grad", c_.size()}};
  }
  void init_cache(std::span<const double> x, MaintainedCache& c) const override {
    auto& g = c.create("f.grad", c_.size());
    u_.mul(x, g);
    kern::axpy(1.0, c_, g);
  }
  void grad_full(std::span<const double>, const MaintainedCache& c,
                 std::span<double> out) const override {
    kern::copy(c.entry("f.grad"), out);
  }
  void grad_block(std::span<const double>, std::size_t off, std::size_t w,
                  const MaintainedCache& c, std::span<double> out) const override {
    kern::copy(c.entry("f.grad").subspan(off, w), out);
  }
  void refresh(std::size_t off, std::span<const double> old_block,
               std::span<const double> new_block,
               MaintainedCache& c) const override {
    auto g = c.entry("f.grad");
    std::vector<double> delta(old_block.size());
    for (std::size_t j = 0; j < delta.size(); ++j)
      delta[j] = new_block[j] - old_block[j];
    ops::add(delta.size());
    u_.add_col_block_times(1.0, off, delta.size(), delta, g);
  }
  std::optional<double> value(std::span<const double> x) const override {
    ops::SuspendCounting pause;
    std::vector<double> ux(c_.size());
    u_.mul(x, ux);
    return 0.5 * kern::dot(x, ux) + kern::dot(c_, x);
  }

 private:
  DenseMatrix u_;
  std::vector<double> c_;
  double beta_ = 0.0;
};

// f(x) = sum_j phi_j(u_j), u = Ax + b maintained; matrix generic over
// dense/sparse storage
template <typename Mat>
class ScalarAffineSmooth final : public SmoothTerm {
 public:
  ScalarAffineSmooth(Mat a, std::vector<double> b,
                     std::function<double(std::size_t, double)> dphi,
                     double beta, std::function<double(std::size_t, double)> phi)
      : a_(std::move(a)),
        b_(std::move(b)),
        dphi_(std::move(dphi)),
        phi_(std::move(phi)),
        beta_(beta) {
    if (b_.size() != a_.rows()) throw DimensionError("scalar affine: b size");
  }
  std::size_t dim() const override { return a_.cols(); }
  double beta() const override { return beta_; }
  std::vector<CacheEntrySpec> cache_schema() const override {
    return {{"f.affine", a_.rows()}};
  }
  void init_cache(std::span<const double> x, MaintainedCache& c) const override {
    auto& u = c.create("f.affine", a_.rows());
    a_.mul(x, u);
    kern::axpy(1.0, b_, u);
  }
  void grad_full(std::span<const double>, const MaintainedCache& c,
                 std::span<double> out) const override {
    auto u = c.entry("f.affine");
    std::vector<double> w(u.size());
    for (std::size_t j = 0; j < u.size(); ++j) w[j] = dphi_(j, u[j]);
    ops::add(2 * u.size());
    a_.mul_t(w, out);
  }
  void grad_block(std::span<const double>, std::size_t off, std::size_t width,
                  const MaintainedCache& c, std::span<double> out) const override {
    auto u = c.entry("f.affine");
    std::vector<double> w(u.size());
    for (std::size_t j = 0; j < u.size(); ++j) w[j] = dphi_(j, u[j]);
    ops::add(2 * u.size());
    col_block_t(off, width, w, out);
  }
  void refresh(std::size_t off, std::span<const double> old_block,
               std::span<const double> new_block,
               MaintainedCache& c) const override {
    auto u = c.entry("f.affine");
    std::vector<double> delta(old_block.size());
    for (std::size_t j = 0; j < delta.size(); ++j)
      delta[j] = new_block[j] - old_block[j];
    ops::add(delta.size());
    add_col_block(off, delta, u);
  }
  std::optional<double> value(std::span<const double> x) const override {
    if (!phi_) return std::nullopt;
    ops::SuspendCounting pause;
    std::vector<double> u(a_.rows());
    a_.mul(x, u);
    kern::axpy(1.0, b_, u);
    double s = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) s += phi_(j, u[j]);
    return s;
  }

 private:
  void col_block_t(std::size_t off, std::size_t width,
                   std::span<const double> v, std::span<double> out) const {
    if constexpr (std::is_same_v<Mat, DenseMatrix>) {
      a_.col_block_t_times(off, width, v, out);
    } else {
      kern::fill(out, 0.0);
      for (std::size_t c = off; c < off + width; ++c) {
        for (std::size_t k = a_.col_begin(c); k < a_.col_end(c); ++k)
          out[c - off] += a_.col_val(k) * v[a_.col_row(k)];
        ops::add(2 * (a_.col_end(c) - a_.col_begin(c)));
      }
    }
  }
  void add_col_block(std::size_t off, std::span<const double> delta,
                     std::span<double> u) const {
    if constexpr (std::is_same_v<Mat, DenseMatrix>) {
      a_.add_col_block_times(1.0, off, delta.size(), delta, u);
    } else {
      for (std::size_t j = 0; j < delta.size(); ++j)
        a_.add_scaled_col(delta[j], off + j, u);
    }
  }

  Mat a_;
  std::vector<double> b_;
  std::function<double(std::size_t, double)> dphi_, phi_;
  double beta_ = 0.0;
};

void grad_fresh(const SmoothTerm& f, std::span<const double> x,
                std::span<double> out) {
  if (f.cache_schema().empty()) {
    MaintainedCache none;
    f.grad_full(x, none, out);
  } else {
    MaintainedCache local;
    f.init_cache(x, local);
    f.grad_full(x, local, out);
  }
}

}  // namespace

SmoothPtr make_zero_smooth(std::size_t dim) {
  return std::make_shared<ZeroSmooth>(dim);
}

SmoothPtr make_quadratic_smooth(DenseMatrix u, std::vector<double> c) {
  return std::make_shared<QuadraticSmooth>(std::move(u), std::move(c));
}

SmoothPtr make_scalar_affine_smooth(
    DenseMatrix a, std::vector<double> b,
    std::function<double(std::size_t, double)> dphi, double beta,
    std::function<double(std::size_t, double)> phi) {
  return std::make_shared<ScalarAffineSmooth<DenseMatrix>>(
      std::move(a), std::move(b), std::move(dphi), beta, std::move(phi));
}

SmoothPtr make_scalar_affine_smooth_sparse(
    SparseMatrix a, std::vector<double> b,
    std::function<double(std::size_t, double)> dphi, double beta,
    std::function<double(std::size_t, double)> phi) {
  return std::make_shared<ScalarAffineSmooth<SparseMatrix>>(
      std::move(a), std::move(b), std::move(dphi), beta, std::move(phi));
}

SmoothPtr make_least_squares_smooth(DenseMatrix a, std::vector<double> b) {
  const double norm = linalg::spectral_norm(a);
  std::vector<double> negb(b.size());
  for (std::size_t j = 0; j < b.size(); ++j) negb[j] = -b[j];
  return make_scalar_affine_smooth(
      std::move(a), std::move(negb),
      [](std::size_t, double u) { return u; }, norm * norm,
      [](std::size_t, double u) { return 0.5 * u * u; });
}

// ---- linear coupling ----

namespace {
void check_coupling(std::size_t rows, std::size_t cols, const PartitionPtr& xp,
                    const PartitionPtr& sp) {
  if (!xp || !sp) throw ConfigError("coupling: partitions required");
  if (xp->total_dim() != cols || sp->total_dim() != rows)
    throw DimensionError("coupling: partitions do not match matrix shape");
}
}  // namespace

LinearCoupling::LinearCoupling(DenseMatrix a, PartitionPtr xpart, PartitionPtr spart)
    : a_(std::move(a)), xpart_(std::move(xpart)), spart_(std::move(spart)) {
  const auto& d = std::get<DenseMatrix>(a_);
  rows_ = d.rows();
  cols_ = d.cols();
  check_coupling(rows_, cols_, xpart_, spart_);
  // dense: every dual block touches every primal block
  duals_of_.resize(xpart_->num_blocks());
  primals_of_.resize(spart_->num_blocks());
  for (std::size_t i = 0; i < xpart_->num_blocks(); ++i)
    for (std::size_t j = 0; j < spart_->num_blocks(); ++j)
      duals_of_[i].push_back(j);
  for (std::size_t j = 0; j < spart_->num_blocks(); ++j)
    for (std::size_t i = 0; i < xpart_->num_blocks(); ++i)
      primals_of_[j].push_back(i);
}

LinearCoupling::LinearCoupling(SparseMatrix a, PartitionPtr xpart, PartitionPtr spart)
    : a_(std::move(a)), xpart_(std::move(xpart)), spart_(std::move(spart)) {
  const auto& s = std::get<SparseMatrix>(a_);
  rows_ = s.rows();
  cols_ = s.cols();
  check_coupling(rows_, cols_, xpart_, spart_);
  // block sparsity from the scalar pattern
  std::vector<std::size_t> row_block(rows_), col_block(cols_);
  for (std::size_t j = 0; j < spart_->num_blocks(); ++j)
    for (std::size_t r = spart_->offset(j); r < spart_->offset(j) + spart_->block_size(j); ++r)
      row_block[r] = j;
  for (std::size_t i = 0; i < xpart_->num_blocks(); ++i)
    for (std::size_t c = xpart_->offset(i); c < xpart_->offset(i) + xpart_->block_size(i); ++c)
      col_block[c] = i;
  std::vector<std::vector<bool>> seen(xpart_->num_blocks(),
                                      std::vector<bool>(spart_->num_blocks(), false));
  duals_of_.resize(xpart_->num_blocks());
  primals_of_.resize(spart_->num_blocks());
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = s.row_begin(r); k < s.row_end(r); ++k) {
      const std::size_t i = col_block[s.row_col(k)], j = row_block[r];
      if (!seen[i][j]) {
        seen[i][j] = true;
        duals_of_[i].push_back(j);
        primals_of_[j].push_back(i);
      }
    }
  for (auto& v : duals_of_) std::sort(v.begin(), v.end());
  for (auto& v : primals_of_) std::sort(v.begin(), v.end());
}

void LinearCoupling::mul(std::span<const double> x, std::span<double> y) const {
  std::visit([&](const auto& m) {
    if constexpr (!std::is_same_v<std::decay_t<decltype(m)>, std::monostate>)
      m.mul(x, y);
  }, a_);
}

void LinearCoupling::mul_t(std::span<const double> s, std::span<double> out) const {
  std::visit([&](const auto& m) {
    if constexpr (!std::is_same_v<std::decay_t<decltype(m)>, std::monostate>)
      m.mul_t(s, out);
  }, a_);
}

void LinearCoupling::row_block_times(std::size_t j, std::span<const double> x,
                                     std::span<double> out) const {
  const std::size_t off = spart_->offset(j), w = spart_->block_size(j);
  if (const auto* d = std::get_if<DenseMatrix>(&a_)) {
    for (std::size_t r = 0; r < w; ++r) out[r] = kern::dot(d->row(off + r), x);
  } else {
    const auto& s = std::get<SparseMatrix>(a_);
    for (std::size_t r = 0; r < w; ++r) out[r] = s.row_dot(off + r, x);
  }
}

void LinearCoupling::col_block_t_times(std::size_t i, std::span<const double> s,
                                       std::span<double> out) const {
  const std::size_t off = xpart_->offset(i), w = xpart_->block_size(i);
  if (const auto* d = std::get_if<DenseMatrix>(&a_)) {
    d->col_block_t_times(off, w, s, out);
  } else {
    const auto& sp = std::get<SparseMatrix>(a_);
    for (std::size_t c = 0; c < w; ++c) out[c] = sp.col_dot(off + c, s);
  }
}

void LinearCoupling::add_col_block_times(std::size_t i,
                                         std::span<const double> delta,
                                         std::span<double> y) const {
  const std::size_t off = xpart_->offset(i);
  if (const auto* d = std::get_if<DenseMatrix>(&a_)) {
    d->add_col_block_times(1.0, off, delta.size(), delta, y);
  } else {
    const auto& sp = std::get<SparseMatrix>(a_);
    for (std::size_t c = 0; c < delta.size(); ++c)
      sp.add_scaled_col(delta[c], off + c, y);
  }
}

void LinearCoupling::add_row_block_t_times(std::size_t j,
                                           std::span<const double> delta,
                                           std::span<double> out) const {
  const std::size_t off = spart_->offset(j);
  if (const auto* d = std::get_if<DenseMatrix>(&a_)) {
    for (std::size_t r = 0; r < delta.size(); ++r)
      kern::axpy(delta[r], d->row(off + r), out);
  } else {
    const auto& sp = std::get<SparseMatrix>(a_);
    for (std::size_t r = 0; r < delta.size(); ++r) {
      for (std::size_t k = sp.row_begin(off + r); k < sp.row_end(off + r); ++k)
        out[sp.row_col(k)] += delta[r] * sp.row_val(k);
      ops::add(2 * (sp.row_end(off + r) - sp.row_begin(off + r)));
    }
  }
}

void LinearCoupling::add_subblock_t_times(std::size_t i, std::size_t j,
                                          double scale, std::span<const double> v,
                                          std::span<double> out) const {
  const std::size_t xoff = xpart_->offset(i), xw = xpart_->block_size(i);
  const std::size_t soff = spart_->offset(j), sw = spart_->block_size(j);
  if (const auto* d = std::get_if<DenseMatrix>(&a_)) {
    for (std::size_t r = 0; r < sw; ++r) {
      auto row = d->row(soff + r);
      for (std::size_t c = 0; c < xw; ++c)
        out[c] += scale * row[xoff + c] * v[r];
    }
    ops::add(3 * sw * xw);
  } else {
    const auto& sp = std::get<SparseMatrix>(a_);
    for (std::size_t r = 0; r < sw; ++r) {
      for (std::size_t k = sp.row_begin(soff + r); k < sp.row_end(soff + r); ++k) {
        const std::size_t c = sp.row_col(k);
        if (c >= xoff && c < xoff + xw)
          out[c - xoff] += scale * sp.row_val(k) * v[r];
      }
      ops::add(3 * (sp.row_end(soff + r) - sp.row_begin(soff + r)));
    }
  }
}

const std::vector<std::size_t>& LinearCoupling::duals_touching(std::size_t i) const {
  return duals_of_.at(i);
}
const std::vector<std::size_t>& LinearCoupling::primals_touching(std::size_t j) const {
  return primals_of_.at(j);
}

double LinearCoupling::spectral_norm_estimate() const {
  if (norm_cache_ >= 0.0) return norm_cache_;
  ops::SuspendCounting pause;
  norm_cache_ = linalg::spectral_norm_power(
      [&](std::span<const double> x, std::span<double> y) { mul(x, y); },
      [&](std::span<const double> x, std::span<double> y) { mul_t(x, y); },
      rows_, cols_);
  return norm_cache_;
}

DenseMatrix LinearCoupling::to_dense() const {
  if (const auto* d = std::get_if<DenseMatrix>(&a_)) return *d;
  return std::get<SparseMatrix>(a_).to_dense();
}

// ---- problem / metric ----

void PrimalDualProblem::validate() const {
  if (a.rows() == 0 || a.cols() == 0) throw ConfigError("primal-dual: empty A");
  if (!prox_g.empty() && prox_g.size() != a.xpart().num_blocks())
    throw ConfigError("primal-dual: prox_g size");
  if (!prox_h.empty() && prox_h.size() != a.spart().num_blocks())
    throw ConfigError("primal-dual: prox_h size");
  if (f && f->dim() != a.cols()) throw ConfigError("primal-dual: f dimension");
}

MetricReport validate_metric(const LinearCoupling& a, double eta, double gamma) {
  if (eta <= 0.0 || gamma <= 0.0)
    throw ConfigError("validate_metric: steps must be > 0");
  MetricReport r;
  // 1.01 safety inflation on the power-method estimate
  r.norm_estimate = 1.01 * a.spectral_norm_estimate();
  r.margin = 1.0 - eta * gamma * r.norm_estimate * r.norm_estimate;
  r.valid = r.margin > 0.0;
  return r;
}

MetricReport validate_metric(const DenseMatrix& a, double eta, double gamma) {
  auto xp = make_partition(std::vector<std::size_t>(a.cols(), 1));
  auto sp = make_partition(std::vector<std::size_t>(a.rows(), 1));
  return validate_metric(LinearCoupling(a, xp, sp), eta, gamma);
}

DenseMatrix build_metric(const DenseMatrix& a, double eta, double gamma, int sign) {
  const std::size_t m = a.cols(), p = a.rows();
  DenseMatrix mm(m + p, m + p);
  for (std::size_t i = 0; i < m; ++i) mm.at(i, i) = 1.0 / eta;
  for (std::size_t j = 0; j < p; ++j) mm.at(m + j, m + j) = 1.0 / gamma;
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t i = 0; i < m; ++i) {
      mm.at(m + j, i) = sign * a.at(j, i);
      mm.at(i, m + j) = sign * a.at(j, i);
    }
  return mm;
}

double metric_condition_number(const DenseMatrix& m) {
  if (m.rows() > 500)
    throw ConfigError("metric_condition_number: dense audit limited to dim 500");
  auto eig = linalg::sym_eig(m);
  if (eig.min() <= 0.0)
    throw ConfigError("metric_condition_number: metric not positive definite");
  return eig.max() / eig.min();
}

// ---- Condat-Vu operator ----

namespace {
PartitionPtr concat_partitions(const BlockPartition& a, const BlockPartition& b) {
  std::vector<std::size_t> sizes = a.sizes();
  sizes.insert(sizes.end(), b.sizes().begin(), b.sizes().end());
  return make_partition(std::move(sizes));
}
}  // namespace

CondatVuOperator::CondatVuOperator(PrimalDualProblem prob, double eta,
                                   double gamma, CvOrder order, bool check_metric)
    : prob_(std::move(prob)), eta_(eta), gamma_(gamma), order_(order) {
  prob_.validate();
  if (eta_ <= 0.0 || gamma_ <= 0.0)
    throw ConfigError("Condat-Vu: steps must be > 0");
  if (check_metric) {
    auto rep = validate_metric(prob_.a, eta_, gamma_);
    if (!rep.valid)
      throw ConfigError("Condat-Vu: metric invalid (eta*gamma*||A||^2 >= 1)");
  }
  zpart_ = concat_partitions(prob_.a.xpart(), prob_.a.spart());
  const std::size_t mp = prob_.a.rows() * prob_.a.cols();
  desc_.sep = SepClass::kNonSeparable;
  desc_.cf = CfClass::kCfWithCache;
  desc_.full_cost = 4 * mp;
  desc_.coord_cost = 4 * mp / zpart_->num_blocks() + 1;
}

std::vector<CacheEntrySpec> CondatVuOperator::cache_schema() const {
  std::vector<CacheEntrySpec> s;
  if (order_ == CvOrder::kDualFirst)
    s.push_back({"Ax", prob_.a.rows()});
  else
    s.push_back({"Ats", prob_.a.cols()});
  if (prob_.f)
    for (auto& e : prob_.f->cache_schema()) s.push_back(e);
  return s;
}

std::span<const double> CondatVuOperator::x_view(const BlockVector& z) const {
  return z.all().subspan(0, prob_.a.cols());
}
std::span<const double> CondatVuOperator::s_view(const BlockVector& z) const {
  return z.all().subspan(prob_.a.cols(), prob_.a.rows());
}

void CondatVuOperator::prox_h_conj(std::size_t j, std::span<const double> in,
                                   std::span<double> out) const {
  if (prob_.prox_h.empty() || !prob_.prox_h[j]) {
    // h_j = 0, h*_j = iota_{0}: prox is 0
    kern::fill(out, 0.0);
    return;
  }
  prox_conjugate(prob_.prox_h[j], in, gamma_, out);
}

void CondatVuOperator::prox_g_block(std::size_t i, std::span<const double> in,
                                    std::span<double> out) const {
  if (prob_.prox_g.empty() || !prob_.prox_g[i]) {
    kern::copy(in, out);
    return;
  }
  prob_.prox_g[i](in, eta_, out);
}

void CondatVuOperator::init_cache(const BlockVector& z, MaintainedCache& cache) const {
  cache.clear();
  if (order_ == CvOrder::kDualFirst) {
    auto& ax = cache.create("Ax", prob_.a.rows());
    prob_.a.mul(x_view(z), ax);
  } else {
    auto& ats = cache.create("Ats", prob_.a.cols());
    prob_.a.mul_t(s_view(z), ats);
  }
  if (prob_.f) prob_.f->init_cache(x_view(z), cache);
}

void CondatVuOperator::apply_full(const BlockVector& z, BlockVector& out) const {
  const std::size_t m = prob_.a.cols(), p = prob_.a.rows();
  auto x = x_view(z);
  auto s = s_view(z);
  auto xout = out.all().subspan(0, m);
  auto sout = out.all().subspan(m, p);
  const auto& sp = prob_.a.spart();

  if (order_ == CvOrder::kDualFirst) {
    std::vector<double> ax(p);
    prob_.a.mul(x, ax);
    for (std::size_t j = 0; j < sp.num_blocks(); ++j) {
      const std::size_t off = sp.offset(j), w = sp.block_size(j);
      std::vector<double> arg(w);
      for (std::size_t r = 0; r < w; ++r) arg[r] = s[off + r] + gamma_ * ax[off + r];
      ops::add(2 * w);
      prox_h_conj(j, arg, sout.subspan(off, w));
    }
    std::vector<double> wvec(p);
    for (std::size_t r = 0; r < p; ++r) wvec[r] = 2.0 * sout[r] - s[r];
    ops::add(2 * p);
    std::vector<double> atw(m), grad(m);
    prob_.a.mul_t(wvec, atw);
    if (prob_.f) grad_fresh(*prob_.f, x, grad);
    const auto& xp = prob_.a.xpart();
    for (std::size_t i = 0; i < xp.num_blocks(); ++i) {
      const std::size_t off = xp.offset(i), w = xp.block_size(i);
      std::vector<double> arg(w);
      for (std::size_t c = 0; c < w; ++c)
        arg[c] = x[off + c] - eta_ * (grad[off + c] + atw[off + c]);
      ops::add(3 * w);
      prox_g_block(i, arg, xout.subspan(off, w));
    }
  } else {
    std::vector<double> ats(m), grad(m);
    prob_.a.mul_t(s, ats);
    if (prob_.f) grad_fresh(*prob_.f, x, grad);
    const auto& xp = prob_.a.xpart();
    for (std::size_t i = 0; i < xp.num_blocks(); ++i) {
      const std::size_t off = xp.offset(i), w = xp.block_size(i);
      std::vector<double> arg(w);
      for (std::size_t c = 0; c < w; ++c)
        arg[c] = x[off + c] - eta_ * (grad[off + c] + ats[off + c]);
      ops::add(3 * w);
      prox_g_block(i, arg, xout.subspan(off, w));
    }
    std::vector<double> wvec(m), aw(p);
    for (std::size_t c = 0; c < m; ++c) wvec[c] = 2.0 * xout[c] - x[c];
    ops::add(2 * m);
    prob_.a.mul(wvec, aw);
    for (std::size_t j = 0; j < sp.num_blocks(); ++j) {
      const std::size_t off = sp.offset(j), w = sp.block_size(j);
      std::vector<double> arg(w);
      for (std::size_t r = 0; r < w; ++r) arg[r] = s[off + r] + gamma_ * aw[off + r];
      ops::add(2 * w);
      prox_h_conj(j, arg, sout.subspan(off, w));
    }
  }
}

void CondatVuOperator::primal_value(const BlockVector& z, std::size_t i,
                                    const MaintainedCache& cache,
                                    std::span<double> out) const {
  const auto& xp = prob_.a.xpart();
  const auto& sp = prob_.a.spart();
  const std::size_t off = xp.offset(i), w = xp.block_size(i);
  auto x = x_view(z);
  auto s = s_view(z);
  std::vector<double> contrib(w, 0.0);

  if (order_ == CvOrder::kDualFirst) {
    // transient full s-image into scratch, discarded after use (Prop. 1 cost
    // accounting); the overlapping-block scheme is the sanctioned reuse
    auto ax = cache.entry("Ax");
    const std::size_t p = prob_.a.rows();
    std::vector<double> stilde(p), wvec(p);
    for (std::size_t j = 0; j < sp.num_blocks(); ++j) {
      const std::size_t soff = sp.offset(j), swd = sp.block_size(j);
      std::vector<double> arg(swd);
      for (std::size_t r = 0; r < swd; ++r)
        arg[r] = s[soff + r] + gamma_ * ax[soff + r];
      ops::add(2 * swd);
      prox_h_conj(j, arg, std::span<double>(stilde).subspan(soff, swd));
    }
    for (std::size_t r = 0; r < p; ++r) wvec[r] = 2.0 * stilde[r] - s[r];
    ops::add(2 * p);
    prob_.a.col_block_t_times(i, wvec, contrib);
  } else {
    auto ats = cache.entry("Ats");
    kern::copy(ats.subspan(off, w), contrib);
  }

  std::vector<double> grad(w, 0.0);
  if (prob_.f) prob_.f->grad_block(x, off, w, cache, grad);
  std::vector<double> arg(w);
  for (std::size_t c = 0; c < w; ++c)
    arg[c] = x[off + c] - eta_ * (grad[c] + contrib[c]);
  ops::add(3 * w);
  prox_g_block(i, arg, out);
}

void CondatVuOperator::dual_value(const BlockVector& z, std::size_t j,
                                  const MaintainedCache& cache,
                                  std::span<double> out) const {
  const auto& sp = prob_.a.spart();
  const std::size_t off = sp.offset(j), w = sp.block_size(j);
  auto x = x_view(z);
  auto s = s_view(z);

  if (order_ == CvOrder::kDualFirst) {
    auto ax = cache.entry("Ax");
    std::vector<double> arg(w);
    for (std::size_t r = 0; r < w; ++r)
      arg[r] = s[off + r] + gamma_ * ax[off + r];
    ops::add(2 * w);
    prox_h_conj(j, arg, out);
  } else {
    // transient full x-image
    auto ats = cache.entry("Ats");
    const std::size_t m = prob_.a.cols();
    std::vector<double> grad(m, 0.0);
    if (prob_.f) prob_.f->grad_full(x, cache, grad);
    std::vector<double> xtilde(m);
    const auto& xp = prob_.a.xpart();
    for (std::size_t i = 0; i < xp.num_blocks(); ++i) {
      const std::size_t xoff = xp.offset(i), xw = xp.block_size(i);
      std::vector<double> arg(xw);
      for (std::size_t c = 0; c < xw; ++c)
        arg[c] = x[xoff + c] - eta_ * (grad[xoff + c] + ats[xoff + c]);
      ops::add(3 * xw);
      prox_g_block(i, arg, std::span<double>(xtilde).subspan(xoff, xw));
    }
    std::vector<double> wvec(m);
    for (std::size_t c = 0; c < m; ++c) wvec[c] = 2.0 * xtilde[c] - x[c];
    ops::add(2 * m);
    std::vector<double> aw(w);
    prob_.a.row_block_times(j, wvec, aw);
    std::vector<double> arg(w);
    for (std::size_t r = 0; r < w; ++r) arg[r] = s[off + r] + gamma_ * aw[r];
    ops::add(2 * w);
    prox_h_conj(j, arg, out);
  }
}

void CondatVuOperator::coordinate_value(const BlockVector& z, std::size_t unit,
                                        const MaintainedCache& cache,
                                        std::span<double> out) const {
  const std::size_t m = num_primal();
  if (unit < m)
    primal_value(z, unit, cache, out);
  else
    dual_value(z, unit - m, cache, out);
}

void CondatVuOperator::refresh_cache(const BlockVector& z, std::size_t unit,
                                     std::span<const double> old_block,
                                     std::span<const double> new_block,
                                     MaintainedCache& cache) const {
  (void)z;
  const std::size_t m = num_primal();
  std::vector<double> delta(old_block.size());
  for (std::size_t c = 0; c < delta.size(); ++c)
    delta[c] = new_block[c] - old_block[c];
  ops::add(delta.size());
  if (unit < m) {
    if (order_ == CvOrder::kDualFirst)
      prob_.a.add_col_block_times(unit, delta, cache.entry("Ax"));
    if (prob_.f)
      prob_.f->refresh(prob_.a.xpart().offset(unit), old_block, new_block, cache);
  } else {
    if (order_ == CvOrder::kPrimalFirst)
      prob_.a.add_row_block_t_times(unit - m, delta, cache.entry("Ats"));
  }
}

std::optional<double> CondatVuOperator::objective(const BlockVector& z) const {
  if (prob_.objective) {
    ops::SuspendCounting pause;
    return prob_.objective(x_view(z));
  }
  return std::nullopt;
}

// ---- EMP ----

EmpOperator::EmpOperator(PrimalDualProblem prob, std::vector<double> b,
                         double eta, double gamma, bool check_metric)
    : prob_(std::move(prob)), b_(std::move(b)), eta_(eta), gamma_(gamma) {
  prob_.validate();
  if (!prob_.prox_h.empty())
    throw ConfigError("EMP: constraint form fixes h = indicator of {b}");
  if (b_.size() != prob_.a.rows()) throw DimensionError("EMP: b size");
  if (eta_ <= 0.0 || gamma_ <= 0.0) throw ConfigError("EMP: steps must be > 0");
  if (check_metric) {
    auto rep = validate_metric(prob_.a, eta_, gamma_);
    if (!rep.valid) throw ConfigError("EMP: metric invalid");
  }
  zpart_ = concat_partitions(prob_.a.xpart(), prob_.a.spart());
  normal_ = prob_.a.to_dense().gram();
  atb_.assign(prob_.a.cols(), 0.0);
  prob_.a.mul_t(b_, atb_);
  const std::size_t mp = prob_.a.rows() * prob_.a.cols();
  desc_ = {SepClass::kNonSeparable, CfClass::kCfWithCache, 6 * mp,
           6 * mp / zpart_->num_blocks() + 1};
}

std::vector<CacheEntrySpec> EmpOperator::cache_schema() const {
  std::vector<CacheEntrySpec> s{{"Ax", prob_.a.rows()},
                                {"Ats", prob_.a.cols()},
                                {"AtAx", prob_.a.cols()}};
  if (prob_.f)
    for (auto& e : prob_.f->cache_schema()) s.push_back(e);
  return s;
}

std::span<const double> EmpOperator::x_view(const BlockVector& z) const {
  return z.all().subspan(0, prob_.a.cols());
}

void EmpOperator::init_cache(const BlockVector& z, MaintainedCache& cache) const {
  cache.clear();
  auto x = x_view(z);
  auto s = z.all().subspan(prob_.a.cols(), prob_.a.rows());
  prob_.a.mul(x, cache.create("Ax", prob_.a.rows()));
  prob_.a.mul_t(s, cache.create("Ats", prob_.a.cols()));
  normal_.mul(x, cache.create("AtAx", prob_.a.cols()));
  if (prob_.f) prob_.f->init_cache(x, cache);
}

void EmpOperator::apply_full(const BlockVector& z, BlockVector& out) const {
  const std::size_t m = prob_.a.cols(), p = prob_.a.rows();
  auto x = x_view(z);
  auto s = z.all().subspan(m, p);
  auto xout = out.all().subspan(0, m);
  auto sout = out.all().subspan(m, p);

  std::vector<double> ax(p);
  prob_.a.mul(x, ax);
  for (std::size_t r = 0; r < p; ++r) sout[r] = s[r] + gamma_ * (ax[r] - b_[r]);
  ops::add(3 * p);

  std::vector<double> ats(m), atax(m), grad(m, 0.0);
  prob_.a.mul_t(s, ats);
  normal_.mul(x, atax);
  if (prob_.f) grad_fresh(*prob_.f, x, grad);
  const auto& xp = prob_.a.xpart();
  for (std::size_t i = 0; i < xp.num_blocks(); ++i) {
    const std::size_t off = xp.offset(i), w = xp.block_size(i);
    std::vector<double> arg(w);
    for (std::size_t c = 0; c < w; ++c)
      arg[c] = x[off + c] - eta_ * (grad[off + c] + ats[off + c] +
                                    2.0 * gamma_ * atax[off + c] -
                                    2.0 * gamma_ * atb_[off + c]);
    ops::add(7 * w);
    if (!prob_.prox_g.empty() && prob_.prox_g[i])
      prob_.prox_g[i](arg, eta_, xout.subspan(off, w));
    else
      kern::copy(arg, xout.subspan(off, w));
  }
}

void EmpOperator::coordinate_value(const BlockVector& z, std::size_t unit,
                                   const MaintainedCache& cache,
                                   std::span<double> out) const {
  const std::size_t m = num_primal();
  auto x = x_view(z);
  if (unit < m) {
    const auto& xp = prob_.a.xpart();
    const std::size_t off = xp.offset(unit), w = xp.block_size(unit);
    auto ats = cache.entry("Ats");
    auto atax = cache.entry("AtAx");
    std::vector<double> grad(w, 0.0);
    if (prob_.f) prob_.f->grad_block(x, off, w, cache, grad);
    std::vector<double> arg(w);
    for (std::size_t c = 0; c < w; ++c)
      arg[c] = x[off + c] - eta_ * (grad[c] + ats[off + c] +
                                    2.0 * gamma_ * atax[off + c] -
                                    2.0 * gamma_ * atb_[off + c]);
    ops::add(7 * w);
    if (!prob_.prox_g.empty() && prob_.prox_g[unit])
      prob_.prox_g[unit](arg, eta_, out);
    else
      kern::copy(arg, out);
  } else {
    const auto& sp = prob_.a.spart();
    const std::size_t j = unit - m;
    const std::size_t off = sp.offset(j), w = sp.block_size(j);
    auto s = z.all().subspan(prob_.a.cols(), prob_.a.rows());
    auto ax = cache.entry("Ax");
    for (std::size_t r = 0; r < w; ++r)
      out[r] = s[off + r] + gamma_ * (ax[off + r] - b_[off + r]);
    ops::add(3 * w);
  }
}

void EmpOperator::refresh_cache(const BlockVector& z, std::size_t unit,
                                std::span<const double> old_block,
                                std::span<const double> new_block,
                                MaintainedCache& cache) const {
  (void)z;
  const std::size_t m = num_primal();
  std::vector<double> delta(old_block.size());
  for (std::size_t c = 0; c < delta.size(); ++c)
    delta[c] = new_block[c] - old_block[c];
  ops::add(delta.size());
  if (unit < m) {
    prob_.a.add_col_block_times(unit, delta, cache.entry("Ax"));
    normal_.add_col_block_times(1.0, prob_.a.xpart().offset(unit), delta.size(),
                                delta, cache.entry("AtAx"));
    if (prob_.f)
      prob_.f->refresh(prob_.a.xpart().offset(unit), old_block, new_block, cache);
  } else {
    prob_.a.add_row_block_t_times(unit - m, delta, cache.entry("Ats"));
  }
}

std::optional<double> EmpOperator::objective(const BlockVector& z) const {
  if (prob_.objective) {
    ops::SuspendCounting pause;
    return prob_.objective(x_view(z));
  }
  return std::nullopt;
}

// ---- overlapping blocks ----

OverlapWeights::OverlapWeights(
    const LinearCoupling& a,
    std::map<std::pair<std::size_t, std::size_t>, double> rho)
    : rho_(std::move(rho)) {
  for (const auto& [key, w] : rho_) {
    if (w < 0.0) throw ConfigError("overlap weights: negative rho");
    const auto& duals = a.duals_touching(key.first);
    if (std::find(duals.begin(), duals.end(), key.second) == duals.end())
      throw ConfigError("overlap weights: rho outside the sparsity pattern");
  }
  for (std::size_t j = 0; j < a.spart().num_blocks(); ++j) {
    const auto& prim = a.primals_touching(j);
    if (prim.empty()) continue;
    double sum = 0.0;
    for (std::size_t i : prim) {
      auto it = rho_.find({i, j});
      if (it != rho_.end()) sum += it->second;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw ConfigError("overlap weights: sum over I(j) must be 1");
  }
}

OverlapWeights OverlapWeights::uniform(const LinearCoupling& a) {
  std::map<std::pair<std::size_t, std::size_t>, double> rho;
  for (std::size_t j = 0; j < a.spart().num_blocks(); ++j) {
    const auto& prim = a.primals_touching(j);
    for (std::size_t i : prim)
      rho[{i, j}] = 1.0 / static_cast<double>(prim.size());
  }
  OverlapWeights w;
  w.rho_ = std::move(rho);
  return w;
}

double OverlapWeights::rho(std::size_t i, std::size_t j) const {
  auto it = rho_.find({i, j});
  return it == rho_.end() ? 0.0 : it->second;
}

OverlapCondatVu::OverlapCondatVu(PrimalDualProblem prob, double eta, double gamma,
                                 OverlapWeights weights, bool check_metric)
    : cv_(std::make_shared<CondatVuOperator>(std::move(prob), eta, gamma,
                                             CvOrder::kDualFirst, check_metric)),
      weights_(std::move(weights)) {}

void OverlapCondatVu::compute_unit(const BlockVector& z_read,
                                   const MaintainedCache& cache_read,
                                   std::size_t i, double weight,
                                   StagedUpdate& out) const {
  const auto& prob = cv_->problem();
  const auto& xp = prob.a.xpart();
  const auto& sp = prob.a.spart();
  const std::size_t m = cv_->num_primal();
  const double eta = cv_->eta(), gamma = cv_->gamma();
  out.clear();

  auto xhat = cv_->x_view(z_read);
  auto shat = cv_->s_view(z_read);
  auto ax = cache_read.entry("Ax");
  const auto& duals = prob.a.duals_touching(i);

  // s~_j for j in J(i), and the A^T(2 s~ - s) contribution restricted to J(i)
  const std::size_t xoff = xp.offset(i), xw = xp.block_size(i);
  std::vector<std::vector<double>> stilde(duals.size());
  std::vector<double> contrib(xw, 0.0);
  for (std::size_t dj = 0; dj < duals.size(); ++dj) {
    const std::size_t j = duals[dj];
    const std::size_t soff = sp.offset(j), sw = sp.block_size(j);
    std::vector<double> arg(sw);
    for (std::size_t r = 0; r < sw; ++r)
      arg[r] = shat[soff + r] + gamma * ax[soff + r];
    ops::add(2 * sw);
    stilde[dj].resize(sw);
    cv_->prox_h_conj(j, arg, stilde[dj]);
    std::vector<double> v(sw);
    for (std::size_t r = 0; r < sw; ++r)
      v[r] = 2.0 * stilde[dj][r] - shat[soff + r];
    ops::add(2 * sw);
    prob.a.add_subblock_t_times(i, j, 1.0, v, contrib);
  }

  std::vector<double> grad(xw, 0.0);
  if (prob.f) prob.f->grad_block(xhat, xoff, xw, cache_read, grad);
  std::vector<double> arg(xw), xtilde(xw);
  for (std::size_t c = 0; c < xw; ++c)
    arg[c] = xhat[xoff + c] - eta * (grad[c] + contrib[c]);
  ops::add(3 * xw);
  cv_->prox_g_block(i, arg, xtilde);

  auto& xdelta = out.stage(i, xw);
  for (std::size_t c = 0; c < xw; ++c)
    xdelta[c] = weight * (xtilde[c] - xhat[xoff + c]);
  ops::add(2 * xw);
  for (std::size_t dj = 0; dj < duals.size(); ++dj) {
    const std::size_t j = duals[dj];
    const double r = weights_.rho(i, j);
    if (r == 0.0) continue;
    const std::size_t soff = sp.offset(j), sw = sp.block_size(j);
    auto& sdelta = out.stage(m + j, sw);
    for (std::size_t c = 0; c < sw; ++c)
      sdelta[c] = r * weight * (stilde[dj][c] - shat[soff + c]);
    ops::add(3 * sw);
  }
}

void OverlapCondatVu::commit_update(const StagedUpdate& u, BlockVector& z,
                                    MaintainedCache& cache) const {
  // one indivisible unit: the x block plus every touched s_j and the cache
  for (std::size_t n = 0; n < u.blocks.size(); ++n) {
    const std::size_t b = u.blocks[n];
    auto blk = z.block(b);
    std::vector<double> old(blk.begin(), blk.end());
    kern::axpy(1.0, u.deltas[n], blk);
    cv_->refresh_cache(z, b, old, blk, cache);
  }
  cache.bump_epoch();
}

void OverlapCondatVu::update_unit(const BlockVector& z_read,
                                  const MaintainedCache& cache_read,
                                  std::size_t i, double weight, BlockVector& z,
                                  MaintainedCache& cache) const {
  StagedUpdate u;
  compute_unit(z_read, cache_read, i, weight, u);
  commit_update(u, z, cache);
}

}  // namespace cfsplit
