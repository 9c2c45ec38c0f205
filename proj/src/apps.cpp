#include "cfsplit/apps.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "cfsplit/kernels.hpp"
#include "cfsplit/linalg.hpp"
#include "cfsplit/rng.hpp"

namespace cfsplit {

namespace {

// eta from the averagedness margin 1/eta >= gamma ||A||^2 + beta/2
std::pair<double, double> choose_cv_steps(double norm, double beta,
                                          double eta_in, double gamma_in) {
  const double n2 = std::max(norm * norm, 1e-12);
  double gamma = gamma_in > 0.0 ? gamma_in : 0.5 / std::max(norm, 1e-6);
  double eta = eta_in > 0.0 ? eta_in
                            : 1.0 / (1.02 * gamma * n2 + 0.5 * beta + 1e-12);
  return {eta, gamma};
}

std::vector<double> to_vec(std::span<const double> s) {
  return {s.begin(), s.end()};
}

}  // namespace

// ---- diagonal quadratic smooth ----

namespace {
class DiagQuadraticSmooth final : public SmoothTerm {
 public:
  DiagQuadraticSmooth(std::vector<double> diag, std::vector<double> target)
      : d_(std::move(diag)), z_(std::move(target)) {
    if (d_.size() != z_.size()) throw DimensionError("diag smooth: sizes");
    beta_ = 0.0;
    for (double v : d_) beta_ = std::max(beta_, v);
  }
  std::size_t dim() const override { return d_.size(); }
  double beta() const override { return beta_; }
  void grad_full(std::span<const double> x, const MaintainedCache&,
                 std::span<double> out) const override {
    for (std::size_t e = 0; e < d_.size(); ++e) out[e] = d_[e] * (x[e] - z_[e]);
    ops::add(2 * d_.size());
  }
  void grad_block(std::span<const double> x, std::size_t off, std::size_t w,
                  const MaintainedCache&, std::span<double> out) const override {
    for (std::size_t c = 0; c < w; ++c)
      out[c] = d_[off + c] * (x[off + c] - z_[off + c]);
    ops::add(2 * w);
  }
  std::optional<double> value(std::span<const double> x) const override {
    double s = 0.0;
    for (std::size_t e = 0; e < d_.size(); ++e) {
      const double r = x[e] - z_[e];
      s += 0.5 * d_[e] * r * r;
    }
    return s;
  }

 private:
  std::vector<double> d_, z_;
  double beta_ = 0.0;
};
}  // namespace

SmoothPtr make_diag_quadratic_smooth(std::vector<double> diag,
                                     std::vector<double> target) {
  return std::make_shared<DiagQuadraticSmooth>(std::move(diag), std::move(target));
}

ProxFn make_prox_logistic(double label, double scale) {
  // prox_{t*phi}(v), phi(u) = scale * log(1 + exp(-label u)); the optimality
  // condition is monotone, root within |u - v| <= t*scale
  return [label, scale](std::span<const double> x, double t, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double v = x[i];
      double lo = v - t * scale - 1.0, hi = v + t * scale + 1.0;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double g =
            mid - v - t * scale * label / (1.0 + std::exp(label * mid));
        if (g > 0.0)
          hi = mid;
        else
          lo = mid;
        if (hi - lo < 1e-15 * (1.0 + std::abs(v))) break;
      }
      out[i] = 0.5 * (lo + hi);
    }
    ops::add(40 * x.size());
  };
}

// ---- generic diagonally scaled FBS operator ----

namespace {

class FbsOperator final : public FixedPointOperator {
 public:
  FbsOperator(SmoothPtr f, std::vector<ProxFn> prox_g,
              std::vector<double> steps, PartitionPtr part,
              std::function<double(std::span<const double>)> obj)
      : f_(std::move(f)),
        prox_(std::move(prox_g)),
        steps_(std::move(steps)),
        part_(std::move(part)),
        obj_(std::move(obj)) {
    if (!f_) throw ConfigError("fbs operator: smooth term required");
    if (part_->total_dim() != f_->dim()) throw DimensionError("fbs: partition");
    if (steps_.size() == 1 && part_->num_blocks() > 1)
      steps_.assign(part_->num_blocks(), steps_[0]);
    if (steps_.size() != part_->num_blocks())
      throw ConfigError("fbs: one step per block required");
    for (double s : steps_)
      if (s <= 0.0) throw ConfigError("fbs: steps must be > 0");
    if (!prox_.empty() && prox_.size() != part_->num_blocks())
      throw ConfigError("fbs: one prox handle per block");
    const std::size_t n = part_->total_dim();
    desc_ = {SepClass::kNonSeparable,
             f_->cache_schema().empty() ? CfClass::kType1 : CfClass::kCfWithCache,
             4 * n * n / std::max<std::size_t>(part_->num_blocks(), 1), 0};
    desc_.coord_cost = desc_.full_cost / part_->num_blocks() + 1;
  }

  const BlockPartition& partition() const override { return *part_; }
  const OperatorDescriptor& descriptor() const override { return desc_; }
  std::vector<CacheEntrySpec> cache_schema() const override {
    return f_->cache_schema();
  }
  void init_cache(const BlockVector& x, MaintainedCache& c) const override {
    c.clear();
    f_->init_cache(x.all(), c);
  }
  void refresh_cache(const BlockVector& x, std::size_t i,
                     std::span<const double> oldb, std::span<const double> newb,
                     MaintainedCache& c) const override {
    (void)x;
    f_->refresh(part_->offset(i), oldb, newb, c);
  }
  void apply_full(const BlockVector& x, BlockVector& out) const override {
    std::vector<double> grad(x.dim());
    MaintainedCache local;
    f_->init_cache(x.all(), local);
    f_->grad_full(x.all(), local, grad);
    for (std::size_t i = 0; i < part_->num_blocks(); ++i) {
      const std::size_t off = part_->offset(i), w = part_->block_size(i);
      std::vector<double> arg(w);
      for (std::size_t c = 0; c < w; ++c)
        arg[c] = x.all()[off + c] - steps_[i] * grad[off + c];
      ops::add(2 * w);
      apply_prox(i, arg, out.all().subspan(off, w));
    }
  }
  void coordinate_value(const BlockVector& x, std::size_t i,
                        const MaintainedCache& cache,
                        std::span<double> out) const override {
    const std::size_t off = part_->offset(i), w = part_->block_size(i);
    std::vector<double> grad(w);
    f_->grad_block(x.all(), off, w, cache, grad);
    std::vector<double> arg(w);
    for (std::size_t c = 0; c < w; ++c)
      arg[c] = x.all()[off + c] - steps_[i] * grad[c];
    ops::add(2 * w);
    apply_prox(i, arg, out);
  }
  std::optional<double> objective(const BlockVector& x) const override {
    if (!obj_) return std::nullopt;
    ops::SuspendCounting pause;
    return obj_(x.all());
  }

 private:
  void apply_prox(std::size_t i, std::span<const double> in,
                  std::span<double> out) const {
    if (prox_.empty() || !prox_[i])
      kern::copy(in, out);
    else
      prox_[i](in, steps_[i], out);
  }

  SmoothPtr f_;
  std::vector<ProxFn> prox_;
  std::vector<double> steps_;
  PartitionPtr part_;
  std::function<double(std::span<const double>)> obj_;
  OperatorDescriptor desc_;
};

}  // namespace

OperatorPtr make_fbs_operator(SmoothPtr f, std::vector<ProxFn> prox_g,
                              std::vector<double> block_steps,
                              PartitionPtr partition,
                              std::function<double(std::span<const double>)> objective) {
  return std::make_shared<FbsOperator>(std::move(f), std::move(prox_g),
                                       std::move(block_steps), std::move(partition),
                                       std::move(objective));
}

// ---- ERM ----

ProblemInstance build_erm(const DenseMatrix& a, std::vector<ProxFn> prox_phi,
                          SmoothPtr f, ProxFn prox_g_whole,
                          std::function<double(std::span<const double>)> objective,
                          double eta, double gamma) {
  const std::size_t p = a.rows(), m = a.cols();
  if (prox_phi.size() != p) throw ConfigError("erm: one prox per sample");
  const double pd = static_cast<double>(p);

  PrimalDualProblem prob;
  prob.a = LinearCoupling(a, make_partition({m}),
                          std::make_shared<const BlockPartition>(
                              BlockPartition::scalar(p)));
  prob.f = f ? f : make_zero_smooth(m);
  prob.prox_g = {prox_g_whole};
  prob.prox_h.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    // h_j = (1/p) phi_j, so prox_{t h_j} = prox_{(t/p) phi_j}
    auto inner = prox_phi[j];
    prob.prox_h[j] = [inner, pd](std::span<const double> v, double t,
                                 std::span<double> out) {
      inner(v, t / pd, out);
    };
  }
  prob.objective = objective;

  auto [e, g] = choose_cv_steps(prob.a.spectral_norm_estimate(),
                                prob.f->beta(), eta, gamma);
  auto op = std::make_shared<CondatVuOperator>(std::move(prob), e, g,
                                               CvOrder::kPrimalFirst);
  ProblemInstance inst;
  inst.name = "erm";
  inst.full_op = op;
  inst.coord = make_operator_process(op);
  inst.z0 = BlockVector(op->zpart_ptr());
  inst.solution_dim = m;
  inst.extract_solution = [m](const BlockVector& z) {
    return to_vec(z.all().subspan(0, m));
  };
  inst.objective = objective;
  return inst;
}

// ---- SVM ----

ProblemInstance build_svm_unbiased(const DenseMatrix& q, double c,
                                   double fallback_step) {
  const std::size_t m = q.rows();
  if (q.cols() != m) throw DimensionError("svm: Q must be square");
  std::vector<double> steps(m), neg_e(m, -1.0);
  for (std::size_t i = 0; i < m; ++i)
    steps[i] = q.at(i, i) > 0.0 ? 1.0 / q.at(i, i) : fallback_step;
  auto part = make_partition(std::vector<std::size_t>(m, 1));
  auto qcopy = std::make_shared<DenseMatrix>(q);
  auto obj = [qcopy](std::span<const double> s) {
    std::vector<double> qs(s.size());
    qcopy->mul(s, qs);
    double v = 0.5 * kern::dot(s, qs);
    for (double si : s) v -= si;
    return v;
  };
  auto op = make_fbs_operator(make_quadratic_smooth(q, neg_e),
                              std::vector<ProxFn>(m, make_proj_interval(0.0, c)),
                              steps, part, obj);
  ProblemInstance inst;
  inst.name = "svm-unbiased";
  inst.full_op = op;
  inst.coord = make_operator_process(op);
  inst.z0 = BlockVector(part);
  inst.solution_dim = m;
  inst.extract_solution = [](const BlockVector& z) { return to_vec(z.all()); };
  inst.objective = obj;
  return inst;
}

ProblemInstance build_svm_biased_pd(const DenseMatrix& q,
                                    std::span<const double> beta, double c,
                                    double eta, double gamma) {
  const std::size_t m = q.rows();
  if (beta.size() != m) throw DimensionError("svm: beta size");
  // variable s in [0,C]^m with beta's = 0; dual scalar t; A = beta^T (1 x m)
  DenseMatrix arow(1, m);
  for (std::size_t i = 0; i < m; ++i) arow.at(0, i) = beta[i];

  PrimalDualProblem prob;
  prob.a = LinearCoupling(arow,
                          std::make_shared<const BlockPartition>(
                              BlockPartition::scalar(m)),
                          make_partition({1}));
  prob.f = make_quadratic_smooth(q, std::vector<double>(m, -1.0));
  prob.prox_g.assign(m, make_proj_interval(0.0, c));
  // h = indicator of {0}: prox is the zero map, so prox_{g h*} = identity
  prob.prox_h = {[](std::span<const double>, double, std::span<double> out) {
    kern::fill(out, 0.0);
  }};
  auto qcopy = std::make_shared<DenseMatrix>(q);
  auto obj = [qcopy](std::span<const double> s) {
    std::vector<double> qs(s.size());
    qcopy->mul(s, qs);
    double v = 0.5 * kern::dot(s, qs);
    for (double si : s) v -= si;
    return v;
  };
  prob.objective = obj;

  auto [e, g] = choose_cv_steps(prob.a.spectral_norm_estimate(),
                                prob.f->beta(), eta, gamma);
  auto op = std::make_shared<CondatVuOperator>(std::move(prob), e, g,
                                               CvOrder::kDualFirst);
  ProblemInstance inst;
  inst.name = "svm-biased-pd";
  inst.full_op = op;
  inst.coord = make_operator_process(op);
  inst.z0 = BlockVector(op->zpart_ptr());
  inst.solution_dim = m;
  inst.extract_solution = [m](const BlockVector& z) {
    return to_vec(z.all().subspan(0, m));
  };
  inst.objective = obj;
  return inst;
}

namespace {

// 3S on u with J_B = proj onto D2 = {s : beta's = 0}, J_A = proj onto [0,C]^m,
// C = grad d; maintained scalar w = beta~'u gives the rank-one projection.
class Svm3sOperator final : public FixedPointOperator {
 public:
  Svm3sOperator(const DenseMatrix& q, std::span<const double> beta, double c,
                double gamma)
      : q_(q), c_(c), gamma_(gamma) {
    const std::size_t m = q.rows();
    if (beta.size() != m) throw DimensionError("svm 3s: beta size");
    if (gamma_ <= 0.0) throw ConfigError("svm 3s: gamma must be > 0");
    bt_ = to_vec(beta);
    const double nb = kern::nrm2(bt_);
    for (double& v : bt_) v /= nb;
    qbt_.assign(m, 0.0);
    q_.mul(bt_, qbt_);  // q_i' beta~ precomputed
    part_ = std::make_shared<const BlockPartition>(BlockPartition::scalar(m));
    desc_ = {SepClass::kNonSeparable, CfClass::kCfWithCache, 2 * m * m,
             2 * m + 8};
  }

  const BlockPartition& partition() const override { return *part_; }
  const OperatorDescriptor& descriptor() const override { return desc_; }
  std::vector<CacheEntrySpec> cache_schema() const override {
    return {{"w", 1}};
  }
  void init_cache(const BlockVector& u, MaintainedCache& cache) const override {
    cache.clear();
    cache.create("w", 1)[0] = kern::dot(bt_, u.all());
  }
  void refresh_cache(const BlockVector&, std::size_t i,
                     std::span<const double> oldb, std::span<const double> newb,
                     MaintainedCache& cache) const override {
    cache.scalar("w") += bt_[i] * (newb[0] - oldb[0]);
    ops::add(3);
  }
  void apply_full(const BlockVector& u, BlockVector& out) const override {
    const std::size_t m = part_->num_blocks();
    const double w = kern::dot(bt_, u.all());
    std::vector<double> s(m), qs(m);
    for (std::size_t i = 0; i < m; ++i) s[i] = u[i] - w * bt_[i];
    ops::add(2 * m);
    q_.mul(s, qs);
    for (std::size_t i = 0; i < m; ++i) {
      const double arg = 2.0 * s[i] - u[i] - gamma_ * (qs[i] - 1.0);
      out.all()[i] = u[i] - s[i] + clamp(arg);
    }
    ops::add(7 * m);
  }
  void coordinate_value(const BlockVector& u, std::size_t i,
                        const MaintainedCache& cache,
                        std::span<double> out) const override {
    const double w = cache.scalar("w");
    const double si = u[i] - w * bt_[i];
    // q_i'(u - w beta~) = q_i'u - w (q_i'beta~), with q_i'beta~ precomputed
    const double qiu = kern::dot(q_.row(i), u.all());
    const double arg = 2.0 * si - u[i] - gamma_ * (qiu - w * qbt_[i] - 1.0);
    out[0] = u[i] - si + clamp(arg);
    ops::add(12);
  }
  std::optional<double> objective(const BlockVector& u) const override {
    ops::SuspendCounting pause;
    std::vector<double> s = solution(u);
    std::vector<double> qs(s.size());
    q_.mul(s, qs);
    double v = 0.5 * kern::dot(s, qs);
    for (double si : s) v -= si;
    return v;
  }
  std::vector<double> solution(const BlockVector& u) const {
    const double w = kern::dot(bt_, u.all());
    std::vector<double> s(u.dim());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = u[i] - w * bt_[i];
    return s;
  }

 private:
  double clamp(double v) const { return std::min(c_, std::max(0.0, v)); }

  DenseMatrix q_;
  std::vector<double> bt_, qbt_;
  double c_, gamma_;
  PartitionPtr part_;
  OperatorDescriptor desc_;
};

}  // namespace

ProblemInstance build_svm_biased_3s(const DenseMatrix& q,
                                    std::span<const double> beta, double c,
                                    double gamma) {
  if (gamma <= 0.0) gamma = 1.0 / std::max(linalg::spectral_norm(q), 1e-9);
  auto op = std::make_shared<Svm3sOperator>(q, beta, c, gamma);
  auto qcopy = std::make_shared<DenseMatrix>(q);
  ProblemInstance inst;
  inst.name = "svm-biased-3s";
  inst.full_op = op;
  inst.coord = make_operator_process(op);
  inst.z0 = BlockVector(std::make_shared<const BlockPartition>(
      BlockPartition::scalar(q.rows())));
  inst.solution_dim = q.rows();
  inst.extract_solution = [op](const BlockVector& z) { return op->solution(z); };
  inst.objective = [qcopy](std::span<const double> s) {
    std::vector<double> qs(s.size());
    qcopy->mul(s, qs);
    double v = 0.5 * kern::dot(s, qs);
    for (double si : s) v -= si;
    return v;
  };
  return inst;
}

// ---- group lasso ----

namespace {

void check_groups_cover(const GroupSpec& spec, std::size_t n) {
  std::vector<bool> seen(n, false);
  for (const auto& g : spec.groups) {
    if (g.empty()) throw ConfigError("group lasso: empty group");
    for (std::size_t e : g) {
      if (e >= n) throw ConfigError("group lasso: index out of range");
      seen[e] = true;
    }
  }
  for (bool b : seen)
    if (!b) throw ConfigError("group lasso: groups must cover all features");
  if (spec.lambdas.size() != spec.groups.size())
    throw ConfigError("group lasso: one lambda per group");
}

double group_objective(const DenseMatrix& a, std::span<const double> b,
                       const GroupSpec& spec, std::span<const double> x) {
  std::vector<double> r(a.rows());
  a.mul(x, r);
  for (std::size_t j = 0; j < r.size(); ++j) r[j] -= b[j];
  double v = 0.5 * kern::nrm2sq(r);
  for (std::size_t g = 0; g < spec.groups.size(); ++g) {
    double s = 0.0;
    for (std::size_t e : spec.groups[g]) s += x[e] * x[e];
    v += spec.lambdas[g] * std::sqrt(s);
  }
  return v;
}

// overlapping case: z = [x scalars; one dual block per group]; units are the
// m group-x updates followed by the m dual updates
class GroupLassoOverlapProcess final : public CoordinateProcess {
 public:
  GroupLassoOverlapProcess(CondatVuPtr cv, GroupSpec spec)
      : cv_(std::move(cv)), spec_(std::move(spec)) {
    const std::size_t n = cv_->problem().a.cols();
    const std::size_t m = spec_.groups.size();
    // groups sharing support with each group
    neighbors_.resize(m);
    std::vector<std::vector<std::size_t>> owner(n);
    for (std::size_t g = 0; g < m; ++g)
      for (std::size_t e : spec_.groups[g]) owner[e].push_back(g);
    for (std::size_t g = 0; g < m; ++g) {
      std::vector<bool> mark(m, false);
      for (std::size_t e : spec_.groups[g])
        for (std::size_t o : owner[e]) mark[o] = true;
      for (std::size_t o = 0; o < m; ++o)
        if (mark[o]) neighbors_[g].push_back(o);
    }
    owner_ = std::move(owner);
  }

  PartitionPtr partition() const override { return cv_->zpart_ptr(); }
  std::size_t num_units() const override { return 2 * spec_.groups.size(); }
  bool units_disjoint() const override { return false; }
  void init_cache(const BlockVector& z, MaintainedCache& c) const override {
    cv_->init_cache(z, c);
  }
  void compute_unit(const BlockVector& z_read, const MaintainedCache& cache_read,
                    std::size_t unit, double weight,
                    StagedUpdate& out) const override {
    out.clear();
    const std::size_t n = cv_->problem().a.cols();
    const std::size_t m = spec_.groups.size();
    const double eta = cv_->eta(), gamma = cv_->gamma();
    auto x = cv_->x_view(z_read);
    auto s = cv_->s_view(z_read);
    const auto& sp = cv_->problem().a.spart();

    if (unit >= m) {
      // dual block: s_j <- proj ball radius lambda_j of (s_j + gamma x_{I_j})
      const std::size_t j = unit - m;
      const std::size_t soff = sp.offset(j), sw = sp.block_size(j);
      std::vector<double> arg(sw), val(sw);
      for (std::size_t r = 0; r < sw; ++r)
        arg[r] = s[soff + r] + gamma * x[spec_.groups[j][r]];
      ops::add(2 * sw);
      cv_->prox_h_conj(j, arg, val);
      auto& d = out.stage(n + j, sw);
      for (std::size_t r = 0; r < sw; ++r)
        d[r] = weight * (val[r] - s[soff + r]);
      ops::add(2 * sw);
      return;
    }

    // x update over the group's support, transient s~ for neighbor groups
    const std::size_t g = unit;
    std::vector<double> accum(n, 0.0);  // sparse on the union of neighbors
    for (std::size_t j : neighbors_[g]) {
      const std::size_t soff = sp.offset(j), sw = sp.block_size(j);
      std::vector<double> arg(sw), stj(sw);
      for (std::size_t r = 0; r < sw; ++r)
        arg[r] = s[soff + r] + gamma * x[spec_.groups[j][r]];
      ops::add(2 * sw);
      cv_->prox_h_conj(j, arg, stj);
      for (std::size_t r = 0; r < sw; ++r)
        accum[spec_.groups[j][r]] += 2.0 * stj[r] - s[soff + r];
      ops::add(3 * sw);
    }
    for (std::size_t e : spec_.groups[g]) {
      std::vector<double> grad(1);
      cv_->problem().f->grad_block(x, e, 1, cache_read, grad);
      auto& d = out.stage(e, 1);
      const double xnew = x[e] - eta * (grad[0] + accum[e]);
      d[0] = weight * (xnew - x[e]);
      ops::add(5);
    }
  }
  void commit_update(const StagedUpdate& u, BlockVector& z,
                     MaintainedCache& cache) const override {
    for (std::size_t t = 0; t < u.blocks.size(); ++t) {
      const std::size_t b = u.blocks[t];
      auto blk = z.block(b);
      std::vector<double> old(blk.begin(), blk.end());
      kern::axpy(1.0, u.deltas[t], blk);
      cv_->refresh_cache(z, b, old, blk, cache);
    }
    cache.bump_epoch();
  }
  double residual(const BlockVector& z) const override {
    return fixed_point_residual(*cv_, z);
  }
  std::optional<double> objective(const BlockVector& z) const override {
    return cv_->objective(z);
  }

 private:
  CondatVuPtr cv_;
  GroupSpec spec_;
  std::vector<std::vector<std::size_t>> neighbors_, owner_;
};

}  // namespace

ProblemInstance build_group_lasso(const DenseMatrix& a,
                                  std::span<const double> b,
                                  const GroupSpec& spec, bool overlapping,
                                  double eta, double gamma) {
  const std::size_t n = a.cols();
  check_groups_cover(spec, n);
  if (b.size() != a.rows()) throw DimensionError("group lasso: b size");
  const std::size_t m = spec.groups.size();
  auto acopy = std::make_shared<DenseMatrix>(a);
  auto bvec = std::make_shared<std::vector<double>>(to_vec(b));
  auto speccopy = std::make_shared<GroupSpec>(spec);
  auto obj = [acopy, bvec, speccopy](std::span<const double> x) {
    return group_objective(*acopy, *bvec, *speccopy, x);
  };

  if (!overlapping) {
    // groups must be contiguous ranges in order (blocks are contiguous)
    std::vector<std::size_t> sizes;
    std::size_t expect = 0;
    for (const auto& g : spec.groups) {
      for (std::size_t t = 0; t < g.size(); ++t)
        if (g[t] != expect + t)
          throw ConfigError(
              "group lasso: non-overlapping groups must be contiguous");
      expect += g.size();
      sizes.push_back(g.size());
    }
    if (expect != n) throw ConfigError("group lasso: groups must cover [n]");
    auto part = make_partition(sizes);
    // per-block steps 1/||A_{:,I_i}||^2
    std::vector<double> steps(m);
    for (std::size_t g = 0; g < m; ++g) {
      DenseMatrix sub(a.rows(), spec.groups[g].size());
      for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t t = 0; t < spec.groups[g].size(); ++t)
          sub.at(r, t) = a.at(r, spec.groups[g][t]);
      const double nrm = linalg::spectral_norm(sub);
      steps[g] = 1.0 / std::max(nrm * nrm, 1e-12);
    }
    std::vector<ProxFn> prox(m);
    for (std::size_t g = 0; g < m; ++g)
      prox[g] = make_prox_l2_norm(spec.lambdas[g]);
    auto op = make_fbs_operator(make_least_squares_smooth(a, to_vec(b)),
                                std::move(prox), std::move(steps), part, obj);
    ProblemInstance inst;
    inst.name = "group-lasso";
    inst.full_op = op;
    inst.coord = make_operator_process(op);
    inst.z0 = BlockVector(part);
    inst.solution_dim = n;
    inst.extract_solution = [](const BlockVector& z) { return to_vec(z.all()); };
    inst.objective = obj;
    return inst;
  }

  // overlapping: coupling U stacks the group selectors
  std::vector<SparseMatrix::Triplet> trip;
  std::vector<std::size_t> dual_sizes;
  std::size_t row = 0;
  for (const auto& g : spec.groups) {
    for (std::size_t e : g) trip.push_back({row++, e, 1.0});
    dual_sizes.push_back(g.size());
  }
  SparseMatrix u(row, n, std::move(trip));

  PrimalDualProblem prob;
  prob.a = LinearCoupling(u,
                          std::make_shared<const BlockPartition>(
                              BlockPartition::scalar(n)),
                          make_partition(dual_sizes));
  prob.f = make_least_squares_smooth(a, to_vec(b));
  prob.prox_h.resize(m);
  for (std::size_t g = 0; g < m; ++g)
    prob.prox_h[g] = make_prox_l2_norm(spec.lambdas[g]);
  prob.objective = obj;

  auto [e, gm] = choose_cv_steps(prob.a.spectral_norm_estimate(),
                                 prob.f->beta(), eta, gamma);
  auto cv = std::make_shared<CondatVuOperator>(std::move(prob), e, gm,
                                               CvOrder::kDualFirst);
  ProblemInstance inst;
  inst.name = "group-lasso-overlap";
  inst.full_op = cv;
  inst.coord = std::make_shared<GroupLassoOverlapProcess>(cv, spec);
  inst.z0 = BlockVector(cv->zpart_ptr());
  inst.solution_dim = n;
  inst.extract_solution = [n](const BlockVector& z) {
    return to_vec(z.all().subspan(0, n));
  };
  inst.objective = obj;
  return inst;
}

// ---- TV reconstruction ----

SparseMatrix grid_gradient(std::size_t h, std::size_t w) {
  // pixel q = r*w + c; rows 2q (horizontal) and 2q+1 (vertical), zero rows at
  // the right/bottom borders
  const std::size_t n = h * w;
  std::vector<SparseMatrix::Triplet> trip;
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t q = r * w + c;
      if (c + 1 < w) {
        trip.push_back({2 * q, q + 1, 1.0});
        trip.push_back({2 * q, q, -1.0});
      }
      if (r + 1 < h) {
        trip.push_back({2 * q + 1, q + w, 1.0});
        trip.push_back({2 * q + 1, q, -1.0});
      }
    }
  return {2 * n, n, std::move(trip)};
}

namespace {

// z = [x in row blocks; per-row dual bundles (gradient rows then sampling
// rows)], f = g = 0, caches Dts = grad' s and Att = A' t kept separately
class TvOperator final : public FixedPointOperator {
 public:
  TvOperator(const TvProblem& tv, double eta, double gamma)
      : h_(tv.grid_h), w_(tv.grid_w), lambda_(tv.lambda), eta_(eta), gamma_(gamma) {
    const std::size_t n = h_ * w_;
    if (tv.sampling.cols() != n) throw DimensionError("tv: sampling shape");
    if (tv.b.size() != tv.sampling.rows()) throw DimensionError("tv: b size");
    grad_ = grid_gradient(h_, w_);
    samp_ = tv.sampling;
    b_ = tv.b;

    // bundle r: pixels of image row r, their 2w gradient rows, and the
    // sampling rows whose pixel lies in row r
    grad_rows_.resize(h_);
    samp_rows_.resize(h_);
    for (std::size_t r = 0; r < h_; ++r) {
      for (std::size_t c = 0; c < w_; ++c) {
        const std::size_t q = r * w_ + c;
        grad_rows_[r].push_back(2 * q);
        grad_rows_[r].push_back(2 * q + 1);
      }
    }
    for (std::size_t j = 0; j < samp_.rows(); ++j) {
      if (samp_.row_end(j) == samp_.row_begin(j))
        throw ConfigError("tv: empty sampling row");
      const std::size_t q = samp_.row_col(samp_.row_begin(j));
      samp_rows_[q / w_].push_back(j);
    }

    std::vector<std::size_t> sizes(h_, w_);  // x row blocks
    dual_off_.resize(h_ + 1, 0);
    for (std::size_t r = 0; r < h_; ++r) {
      sizes.push_back(grad_rows_[r].size() + samp_rows_[r].size());
      dual_off_[r + 1] = dual_off_[r] + sizes[h_ + r];
    }
    part_ = make_partition(std::move(sizes));
    desc_ = {SepClass::kNonSeparable, CfClass::kCfWithCache,
             8 * (grad_.nnz() + samp_.nnz()),
             8 * (grad_.nnz() + samp_.nnz()) / h_ + 1};
  }

  const BlockPartition& partition() const override { return *part_; }
  const OperatorDescriptor& descriptor() const override { return desc_; }
  std::vector<CacheEntrySpec> cache_schema() const override {
    return {{"Dts", h_ * w_}, {"Att", h_ * w_}};
  }

  std::size_t rows() const { return h_; }
  std::size_t pixels() const { return h_ * w_; }
  double eta() const { return eta_; }

  // s entry layout -> original dual index
  double dual_entry(const BlockVector& z, std::size_t r, std::size_t t) const {
    return z.all()[pixels() + dual_off_[r] + t];
  }

  void init_cache(const BlockVector& z, MaintainedCache& cache) const override {
    cache.clear();
    auto& dts = cache.create("Dts", pixels());
    auto& att = cache.create("Att", pixels());
    std::vector<double> s(grad_.rows(), 0.0), t(samp_.rows(), 0.0);
    scatter_duals(z, s, t);
    grad_.mul_t(s, dts);
    samp_.mul_t(t, att);
  }

  void apply_full(const BlockVector& z, BlockVector& out) const override {
    const std::size_t n = pixels();
    std::vector<double> s(grad_.rows()), t(samp_.rows());
    scatter_duals(z, s, t);
    std::vector<double> dts(n), att(n);
    grad_.mul_t(s, dts);
    samp_.mul_t(t, att);
    auto x = z.all().subspan(0, n);
    // x' = x - eta (grad's + A't); duals from 2x' - x
    std::vector<double> xt(n);
    for (std::size_t e = 0; e < n; ++e) {
      out.all()[e] = x[e] - eta_ * (dts[e] + att[e]);
      xt[e] = 2.0 * out.all()[e] - x[e];
    }
    ops::add(6 * n);
    std::vector<double> gs(grad_.rows()), as(samp_.rows());
    grad_.mul(xt, gs);
    samp_.mul(xt, as);
    for (std::size_t r = 0; r < h_; ++r) {
      std::size_t pos = n + dual_off_[r];
      for (std::size_t j : grad_rows_[r]) {
        out.all()[pos] = clip(s[j] + gamma_ * gs[j]);
        ++pos;
      }
      for (std::size_t j : samp_rows_[r]) {
        out.all()[pos] = (t[j] + gamma_ * as[j] - gamma_ * b_[j]) / (1.0 + gamma_);
        ++pos;
      }
    }
    ops::add(3 * grad_.rows() + 5 * samp_.rows());
  }

  void coordinate_value(const BlockVector& z, std::size_t unit,
                        const MaintainedCache& cache,
                        std::span<double> out) const override {
    const std::size_t n = pixels();
    auto dts = cache.entry("Dts");
    auto att = cache.entry("Att");
    auto x = z.all().subspan(0, n);
    if (unit < h_) {
      const std::size_t off = unit * w_;
      for (std::size_t c = 0; c < w_; ++c)
        out[c] = x[off + c] - eta_ * (dts[off + c] + att[off + c]);
      ops::add(3 * w_);
      return;
    }
    // dual bundle: rows touch pixels in image rows r and r+1 only; the
    // transient x~ entry at a pixel is O(1) from the caches
    const std::size_t r = unit - h_;
    auto xt = [&](std::size_t e) {
      ops::add(5);
      return x[e] - 2.0 * eta_ * (dts[e] + att[e]);
    };
    std::size_t pos = 0;
    for (std::size_t j : grad_rows_[r]) {
      double acc = 0.0;
      for (std::size_t k = grad_.row_begin(j); k < grad_.row_end(j); ++k)
        acc += grad_.row_val(k) * xt(grad_.row_col(k));
      out[pos] = clip(dual_entry(z, r, pos) + gamma_ * acc);
      ++pos;
      ops::add(6);
    }
    for (std::size_t j : samp_rows_[r]) {
      double acc = 0.0;
      for (std::size_t k = samp_.row_begin(j); k < samp_.row_end(j); ++k)
        acc += samp_.row_val(k) * xt(samp_.row_col(k));
      out[pos] = (dual_entry(z, r, pos) + gamma_ * acc - gamma_ * b_[j]) /
                 (1.0 + gamma_);
      ++pos;
      ops::add(8);
    }
  }

  void refresh_cache(const BlockVector& z, std::size_t unit,
                     std::span<const double> oldb, std::span<const double> newb,
                     MaintainedCache& cache) const override {
    (void)z;
    if (unit < h_) return;  // x commits do not touch the dual caches
    const std::size_t r = unit - h_;
    auto dts = cache.entry("Dts");
    auto att = cache.entry("Att");
    std::size_t pos = 0;
    for (std::size_t j : grad_rows_[r]) {
      const double d = newb[pos] - oldb[pos];
      for (std::size_t k = grad_.row_begin(j); k < grad_.row_end(j); ++k)
        dts[grad_.row_col(k)] += d * grad_.row_val(k);
      ops::add(2 * (grad_.row_end(j) - grad_.row_begin(j)) + 1);
      ++pos;
    }
    for (std::size_t j : samp_rows_[r]) {
      const double d = newb[pos] - oldb[pos];
      for (std::size_t k = samp_.row_begin(j); k < samp_.row_end(j); ++k)
        att[samp_.row_col(k)] += d * samp_.row_val(k);
      ops::add(2 * (samp_.row_end(j) - samp_.row_begin(j)) + 1);
      ++pos;
    }
  }

  std::optional<double> objective(const BlockVector& z) const override {
    ops::SuspendCounting pause;
    return objective_of_x(z.all().subspan(0, pixels()));
  }

  double objective_of_x(std::span<const double> x) const {
    ops::SuspendCounting pause;
    std::vector<double> g(grad_.rows()), ax(samp_.rows());
    grad_.mul(x, g);
    samp_.mul(x, ax);
    double v = 0.0;
    for (double gi : g) v += lambda_ * std::abs(gi);
    for (std::size_t j = 0; j < ax.size(); ++j) {
      const double r = ax[j] - b_[j];
      v += 0.5 * r * r;
    }
    return v;
  }

 private:
  void scatter_duals(const BlockVector& z, std::span<double> s,
                     std::span<double> t) const {
    const std::size_t n = pixels();
    for (std::size_t r = 0; r < h_; ++r) {
      std::size_t pos = n + dual_off_[r];
      for (std::size_t j : grad_rows_[r]) s[j] = z.all()[pos++];
      for (std::size_t j : samp_rows_[r]) t[j] = z.all()[pos++];
    }
  }
  double clip(double v) const {
    return std::min(lambda_, std::max(-lambda_, v));
  }

  std::size_t h_, w_;
  double lambda_, eta_, gamma_;
  SparseMatrix grad_, samp_;
  std::vector<double> b_;
  std::vector<std::vector<std::size_t>> grad_rows_, samp_rows_;
  std::vector<std::size_t> dual_off_;
  PartitionPtr part_;
  OperatorDescriptor desc_;
};

// bundles the x row block with its dual bundle as one unit (the CT blocking)
class TvBundleProcess final : public CoordinateProcess {
 public:
  explicit TvBundleProcess(std::shared_ptr<const TvOperator> op) : op_(std::move(op)) {}
  PartitionPtr partition() const override {
    return std::make_shared<const BlockPartition>(op_->partition().sizes());
  }
  std::size_t num_units() const override { return op_->rows(); }
  void init_cache(const BlockVector& z, MaintainedCache& c) const override {
    op_->init_cache(z, c);
  }
  void compute_unit(const BlockVector& z_read, const MaintainedCache& cache_read,
                    std::size_t unit, double weight,
                    StagedUpdate& out) const override {
    out.clear();
    for (std::size_t b : {unit, op_->rows() + unit}) {
      const std::size_t w = op_->partition().block_size(b);
      std::vector<double> value(w);
      op_->coordinate_value(z_read, b, cache_read, value);
      auto& delta = out.stage(b, w);
      auto zb = z_read.block(b);
      for (std::size_t c = 0; c < w; ++c)
        delta[c] = -weight * (zb[c] - value[c]);
      ops::add(3 * w);
    }
  }
  void commit_update(const StagedUpdate& u, BlockVector& z,
                     MaintainedCache& cache) const override {
    for (std::size_t t = 0; t < u.blocks.size(); ++t) {
      auto blk = z.block(u.blocks[t]);
      std::vector<double> old(blk.begin(), blk.end());
      kern::axpy(1.0, u.deltas[t], blk);
      op_->refresh_cache(z, u.blocks[t], old, blk, cache);
    }
    cache.bump_epoch();
  }
  double residual(const BlockVector& z) const override {
    return fixed_point_residual(*op_, z);
  }
  std::optional<double> objective(const BlockVector& z) const override {
    return op_->objective(z);
  }

 private:
  std::shared_ptr<const TvOperator> op_;
};

}  // namespace

ProblemInstance build_tv_reconstruction(const TvProblem& tv, double eta,
                                        double gamma) {
  if (tv.grid_h == 0 || tv.grid_w == 0)
    throw ConfigError("tv: grid dimensions required");
  if (eta <= 0.0 || gamma <= 0.0) {
    // ||B|| with B = [grad; A] estimated by power iteration
    const std::size_t n = tv.grid_h * tv.grid_w;
    SparseMatrix g = grid_gradient(tv.grid_h, tv.grid_w);
    const auto& a = tv.sampling;
    auto mul = [&](std::span<const double> x, std::span<double> y) {
      std::vector<double> t1(g.rows()), t2(a.rows());
      g.mul(x, t1);
      a.mul(x, t2);
      std::copy(t1.begin(), t1.end(), y.begin());
      std::copy(t2.begin(), t2.end(), y.begin() + t1.size());
    };
    auto mul_t = [&](std::span<const double> y, std::span<double> x) {
      std::vector<double> x1(n), x2(n);
      g.mul_t(y.subspan(0, g.rows()), x1);
      a.mul_t(y.subspan(g.rows(), a.rows()), x2);
      for (std::size_t e = 0; e < n; ++e) x[e] = x1[e] + x2[e];
    };
    const double norm = 1.01 * linalg::spectral_norm_power(
                                   mul, mul_t, g.rows() + a.rows(), n);
    const double step = 0.99 / std::max(norm, 1e-9);
    if (eta <= 0.0) eta = step;
    if (gamma <= 0.0) gamma = step;
  }
  auto op = std::make_shared<TvOperator>(tv, eta, gamma);
  const std::size_t n = tv.grid_h * tv.grid_w;
  ProblemInstance inst;
  inst.name = "tv";
  inst.full_op = op;
  inst.coord = std::make_shared<TvBundleProcess>(op);
  inst.z0 = BlockVector(std::make_shared<const BlockPartition>(
      op->partition().sizes()));
  inst.solution_dim = n;
  inst.extract_solution = [n](const BlockVector& z) {
    return to_vec(z.all().subspan(0, n));
  };
  inst.objective = [op](std::span<const double> x) {
    return op->objective_of_x(x);
  };
  return inst;
}

// ---- portfolio ----

namespace {

// undamped 3S operator with J_B = proj onto the halfspace cap, J_A = proj
// onto the nonnegative orthant, C = Qx; maintained w1, w2 give O(1) region
// dispatch
class PortfolioOperator final : public FixedPointOperator {
 public:
  PortfolioOperator(const DenseMatrix& q, std::span<const double> xi,
                    double ret, double gamma)
      : q_(q), gamma_(gamma) {
    const std::size_t m = q.rows();
    if (q.cols() != m || xi.size() != m) throw DimensionError("portfolio: shapes");
    if (gamma_ <= 0.0) throw ConfigError("portfolio: gamma must be > 0");
    const double sm = std::sqrt(static_cast<double>(m));
    std::vector<double> a1(m, 1.0 / sm), a2 = to_vec(xi);
    const double nxi = kern::nrm2(a2);
    for (double& v : a2) v /= nxi;
    cap_ = std::make_unique<HalfspaceCap>(a1, 1.0 / sm, a2, ret / nxi);
    qa1_.assign(m, 0.0);
    qa2_.assign(m, 0.0);
    qa1t_.assign(m, 0.0);
    qa2t_.assign(m, 0.0);
    q_.mul(cap_->a1(), qa1_);
    q_.mul(cap_->a2(), qa2_);
    q_.mul(cap_->a1_tilde(), qa1t_);
    q_.mul(cap_->a2_tilde(), qa2t_);
    part_ = std::make_shared<const BlockPartition>(BlockPartition::scalar(m));
    desc_ = {SepClass::kNonSeparable, CfClass::kCfWithCache, 2 * m * m,
             2 * m + 16};
  }

  const BlockPartition& partition() const override { return *part_; }
  const OperatorDescriptor& descriptor() const override { return desc_; }
  std::vector<CacheEntrySpec> cache_schema() const override {
    return {{"w1", 1}, {"w2", 1}};
  }
  void init_cache(const BlockVector& x, MaintainedCache& cache) const override {
    cache.clear();
    cache.create("w1", 1)[0] = cap_->w1(x.all());
    cache.create("w2", 1)[0] = cap_->w2(x.all());
  }
  void refresh_cache(const BlockVector&, std::size_t i,
                     std::span<const double> oldb, std::span<const double> newb,
                     MaintainedCache& cache) const override {
    const double d = newb[0] - oldb[0];
    cache.scalar("w1") += cap_->a1()[i] * d;
    cache.scalar("w2") += cap_->a2()[i] * d;
    ops::add(5);
  }

  void apply_full(const BlockVector& x, BlockVector& out) const override {
    const std::size_t m = part_->num_blocks();
    std::vector<double> y(m), qy(m);
    cap_->project(x.all(), y);
    q_.mul(y, qy);
    for (std::size_t i = 0; i < m; ++i) {
      const double arg = 2.0 * y[i] - x[i] - gamma_ * qy[i];
      out.all()[i] = x[i] - y[i] + std::max(0.0, arg);
    }
    ops::add(6 * m);
  }

  void coordinate_value(const BlockVector& x, std::size_t i,
                        const MaintainedCache& cache,
                        std::span<double> out) const override {
    const double w1 = cache.scalar("w1"), w2 = cache.scalar("w2");
    const double qix = kern::dot(q_.row(i), x.all());
    const double base = x[i] - gamma_ * qix;
    double v = 0.0;
    switch (cap_->region(w1, w2)) {
      case 1:
        v = std::max(0.0, base);
        break;
      case 2:
        v = w2 * cap_->a2()[i] +
            std::max(0.0, base - w2 * (2.0 * cap_->a2()[i] - gamma_ * qa2_[i]));
        break;
      case 3:
        v = w1 * cap_->a1_tilde()[i] + w2 * cap_->a2_tilde()[i] +
            std::max(0.0,
                     base - w1 * (2.0 * cap_->a1_tilde()[i] - gamma_ * qa1t_[i]) -
                         w2 * (2.0 * cap_->a2_tilde()[i] - gamma_ * qa2t_[i]));
        break;
      case 4:
        v = w1 * cap_->a1()[i] +
            std::max(0.0, base - w1 * (2.0 * cap_->a1()[i] - gamma_ * qa1_[i]));
        break;
    }
    out[0] = v;
    ops::add(20);
  }

  std::optional<double> objective(const BlockVector& x) const override {
    ops::SuspendCounting pause;
    std::vector<double> sol = solution(x);
    return objective_of(sol);
  }
  std::vector<double> solution(const BlockVector& x) const {
    ops::SuspendCounting pause;
    std::vector<double> y(x.dim());
    cap_->project(x.all(), y);
    return y;
  }
  double objective_of(std::span<const double> y) const {
    ops::SuspendCounting pause;
    std::vector<double> qy(y.size());
    q_.mul(y, qy);
    return 0.5 * kern::dot(y, qy);
  }
  const HalfspaceCap& cap() const { return *cap_; }

 private:
  DenseMatrix q_;
  double gamma_;
  std::unique_ptr<HalfspaceCap> cap_;
  std::vector<double> qa1_, qa2_, qa1t_, qa2t_;
  PartitionPtr part_;
  OperatorDescriptor desc_;
};

}  // namespace

ProblemInstance build_portfolio(const DenseMatrix& q, std::span<const double> xi,
                                double ret, double gamma, double eta) {
  const std::size_t m = q.rows();
  double gmax = 0.0;
  for (std::size_t i = 0; i < m; ++i) gmax = std::max(gmax, q.at(i, i));
  const double gamma_coord = gamma > 0.0 ? gamma : 2.0 / std::max(gmax, 1e-12);
  const double gamma_full = 2.0 / std::max(linalg::spectral_norm(q), 1e-12);

  auto coord_op = std::make_shared<PortfolioOperator>(q, xi, ret, gamma_coord);
  auto full_op = std::make_shared<PortfolioOperator>(q, xi, ret, gamma_full);
  (void)eta;  // callers damp through the driver schedule

  ProblemInstance inst;
  inst.name = "portfolio";
  inst.full_op = full_op;
  inst.coord = make_operator_process(coord_op);
  auto part = std::make_shared<const BlockPartition>(BlockPartition::scalar(m));
  inst.z0 = BlockVector(part);
  for (std::size_t i = 0; i < m; ++i)
    inst.z0[i] = 1.0 / static_cast<double>(m);
  inst.solution_dim = m;
  inst.extract_solution = [coord_op](const BlockVector& z) {
    return coord_op->solution(z);
  };
  inst.objective = [coord_op](std::span<const double> y) {
    return coord_op->objective_of(y);
  };
  return inst;
}

// ---- NMF ----

namespace {

class NmfOperator final : public FixedPointOperator {
 public:
  NmfOperator(const DenseMatrix& a, std::size_t r, NmfVariant variant)
      : a_(a), r_(r), variant_(variant) {
    if (r_ == 0) throw ConfigError("nmf: rank must be >= 1");
    p_ = a.rows();
    n_ = a.cols();
    for (std::size_t e = 0; e < a_.all().size(); ++e)
      if (a_.all()[e] < 0.0) throw ConfigError("nmf: A must be nonnegative");
    std::vector<std::size_t> sizes;
    for (std::size_t i = 0; i < r_; ++i) sizes.push_back(p_);
    for (std::size_t i = 0; i < r_; ++i) sizes.push_back(n_);
    part_ = make_partition(std::move(sizes));
    desc_ = {SepClass::kNonSeparable, CfClass::kCfWithCache, 4 * p_ * n_ * r_,
             6 * p_ * n_};
  }

  const BlockPartition& partition() const override { return *part_; }
  const OperatorDescriptor& descriptor() const override { return desc_; }
  std::vector<CacheEntrySpec> cache_schema() const override {
    return {{"R", p_ * n_}};  // W H' - A, row-major
  }

  void init_cache(const BlockVector& z, MaintainedCache& cache) const override {
    cache.clear();
    auto& res = cache.create("R", p_ * n_);
    for (std::size_t u = 0; u < p_; ++u)
      for (std::size_t v = 0; v < n_; ++v) {
        double s = 0.0;
        for (std::size_t i = 0; i < r_; ++i) s += wcol(z, i)[u] * hcol(z, i)[v];
        res[u * n_ + v] = s - a_.at(u, v);
      }
    ops::add(2 * p_ * n_ * r_);
  }

  void refresh_cache(const BlockVector& z, std::size_t blk,
                     std::span<const double> oldb, std::span<const double> newb,
                     MaintainedCache& cache) const override {
    auto res = cache.entry("R");
    if (blk < r_) {
      // rank-one: R += (w_new - w_old) h_i'
      auto h = hcol(z, blk);
      for (std::size_t u = 0; u < p_; ++u) {
        const double d = newb[u] - oldb[u];
        if (d == 0.0) continue;
        for (std::size_t v = 0; v < n_; ++v) res[u * n_ + v] += d * h[v];
      }
    } else {
      auto w = wcol(z, blk - r_);
      for (std::size_t v = 0; v < n_; ++v) {
        const double d = newb[v] - oldb[v];
        if (d == 0.0) continue;
        for (std::size_t u = 0; u < p_; ++u) res[u * n_ + v] += w[u] * d;
      }
    }
    ops::add(2 * p_ * n_);
  }

  void apply_full(const BlockVector& z, BlockVector& out) const override {
    MaintainedCache local;
    init_cache(z, local);
    for (std::size_t blk = 0; blk < 2 * r_; ++blk)
      coordinate_value(z, blk, local, out.block(blk));
  }

  void coordinate_value(const BlockVector& z, std::size_t blk,
                        const MaintainedCache& cache,
                        std::span<double> out) const override {
    auto res = cache.entry("R");
    if (blk < r_) {
      // w_i step 1/||h_i||^2, gradient R h_i
      auto h = hcol(z, blk);
      auto w = wcol(z, blk);
      const double hn = kern::nrm2sq(h);
      if (hn < 1e-12 && variant_ == NmfVariant::kRaw) {
        kern::copy(w, out);  // skip: no curvature
        return;
      }
      const double step = 1.0 / std::max(hn, 1e-12);
      for (std::size_t u = 0; u < p_; ++u) {
        double g = 0.0;
        for (std::size_t v = 0; v < n_; ++v) g += res[u * n_ + v] * h[v];
        out[u] = std::max(0.0, w[u] - step * g);
      }
      ops::add(2 * p_ * n_ + 3 * p_);
      if (variant_ == NmfVariant::kUnitColumns) {
        // keep W columns on the nonnegative unit ball
        const double nw = kern::nrm2(out);
        if (nw > 1.0) {
          for (double& v : out) v /= nw;
          ops::add(p_);
        }
      }
    } else {
      const std::size_t i = blk - r_;
      auto w = wcol(z, i);
      auto h = hcol(z, i);
      const double wn = kern::nrm2sq(w);
      if (wn < 1e-12) {
        kern::copy(h, out);  // zero column: stationary for this block
        return;
      }
      const double step = 1.0 / wn;
      for (std::size_t v = 0; v < n_; ++v) {
        double g = 0.0;
        for (std::size_t u = 0; u < p_; ++u) g += res[u * n_ + v] * w[u];
        out[v] = std::max(0.0, h[v] - step * g);
      }
      ops::add(2 * p_ * n_ + 3 * n_);
    }
  }

  std::optional<double> objective(const BlockVector& z) const override {
    ops::SuspendCounting pause;
    double s = 0.0;
    for (std::size_t u = 0; u < p_; ++u)
      for (std::size_t v = 0; v < n_; ++v) {
        double e = -a_.at(u, v);
        for (std::size_t i = 0; i < r_; ++i) e += wcol(z, i)[u] * hcol(z, i)[v];
        s += e * e;
      }
    return 0.5 * s;
  }

  std::span<const double> wcol(const BlockVector& z, std::size_t i) const {
    return z.block(i);
  }
  std::span<const double> hcol(const BlockVector& z, std::size_t i) const {
    return z.block(r_ + i);
  }

 private:
  DenseMatrix a_;
  std::size_t r_, p_ = 0, n_ = 0;
  NmfVariant variant_;
  PartitionPtr part_;
  OperatorDescriptor desc_;
};

}  // namespace

ProblemInstance build_nmf(const DenseMatrix& a, std::size_t r,
                          NmfVariant variant, std::uint64_t seed) {
  auto op = std::make_shared<NmfOperator>(a, r, variant);
  auto part = std::make_shared<const BlockPartition>(op->partition().sizes());
  ProblemInstance inst;
  inst.name = "nmf";
  inst.full_op = op;
  inst.coord = make_operator_process(op);
  inst.z0 = BlockVector(part);
  Rng rng(seed);
  for (double& v : inst.z0.raw()) v = std::abs(rng.gaussian()) + 0.1;
  if (variant == NmfVariant::kUnitColumns) {
    for (std::size_t i = 0; i < r; ++i) {
      auto w = inst.z0.block(i);
      const double nw = kern::nrm2(w);
      for (double& v : w) v /= nw;
    }
  }
  inst.solution_dim = inst.z0.dim();
  inst.extract_solution = [](const BlockVector& z) { return to_vec(z.all()); };
  auto opc = op;
  inst.objective = [opc, part](std::span<const double> wh) {
    BlockVector z(part, std::vector<double>(wh.begin(), wh.end()));
    return *opc->objective(z);
  };
  return inst;
}

// ---- SOCP by DRS ----

namespace {

// T_DRS with J_B the affine resolvent of c'x (+ 0.5 x'Cx) over Ax = b and
// J_A the cone projection; caches: y = Bx + d plus per-cone tail squares.
class SocpDrsOperator final : public FixedPointOperator {
 public:
  SocpDrsOperator(const DenseMatrix& a, std::span<const double> b,
                  std::span<const double> c, std::vector<std::size_t> cones,
                  double gamma, const DenseMatrix* quad)
      : cones_(std::move(cones)), gamma_(gamma) {
    const std::size_t mrows = a.rows(), n = a.cols();
    if (b.size() != mrows || c.size() != n) throw DimensionError("socp: shapes");
    std::size_t tot = 0;
    for (std::size_t s : cones_) tot += s;
    if (tot != n) throw DimensionError("socp: cones must cover the variable");
    if (gamma_ <= 0.0) throw ConfigError("socp: gamma must be > 0");
    c_ = to_vec(c);

    if (!quad) {
      // B = I - 2A'(AA')^{-1}A, d = 2A'(AA')^{-1}(b + gamma A c) - 2 gamma c
      DenseMatrix aat(mrows, mrows);
      for (std::size_t i = 0; i < mrows; ++i)
        for (std::size_t j = 0; j < mrows; ++j)
          aat.at(i, j) = kern::dot(a.row(i), a.row(j));
      DenseMatrix inv = linalg::inverse(aat);  // throws if rank-deficient
      for (std::size_t i = 0; i < mrows; ++i)
        for (std::size_t j = 0; j < mrows; ++j)
          if (!std::isfinite(inv.at(i, j)))
            throw ConfigError("socp: AA' is singular");
      b_ = DenseMatrix(n, n);
      std::vector<double> rhs(mrows), aic(mrows), tmp(mrows);
      a.mul(c_, aic);
      for (std::size_t j = 0; j < mrows; ++j) rhs[j] = b[j] + gamma_ * aic[j];
      inv.mul(rhs, tmp);
      d_.assign(n, 0.0);
      a.mul_t(tmp, d_);
      for (std::size_t e = 0; e < n; ++e) d_[e] = 2.0 * d_[e] - 2.0 * gamma_ * c_[e];
      // columns of -2A'(AA')^{-1}A plus the identity
      std::vector<double> col(mrows), invcol(mrows), bcol(n);
      for (std::size_t e = 0; e < n; ++e) {
        for (std::size_t j = 0; j < mrows; ++j) col[j] = a.at(j, e);
        inv.mul(col, invcol);
        a.mul_t(invcol, bcol);
        for (std::size_t u = 0; u < n; ++u) b_.at(u, e) = -2.0 * bcol[u];
        b_.at(e, e) += 1.0;
      }
    } else {
      // quadratic objective: the resolvent stays affine via the KKT system
      if (quad->rows() != n || quad->cols() != n)
        throw DimensionError("socp: quadratic term shape");
      quad_ = *quad;
      has_quad_ = true;
      DenseMatrix kkt(n + mrows, n + mrows);
      for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = 0; v < n; ++v)
          kkt.at(u, v) = quad->at(u, v) + (u == v ? 1.0 / gamma_ : 0.0);
      for (std::size_t j = 0; j < mrows; ++j)
        for (std::size_t u = 0; u < n; ++u) {
          kkt.at(n + j, u) = a.at(j, u);
          kkt.at(u, n + j) = a.at(j, u);
        }
      // y(x) = S11 (x/gamma - c) + S12 b  =>  B = 2 S11 / gamma - I
      DenseMatrix kinv = linalg::inverse(kkt);
      b_ = DenseMatrix(n, n);
      d_.assign(n, 0.0);
      for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t v = 0; v < n; ++v)
          b_.at(u, v) = 2.0 * kinv.at(u, v) / gamma_ - (u == v ? 1.0 : 0.0);
        double acc = 0.0;
        for (std::size_t v = 0; v < n; ++v) acc -= kinv.at(u, v) * c_[v];
        for (std::size_t j = 0; j < mrows; ++j)
          acc += kinv.at(u, n + j) * b[j];
        d_[u] = 2.0 * acc;
      }
    }

    part_ = make_partition(std::vector<std::size_t>(cones_.begin(), cones_.end()));
    desc_ = {SepClass::kNonSeparable, CfClass::kCfWithCache, 2 * n * n,
             2 * n * (n / part_->num_blocks() + 1)};
  }

  const BlockPartition& partition() const override { return *part_; }
  const OperatorDescriptor& descriptor() const override { return desc_; }
  std::vector<CacheEntrySpec> cache_schema() const override {
    return {{"y", d_.size()}, {"tailsq", cones_.size()}};
  }

  void init_cache(const BlockVector& x, MaintainedCache& cache) const override {
    cache.clear();
    auto& y = cache.create("y", d_.size());
    b_.mul(x.all(), y);
    kern::axpy(1.0, d_, y);
    auto& ts = cache.create("tailsq", cones_.size());
    for (std::size_t i = 0; i < cones_.size(); ++i) {
      const std::size_t off = part_->offset(i), w = part_->block_size(i);
      double t = 0.0;
      for (std::size_t e = 1; e < w; ++e) t += y[off + e] * y[off + e];
      ts[i] = t;
    }
    ops::add(2 * d_.size());
  }

  void refresh_cache(const BlockVector&, std::size_t i,
                     std::span<const double> oldb, std::span<const double> newb,
                     MaintainedCache& cache) const override {
    auto y = cache.entry("y");
    auto ts = cache.entry("tailsq");
    const std::size_t off = part_->offset(i), w = part_->block_size(i);
    std::vector<double> delta(w);
    for (std::size_t e = 0; e < w; ++e) delta[e] = newb[e] - oldb[e];
    ops::add(w);
    // y moves by B[:, block] * delta; per-entry tail_sq refreshes stay O(1)
    for (std::size_t u = 0; u < y.size(); ++u) {
      const double* row = b_.row(u).data() + off;
      double dy = 0.0;
      for (std::size_t e = 0; e < w; ++e) dy += row[e] * delta[e];
      if (dy == 0.0) continue;
      const double oldy = y[u];
      const double newy = oldy + dy;
      y[u] = newy;
      const std::size_t cone = cone_of_[u];
      if (u != part_->offset(cone)) ts[cone] += newy * newy - oldy * oldy;
    }
    ops::add(2 * y.size() * (w + 2));
  }

  void apply_full(const BlockVector& x, BlockVector& out) const override {
    const std::size_t n = d_.size();
    std::vector<double> y(n), u(n);
    b_.mul(x.all(), y);
    kern::axpy(1.0, d_, y);
    for (std::size_t i = 0; i < cones_.size(); ++i) {
      const std::size_t off = part_->offset(i), w = part_->block_size(i);
      soc_project(std::span<const double>(y).subspan(off, w),
                  std::span<double>(u).subspan(off, w));
    }
    for (std::size_t e = 0; e < n; ++e)
      out.all()[e] = u[e] + 0.5 * (x.all()[e] - y[e]);
    ops::add(3 * n);
  }

  void coordinate_value(const BlockVector& x, std::size_t i,
                        const MaintainedCache& cache,
                        std::span<double> out) const override {
    auto y = cache.entry("y");
    auto ts = cache.entry("tailsq");
    const std::size_t off = part_->offset(i), w = part_->block_size(i);
    auto yi = y.subspan(off, w);
    SocState st = soc_state_for(yi[0], ts[i]);
    std::vector<double> u(w);
    soc_apply(st, yi, u);
    for (std::size_t e = 0; e < w; ++e)
      out[e] = u[e] + 0.5 * (x.all()[off + e] - yi[e]);
    ops::add(3 * w);
  }

  std::optional<double> objective(const BlockVector& x) const override {
    ops::SuspendCounting pause;
    return objective_of(solution(x));
  }
  std::vector<double> solution(const BlockVector& x) const {
    // J_gB(x) = (x + Bx + d)/2
    ops::SuspendCounting pause;
    std::vector<double> y(d_.size());
    b_.mul(x.all(), y);
    kern::axpy(1.0, d_, y);
    for (std::size_t e = 0; e < y.size(); ++e) y[e] = 0.5 * (x.all()[e] + y[e]);
    return y;
  }
  double objective_of(std::span<const double> x) const {
    ops::SuspendCounting pause;
    double v = kern::dot(c_, x);
    if (has_quad_) {
      std::vector<double> qx(x.size());
      quad_.mul(x, qx);
      v += 0.5 * kern::dot(x, qx);
    }
    return v;
  }

  void finalize() {
    cone_of_.resize(d_.size());
    for (std::size_t i = 0; i < cones_.size(); ++i)
      for (std::size_t e = part_->offset(i);
           e < part_->offset(i) + part_->block_size(i); ++e)
        cone_of_[e] = i;
  }

 private:
  static SocState soc_state_for(double head, double tail_sq) {
    // same classification as soc_state_from, fed by the maintained square
    SocState st;
    st.tail_sq = std::max(0.0, tail_sq);
    st.rho1 = std::sqrt(st.tail_sq);
    st.rho2 = 0.5 * (head + st.rho1);
    if (head < -st.rho1) {
      st.region = SocRegion::kPolar;
    } else if (head >= st.rho1) {
      st.region = SocRegion::kInterior;
      st.xi1 = st.xi2 = 1.0;
    } else {
      st.region = SocRegion::kBoundary;
      st.xi1 = st.rho2;
      st.xi2 = st.rho2 / st.rho1;
    }
    ops::add(8);
    return st;
  }

  std::vector<std::size_t> cones_;
  double gamma_;
  std::vector<double> c_, d_;
  DenseMatrix b_, quad_;
  bool has_quad_ = false;
  std::vector<std::size_t> cone_of_;
  PartitionPtr part_;
  OperatorDescriptor desc_;
};

}  // namespace

ProblemInstance build_socp_drs(const DenseMatrix& a, std::span<const double> b,
                               std::span<const double> c,
                               std::vector<std::size_t> cone_sizes,
                               double gamma, const DenseMatrix* quad) {
  auto op = std::make_shared<SocpDrsOperator>(a, b, c, std::move(cone_sizes),
                                              gamma, quad);
  op->finalize();
  ProblemInstance inst;
  inst.name = "socp";
  inst.full_op = op;
  inst.coord = make_operator_process(op);
  inst.z0 = BlockVector(std::make_shared<const BlockPartition>(
      op->partition().sizes()));
  inst.solution_dim = inst.z0.dim();
  inst.extract_solution = [op](const BlockVector& z) { return op->solution(z); };
  inst.objective = [op](std::span<const double> x) { return op->objective_of(x); };
  return inst;
}

// ---- mesh denoising ----

ProblemInstance build_mesh_denoise(const MeshProblem& mesh, double eta,
                                   double gamma) {
  const std::size_t n = mesh.nodes, d = mesh.dim;
  if (n == 0 || d == 0) throw ConfigError("mesh: empty problem");
  if (mesh.noisy.size() != n * d) throw DimensionError("mesh: noisy size");

  // ordered pairs (i,j) and (j,i) per undirected edge
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (auto [i, j] : mesh.edges) {
    if (i == j || i >= n || j >= n) throw ConfigError("mesh: bad edge");
    pairs.emplace_back(i, j);
    pairs.emplace_back(j, i);
  }

  std::vector<SparseMatrix::Triplet> trip;
  for (std::size_t e = 0; e < pairs.size(); ++e) {
    const auto [i, j] = pairs[e];
    for (std::size_t k = 0; k < d; ++k) {
      trip.push_back({e * d + k, i * d + k, 1.0});
      trip.push_back({e * d + k, j * d + k, -1.0});
    }
  }

  PrimalDualProblem prob;
  prob.a = LinearCoupling(
      SparseMatrix(pairs.size() * d, n * d, std::move(trip)),
      make_partition(std::vector<std::size_t>(n, d)),
      pairs.empty() ? make_partition({1})  // placeholder, rejected below
                    : make_partition(std::vector<std::size_t>(pairs.size(), d)));
  if (pairs.empty()) throw ConfigError("mesh: at least one edge required");
  prob.f = make_diag_quadratic_smooth(std::vector<double>(n * d, mesh.fidelity),
                                      mesh.noisy);
  if (!mesh.lo.empty()) {
    if (mesh.lo.size() != n * d || mesh.hi.size() != n * d)
      throw DimensionError("mesh: box size");
    prob.prox_g.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> lo(mesh.lo.begin() + i * d, mesh.lo.begin() + (i + 1) * d);
      std::vector<double> hi(mesh.hi.begin() + i * d, mesh.hi.begin() + (i + 1) * d);
      prob.prox_g[i] = make_proj_box(std::move(lo), std::move(hi));
    }
  }
  prob.prox_h.assign(pairs.size(), make_prox_l2_norm(mesh.lambda));

  auto noisy = std::make_shared<std::vector<double>>(mesh.noisy);
  auto edges = std::make_shared<std::vector<std::pair<std::size_t, std::size_t>>>(
      mesh.edges);
  const double fid = mesh.fidelity, lam = mesh.lambda;
  auto obj = [noisy, edges, fid, lam, d](std::span<const double> x) {
    double v = 0.0;
    for (std::size_t e = 0; e < x.size(); ++e) {
      const double r = x[e] - (*noisy)[e];
      v += 0.5 * fid * r * r;
    }
    for (auto [i, j] : *edges) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = x[i * d + k] - x[j * d + k];
        s += diff * diff;
      }
      v += 2.0 * lam * std::sqrt(s);  // both ordered pairs carry the norm
    }
    return v;
  };
  prob.objective = obj;

  auto [e, g] = choose_cv_steps(prob.a.spectral_norm_estimate(),
                                prob.f->beta(), eta, gamma);
  auto weights = OverlapWeights::uniform(prob.a);  // rho = 1/2 per edge dual
  auto scheme = std::make_shared<OverlapCondatVu>(std::move(prob), e, g,
                                                  std::move(weights));
  ProblemInstance inst;
  inst.name = "mesh";
  inst.full_op = scheme->cv_ptr();
  inst.coord = make_overlap_process(scheme);
  inst.z0 = BlockVector(scheme->zpart_ptr());
  std::copy(mesh.noisy.begin(), mesh.noisy.end(), inst.z0.raw().begin());
  inst.solution_dim = n * d;
  inst.extract_solution = [n, d](const BlockVector& z) {
    return to_vec(z.all().subspan(0, n * d));
  };
  inst.objective = obj;
  return inst;
}

// ---- star-network consensus by FBFS ----

namespace {

// z = [x_1..x_m, y, s_1..s_m]; the master maintains sum_x and sum_s.
// T = gamma C + (I - gamma C) J_{gamma A} (I - gamma C) with
// C(x,y,s) = (s, -sum s, x - e y).
class NetworkConsensusOp final : public FixedPointOperator {
 public:
  NetworkConsensusOp(std::vector<ProxFn> prox_f, std::size_t dim, double gamma,
                     std::vector<std::function<double(std::span<const double>)>> fv)
      : prox_(std::move(prox_f)), d_(dim), gamma_(gamma), fval_(std::move(fv)) {
    m_ = prox_.size();
    if (m_ == 0 || d_ == 0) throw ConfigError("network: empty problem");
    if (gamma_ <= 0.0) throw ConfigError("network: gamma must be > 0");
    std::vector<std::size_t> sizes(m_, d_);
    sizes.push_back(d_);
    for (std::size_t i = 0; i < m_; ++i) sizes.push_back(d_);
    part_ = make_partition(std::move(sizes));
    desc_ = {SepClass::kNearlySeparable, CfClass::kCfWithCache,
             10 * (2 * m_ + 1) * d_, 10 * d_ + 4};
  }

  const BlockPartition& partition() const override { return *part_; }
  const OperatorDescriptor& descriptor() const override { return desc_; }
  std::vector<CacheEntrySpec> cache_schema() const override {
    return {{"sum_x", d_}, {"sum_s", d_}};
  }
  std::size_t workers() const { return m_; }
  std::size_t node_dim() const { return d_; }

  void init_cache(const BlockVector& z, MaintainedCache& cache) const override {
    cache.clear();
    auto& sx = cache.create("sum_x", d_);
    auto& ss = cache.create("sum_s", d_);
    for (std::size_t i = 0; i < m_; ++i) {
      kern::axpy(1.0, z.block(i), sx);
      kern::axpy(1.0, z.block(m_ + 1 + i), ss);
    }
  }
  void refresh_cache(const BlockVector&, std::size_t blk,
                     std::span<const double> oldb, std::span<const double> newb,
                     MaintainedCache& cache) const override {
    if (blk == m_) return;  // y commit
    auto sum = blk < m_ ? cache.entry("sum_x") : cache.entry("sum_s");
    for (std::size_t k = 0; k < d_; ++k) sum[k] += newb[k] - oldb[k];
    ops::add(2 * d_);
  }

  void apply_full(const BlockVector& z, BlockVector& out) const override {
    MaintainedCache local;
    init_cache(z, local);
    for (std::size_t b = 0; b < 2 * m_ + 1; ++b)
      coordinate_value(z, b, local, out.block(b));
  }

  void coordinate_value(const BlockVector& z, std::size_t blk,
                        const MaintainedCache& cache,
                        std::span<double> out) const override {
    auto y = z.block(m_);
    auto sum_s = cache.entry("sum_s");
    const double g = gamma_, g2 = gamma_ * gamma_;
    if (blk == m_) {
      auto sum_x = cache.entry("sum_x");
      const double md = static_cast<double>(m_);
      for (std::size_t k = 0; k < d_; ++k)
        out[k] = (1.0 + md * g2) * y[k] + g * sum_s[k] - g2 * sum_x[k];
      ops::add(6 * d_);
      return;
    }
    const std::size_t i = blk < m_ ? blk : blk - m_ - 1;
    auto xi = z.block(i);
    auto si = z.block(m_ + 1 + i);
    std::vector<double> arg(d_), pi(d_);
    for (std::size_t k = 0; k < d_; ++k) arg[k] = xi[k] - g * si[k];
    ops::add(2 * d_);
    prox_[i](arg, g, pi);
    if (blk < m_) {
      for (std::size_t k = 0; k < d_; ++k)
        out[k] = pi[k] + g2 * xi[k] - g2 * y[k];
      ops::add(4 * d_);
    } else {
      for (std::size_t k = 0; k < d_; ++k)
        out[k] = si[k] - g * pi[k] + g * y[k] + g2 * sum_s[k];
      ops::add(6 * d_);
    }
  }

  std::optional<double> objective(const BlockVector& z) const override {
    if (fval_.empty()) return std::nullopt;
    ops::SuspendCounting pause;
    auto y = z.block(m_);
    double v = 0.0;
    for (const auto& f : fval_) v += f(y);
    return v;
  }

 private:
  std::vector<ProxFn> prox_;
  std::size_t m_, d_;
  double gamma_;
  std::vector<std::function<double(std::span<const double>)>> fval_;
  PartitionPtr part_;
  OperatorDescriptor desc_;
};

// worker units commit (x_i, s_i) jointly; the master unit commits y
class NetworkProcess final : public CoordinateProcess {
 public:
  explicit NetworkProcess(std::shared_ptr<const NetworkConsensusOp> op)
      : op_(std::move(op)) {}
  PartitionPtr partition() const override {
    return std::make_shared<const BlockPartition>(op_->partition().sizes());
  }
  std::size_t num_units() const override { return op_->workers() + 1; }
  void init_cache(const BlockVector& z, MaintainedCache& c) const override {
    op_->init_cache(z, c);
  }
  void compute_unit(const BlockVector& z_read, const MaintainedCache& cache_read,
                    std::size_t unit, double weight,
                    StagedUpdate& out) const override {
    out.clear();
    const std::size_t m = op_->workers();
    std::vector<std::size_t> blocks =
        unit < m ? std::vector<std::size_t>{unit, m + 1 + unit}
                 : std::vector<std::size_t>{m};
    for (std::size_t b : blocks) {
      const std::size_t w = op_->partition().block_size(b);
      std::vector<double> value(w);
      op_->coordinate_value(z_read, b, cache_read, value);
      auto& delta = out.stage(b, w);
      auto zb = z_read.block(b);
      for (std::size_t c = 0; c < w; ++c)
        delta[c] = -weight * (zb[c] - value[c]);
      ops::add(3 * w);
    }
  }
  void commit_update(const StagedUpdate& u, BlockVector& z,
                     MaintainedCache& cache) const override {
    for (std::size_t t = 0; t < u.blocks.size(); ++t) {
      auto blk = z.block(u.blocks[t]);
      std::vector<double> old(blk.begin(), blk.end());
      kern::axpy(1.0, u.deltas[t], blk);
      op_->refresh_cache(z, u.blocks[t], old, blk, cache);
    }
    cache.bump_epoch();
  }
  double residual(const BlockVector& z) const override {
    return fixed_point_residual(*op_, z);
  }
  std::optional<double> objective(const BlockVector& z) const override {
    return op_->objective(z);
  }

 private:
  std::shared_ptr<const NetworkConsensusOp> op_;
};

}  // namespace

ProblemInstance build_network_consensus(
    std::vector<ProxFn> prox_f, std::size_t dim, double gamma,
    std::vector<std::function<double(std::span<const double>)>> f_values) {
  const std::size_t m = prox_f.size();
  auto fv = f_values;
  auto op = std::make_shared<NetworkConsensusOp>(std::move(prox_f), dim, gamma,
                                                 std::move(f_values));
  ProblemInstance inst;
  inst.name = "network";
  inst.full_op = op;
  inst.coord = std::make_shared<NetworkProcess>(op);
  inst.z0 = BlockVector(std::make_shared<const BlockPartition>(
      op->partition().sizes()));
  inst.solution_dim = dim;
  inst.extract_solution = [m](const BlockVector& z) { return to_vec(z.block(m)); };
  inst.objective = [fv](std::span<const double> y) {
    double v = 0.0;
    for (const auto& f : fv) v += f(y);
    return v;
  };
  return inst;
}

// ---- l1 logistic regression ----

ProblemInstance build_logistic_l1(const SparseMatrix& a,
                                  std::span<const double> labels, double lambda,
                                  std::size_t block_size, double gamma) {
  const std::size_t p = a.rows(), n = a.cols();
  if (labels.size() != p) throw DimensionError("logistic: label count");
  for (double l : labels)
    if (l != 1.0 && l != -1.0)
      throw ConfigError("logistic: labels must be +-1");
  const double invp = 1.0 / static_cast<double>(p);
  auto lab = std::make_shared<std::vector<double>>(to_vec(labels));

  auto dphi = [lab, invp](std::size_t j, double u) {
    const double b = (*lab)[j];
    return invp * -b / (1.0 + std::exp(b * u));
  };
  auto phi = [lab, invp](std::size_t j, double u) {
    const double b = (*lab)[j];
    // log1p(exp(-bu)) computed stably
    const double t = -b * u;
    return invp * (t > 30.0 ? t : std::log1p(std::exp(t)));
  };
  const double norm = linalg::spectral_norm_power(
      [&](std::span<const double> x, std::span<double> y) { a.mul(x, y); },
      [&](std::span<const double> x, std::span<double> y) { a.mul_t(x, y); },
      p, n);
  const double beta = 0.25 * invp * norm * norm;
  auto f = make_scalar_affine_smooth_sparse(a, std::vector<double>(p, 0.0),
                                            dphi, beta, phi);
  if (gamma <= 0.0) gamma = 1.0 / std::max(beta, 1e-12);

  auto part = std::make_shared<const BlockPartition>(
      BlockPartition::chunked(n, std::max<std::size_t>(block_size, 1)));
  std::vector<ProxFn> prox(part->num_blocks(), make_prox_l1(lambda));
  auto fc = f;
  auto obj = [fc, lambda](std::span<const double> x) {
    double v = *fc->value(x);
    for (double e : x) v += lambda * std::abs(e);
    return v;
  };
  auto op = make_fbs_operator(f, std::move(prox),
                              std::vector<double>{gamma}, part, obj);
  ProblemInstance inst;
  inst.name = "logistic-l1";
  inst.full_op = op;
  inst.coord = make_operator_process(op);
  inst.z0 = BlockVector(part);
  inst.solution_dim = n;
  inst.extract_solution = [](const BlockVector& z) { return to_vec(z.all()); };
  inst.objective = obj;
  return inst;
}

ProblemInstance build_logistic_l1(const SparseDataset& data, double lambda,
                                  std::size_t block_size, double gamma) {
  return build_logistic_l1(data.to_sparse(), data.labels, lambda, block_size,
                           gamma);
}

DenseMatrix gaussian_kernel(const DenseMatrix& samples, double sigma) {
  const std::size_t m = samples.rows();
  DenseMatrix k(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < samples.cols(); ++c) {
        const double d = samples.at(i, c) - samples.at(j, c);
        d2 += d * d;
      }
      const double v = std::exp(-d2 / (2.0 * sigma * sigma));
      k.at(i, j) = v;
      k.at(j, i) = v;
    }
  return k;
}

// ---- synthetic generation ----

SparseDataset gen_least_squares_data(std::size_t p, std::size_t m,
                                     std::uint64_t seed) {
  Rng rng(seed);
  SparseDataset d;
  d.rows = p;
  d.cols = m;
  d.labels.resize(p);
  for (std::size_t r = 0; r < p; ++r) {
    d.labels[r] = rng.gaussian();
    for (std::size_t c = 0; c < m; ++c)
      d.entries.push_back({r, c, rng.gaussian()});
  }
  return d;
}

SparseDataset gen_logistic_data(std::size_t p, std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  // sparse ground truth, labels from a noisy linear score
  std::vector<double> xt(m, 0.0);
  for (std::size_t c = 0; c < m; ++c)
    if (rng.uniform() < 0.25) xt[c] = rng.gaussian();
  SparseDataset d;
  d.rows = p;
  d.cols = m;
  d.labels.resize(p);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  for (std::size_t r = 0; r < p; ++r) {
    double score = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      const double v = rng.gaussian() * scale;
      d.entries.push_back({r, c, v});
      score += v * xt[c];
    }
    score += 0.1 * rng.gaussian();
    d.labels[r] = score >= 0.0 ? 1.0 : -1.0;
  }
  return d;
}

Image gen_piecewise_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  Image img;
  img.width = w;
  img.height = h;
  img.maxval = 255;
  img.pixels.assign(h * w, 64.0);
  // a handful of constant rectangles
  const std::size_t shapes = 4 + rng.below(3);
  for (std::size_t s = 0; s < shapes; ++s) {
    const std::size_t r0 = rng.below(h), c0 = rng.below(w);
    const std::size_t rh = 1 + rng.below(std::max<std::size_t>(h / 2, 1));
    const std::size_t cw = 1 + rng.below(std::max<std::size_t>(w / 2, 1));
    const double val = 32.0 + 200.0 * rng.uniform();
    for (std::size_t r = r0; r < std::min(h, r0 + rh); ++r)
      for (std::size_t c = c0; c < std::min(w, c0 + cw); ++c)
        img.at(r, c) = val;
  }
  return img;
}

DenseMatrix gen_portfolio_data(std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  // expected return rates 3*rand - 1; risk = sample covariance + 0.01 I
  std::vector<double> xi(m);
  for (double& v : xi) v = 3.0 * rng.uniform() - 1.0;
  const std::size_t t = 3 * m;
  DenseMatrix series(t, m);
  for (std::size_t r = 0; r < t; ++r)
    for (std::size_t c = 0; c < m; ++c)
      series.at(r, c) = 0.1 * rng.gaussian() + xi[c] / 3.0;
  std::vector<double> mean(m, 0.0);
  for (std::size_t r = 0; r < t; ++r)
    for (std::size_t c = 0; c < m; ++c) mean[c] += series.at(r, c);
  for (double& v : mean) v /= static_cast<double>(t);
  DenseMatrix out(m + 1, m);
  for (std::size_t c = 0; c < m; ++c) out.at(0, c) = xi[c];
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double cov = 0.0;
      for (std::size_t r = 0; r < t; ++r)
        cov += (series.at(r, i) - mean[i]) * (series.at(r, j) - mean[j]);
      cov /= static_cast<double>(t - 1);
      out.at(1 + i, j) = cov + (i == j ? 0.01 : 0.0);
    }
  return out;
}

DenseMatrix gen_nonneg_lowrank(std::size_t p, std::size_t n, std::size_t r,
                               std::uint64_t seed) {
  Rng rng(seed);
  DenseMatrix w(p, r), h(n, r), a(p, n);
  for (std::size_t u = 0; u < p; ++u)
    for (std::size_t i = 0; i < r; ++i) w.at(u, i) = std::abs(rng.gaussian());
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t i = 0; i < r; ++i) h.at(v, i) = std::abs(rng.gaussian());
  for (std::size_t u = 0; u < p; ++u)
    for (std::size_t v = 0; v < n; ++v) {
      double s = 0.0;
      for (std::size_t i = 0; i < r; ++i) s += w.at(u, i) * h.at(v, i);
      a.at(u, v) = s + 0.01 * std::abs(rng.gaussian());
    }
  return a;
}

ProblemInstance gen_synthetic(const std::string& kind, const SyntheticDims& dims,
                              std::uint64_t seed) {
  if (kind == "least-squares") {
    const std::size_t p = dims.rows ? dims.rows : 100;
    const std::size_t m = dims.cols ? dims.cols : 100;
    auto data = gen_least_squares_data(p, m, seed);
    DenseMatrix a = data.to_dense();
    auto coord = make_coordinate_least_squares(a, data.labels);
    const double norm = linalg::spectral_norm(a);
    auto full = make_linear_gradient(a, data.labels, 2.0 / (norm * norm),
                                     LinearGradientRegime::kMaintainTx);
    ProblemInstance inst;
    inst.name = "least-squares";
    inst.full_op = full;
    inst.coord = make_operator_process(coord);
    inst.z0 = BlockVector(std::make_shared<const BlockPartition>(
        coord->partition().sizes()));
    inst.solution_dim = m;
    inst.extract_solution = [](const BlockVector& z) { return to_vec(z.all()); };
    auto acopy = std::make_shared<DenseMatrix>(a);
    auto bcopy = std::make_shared<std::vector<double>>(data.labels);
    inst.objective = [acopy, bcopy](std::span<const double> x) {
      std::vector<double> r(acopy->rows());
      acopy->mul(x, r);
      kern::axpy(-1.0, *bcopy, r);
      return 0.5 * kern::nrm2sq(r);
    };
    return inst;
  }
  if (kind == "logistic") {
    const std::size_t p = dims.rows ? dims.rows : 40;
    const std::size_t m = dims.cols ? dims.cols : 60;
    auto data = gen_logistic_data(p, m, seed);
    return build_logistic_l1(data, 1e-4, 50);
  }
  if (kind == "portfolio") {
    const std::size_t m = dims.cols ? dims.cols : 50;
    DenseMatrix data = gen_portfolio_data(m, seed);
    std::vector<double> xi(data.row(0).begin(), data.row(0).end());
    DenseMatrix q(m, m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) q.at(i, j) = data.at(1 + i, j);
    return build_portfolio(q, xi, 0.02);
  }
  if (kind == "tv-image") {
    const std::size_t h = dims.rows ? dims.rows : 32;
    const std::size_t w = dims.cols ? dims.cols : 32;
    Image img = gen_piecewise_image(h, w, seed);
    // 50% random pixel sampling
    Rng rng(seed ^ 0xaaaaULL);
    std::vector<SparseMatrix::Triplet> trip;
    std::vector<double> b;
    for (std::size_t q = 0; q < h * w; ++q)
      if (rng.uniform() < 0.5) {
        trip.push_back({b.size(), q, 1.0});
        b.push_back(img.pixels[q] / 255.0 + 0.01 * rng.gaussian());
      }
    if (b.empty()) {
      trip.push_back({0, 0, 1.0});
      b.push_back(img.pixels[0] / 255.0);
    }
    TvProblem tv;
    tv.grid_h = h;
    tv.grid_w = w;
    tv.sampling = SparseMatrix(b.size(), h * w, std::move(trip));
    tv.b = std::move(b);
    tv.lambda = 0.05;
    return build_tv_reconstruction(tv);
  }
  if (kind == "nmf") {
    const std::size_t p = dims.rows ? dims.rows : 20;
    const std::size_t n = dims.cols ? dims.cols : 16;
    const std::size_t r = dims.rank ? dims.rank : 3;
    DenseMatrix a = gen_nonneg_lowrank(p, n, r, seed);
    return build_nmf(a, r, NmfVariant::kUnitColumns, seed ^ 0x77ULL);
  }
  throw ConfigError("unknown synthetic kind: " + kind);
}

}  // namespace cfsplit
