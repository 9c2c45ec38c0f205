#include "cfsplit/prox.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "cfsplit/errors.hpp"
#include "cfsplit/kernels.hpp"

namespace cfsplit {

ProxFn prox_identity() {
  return [](std::span<const double> x, double, std::span<double> out) {
    kern::copy(x, out);
  };
}

void proj_box(std::span<const double> x, std::span<const double> lo,
              std::span<const double> hi, std::span<double> out) {
  if (x.size() != lo.size() || x.size() != hi.size())
    throw DimensionError("proj_box: bound sizes");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (lo[i] > hi[i]) throw ConfigError("proj_box: lo > hi");
    out[i] = std::min(hi[i], std::max(lo[i], x[i]));
  }
  ops::add(2 * x.size());
}

ProxFn make_proj_box(std::vector<double> lo, std::vector<double> hi) {
  return [lo = std::move(lo), hi = std::move(hi)](std::span<const double> x,
                                                  double, std::span<double> out) {
    proj_box(x, lo, hi, out);
  };
}

ProxFn make_proj_interval(double lo, double hi) {
  if (lo > hi) throw ConfigError("proj_interval: lo > hi");
  return [lo, hi](std::span<const double> x, double, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i)
      out[i] = std::min(hi, std::max(lo, x[i]));
    ops::add(2 * x.size());
  };
}

ProxFn make_proj_nonneg() {
  return [](std::span<const double> x, double, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::max(0.0, x[i]);
    ops::add(x.size());
  };
}

void prox_l1(std::span<const double> x, double t, std::span<double> out) {
  if (t <= 0.0) throw ConfigError("prox_l1: t must be > 0");
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double m = std::abs(x[i]) - t;
    out[i] = m > 0.0 ? (x[i] > 0.0 ? m : -m) : 0.0;
  }
  ops::add(3 * x.size());
}

ProxFn make_prox_l1(double weight) {
  return [weight](std::span<const double> x, double t, std::span<double> out) {
    prox_l1(x, t * weight, out);
  };
}

void proj_l2_ball(std::span<const double> x, double r, std::span<double> out) {
  if (r < 0.0) throw ConfigError("proj_l2_ball: negative radius");
  const double n = kern::nrm2(x);
  if (n <= r) {
    kern::copy(x, out);
  } else {
    const double s = r / n;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = s * x[i];
    ops::add(x.size() + 1);
  }
}

ProxFn make_proj_l2_ball(double r) {
  return [r](std::span<const double> x, double, std::span<double> out) {
    proj_l2_ball(x, r, out);
  };
}

void prox_l2_norm(std::span<const double> x, double t, std::span<double> out) {
  if (t < 0.0) throw ConfigError("prox_l2_norm: t must be >= 0");
  const double n = kern::nrm2(x);
  if (n <= t) {
    kern::fill(out, 0.0);
  } else {
    const double s = 1.0 - t / n;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = s * x[i];
    ops::add(x.size() + 2);
  }
}

ProxFn make_prox_l2_norm(double weight) {
  return [weight](std::span<const double> x, double t, std::span<double> out) {
    prox_l2_norm(x, t * weight, out);
  };
}

ProxFn make_prox_quadratic(double a, double b) {
  // prox_{t q}(x) with q(u) = 0.5*a*u^2 + b*u: (x - t*b) / (1 + t*a)
  return [a, b](std::span<const double> x, double t, std::span<double> out) {
    const double denom = 1.0 + t * a;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - t * b) / denom;
    ops::add(3 * x.size());
  };
}

void prox_separable_sum(const BlockVector& x, std::span<const ProxFn> handles,
                        double t, BlockVector& out) {
  if (handles.size() != x.num_blocks())
    throw ConfigError("prox_separable_sum: one handle per block required");
  for (std::size_t i = 0; i < x.num_blocks(); ++i) {
    if (!handles[i]) throw ConfigError("prox_separable_sum: missing handle");
    handles[i](x.block(i), t, out.block(i));
  }
}

void prox_conjugate(const ProxFn& prox_h, std::span<const double> x,
                    double gamma, std::span<double> out) {
  if (gamma <= 0.0) throw ConfigError("prox_conjugate: gamma must be > 0");
  std::vector<double> scaled(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) scaled[i] = x[i] / gamma;
  prox_h(scaled, 1.0 / gamma, out);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - gamma * out[i];
  ops::add(3 * x.size());
}

ProxFn make_prox_conjugate(ProxFn prox_h) {
  return [prox_h = std::move(prox_h)](std::span<const double> x, double gamma,
                                      std::span<double> out) {
    prox_conjugate(prox_h, x, gamma, out);
  };
}

void prox_tv_dual(std::span<const double> s, std::span<const double> t,
                  double gamma, double lambda, std::span<const double> b,
                  std::span<double> s_out, std::span<double> t_out) {
  if (gamma <= 0.0) throw ConfigError("prox_tv_dual: gamma must be > 0");
  if (lambda < 0.0) throw ConfigError("prox_tv_dual: lambda must be >= 0");
  if (t.size() != b.size()) throw DimensionError("prox_tv_dual: b size");
  for (std::size_t i = 0; i < s.size(); ++i)
    s_out[i] = std::min(lambda, std::max(-lambda, s[i]));
  for (std::size_t i = 0; i < t.size(); ++i)
    t_out[i] = (t[i] - gamma * b[i]) / (1.0 + gamma);
  ops::add(2 * s.size() + 3 * t.size());
}

// ---- second-order cone ----

namespace {
SocState soc_classify(double v1, double tail_sq) {
  SocState st;
  st.tail_sq = std::max(0.0, tail_sq);
  st.rho1 = std::sqrt(st.tail_sq);
  st.rho2 = 0.5 * (v1 + st.rho1);
  // closed branches in paper case order: polar strict, interior closed
  if (v1 < -st.rho1) {
    st.region = SocRegion::kPolar;
    st.xi1 = 0.0;
    st.xi2 = 0.0;
  } else if (v1 >= st.rho1) {
    st.region = SocRegion::kInterior;
    st.xi1 = 1.0;
    st.xi2 = 1.0;
  } else {
    st.region = SocRegion::kBoundary;  // here rho1 > 0
    st.xi1 = st.rho2;
    st.xi2 = st.rho2 / st.rho1;
  }
  ops::add(8);
  return st;
}
}  // namespace

SocState soc_state_from(std::span<const double> v) {
  if (v.empty()) throw DimensionError("soc: empty cone");
  double tail = 0.0;
  for (std::size_t i = 1; i < v.size(); ++i) tail += v[i] * v[i];
  ops::add(2 * (v.size() - 1));
  return soc_classify(v[0], tail);
}

void soc_apply(const SocState& st, std::span<const double> v,
               std::span<double> out) {
  assert(v.size() == out.size());
  switch (st.region) {
    case SocRegion::kPolar:
      kern::fill(out, 0.0);
      break;
    case SocRegion::kInterior:
      kern::copy(v, out);
      break;
    case SocRegion::kBoundary:
      out[0] = st.rho2;
      for (std::size_t i = 1; i < v.size(); ++i) out[i] = st.xi2 * v[i];
      ops::add(v.size());
      break;
  }
}

SocState soc_project(std::span<const double> v, std::span<double> out) {
  SocState st = soc_state_from(v);
  soc_apply(st, v, out);
  return st;
}

SocState soc_state_refresh(const SocState& st, std::span<const double> v,
                           std::size_t i, double nu) {
  if (i >= v.size()) throw DimensionError("soc_state_refresh: index");
  if (i == 0) return soc_classify(nu, st.tail_sq);
  const double vi = v[i];
  const double tail = st.tail_sq + nu * nu - vi * vi;
  ops::add(4);
  return soc_classify(v[0], tail);
}

// ---- halfspace cap ----

HalfspaceCap::HalfspaceCap(std::vector<double> a1, double b1,
                           std::vector<double> a2, double b2)
    : a1_(std::move(a1)), a2_(std::move(a2)), b1_(b1), b2_(b2) {
  if (a1_.size() != a2_.size() || a1_.empty())
    throw UnsupportedGeometryError("halfspace cap: dimension mismatch");
  const double n1 = kern::nrm2(a1_), n2 = kern::nrm2(a2_);
  if (std::abs(n1 - 1.0) > 1e-9 || std::abs(n2 - 1.0) > 1e-9)
    throw UnsupportedGeometryError("halfspace cap: a1, a2 must be unit vectors");
  rho_ = kern::dot(a1_, a2_);
  if (rho_ <= 0.0)
    throw UnsupportedGeometryError("halfspace cap: requires a1'a2 > 0");
  if (1.0 - rho_ * rho_ <= 1e-12)
    throw UnsupportedGeometryError("halfspace cap: a1, a2 nearly parallel");
  const double denom = 1.0 - rho_ * rho_;
  a1t_.resize(a1_.size());
  a2t_.resize(a1_.size());
  for (std::size_t i = 0; i < a1_.size(); ++i) {
    a1t_[i] = (a1_[i] - rho_ * a2_[i]) / denom;
    a2t_[i] = (a2_[i] - rho_ * a1_[i]) / denom;
  }
}

double HalfspaceCap::w1(std::span<const double> x) const {
  return kern::dot(a1_, x) - b1_;
}
double HalfspaceCap::w2(std::span<const double> x) const {
  return kern::dot(a2_, x) - b2_;
}

int HalfspaceCap::region(double w1, double w2) const {
  // w3 = a3'x - b3 = w2 - w1/rho, w4 = a4'x - b4 = w1 - w2/rho
  const double w3 = w2 - w1 / rho_;
  const double w4 = w1 - w2 / rho_;
  ops::add(4);
  if (w1 <= 0.0 && w2 >= 0.0) return 1;
  if (w2 <= 0.0 && w3 >= 0.0) return 2;
  if (w3 <= 0.0 && w4 >= 0.0) return 3;
  if (w4 <= 0.0 && w1 >= 0.0) return 4;
  throw UnsupportedGeometryError("halfspace cap: region dispatch failed");
}

void HalfspaceCap::project(std::span<const double> x, double w1, double w2,
                           std::span<double> out) const {
  switch (region(w1, w2)) {
    case 1:
      kern::copy(x, out);
      break;
    case 2:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - w2 * a2_[i];
      ops::add(2 * x.size());
      break;
    case 3:
      for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = x[i] - w1 * a1t_[i] - w2 * a2t_[i];
      ops::add(4 * x.size());
      break;
    case 4:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - w1 * a1_[i];
      ops::add(2 * x.size());
      break;
  }
}

void HalfspaceCap::project(std::span<const double> x, std::span<double> out) const {
  project(x, w1(x), w2(x), out);
}

// ---- gradient kernels ----

void SquaredHingeGrad::init_cache(std::span<const double> x,
                                  MaintainedCache& c) const {
  c.create("ax", 1)[0] = kern::dot(a, x);
}

void SquaredHingeGrad::grad_block(std::size_t i0, std::size_t w,
                                  const MaintainedCache& c,
                                  std::span<double> out) const {
  const double u = cached_inner(c);
  const double factor = -beta * std::max(0.0, 1.0 - beta * u);
  ops::add(3);
  for (std::size_t j = 0; j < w; ++j) out[j] = factor * a[i0 + j];
  ops::add(w);
}

void SquaredHingeGrad::grad_full(const MaintainedCache& c,
                                 std::span<double> out) const {
  grad_block(0, a.size(), c, out);
}

void SquaredHingeGrad::refresh(std::size_t i, double old_xi, double new_xi,
                               MaintainedCache& c) const {
  c.scalar("ax") += a[i] * (new_xi - old_xi);
  ops::add(3);
}

void ScalarAffineGrad::init_cache(std::span<const double> x,
                                  MaintainedCache& c) const {
  auto& u = c.create("affine", a.rows());
  a.mul(x, u);
  kern::axpy(1.0, b, u);
}

void ScalarAffineGrad::grad_block(std::size_t i0, std::size_t w,
                                  const MaintainedCache& c,
                                  std::span<double> out) const {
  auto u = c.entry("affine");
  std::vector<double> phi(u.size());
  for (std::size_t j = 0; j < u.size(); ++j) phi[j] = dphi(j, u[j]);
  ops::add(2 * u.size());
  a.col_block_t_times(i0, w, phi, out);
}

void ScalarAffineGrad::grad_full(const MaintainedCache& c,
                                 std::span<double> out) const {
  auto u = c.entry("affine");
  std::vector<double> phi(u.size());
  for (std::size_t j = 0; j < u.size(); ++j) phi[j] = dphi(j, u[j]);
  ops::add(2 * u.size());
  a.mul_t(phi, out);
}

void ScalarAffineGrad::refresh_block(std::size_t i0,
                                     std::span<const double> old_block,
                                     std::span<const double> new_block,
                                     MaintainedCache& c) const {
  auto u = c.entry("affine");
  std::vector<double> delta(old_block.size());
  for (std::size_t j = 0; j < delta.size(); ++j)
    delta[j] = new_block[j] - old_block[j];
  ops::add(delta.size());
  a.add_col_block_times(1.0, i0, delta.size(), delta, u);
}

}  // namespace cfsplit
