#ifndef CFSPLIT_PROX_HPP_
#define CFSPLIT_PROX_HPP_

#include <functional>
#include <span>
#include <vector>

#include "cfsplit/block.hpp"
#include "cfsplit/cache.hpp"
#include "cfsplit/matrix.hpp"

namespace cfsplit {

// prox handle: out = prox_{t f}(in)
using ProxFn =
    std::function<void(std::span<const double>, double, std::span<double>)>;

ProxFn prox_identity();

// ---- elementwise projections / proximal maps ----

// clamp to [lo, hi]
void proj_box(std::span<const double> x, std::span<const double> lo,
              std::span<const double> hi, std::span<double> out);
ProxFn make_proj_box(std::vector<double> lo, std::vector<double> hi);
ProxFn make_proj_interval(double lo, double hi);  // same bounds every entry
ProxFn make_proj_nonneg();

// soft threshold at t
void prox_l1(std::span<const double> x, double t, std::span<double> out);
ProxFn make_prox_l1(double weight = 1.0);

// Euclidean ball of radius r (||x|| = r returns x unchanged)
void proj_l2_ball(std::span<const double> x, double r, std::span<double> out);
ProxFn make_proj_l2_ball(double r);

// prox of t * lambda * ||.||_2 (block soft threshold, group lasso kernel)
void prox_l2_norm(std::span<const double> x, double t, std::span<double> out);
ProxFn make_prox_l2_norm(double weight = 1.0);

// prox of (t/2)||. - c||^2-type quadratics: prox_{t*q}(x), q(u)=0.5*a*u^2+b*u
ProxFn make_prox_quadratic(double a, double b);

// blockwise application of per-block handles
void prox_separable_sum(const BlockVector& x, std::span<const ProxFn> handles,
                        double t, BlockVector& out);

// Moreau identity: prox_{γ h*}(x) = x - γ prox_{h/γ}(x/γ)
void prox_conjugate(const ProxFn& prox_h, std::span<const double> x,
                    double gamma, std::span<double> out);
ProxFn make_prox_conjugate(ProxFn prox_h);

// prox of the conjugate of h(p, q) = λ‖p‖₁ + ½‖q − b‖² at dual pair (s, t):
// s' = clip of s to [−λ, λ] elementwise, t' = (t − γb)/(1 + γ)
void prox_tv_dual(std::span<const double> s, std::span<const double> t,
                  double gamma, double lambda, std::span<const double> b,
                  std::span<double> s_out, std::span<double> t_out);

// ---- second-order cone ----

// Projection branch of the v1-vs-±rho1 trichotomy.
enum class SocRegion : std::uint8_t {
  kPolar,    // v1 < -rho1: projection is 0
  kInterior, // v1 >= rho1: projection is v
  kBoundary, // otherwise: ( rho2, (rho2/rho1) * tail )
};

// Scalars maintained alongside a cone block so the projection refresh after a
// single-coordinate change is O(1).  tail_sq is the maintained primitive;
// rho1 is recomputed from it with a square root per refresh.
struct SocState {
  double tail_sq = 0.0;  // ||(v2..vn)||^2
  double rho1 = 0.0;     // sqrt(tail_sq)
  double rho2 = 0.0;     // (v1 + rho1)/2
  double xi1 = 0.0, xi2 = 0.0;
  SocRegion region = SocRegion::kInterior;
};

SocState soc_state_from(std::span<const double> v);
// projection using a valid state (no norm recomputation)
void soc_apply(const SocState& st, std::span<const double> v,
               std::span<double> out);
// u = proj_Q(v) plus the populated state
SocState soc_project(std::span<const double> v, std::span<double> out);
// state for v + (nu - v_i) e_i; O(1), independent of the cone dimension
SocState soc_state_refresh(const SocState& st, std::span<const double> v,
                           std::size_t i, double nu);

// ---- two-halfspace cap {x : a1'x <= b1, a2'x >= b2} (portfolio feasible set) ----

// Requires unit a1, a2 with 0 < a1'a2 < 1 (the paper's normalization); other
// geometries are rejected rather than guessed.
class HalfspaceCap {
 public:
  HalfspaceCap(std::vector<double> a1, double b1, std::vector<double> a2,
               double b2);

  std::size_t dim() const { return a1_.size(); }
  double w1(std::span<const double> x) const;
  double w2(std::span<const double> x) const;

  // region P1..P4 from (w1, w2) in O(1); ties resolve in paper case order
  int region(double w1, double w2) const;
  // projection given maintained (w1, w2)
  void project(std::span<const double> x, double w1, double w2,
               std::span<double> out) const;
  void project(std::span<const double> x, std::span<double> out) const;

  std::span<const double> a1() const { return a1_; }
  std::span<const double> a2() const { return a2_; }
  std::span<const double> a1_tilde() const { return a1t_; }
  std::span<const double> a2_tilde() const { return a2t_; }
  double b1() const { return b1_; }
  double b2() const { return b2_; }
  double inner() const { return rho_; }  // a1'a2

 private:
  std::vector<double> a1_, a2_, a1t_, a2t_;
  double b1_, b2_, rho_;
};

// ---- gradient kernels with maintained affine images ----

// f(x) = 0.5 * max(0, 1 - beta * a'x)^2; gradient component in O(1) given the
// maintained scalar a'x.
struct SquaredHingeGrad {
  std::vector<double> a;
  double beta = 1.0;

  double cached_inner(const MaintainedCache& c) const { return c.scalar("ax"); }
  void init_cache(std::span<const double> x, MaintainedCache& c) const;
  // gradient entries [i0, i0+w)
  void grad_block(std::size_t i0, std::size_t w, const MaintainedCache& c,
                  std::span<double> out) const;
  void grad_full(const MaintainedCache& c, std::span<double> out) const;
  void refresh(std::size_t i, double old_xi, double new_xi,
               MaintainedCache& c) const;
};

// f(x) = sum_j phi_j((Ax + b)_j) with O(1) phi'_j; gradient block in O(p)
// given the maintained vector u = Ax + b.
struct ScalarAffineGrad {
  DenseMatrix a;
  std::vector<double> b;
  std::function<double(std::size_t, double)> dphi;  // phi'_j(u)

  void init_cache(std::span<const double> x, MaintainedCache& c) const;
  void grad_block(std::size_t i0, std::size_t w, const MaintainedCache& c,
                  std::span<double> out) const;
  void grad_full(const MaintainedCache& c, std::span<double> out) const;
  void refresh_block(std::size_t i0, std::span<const double> old_block,
                     std::span<const double> new_block, MaintainedCache& c) const;
};

}  // namespace cfsplit

#endif  // CFSPLIT_PROX_HPP_
