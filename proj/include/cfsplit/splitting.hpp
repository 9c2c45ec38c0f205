#ifndef CFSPLIT_SPLITTING_HPP_
#define CFSPLIT_SPLITTING_HPP_

#include <functional>
#include <span>
#include <vector>

#include "cfsplit/fixed_point.hpp"
#include "cfsplit/prox.hpp"

// Full-update operator splitting schemes for 0 in A x + B x + C x.
// Resolvents are supplied as handles (prox or linear-solve closures); nothing
// is inverted implicitly.  Where B != 0 the problem solution is J_gammaB(x*),
// not the fixed point x* itself.

namespace cfsplit {

// forward handle: out = C(in)
using ForwardFn = std::function<void(std::span<const double>, std::span<double>)>;

struct SplittingConfig {
  double gamma = 1.0;   // resolvent step, > 0
  double lambda = 0.5;  // RPRS relaxation in [0,1]
  double eta = 1.0;     // KM damping in (0,1]
  double beta = 0.0;    // cocoercivity constant of C when known (0 = unknown)

  void validate() const;
};

// gamma = beta when the cocoercivity constant is known (midpoint of (0,2beta))
double default_gamma(const SplittingConfig& cfg);

// x' = x - J_gB(x) + J_gA(2 J_gB(x) - x - g C(J_gB(x)))
void threeop_step(const ProxFn& j_a, const ProxFn& j_b, const ForwardFn& c,
                  const SplittingConfig& cfg, std::span<const double> x,
                  std::span<double> out);
// solution extractor for 3S/BFS/DRS-style schemes
void threeop_solution(const ProxFn& j_b, const SplittingConfig& cfg,
                      std::span<const double> x, std::span<double> out);

// x' = J_gA(x - g C x)
void fbs_step(const ProxFn& j_a, const ForwardFn& c, double gamma,
              std::span<const double> x, std::span<double> out);

// x' = (I - g C)(J_gB x)
void bfs_step(const ProxFn& j_b, const ForwardFn& c, double gamma,
              std::span<const double> x, std::span<double> out);

// x' = x - J_gB(x) + J_gA(2 J_gB(x) - x)
void drs_step(const ProxFn& j_a, const ProxFn& j_b, double gamma,
              std::span<const double> x, std::span<double> out);
// reflection form 0.5 (I + R_gA R_gB); equals drs_step up to rounding
void drs_step_reflection(const ProxFn& j_a, const ProxFn& j_b, double gamma,
                         std::span<const double> x, std::span<double> out);

// x' = (1 - lambda) x + lambda R_gA(R_gB(x))
void rprs_step(const ProxFn& j_a, const ProxFn& j_b, double gamma,
               double lambda, std::span<const double> x, std::span<double> out);

// x' = x - P_V x + J_gA(2 P_V x - x - g P_V C~ P_V x)
void fdrs_step(const ProxFn& j_a, const ForwardFn& proj_v, const ForwardFn& c,
               double gamma, std::span<const double> x, std::span<double> out);

// x' = g C x + (I - g C) J_gA((I - g C) x).
// Note: the sign of the leading forward term is + (Tseng's method); with a
// minus sign the operator's fixed points do not solve 0 in A x + C x unless
// C x* = 0, and the scheme loses its advantage over FBS on skew C.
void fbfs_step(const ProxFn& j_a, const ForwardFn& c, double gamma,
               std::span<const double> x, std::span<double> out);

// x' = prox_gg(x - g grad_f(x));  proj variant passes a projection handle
void prox_grad_step(const ProxFn& prox_g, const ForwardFn& grad_f, double gamma,
                    std::span<const double> x, std::span<double> out);

struct AdmmState {
  std::vector<double> x, y, s;
};

// x' = prox_gf(y - g s); y' = prox_gg(x' + g s); s' = s + (x' - y')/g
void admm_step(const ProxFn& prox_f, const ProxFn& prox_g, double gamma,
               AdmmState& state);

// Halve gamma until one step from x0 does not increase ||x - T x||; returns
// the accepted gamma.  Used when no cocoercivity constant is available.
double backtrack_gamma(
    const std::function<void(double, std::span<const double>, std::span<double>)>& step,
    const std::function<double(std::span<const double>)>& residual,
    std::span<const double> x0, double gamma0, int max_halvings = 30);

}  // namespace cfsplit

#endif  // CFSPLIT_SPLITTING_HPP_
