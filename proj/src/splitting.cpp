#include "cfsplit/splitting.hpp"

#include <cmath>

#include "cfsplit/errors.hpp"
#include "cfsplit/kernels.hpp"

namespace cfsplit {

void SplittingConfig::validate() const {
  if (gamma <= 0.0) throw ConfigError("splitting: gamma must be > 0");
  if (lambda < 0.0 || lambda > 1.0) throw ConfigError("splitting: lambda in [0,1]");
  if (eta <= 0.0 || eta > 1.0) throw ConfigError("splitting: eta in (0,1]");
  if (beta > 0.0 && gamma >= 2.0 * beta)
    throw ConfigError("splitting: gamma must lie in (0, 2 beta)");
}

double default_gamma(const SplittingConfig& cfg) {
  return cfg.beta > 0.0 ? cfg.beta : cfg.gamma;
}

void threeop_step(const ProxFn& j_a, const ProxFn& j_b, const ForwardFn& c,
                  const SplittingConfig& cfg, std::span<const double> x,
                  std::span<double> out) {
  cfg.validate();
  const double g = cfg.gamma;
  const std::size_t n = x.size();
  std::vector<double> u(n), cu(n), w(n), ja(n);
  j_b(x, g, u);
  c(u, cu);
  for (std::size_t i = 0; i < n; ++i) w[i] = 2.0 * u[i] - x[i] - g * cu[i];
  ops::add(4 * n);
  j_a(w, g, ja);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - u[i] + ja[i];
  ops::add(2 * n);
}

void threeop_solution(const ProxFn& j_b, const SplittingConfig& cfg,
                      std::span<const double> x, std::span<double> out) {
  j_b(x, cfg.gamma, out);
}

void fbs_step(const ProxFn& j_a, const ForwardFn& c, double gamma,
              std::span<const double> x, std::span<double> out) {
  if (gamma <= 0.0) throw ConfigError("fbs: gamma must be > 0");
  const std::size_t n = x.size();
  std::vector<double> cx(n), w(n);
  c(x, cx);
  for (std::size_t i = 0; i < n; ++i) w[i] = x[i] - gamma * cx[i];
  ops::add(2 * n);
  j_a(w, gamma, out);
}

void bfs_step(const ProxFn& j_b, const ForwardFn& c, double gamma,
              std::span<const double> x, std::span<double> out) {
  if (gamma <= 0.0) throw ConfigError("bfs: gamma must be > 0");
  const std::size_t n = x.size();
  std::vector<double> u(n), cu(n);
  j_b(x, gamma, u);
  c(u, cu);
  for (std::size_t i = 0; i < n; ++i) out[i] = u[i] - gamma * cu[i];
  ops::add(2 * n);
}

void drs_step(const ProxFn& j_a, const ProxFn& j_b, double gamma,
              std::span<const double> x, std::span<double> out) {
  if (gamma <= 0.0) throw ConfigError("drs: gamma must be > 0");
  const std::size_t n = x.size();
  std::vector<double> u(n), w(n), ja(n);
  j_b(x, gamma, u);
  for (std::size_t i = 0; i < n; ++i) w[i] = 2.0 * u[i] - x[i];
  ops::add(2 * n);
  j_a(w, gamma, ja);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - u[i] + ja[i];
  ops::add(2 * n);
}

void drs_step_reflection(const ProxFn& j_a, const ProxFn& j_b, double gamma,
                         std::span<const double> x, std::span<double> out) {
  const std::size_t n = x.size();
  std::vector<double> u(n), rb(n), ra(n);
  j_b(x, gamma, u);
  for (std::size_t i = 0; i < n; ++i) rb[i] = 2.0 * u[i] - x[i];
  j_a(rb, gamma, ra);
  for (std::size_t i = 0; i < n; ++i) out[i] = 0.5 * (x[i] + 2.0 * ra[i] - rb[i]);
  ops::add(6 * n);
}

void rprs_step(const ProxFn& j_a, const ProxFn& j_b, double gamma,
               double lambda, std::span<const double> x, std::span<double> out) {
  if (gamma <= 0.0) throw ConfigError("rprs: gamma must be > 0");
  if (lambda < 0.0 || lambda > 1.0) throw ConfigError("rprs: lambda in [0,1]");
  const std::size_t n = x.size();
  std::vector<double> u(n), rb(n), ja(n);
  j_b(x, gamma, u);
  for (std::size_t i = 0; i < n; ++i) rb[i] = 2.0 * u[i] - x[i];
  j_a(rb, gamma, ja);
  for (std::size_t i = 0; i < n; ++i) {
    const double ra = 2.0 * ja[i] - rb[i];
    out[i] = (1.0 - lambda) * x[i] + lambda * ra;
  }
  ops::add(7 * n);
}

void fdrs_step(const ProxFn& j_a, const ForwardFn& proj_v, const ForwardFn& c,
               double gamma, std::span<const double> x, std::span<double> out) {
  if (gamma <= 0.0) throw ConfigError("fdrs: gamma must be > 0");
  const std::size_t n = x.size();
  std::vector<double> pv(n), cpv(n), pcp(n), w(n), ja(n);
  proj_v(x, pv);
  c(pv, cpv);
  proj_v(cpv, pcp);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 2.0 * pv[i] - x[i] - gamma * pcp[i];
  ops::add(4 * n);
  j_a(w, gamma, ja);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - pv[i] + ja[i];
  ops::add(2 * n);
}

void fbfs_step(const ProxFn& j_a, const ForwardFn& c, double gamma,
               std::span<const double> x, std::span<double> out) {
  if (gamma <= 0.0) throw ConfigError("fbfs: gamma must be > 0");
  const std::size_t n = x.size();
  std::vector<double> cx(n), w(n), u(n), cu(n);
  c(x, cx);
  for (std::size_t i = 0; i < n; ++i) w[i] = x[i] - gamma * cx[i];
  j_a(w, gamma, u);
  c(u, cu);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = gamma * cx[i] + u[i] - gamma * cu[i];
  ops::add(6 * n);
}

void prox_grad_step(const ProxFn& prox_g, const ForwardFn& grad_f, double gamma,
                    std::span<const double> x, std::span<double> out) {
  fbs_step(prox_g, grad_f, gamma, x, out);
}

void admm_step(const ProxFn& prox_f, const ProxFn& prox_g, double gamma,
               AdmmState& state) {
  if (gamma <= 0.0) throw ConfigError("admm: gamma must be > 0");
  const std::size_t n = state.x.size();
  if (state.y.size() != n || state.s.size() != n)
    throw DimensionError("admm: state components disagree");
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = state.y[i] - gamma * state.s[i];
  prox_f(w, gamma, state.x);
  for (std::size_t i = 0; i < n; ++i) w[i] = state.x[i] + gamma * state.s[i];
  prox_g(w, gamma, state.y);
  for (std::size_t i = 0; i < n; ++i)
    state.s[i] += (state.x[i] - state.y[i]) / gamma;
  ops::add(7 * n);
}

double backtrack_gamma(
    const std::function<void(double, std::span<const double>, std::span<double>)>& step,
    const std::function<double(std::span<const double>)>& residual,
    std::span<const double> x0, double gamma0, int max_halvings) {
  double g = gamma0;
  const double r0 = residual(x0);
  std::vector<double> x1(x0.size());
  for (int k = 0; k < max_halvings; ++k) {
    step(g, x0, x1);
    if (residual(x1) <= r0) return g;
    g *= 0.5;
  }
  return g;
}

}  // namespace cfsplit
