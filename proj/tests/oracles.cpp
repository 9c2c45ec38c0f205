#include "oracles.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "cfsplit/linalg.hpp"

namespace cfsplit::oracle {

std::vector<double> enumerative_qp(const DenseMatrix& p,
                                   std::span<const double> q,
                                   const DenseMatrix& g,
                                   std::span<const double> h) {
  const std::size_t n = q.size(), k = g.rows();
  if (k > 22) throw std::invalid_argument("enumerative_qp: too many constraints");
  const std::size_t subsets = std::size_t{1} << k;
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_y;

  for (std::size_t mask = 0; mask < subsets; ++mask) {
    std::vector<std::size_t> active;
    for (std::size_t c = 0; c < k; ++c)
      if (mask & (std::size_t{1} << c)) active.push_back(c);
    const std::size_t na = active.size();
    if (na > n) continue;
    // KKT: [P  G_A'; G_A  0] [y; mu] = [-q; h_A]
    DenseMatrix kkt(n + na, n + na);
    std::vector<double> rhs(n + na);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) kkt.at(r, c) = p.at(r, c);
      rhs[r] = -q[r];
    }
    for (std::size_t a = 0; a < na; ++a) {
      for (std::size_t c = 0; c < n; ++c) {
        kkt.at(n + a, c) = g.at(active[a], c);
        kkt.at(c, n + a) = g.at(active[a], c);
      }
      rhs[n + a] = h[active[a]];
    }
    std::vector<double> sol;
    try {
      sol = linalg::solve(kkt, rhs);
    } catch (const std::exception&) {
      continue;
    }
    bool ok = true;
    for (double v : sol)
      if (!std::isfinite(v)) ok = false;
    if (!ok) continue;
    // multipliers nonnegative, inactive constraints feasible
    for (std::size_t a = 0; a < na && ok; ++a)
      if (sol[n + a] < -1e-9) ok = false;
    for (std::size_t c = 0; c < k && ok; ++c) {
      double gy = 0.0;
      for (std::size_t j = 0; j < n; ++j) gy += g.at(c, j) * sol[j];
      if (gy > h[c] + 1e-9) ok = false;
    }
    if (!ok) continue;
    double val = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      double py = 0.0;
      for (std::size_t c = 0; c < n; ++c) py += p.at(r, c) * sol[c];
      val += 0.5 * sol[r] * py + q[r] * sol[r];
    }
    if (val < best - 1e-12) {
      best = val;
      best_y.assign(sol.begin(), sol.begin() + n);
    }
  }
  if (best_y.empty()) throw std::runtime_error("enumerative_qp: infeasible");
  return best_y;
}

std::vector<double> project_polyhedron(std::span<const double> x,
                                       const DenseMatrix& g,
                                       std::span<const double> h) {
  DenseMatrix p(x.size(), x.size());
  std::vector<double> q(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    p.at(i, i) = 1.0;
    q[i] = -x[i];
  }
  return enumerative_qp(p, q, g, h);
}

std::vector<double> brute_lp(std::span<const double> c, const DenseMatrix& aeq,
                             std::span<const double> beq, const DenseMatrix& g,
                             std::span<const double> h) {
  const std::size_t n = c.size(), ne = aeq.rows(), k = g.rows();
  if (ne > n) throw std::invalid_argument("brute_lp: too many equalities");
  const std::size_t need = n - ne;
  if (k > 24) throw std::invalid_argument("brute_lp: too many inequalities");
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_y;

  std::vector<std::size_t> idx(need);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t start,
                                                          std::size_t depth) {
    if (depth == need) {
      DenseMatrix sys(n, n);
      std::vector<double> rhs(n);
      for (std::size_t r = 0; r < ne; ++r) {
        for (std::size_t col = 0; col < n; ++col) sys.at(r, col) = aeq.at(r, col);
        rhs[r] = beq[r];
      }
      for (std::size_t a = 0; a < need; ++a) {
        for (std::size_t col = 0; col < n; ++col)
          sys.at(ne + a, col) = g.at(idx[a], col);
        rhs[ne + a] = h[idx[a]];
      }
      std::vector<double> y;
      try {
        y = linalg::solve(sys, rhs);
      } catch (const std::exception&) {
        return;
      }
      for (double v : y)
        if (!std::isfinite(v)) return;
      for (std::size_t r = 0; r < k; ++r) {
        double gy = 0.0;
        for (std::size_t col = 0; col < n; ++col) gy += g.at(r, col) * y[col];
        if (gy > h[r] + 1e-8) return;
      }
      for (std::size_t r = 0; r < ne; ++r) {
        double ay = 0.0;
        for (std::size_t col = 0; col < n; ++col) ay += aeq.at(r, col) * y[col];
        if (std::abs(ay - beq[r]) > 1e-8) return;
      }
      double val = 0.0;
      for (std::size_t col = 0; col < n; ++col) val += c[col] * y[col];
      if (val < best - 1e-12) {
        best = val;
        best_y = y;
      }
      return;
    }
    for (std::size_t i = start; i < k; ++i) {
      idx[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);
  if (best_y.empty()) throw std::runtime_error("brute_lp: no feasible vertex");
  return best_y;
}

double golden_min(const std::function<double(double)>& f, double lo, double hi,
                  int grid, int iters) {
  // coarse scan to bracket, then golden-section
  double best_x = lo, best_v = f(lo);
  for (int i = 1; i <= grid; ++i) {
    const double x = lo + (hi - lo) * i / grid;
    const double v = f(x);
    if (v < best_v) {
      best_v = v;
      best_x = x;
    }
  }
  double a = std::max(lo, best_x - (hi - lo) / grid);
  double b = std::min(hi, best_x + (hi - lo) / grid);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double c1 = b - phi * (b - a), c2 = a + phi * (b - a);
  double f1 = f(c1), f2 = f(c2);
  for (int it = 0; it < iters; ++it) {
    if (f1 < f2) {
      b = c2;
      c2 = c1;
      f2 = f1;
      c1 = b - phi * (b - a);
      f1 = f(c1);
    } else {
      a = c1;
      c1 = c2;
      f1 = f2;
      c2 = a + phi * (b - a);
      f2 = f(c2);
    }
  }
  return 0.5 * (a + b);
}

std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> x, double h) {
  std::vector<double> g(x.size()), xp(x.begin(), x.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = xp[i];
    xp[i] = xi + h;
    const double fp = f(xp);
    xp[i] = xi - h;
    const double fm = f(xp);
    xp[i] = xi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace cfsplit::oracle
