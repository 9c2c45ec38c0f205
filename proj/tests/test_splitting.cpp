#include "doctest.h"

#include <cmath>

#include "cfsplit/kernels.hpp"
#include "cfsplit/rng.hpp"
#include "cfsplit/splitting.hpp"
#include "oracles.hpp"

using namespace cfsplit;

namespace {

ProxFn ident() { return prox_identity(); }

// resolvent of a diagonal quadratic 0.5 a (u - c)^2 per coordinate
ProxFn diag_quad_prox(std::vector<double> a, std::vector<double> c) {
  return [a = std::move(a), c = std::move(c)](std::span<const double> v,
                                              double t, std::span<double> o) {
    for (std::size_t i = 0; i < v.size(); ++i)
      o[i] = (v[i] + t * a[i] * c[i]) / (1.0 + t * a[i]);
  };
}

// resolvent of A = -df*(-.) for f(x) = 0.5 sum a_i (x_i - c_i)^2
ProxFn dual_quad_prox_neg(std::vector<double> a, std::vector<double> c) {
  // A(t)_i = t_i/a_i - c_i  =>  J_{tA}(v)_i = (v_i + t c_i) / (1 + t/a_i)
  return [a = std::move(a), c = std::move(c)](std::span<const double> v,
                                              double t, std::span<double> o) {
    for (std::size_t i = 0; i < v.size(); ++i)
      o[i] = (v[i] + t * c[i]) / (1.0 + t / a[i]);
  };
}

// resolvent of B = dg* for g(y) = 0.5 sum a_i (y_i - c_i)^2
ProxFn dual_quad_prox(std::vector<double> a, std::vector<double> c) {
  // B(t)_i = c_i + t_i/a_i  =>  J_{tB}(v)_i = (v_i - t c_i) / (1 + t/a_i)
  return [a = std::move(a), c = std::move(c)](std::span<const double> v,
                                              double t, std::span<double> o) {
    for (std::size_t i = 0; i < v.size(); ++i)
      o[i] = (v[i] - t * c[i]) / (1.0 + t / a[i]);
  };
}

ForwardFn zero_map() {
  return [](std::span<const double>, std::span<double> o) { kern::fill(o, 0.0); };
}

}  // namespace

TEST_CASE("threeop_step: reductions and a 1-D closed form") {
  Rng rng(3);
  SplittingConfig cfg;
  cfg.gamma = 0.7;

  // A = B = C = 0 fixes every point
  std::vector<double> x(4), out(4);
  rng.fill_gaussian(x);
  threeop_step(ident(), ident(), zero_map(), cfg, x, out);
  for (int i = 0; i < 4; ++i) CHECK(out[i] == doctest::Approx(x[i]).epsilon(1e-15));

  // B = 0 reduces 3S to FBS on the same input
  auto ja = make_prox_l1(0.4);
  ForwardFn c = [](std::span<const double> in, std::span<double> o) {
    for (std::size_t i = 0; i < in.size(); ++i) o[i] = 0.3 * in[i] + 0.1;
    ops::add(2 * in.size());
  };
  std::vector<double> a3(4), afbs(4);
  for (int t = 0; t < 25; ++t) {
    rng.fill_gaussian(x);
    threeop_step(ja, ident(), c, cfg, x, a3);
    fbs_step(ja, c, cfg.gamma, x, afbs);
    for (int i = 0; i < 4; ++i) REQUIRE(std::abs(a3[i] - afbs[i]) <= 1e-12);
  }

  // A = 0 reduces 3S to BFS
  auto jb = make_proj_interval(-0.5, 1.5);
  std::vector<double> abfs(4);
  for (int t = 0; t < 25; ++t) {
    rng.fill_gaussian(x);
    threeop_step(ident(), jb, c, cfg, x, a3);
    bfs_step(jb, c, cfg.gamma, x, abfs);
    for (int i = 0; i < 4; ++i) REQUIRE(std::abs(a3[i] - abfs[i]) <= 1e-12);
  }

  // C = 0 reduces 3S to DRS
  std::vector<double> adrs(4);
  for (int t = 0; t < 25; ++t) {
    rng.fill_gaussian(x);
    threeop_step(ja, jb, zero_map(), cfg, x, a3);
    drs_step(ja, jb, cfg.gamma, x, adrs);
    for (int i = 0; i < 4; ++i) REQUIRE(std::abs(a3[i] - adrs[i]) <= 1e-12);
  }

  // 1-D: A = d iota_{>=0}, B = 0, C(x) = x - 2, gamma = 1, x = 0 -> x' = 2
  SplittingConfig unit;
  unit.gamma = 1.0;
  ProxFn nonneg = make_proj_interval(0.0, 1e30);
  ForwardFn shift = [](std::span<const double> in, std::span<double> o) {
    o[0] = in[0] - 2.0;
  };
  std::vector<double> zero{0.0}, one(1);
  threeop_step(nonneg, ident(), shift, unit, zero, one);
  CHECK(one[0] == doctest::Approx(2.0));
  // and x* = 2 is the optimum: fixed point with solution J_B(x*) = x* = 2
  std::vector<double> two{2.0}, tout(1);
  threeop_step(nonneg, ident(), shift, unit, two, tout);
  CHECK(tout[0] == doctest::Approx(2.0));

  SplittingConfig bad;
  bad.gamma = -1.0;
  CHECK_THROWS_AS(threeop_step(ja, jb, c, bad, x, out), ConfigError);
}

TEST_CASE("fbs_step: backward-only, gradient-only, lasso optimality") {
  Rng rng(5);
  std::vector<double> x(3), out(3), ref(3);

  // C = 0: pure backward step
  auto ja = make_prox_l1(0.6);
  rng.fill_gaussian(x);
  fbs_step(ja, zero_map(), 0.8, x, out);
  ja(x, 0.8, ref);
  for (int i = 0; i < 3; ++i) CHECK(out[i] == ref[i]);

  // J_A = I: plain gradient step
  ForwardFn grad = [](std::span<const double> in, std::span<double> o) {
    for (std::size_t i = 0; i < in.size(); ++i) o[i] = 2.0 * in[i] - 1.0;
  };
  fbs_step(ident(), grad, 0.25, x, out);
  for (int i = 0; i < 3; ++i)
    CHECK(out[i] == doctest::Approx(x[i] - 0.25 * (2.0 * x[i] - 1.0)));

  CHECK_THROWS_AS(fbs_step(ja, grad, 0.0, x, out), ConfigError);

  // 2-D lasso: iterate to a fixed point and check the optimality residual
  // min 0.5||Ax-b||^2 + lam ||x||_1
  DenseMatrix a(2, 2);
  a.at(0, 0) = 1.2;
  a.at(0, 1) = 0.3;
  a.at(1, 0) = -0.4;
  a.at(1, 1) = 0.9;
  std::vector<double> b{1.0, -0.5};
  const double lam = 0.2;
  ForwardFn gradls = [&](std::span<const double> in, std::span<double> o) {
    std::vector<double> r(2);
    a.mul(in, r);
    kern::axpy(-1.0, b, r);
    a.mul_t(r, o);
  };
  auto prox = make_prox_l1(lam);
  std::vector<double> cur{0.0, 0.0}, nxt(2);
  const double gamma = 0.3;
  for (int k = 0; k < 4000; ++k) {
    fbs_step(prox, gradls, gamma, cur, nxt);
    cur = nxt;
  }
  // optimality via the prox-residual: x = prox_{g lam|.|}(x - g grad f(x))
  fbs_step(prox, gradls, gamma, cur, nxt);
  double res = 0.0;
  for (int i = 0; i < 2; ++i) res += (nxt[i] - cur[i]) * (nxt[i] - cur[i]);
  CHECK(std::sqrt(res) <= 1e-8);
}

TEST_CASE("bfs_step: backward-only and shared solutions with FBS") {
  Rng rng(7);
  std::vector<double> x(2), out(2), ref(2);
  auto jb = make_proj_interval(-1.0, 1.0);

  rng.fill_gaussian(x);
  bfs_step(jb, zero_map(), 0.5, x, out);
  jb(x, 0.5, ref);
  for (int i = 0; i < 2; ++i) CHECK(out[i] == ref[i]);

  ForwardFn grad = [](std::span<const double> in, std::span<double> o) {
    for (std::size_t i = 0; i < in.size(); ++i) o[i] = in[i] - 0.4;
  };
  bfs_step(ident(), grad, 0.3, x, out);
  for (int i = 0; i < 2; ++i)
    CHECK(out[i] == doctest::Approx(x[i] - 0.3 * (x[i] - 0.4)));

  // same (B, C) pair: FBS and BFS fixed points map to the same solution of
  // 0 in Bx + Cx (B = subdifferential of the box, C = grad of a quadratic)
  ForwardFn gq = [](std::span<const double> in, std::span<double> o) {
    o[0] = in[0] - 2.0;   // grad 0.5(x-2)^2: constrained optimum at box edge
    o[1] = in[1] + 0.3;
  };
  std::vector<double> xf{0.0, 0.0}, xb{0.0, 0.0}, t1(2), t2(2);
  for (int k = 0; k < 3000; ++k) {
    fbs_step(jb, gq, 0.6, xf, t1);
    xf = t1;
    bfs_step(jb, gq, 0.6, xb, t2);
    xb = t2;
  }
  // FBS fixed point is the solution; BFS reports J_B(x*)
  std::vector<double> sol_bfs(2);
  jb(xb, 0.6, sol_bfs);
  CHECK(sol_bfs[0] == doctest::Approx(xf[0]).epsilon(1e-6));
  CHECK(sol_bfs[1] == doctest::Approx(xf[1]).epsilon(1e-6));
  CHECK(xf[0] == doctest::Approx(1.0).epsilon(1e-6));    // clamped at 1
  CHECK(xf[1] == doctest::Approx(-0.3).epsilon(1e-6));   // interior optimum
}

TEST_CASE("drs_step: identity case, two algebraic forms, interval feasibility") {
  Rng rng(9);
  std::vector<double> x(5), out(5), out2(5);

  // A = B = 0 leaves x fixed
  rng.fill_gaussian(x);
  drs_step(ident(), ident(), 0.9, x, out);
  for (int i = 0; i < 5; ++i) CHECK(out[i] == doctest::Approx(x[i]).epsilon(1e-15));

  // difference form vs reflection form on random monotone-linear resolvents
  std::vector<double> a1(5, 0.0), c1(5, 0.0), a2(5, 0.0), c2(5, 0.0);
  for (int i = 0; i < 5; ++i) {
    a1[i] = 0.2 + rng.uniform();
    c1[i] = rng.gaussian();
    a2[i] = 0.2 + rng.uniform();
    c2[i] = rng.gaussian();
  }
  auto ja = diag_quad_prox(a1, c1);
  auto jb = diag_quad_prox(a2, c2);
  for (int t = 0; t < 50; ++t) {
    rng.fill_gaussian(x);
    drs_step(ja, jb, 0.8, x, out);
    drs_step_reflection(ja, jb, 0.8, x, out2);
    for (int i = 0; i < 5; ++i) REQUIRE(std::abs(out[i] - out2[i]) <= 1e-12);
  }

  // 1-D feasibility of [0,2] and [1,3] converges into [1,2]
  auto pa = make_proj_interval(0.0, 2.0);
  auto pb = make_proj_interval(1.0, 3.0);
  std::vector<double> cur{7.3}, nxt(1);
  for (int k = 0; k < 300; ++k) {
    drs_step(pa, pb, 1.0, cur, nxt);
    cur = nxt;
  }
  std::vector<double> sol(1);
  pb(cur, 1.0, sol);  // J_B(x*) is the reported solution
  CHECK(sol[0] >= 1.0 - 1e-9);
  CHECK(sol[0] <= 2.0 + 1e-9);
}

TEST_CASE("rprs_step: lambda endpoints and PRS on intervals") {
  Rng rng(11);
  std::vector<double> x(3), out(3), drs(3);
  auto ja = make_prox_l1(0.3);
  auto jb = make_proj_interval(-2.0, 2.0);

  rng.fill_gaussian(x);
  rprs_step(ja, jb, 0.7, 0.0, x, out);
  for (int i = 0; i < 3; ++i) CHECK(out[i] == x[i]);

  for (int t = 0; t < 30; ++t) {
    rng.fill_gaussian(x);
    rprs_step(ja, jb, 0.7, 0.5, x, out);
    drs_step(ja, jb, 0.7, x, drs);
    for (int i = 0; i < 3; ++i) REQUIRE(std::abs(out[i] - drs[i]) <= 1e-14);
  }

  CHECK_THROWS_AS(rprs_step(ja, jb, 0.7, 1.5, x, out), ConfigError);

  // PRS (lambda = 1) lands in the intersection of the intervals
  auto pa = make_proj_interval(0.0, 2.0);
  auto pb = make_proj_interval(1.0, 3.0);
  std::vector<double> cur{5.0}, nxt(1);
  for (int k = 0; k < 200; ++k) {
    rprs_step(pa, pb, 1.0, 1.0, cur, nxt);
    cur = nxt;
  }
  std::vector<double> sol(1);
  pb(cur, 1.0, sol);
  CHECK(sol[0] >= 1.0 - 1e-9);
  CHECK(sol[0] <= 2.0 + 1e-9);
}

TEST_CASE("fdrs_step: full-space and zero-space subspaces, constrained QP") {
  Rng rng(13);
  std::vector<double> x(4), out(4), ref(4);
  auto ja = make_prox_l1(0.4);
  ForwardFn c = [](std::span<const double> in, std::span<double> o) {
    for (std::size_t i = 0; i < in.size(); ++i) o[i] = 0.5 * in[i] - 0.2;
  };
  ForwardFn pv_all = [](std::span<const double> in, std::span<double> o) {
    kern::copy(in, o);
  };
  ForwardFn pv_zero = zero_map();

  // V = whole space: equals 3S with B = N_V = 0
  SplittingConfig cfg;
  cfg.gamma = 0.6;
  for (int t = 0; t < 20; ++t) {
    rng.fill_gaussian(x);
    fdrs_step(ja, pv_all, c, cfg.gamma, x, out);
    threeop_step(ja, ident(), c, cfg, x, ref);
    for (int i = 0; i < 4; ++i) REQUIRE(std::abs(out[i] - ref[i]) <= 1e-13);
  }

  // V = {0}: x' = x + J_A(-x)
  for (int t = 0; t < 20; ++t) {
    rng.fill_gaussian(x);
    fdrs_step(ja, pv_zero, c, cfg.gamma, x, out);
    std::vector<double> neg(4), jneg(4);
    for (int i = 0; i < 4; ++i) neg[i] = -x[i];
    ja(neg, cfg.gamma, jneg);
    for (int i = 0; i < 4; ++i)
      REQUIRE(std::abs(out[i] - (x[i] + jneg[i])) <= 1e-13);
  }

  // subspace-constrained quadratic vs the equality-constrained QP oracle:
  // min 0.5||u - c0||^2 over V = {u: u_0 = u_1} (A = 0)
  std::vector<double> c0{1.0, 3.0, -0.5, 0.2};
  ForwardFn gradq = [&](std::span<const double> in, std::span<double> o) {
    for (int i = 0; i < 4; ++i) o[i] = in[i] - c0[i];
  };
  ForwardFn pv_diag = [](std::span<const double> in, std::span<double> o) {
    const double m = 0.5 * (in[0] + in[1]);
    o[0] = m;
    o[1] = m;
    o[2] = in[2];
    o[3] = in[3];
  };
  std::vector<double> cur(4, 0.0), nxt(4);
  for (int k = 0; k < 4000; ++k) {
    fdrs_step(ident(), pv_diag, gradq, 0.5, cur, nxt);
    cur = nxt;
  }
  std::vector<double> pv(4);
  pv_diag(cur, pv);  // solution lives in V
  // oracle: min 0.5||u-c0||^2 s.t. u_0 - u_1 = 0 via one equality in the QP
  DenseMatrix p(4, 4);
  std::vector<double> q(4);
  for (int i = 0; i < 4; ++i) {
    p.at(i, i) = 1.0;
    q[i] = -c0[i];
  }
  DenseMatrix g(2, 4);  // u0 - u1 <= 0 and u1 - u0 <= 0
  g.at(0, 0) = 1.0;
  g.at(0, 1) = -1.0;
  g.at(1, 0) = -1.0;
  g.at(1, 1) = 1.0;
  std::vector<double> h{0.0, 0.0};
  auto ref_qp = oracle::enumerative_qp(p, q, g, h);
  for (int i = 0; i < 4; ++i)
    CHECK(pv[i] == doctest::Approx(ref_qp[i]).epsilon(1e-6));
}

TEST_CASE("fbfs_step: backward-only, matrix polynomial on skew C, gamma->0") {
  Rng rng(17);
  std::vector<double> x(2), out(2), ref(2);
  auto ja = make_prox_l1(0.5);

  // C = 0: reduces to J_A
  rng.fill_gaussian(x);
  fbfs_step(ja, zero_map(), 0.4, x, out);
  ja(x, 0.4, ref);
  for (int i = 0; i < 2; ++i) CHECK(out[i] == ref[i]);

  CHECK_THROWS_AS(fbfs_step(ja, zero_map(), -0.4, x, out), ConfigError);

  // skew C = [[0,1],[-1,0]], A = 0: operator equals gC + (I - gC)^2
  ForwardFn skew = [](std::span<const double> in, std::span<double> o) {
    o[0] = in[1];
    o[1] = -in[0];
  };
  const double g = 0.5;
  DenseMatrix cm(2, 2);
  cm.at(0, 1) = 1.0;
  cm.at(1, 0) = -1.0;
  DenseMatrix poly(2, 2);  // g*C + (I - g*C)^2, formed explicitly
  {
    DenseMatrix igc(2, 2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) igc.at(i, j) = (i == j ? 1.0 : 0.0) - g * cm.at(i, j);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        double s = g * cm.at(i, j);
        for (int k = 0; k < 2; ++k) s += igc.at(i, k) * igc.at(k, j);
        poly.at(i, j) = s;
      }
  }
  for (int t = 0; t < 30; ++t) {
    rng.fill_gaussian(x);
    fbfs_step(ident(), skew, g, x, out);
    poly.mul(x, ref);
    for (int i = 0; i < 2; ++i) REQUIRE(std::abs(out[i] - ref[i]) <= 1e-13);
  }

  // gamma -> 0 limit returns x
  rng.fill_gaussian(x);
  fbfs_step(ident(), skew, 1e-12, x, out);
  for (int i = 0; i < 2; ++i) CHECK(out[i] == doctest::Approx(x[i]).epsilon(1e-9));
}

TEST_CASE("FBFS converges on the skew example where FBS diverges") {
  // 0 in Cx with C skew: monotone but not cocoercive
  ForwardFn skew = [](std::span<const double> in, std::span<double> o) {
    o[0] = in[1];
    o[1] = -in[0];
  };
  const double g = 0.5;
  std::vector<double> xf{1.0, 0.0}, xb{1.0, 0.0}, nxt(2);
  double fbs_n0 = 1.0, fbfs_n0 = 1.0;
  for (int k = 0; k < 100; ++k) {
    fbs_step(ident(), skew, g, xf, nxt);
    xf = nxt;
    fbfs_step(ident(), skew, g, xb, nxt);
    xb = nxt;
  }
  const double fbs_n = std::hypot(xf[0], xf[1]);
  const double fbfs_n = std::hypot(xb[0], xb[1]);
  CHECK(fbs_n > 10.0 * fbs_n0);   // divergence detected by residual growth
  CHECK(fbfs_n < 0.1 * fbfs_n0);  // FBFS contracts toward the solution 0
}

TEST_CASE("prox/proj gradient steps") {
  Rng rng(19);
  std::vector<double> x(3), out(3);
  ForwardFn grad = [](std::span<const double> in, std::span<double> o) {
    for (std::size_t i = 0; i < in.size(); ++i) o[i] = 0.7 * in[i] + 0.2;
  };

  // g = 0: plain gradient descent
  rng.fill_gaussian(x);
  prox_grad_step(ident(), grad, 0.5, x, out);
  for (int i = 0; i < 3; ++i)
    CHECK(out[i] == doctest::Approx(x[i] - 0.5 * (0.7 * x[i] + 0.2)));

  // X = box with zero gradient: pure projection
  auto box = make_proj_interval(0.0, 1.0);
  rng.fill_gaussian(x);
  prox_grad_step(box, zero_map(), 0.5, x, out);
  for (int i = 0; i < 3; ++i)
    CHECK(out[i] == doctest::Approx(std::min(1.0, std::max(0.0, x[i]))));

  // 2-D lasso vs the subgradient-optimality oracle (shared with fbs test)
  DenseMatrix a(2, 2);
  a.at(0, 0) = 1.0;
  a.at(0, 1) = 0.5;
  a.at(1, 0) = 0.0;
  a.at(1, 1) = 1.0;
  std::vector<double> b{2.0, -1.0};
  const double lam = 0.35;
  ForwardFn gradls = [&](std::span<const double> in, std::span<double> o) {
    std::vector<double> r(2);
    a.mul(in, r);
    kern::axpy(-1.0, b, r);
    a.mul_t(r, o);
  };
  std::vector<double> cur{0.0, 0.0}, nxt(2);
  for (int k = 0; k < 6000; ++k) {
    prox_grad_step(make_prox_l1(lam), gradls, 0.4, cur, nxt);
    cur = nxt;
  }
  // subgradient optimality: -grad f(x) in lam * sign(x) componentwise
  std::vector<double> gr(2);
  gradls(cur, gr);
  for (int i = 0; i < 2; ++i) {
    if (std::abs(cur[i]) > 1e-9)
      CHECK(std::abs(gr[i] + lam * (cur[i] > 0 ? 1.0 : -1.0)) <= 1e-6);
    else
      CHECK(std::abs(gr[i]) <= lam + 1e-6);
  }
}

TEST_CASE("admm_step: consensus, 1-D quadratic fixed point") {
  // f = g = 0 with s0 = 0: immediate consensus
  AdmmState st;
  st.x = {0.0};
  st.y = {3.7};
  st.s = {0.0};
  admm_step(ident(), ident(), 0.5, st);
  CHECK(st.x[0] == doctest::Approx(3.7));
  CHECK(st.y[0] == doctest::Approx(3.7));
  CHECK(st.s[0] == doctest::Approx(0.0));

  CHECK_THROWS_AS(admm_step(ident(), ident(), 0.0, st), ConfigError);

  // f = 0.5(x-1)^2, g = 0.5(y-3)^2: consensus fixed point x = y = 2
  auto pf = diag_quad_prox({1.0}, {1.0});
  auto pg = diag_quad_prox({1.0}, {3.0});
  AdmmState qs;
  qs.x = {0.0};
  qs.y = {0.0};
  qs.s = {0.0};
  for (int k = 0; k < 2000; ++k) admm_step(pf, pg, 0.7, qs);
  CHECK(qs.x[0] == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(qs.y[0] == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("DRS reproduces ADMM through the dual (eta = 1/gamma)") {
  Rng rng(23);
  for (std::size_t n : {1UL, 5UL}) {
    std::vector<double> a1(n), c1(n), a2(n), c2(n);
    for (std::size_t i = 0; i < n; ++i) {
      a1[i] = 0.4 + rng.uniform();
      c1[i] = rng.gaussian();
      a2[i] = 0.4 + rng.uniform();
      c2[i] = rng.gaussian();
    }
    const double gamma = 0.6;  // ADMM parameter
    const double eta = 1.0 / gamma;

    auto pf = diag_quad_prox(a1, c1);
    auto pg = diag_quad_prox(a2, c2);
    AdmmState st;
    st.x.assign(n, 0.0);
    st.y.assign(n, 0.0);
    st.s.assign(n, 0.0);

    // DRS on A = -df*(-.), B = dg*; t0 = s0 + eta*y0
    auto ja = dual_quad_prox_neg(a1, c1);
    auto jb = dual_quad_prox(a2, c2);
    std::vector<double> t(n, 0.0), tn(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = st.s[i] + eta * st.y[i];

    for (int k = 0; k < 100; ++k) {
      admm_step(pf, pg, gamma, st);
      drs_step(ja, jb, eta, t, tn);
      t = tn;
      // invariant: t^k = s^k + eta y^k and J_{eta B}(t^k) = s^k
      std::vector<double> jbt(n);
      jb(t, eta, jbt);
      for (std::size_t i = 0; i < n; ++i) {
        REQUIRE(std::abs(t[i] - (st.s[i] + eta * st.y[i])) <= 1e-10);
        REQUIRE(std::abs(jbt[i] - st.s[i]) <= 1e-10);
      }
    }
  }
}

TEST_CASE("3S averagedness at gamma = beta: nonexpansive over random pairs") {
  Rng rng(29);
  // C = grad of 0.5||Mx - c||^2, cocoercive with beta = 1/||M'M||
  DenseMatrix m(3, 3);
  for (double& v : m.all()) v = 0.5 * rng.gaussian();
  std::vector<double> c0(3);
  rng.fill_gaussian(c0);
  DenseMatrix mtm = m.gram();
  double lmax = 0.0;
  {
    auto eig = DenseMatrix(mtm);
    // crude upper bound by row sums is enough for a step choice
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0.0;
      for (std::size_t cidx = 0; cidx < 3; ++cidx) s += std::abs(eig.at(r, cidx));
      lmax = std::max(lmax, s);
    }
  }
  ForwardFn grad = [&](std::span<const double> in, std::span<double> o) {
    std::vector<double> r(3);
    m.mul(in, r);
    kern::axpy(-1.0, c0, r);
    m.mul_t(r, o);
  };
  SplittingConfig cfg;
  cfg.beta = 1.0 / lmax;
  cfg.gamma = default_gamma(cfg);  // midpoint of (0, 2 beta)
  CHECK(cfg.gamma == doctest::Approx(cfg.beta));

  auto ja = make_prox_l1(0.2);
  auto jb = make_proj_interval(-1.2, 1.2);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> z1(3), z2(3), t1(3), t2(3);
    rng.fill_gaussian(z1);
    rng.fill_gaussian(z2);
    threeop_step(ja, jb, grad, cfg, z1, t1);
    threeop_step(ja, jb, grad, cfg, z2, t2);
    double num = 0.0, den = 0.0;
    for (int i = 0; i < 3; ++i) {
      num += (t1[i] - t2[i]) * (t1[i] - t2[i]);
      den += (z1[i] - z2[i]) * (z1[i] - z2[i]);
    }
    REQUIRE(num <= den * (1.0 + 1e-12));
  }
}

TEST_CASE("gamma backtracking halves until the residual is non-increasing") {
  // residual of a gradient step on 0.5 x'Hx with a stiff H: large gamma fails
  DenseMatrix hmat(2, 2);
  hmat.at(0, 0) = 100.0;
  hmat.at(1, 1) = 1.0;
  auto step = [&](double g, std::span<const double> x, std::span<double> out) {
    std::vector<double> hx(2);
    hmat.mul(x, hx);
    for (int i = 0; i < 2; ++i) out[i] = x[i] - g * hx[i];
  };
  auto residual = [&](std::span<const double> x) {
    std::vector<double> hx(2);
    hmat.mul(x, hx);
    return std::hypot(hx[0], hx[1]);
  };
  std::vector<double> x0{1.0, 1.0};
  const double g = backtrack_gamma(step, residual, x0, 1.0);
  CHECK(g < 0.03);  // must shrink below ~2/100
  CHECK(g > 0.0);
  // accepted gamma indeed does not increase the residual
  std::vector<double> x1(2);
  step(g, x0, x1);
  CHECK(residual(x1) <= residual(x0));
}

TEST_CASE("km_relax damping converges on the rotation example") {
  // plane rotation: nonexpansive with fixed point 0; undamped orbit stays on
  // the circle, damped iteration contracts
  const double th = 0.7;
  auto rot_part = make_partition({1, 1});
  auto rot = make_full_update_operator(
      rot_part,
      [th](std::span<const double> in, std::span<double> out) {
        out[0] = std::cos(th) * in[0] - std::sin(th) * in[1];
        out[1] = std::sin(th) * in[0] + std::cos(th) * in[1];
      },
      OperatorDescriptor{});
  auto damped = km_relax(rot, 0.5);
  BlockVector x(rot_part);
  x.raw() = {1.0, 0.0};
  BlockVector xu = x;
  for (int k = 0; k < 200; ++k) {
    xu = rot->apply(xu);
    x = damped->apply(x);
  }
  CHECK(std::hypot(xu.all()[0], xu.all()[1]) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::hypot(x.all()[0], x.all()[1]) < 1e-6);
}
