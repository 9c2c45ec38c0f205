#include "doctest.h"

#include <cmath>

#include "cfsplit/kernels.hpp"
#include "cfsplit/prox.hpp"
#include "cfsplit/rng.hpp"
#include "oracles.hpp"

using namespace cfsplit;

namespace {

// stack box bounds as G y <= h rows for the polyhedral projection oracle
void box_rows(std::span<const double> lo, std::span<const double> hi,
              DenseMatrix& g, std::vector<double>& h) {
  const std::size_t n = lo.size();
  g = DenseMatrix(2 * n, n);
  h.assign(2 * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    g.at(i, i) = 1.0;
    h[i] = hi[i];
    g.at(n + i, i) = -1.0;
    h[n + i] = -lo[i];
  }
}

}  // namespace

TEST_CASE("proj_box: clamp, identity on feasible points, QP oracle") {
  std::vector<double> x{-0.5, 0.5, 2.0}, lo(3, 0.0), hi(3, 1.0), out(3);
  proj_box(x, lo, hi, out);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 0.5);
  CHECK(out[2] == 1.0);

  std::vector<double> inside{0.2, 0.9, 0.01};
  proj_box(inside, lo, hi, out);
  for (int i = 0; i < 3; ++i) CHECK(out[i] == inside[i]);

  std::vector<double> bad_hi{1.0, -1.0, 1.0};
  CHECK_THROWS_AS(proj_box(x, lo, bad_hi, out), ConfigError);

  Rng rng(2);
  DenseMatrix g;
  std::vector<double> h;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> lo2(4), hi2(4), y(4), o(4);
    for (int i = 0; i < 4; ++i) {
      lo2[i] = -rng.uniform() - 0.2;
      hi2[i] = rng.uniform() + 0.2;
      y[i] = 3.0 * rng.gaussian();
    }
    proj_box(y, lo2, hi2, o);
    box_rows(lo2, hi2, g, h);
    auto ref = oracle::project_polyhedron(y, g, h);
    for (int i = 0; i < 4; ++i) CHECK(o[i] == doctest::Approx(ref[i]).epsilon(1e-9));
  }
}

TEST_CASE("prox_l1: shrink, small-t limit, scalar minimization oracle") {
  std::vector<double> x{2.0, -0.3}, out(2);
  prox_l1(x, 1.0, out);
  CHECK(out[0] == doctest::Approx(1.0));
  CHECK(out[1] == doctest::Approx(0.0));

  prox_l1(x, 1e-14, out);
  CHECK(out[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(out[1] == doctest::Approx(-0.3).epsilon(1e-12));

  CHECK_THROWS_AS(prox_l1(x, 0.0, out), ConfigError);
  CHECK_THROWS_AS(prox_l1(x, -1.0, out), ConfigError);

  Rng rng(5);
  for (int t = 0; t < 30; ++t) {
    const double v = 3.0 * rng.gaussian();
    const double step = 0.1 + 2.0 * rng.uniform();
    std::vector<double> in{v}, o(1);
    prox_l1(in, step, o);
    const double ref = oracle::golden_min(
        [&](double u) { return step * std::abs(u) + 0.5 * (u - v) * (u - v); },
        -10.0, 10.0);
    CHECK(std::abs(o[0] - ref) <= 1e-6);
  }
}

TEST_CASE("proj_l2_ball: interior, scaling, boundary, QP oracle") {
  std::vector<double> x{3.0, 4.0}, out(2);
  proj_l2_ball(x, 1.0, out);
  CHECK(out[0] == doctest::Approx(0.6));
  CHECK(out[1] == doctest::Approx(0.8));

  std::vector<double> inside{0.1, -0.2};
  proj_l2_ball(inside, 1.0, out);
  CHECK(out[0] == inside[0]);
  CHECK(out[1] == inside[1]);

  // ||x|| = r exactly returns x without division
  std::vector<double> boundary{0.6, 0.8};
  proj_l2_ball(boundary, 1.0, out);
  CHECK(out[0] == boundary[0]);
  CHECK(out[1] == boundary[1]);

  CHECK_THROWS_AS(proj_l2_ball(x, -0.1, out), ConfigError);

  // oracle via golden section on the scale factor (radial symmetry)
  Rng rng(7);
  for (int t = 0; t < 30; ++t) {
    std::vector<double> y(3), o(3);
    rng.fill_gaussian(y);
    const double r = 0.3 + rng.uniform();
    proj_l2_ball(y, r, o);
    const double ny = kern::nrm2(y);
    const double s = oracle::golden_min(
        [&](double u) {
          const double c = std::min(u, r / std::max(ny, 1e-12));
          double d = 0.0;
          for (double yi : y) d += (c * yi - yi) * (c * yi - yi);
          return d + ((u > r / std::max(ny, 1e-12)) ? 1e9 * (u - r / ny) : 0.0);
        },
        0.0, 1.0);
    const double scale = std::min(1.0, std::min(s, r / std::max(ny, 1e-12)));
    for (int i = 0; i < 3; ++i)
      CHECK(o[i] == doctest::Approx(scale * y[i]).epsilon(1e-4));
  }
}

TEST_CASE("prox_separable_sum applies per-block handles") {
  auto part = make_partition({2, 3});
  BlockVector x(part), out(part);
  x.raw() = {2.0, -2.0, 0.3, 0.4, -0.1};

  std::vector<ProxFn> handles{prox_identity(), prox_identity()};
  prox_separable_sum(x, handles, 0.5, out);
  for (std::size_t i = 0; i < 5; ++i) CHECK(out.all()[i] == x.all()[i]);

  // single-block case equals the handle
  auto single = make_partition({4});
  BlockVector y(single), yout(single), direct(single);
  y.raw() = {1.5, -0.2, 0.9, -3.0};
  std::vector<ProxFn> l1{make_prox_l1()};
  prox_separable_sum(y, l1, 0.7, yout);
  prox_l1(y.all(), 0.7, direct.all());
  for (std::size_t i = 0; i < 4; ++i) CHECK(yout.all()[i] == direct.all()[i]);

  // mixed l1/box blocks vs the full QP oracle
  std::vector<ProxFn> mixed{make_prox_l1(), make_proj_interval(0.0, 1.0)};
  prox_separable_sum(x, mixed, 0.5, out);
  {
    // block 0: soft threshold; block 1: clamp; assemble the QP oracle per part
    std::vector<double> in0{2.0, -2.0}, o0(2);
    prox_l1(in0, 0.5, o0);
    CHECK(out.all()[0] == doctest::Approx(o0[0]));
    CHECK(out.all()[1] == doctest::Approx(o0[1]));
    DenseMatrix g;
    std::vector<double> h;
    std::vector<double> lo(3, 0.0), hi(3, 1.0);
    box_rows(lo, hi, g, h);
    auto ref = oracle::project_polyhedron(std::span<const double>(x.all()).subspan(2, 3), g, h);
    for (int i = 0; i < 3; ++i)
      CHECK(out.all()[2 + i] == doctest::Approx(ref[i]).epsilon(1e-9));
  }

  std::vector<ProxFn> missing{make_prox_l1(), nullptr};
  CHECK_THROWS_AS(prox_separable_sum(x, missing, 0.5, out), ConfigError);
}

TEST_CASE("prox_conjugate: indicator of origin, linf ball, Moreau decomposition") {
  // h = iota_{0}: prox_h = 0, so prox_{gamma h*} = identity
  ProxFn prox_zero_set = [](std::span<const double>, double, std::span<double> o) {
    kern::fill(o, 0.0);
  };
  std::vector<double> x{0.7, -1.3}, out(2);
  prox_conjugate(prox_zero_set, x, 2.0, out);
  CHECK(out[0] == doctest::Approx(x[0]));
  CHECK(out[1] == doctest::Approx(x[1]));

  // h = ||.||_1, gamma = 1: prox_{h*} = projection onto [-1,1]^n
  std::vector<double> y{2.0, -0.5}, o2(2);
  prox_conjugate(make_prox_l1(), y, 1.0, o2);
  CHECK(o2[0] == doctest::Approx(1.0));
  CHECK(o2[1] == doctest::Approx(-0.5));
  {
    DenseMatrix g;
    std::vector<double> h;
    std::vector<double> lo(2, -1.0), hi(2, 1.0);
    box_rows(lo, hi, g, h);
    auto ref = oracle::project_polyhedron(y, g, h);
    CHECK(o2[0] == doctest::Approx(ref[0]).epsilon(1e-9));
    CHECK(o2[1] == doctest::Approx(ref[1]).epsilon(1e-9));
  }

  CHECK_THROWS_AS(prox_conjugate(make_prox_l1(), y, 0.0, out), ConfigError);

  // Moreau decomposition for l1 and a box indicator
  Rng rng(9);
  for (auto& prox : {make_prox_l1(), make_proj_interval(-0.4, 0.9)}) {
    for (int t = 0; t < 200; ++t) {
      std::vector<double> v(4), a(4), scaled(4), b2(4);
      rng.fill_gaussian(v);
      const double g = 0.2 + 2.0 * rng.uniform();
      prox(v, g, a);
      for (int i = 0; i < 4; ++i) scaled[i] = v[i] / g;
      prox_conjugate(prox, scaled, 1.0 / g, b2);
      for (int i = 0; i < 4; ++i)
        CHECK(std::abs(a[i] + g * b2[i] - v[i]) <= 1e-12);
    }
  }
}

TEST_CASE("soc_project trichotomy") {
  // interior: v1 >= rho1
  std::vector<double> v{5.0, 3.0, 4.0}, u(3);
  SocState st = soc_project(v, u);
  CHECK(st.rho1 == doctest::Approx(5.0));
  CHECK(st.region == SocRegion::kInterior);
  for (int i = 0; i < 3; ++i) CHECK(u[i] == v[i]);

  // polar: v1 < -rho1 projects to 0
  std::vector<double> w{-2.0, 1.0, 0.0}, uw(3);
  SocState stw = soc_project(w, uw);
  CHECK(stw.region == SocRegion::kPolar);
  for (double e : uw) CHECK(e == 0.0);

  // boundary case against the 2-D reduced QP oracle: v = (0,2,0) -> (1,1,0)
  std::vector<double> vb{0.0, 2.0, 0.0}, ub(3);
  soc_project(vb, ub);
  CHECK(ub[0] == doctest::Approx(1.0));
  CHECK(ub[1] == doctest::Approx(1.0));
  CHECK(ub[2] == doctest::Approx(0.0));
  {
    // reduce to (head a, tail magnitude t): min (a-v1)^2 + (t-rho1)^2
    // s.t. t <= a, t >= 0 and compare
    DenseMatrix g(2, 2);
    g.at(0, 0) = -1.0;
    g.at(0, 1) = 1.0;  // t - a <= 0
    g.at(1, 1) = -1.0; // -t <= 0
    std::vector<double> h{0.0, 0.0};
    DenseMatrix p(2, 2);
    p.at(0, 0) = p.at(1, 1) = 1.0;
    const double rho1 = std::hypot(vb[1], vb[2]);
    std::vector<double> q{-vb[0], -rho1};
    auto at = oracle::enumerative_qp(p, q, g, h);
    CHECK(ub[0] == doctest::Approx(at[0]).epsilon(1e-9));
    CHECK(std::hypot(ub[1], ub[2]) == doctest::Approx(at[1]).epsilon(1e-9));
  }

  // dimension-1 cones behave like the nonnegative ray
  std::vector<double> one{-0.3}, uo(1);
  SocState s1 = soc_project(one, uo);
  CHECK(uo[0] == 0.0);
  CHECK(s1.region == SocRegion::kPolar);
  one[0] = 0.4;
  soc_project(one, uo);
  CHECK(uo[0] == 0.4);
}

TEST_CASE("soc_state_refresh: head coordinate, no-op, recompute oracle storm") {
  Rng rng(13);
  std::vector<double> v{0.3, 1.0, -2.0, 0.5}, u(4);
  SocState st = soc_project(v, u);

  // head change keeps rho1/tail_sq
  SocState h = soc_state_refresh(st, v, 0, 5.0);
  CHECK(h.rho1 == doctest::Approx(st.rho1));
  CHECK(h.tail_sq == doctest::Approx(st.tail_sq));
  CHECK(h.region == SocRegion::kInterior);

  // nu = v_i is a no-op
  SocState same = soc_state_refresh(st, v, 2, v[2]);
  CHECK(same.rho1 == doctest::Approx(st.rho1));
  CHECK(same.rho2 == doctest::Approx(st.rho2));
  CHECK(same.region == st.region);

  CHECK_THROWS_AS(soc_state_refresh(st, v, 9, 0.0), DimensionError);

  // 1e5 random single-coordinate perturbations match the from-scratch state
  for (int t = 0; t < 100000; ++t) {
    const std::size_t n = 3 + rng.below(8);
    std::vector<double> vv(n), uu(n);
    rng.fill_gaussian(vv);
    SocState s0 = soc_project(vv, uu);
    const std::size_t i = rng.below(n);
    const double nu = rng.gaussian();
    SocState re = soc_state_refresh(s0, vv, i, nu);
    vv[i] = nu;
    SocState fresh = soc_state_from(vv);
    REQUIRE(std::abs(re.rho1 - fresh.rho1) <= 1e-9 * (1.0 + fresh.rho1));
    REQUIRE(std::abs(re.rho2 - fresh.rho2) <= 1e-9 * (1.0 + std::abs(fresh.rho2)));
    REQUIRE(re.region == fresh.region);
  }
}

TEST_CASE("soc_state_refresh instrumented cost is constant <= 20") {
  Rng rng(17);
  for (std::size_t n : {3UL, 10UL, 100UL, 1000UL}) {
    std::vector<double> v(n), u(n);
    rng.fill_gaussian(v);
    SocState st = soc_project(v, u);
    ops::reset();
    SocState re = soc_state_refresh(st, v, 1 + rng.below(n - 1), rng.gaussian());
    (void)re;
    const auto cost = ops::count();
    CHECK(cost <= 20);
    CHECK(cost >= 1);
  }
}

TEST_CASE("halfspace cap: regions, ties, and the QP oracle") {
  // R^2 instance from the normalized geometry
  const double s2 = std::sqrt(0.5);
  std::vector<double> a1{s2, s2}, a2{1.0, 0.0};
  HalfspaceCap cap(a1, s2, a2, 0.1);

  // x already inside D2 stays fixed (region P1)
  std::vector<double> x{0.2, 0.3}, out(2);
  cap.project(x, out);
  CHECK(out[0] == doctest::Approx(0.2));
  CHECK(out[1] == doctest::Approx(0.3));
  CHECK(cap.region(cap.w1(x), cap.w2(x)) == 1);

  // random points vs the projection QP oracle (1e3 samples)
  Rng rng(23);
  DenseMatrix g(2, 2);
  g.at(0, 0) = a1[0];
  g.at(0, 1) = a1[1];
  g.at(1, 0) = -a2[0];
  g.at(1, 1) = -a2[1];
  std::vector<double> h{s2, -0.1};
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> y{4.0 * rng.gaussian(), 4.0 * rng.gaussian()}, o(2);
    cap.project(y, o);
    auto ref = oracle::project_polyhedron(y, g, h);
    REQUIRE(std::abs(o[0] - ref[0]) <= 1e-8);
    REQUIRE(std::abs(o[1] - ref[1]) <= 1e-8);
  }

  // region dispatch from (w1, w2) equals dispatch from direct inner products
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> y{4.0 * rng.gaussian(), 4.0 * rng.gaussian()};
    const double w1 = kern::dot(cap.a1(), y) - cap.b1();
    const double w2 = kern::dot(cap.a2(), y) - cap.b2();
    REQUIRE(cap.region(w1, w2) == cap.region(cap.w1(y), cap.w2(y)));
  }

  // unsupported geometries are rejected rather than guessed
  CHECK_THROWS_AS(HalfspaceCap({1.0, 0.0}, 0.0, {-1.0, 0.01}, 0.0),
                  UnsupportedGeometryError);  // a1'a2 < 0
  CHECK_THROWS_AS(HalfspaceCap({1.0, 0.0}, 0.0, {1.0, 0.0}, 0.5),
                  UnsupportedGeometryError);  // parallel
  CHECK_THROWS_AS(HalfspaceCap({2.0, 0.0}, 0.0, {0.0, 1.0}, 0.5),
                  UnsupportedGeometryError);  // not unit
}

TEST_CASE("prox_tv_dual: zero ball, small-gamma limit, Moreau cross-check") {
  Rng rng(29);
  std::vector<double> s(4), t(3), b(3), so(4), to(3);
  rng.fill_gaussian(s);
  rng.fill_gaussian(t);
  rng.fill_gaussian(b);

  prox_tv_dual(s, t, 0.5, 0.0, b, so, to);
  for (double v : so) CHECK(v == 0.0);

  prox_tv_dual(s, t, 1e-12, 0.7, b, so, to);
  for (int i = 0; i < 4; ++i)
    CHECK(so[i] == doctest::Approx(std::min(0.7, std::max(-0.7, s[i]))));
  for (int i = 0; i < 3; ++i) CHECK(to[i] == doctest::Approx(t[i]).epsilon(1e-9));

  CHECK_THROWS_AS(prox_tv_dual(s, t, 0.0, 0.7, b, so, to), ConfigError);

  // against the Moreau route: h(p,q) = lambda||p||_1 + 0.5||q-b||^2
  const double lambda = 0.8;
  for (int trial = 0; trial < 100; ++trial) {
    rng.fill_gaussian(s);
    rng.fill_gaussian(t);
    const double gamma = 0.2 + 2.0 * rng.uniform();
    prox_tv_dual(s, t, gamma, lambda, b, so, to);

    ProxFn prox_h = [&](std::span<const double> in, double step,
                        std::span<double> o) {
      prox_l1(in.subspan(0, 4), step * lambda, o.subspan(0, 4));
      for (int i = 0; i < 3; ++i)
        o[4 + i] = (in[4 + i] + step * b[i]) / (1.0 + step);
    };
    std::vector<double> in(7), o(7);
    for (int i = 0; i < 4; ++i) in[i] = s[i];
    for (int i = 0; i < 3; ++i) in[4 + i] = t[i];
    prox_conjugate(prox_h, in, gamma, o);
    for (int i = 0; i < 4; ++i) REQUIRE(std::abs(so[i] - o[i]) <= 1e-10);
    for (int i = 0; i < 3; ++i) REQUIRE(std::abs(to[i] - o[4 + i]) <= 1e-10);
  }
}

TEST_CASE("projections idempotent, proxes firmly nonexpansive") {
  Rng rng(31);
  struct Named {
    const char* name;
    ProxFn fn;
  };
  std::vector<Named> proxes;
  proxes.push_back({"l1", make_prox_l1(0.7)});
  proxes.push_back({"box", make_proj_interval(-0.3, 1.1)});
  proxes.push_back({"ball", make_proj_l2_ball(0.9)});
  proxes.push_back({"group", make_prox_l2_norm(0.5)});
  proxes.push_back({"quad", make_prox_quadratic(1.3, -0.2)});

  for (auto& p : proxes) {
    CAPTURE(p.name);
    for (int t = 0; t < 1000; ++t) {
      std::vector<double> x(5), y(5), px(5), py(5);
      rng.fill_gaussian(x);
      rng.fill_gaussian(y);
      p.fn(x, 1.0, px);
      p.fn(y, 1.0, py);
      double lhs = 0.0, rhs = 0.0;
      for (int i = 0; i < 5; ++i) {
        lhs += (px[i] - py[i]) * (px[i] - py[i]);
        rhs += (x[i] - y[i]) * (px[i] - py[i]);
      }
      REQUIRE(lhs <= rhs + 1e-12);
    }
  }

  // idempotence of the projections
  for (auto* name : {"box", "ball"}) {
    ProxFn proj = std::string(name) == "box" ? make_proj_interval(-0.3, 1.1)
                                             : make_proj_l2_ball(0.9);
    for (int t = 0; t < 200; ++t) {
      std::vector<double> x(5), p1(5), p2(5);
      rng.fill_gaussian(x);
      proj(x, 1.0, p1);
      proj(p1, 1.0, p2);
      for (int i = 0; i < 5; ++i) REQUIRE(std::abs(p2[i] - p1[i]) <= 1e-12);
    }
  }
}
