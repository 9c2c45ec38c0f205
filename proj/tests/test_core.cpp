#include "doctest.h"

#include <cmath>

#include "cfsplit/descriptor.hpp"
#include "cfsplit/fixed_point.hpp"
#include "cfsplit/kernels.hpp"
#include "cfsplit/prox.hpp"
#include "cfsplit/rng.hpp"
#include "oracles.hpp"

using namespace cfsplit;

namespace {

DenseMatrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  DenseMatrix m(r, c);
  for (double& v : m.all()) v = rng.gaussian();
  return m;
}

BlockVector random_iterate(const FixedPointOperator& op, Rng& rng) {
  BlockVector x(std::make_shared<const BlockPartition>(op.partition().sizes()));
  rng.fill_gaussian(x.all());
  return x;
}

}  // namespace

TEST_CASE("make_partition basics") {
  auto p = make_partition({2, 3});
  CHECK(p->num_blocks() == 2);
  CHECK(p->offset(0) == 0);
  CHECK(p->offset(1) == 2);
  CHECK(p->total_dim() == 5);

  auto single = make_partition({1});
  CHECK(single->num_blocks() == 1);
  CHECK(single->total_dim() == 1);

  CHECK_THROWS_AS(make_partition({}), InvalidPartitionError);
  CHECK_THROWS_AS(make_partition({2, 0, 1}), InvalidPartitionError);
}

TEST_CASE("chunked partition spreads the remainder (50-feature blocks)") {
  // 20958 features at ~50 per block: 419 blocks, some holding 51
  auto p = std::make_shared<const BlockPartition>(BlockPartition::chunked(20958, 50));
  CHECK(p->num_blocks() == 419);
  std::size_t n50 = 0, n51 = 0, total = 0;
  for (std::size_t s : p->sizes()) {
    total += s;
    if (s == 50) ++n50;
    if (s == 51) ++n51;
    CHECK((s == 50 || s == 51));
  }
  CHECK(total == 20958);
  CHECK(n50 + n51 == 419);
  CHECK(n51 == 20958 - 419 * 50);
}

TEST_CASE("apply_full: identity and one-step least squares") {
  Rng rng(7);
  auto part = make_partition({1, 2, 1});
  auto id = make_identity_operator(part);
  BlockVector x(part);
  rng.fill_gaussian(x.all());
  BlockVector tx = id->apply(x);
  for (std::size_t i = 0; i < x.dim(); ++i) CHECK(tx.all()[i] == x.all()[i]);

  // gradient-descent operator with A = I, b = 0, eta = 1: T x = 0
  DenseMatrix eye(3, 3);
  for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
  std::vector<double> zero(3, 0.0);
  auto op = make_linear_gradient(eye, zero, 1.0,
                                 LinearGradientRegime::kPrecomputedNormal);
  BlockVector y(std::make_shared<const BlockPartition>(op->partition().sizes()));
  rng.fill_gaussian(y.all());
  BlockVector ty = op->apply(y);
  for (double v : ty.all()) CHECK(v == doctest::Approx(0.0).epsilon(1e-14));

  // A = I2, b = (1,2), eta = 1: T(0,0) = (1,2) and (1,2) is the fixed point
  DenseMatrix i2(2, 2);
  i2.at(0, 0) = i2.at(1, 1) = 1.0;
  std::vector<double> b{1.0, 2.0};
  auto solve1 = make_linear_gradient(i2, b, 1.0,
                                     LinearGradientRegime::kPrecomputedNormal);
  BlockVector z0(std::make_shared<const BlockPartition>(solve1->partition().sizes()));
  BlockVector tz = solve1->apply(z0);
  CHECK(tz.all()[0] == doctest::Approx(1.0));
  CHECK(tz.all()[1] == doctest::Approx(2.0));
  BlockVector tz2 = solve1->apply(tz);
  CHECK(tz2.all()[0] == doctest::Approx(1.0));
  CHECK(tz2.all()[1] == doctest::Approx(2.0));
}

TEST_CASE("apply_full matches a naive triple-loop product oracle") {
  Rng rng(11);
  DenseMatrix a = random_matrix(3, 3, rng);
  std::vector<double> b(3);
  rng.fill_gaussian(b);
  const double eta = 0.3;
  auto op = make_linear_gradient(a, b, eta,
                                 LinearGradientRegime::kPrecomputedNormal);
  BlockVector x = random_iterate(*op, rng);

  // oracle: x - eta * A'(Ax - b) with explicit loops
  std::vector<double> ax(3, 0.0), grad(3, 0.0);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) ax[r] += a.at(r, c) * x.all()[c];
  for (int r = 0; r < 3; ++r) ax[r] -= b[r];
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < 3; ++r) grad[c] += a.at(r, c) * ax[r];

  BlockVector tx = op->apply(x);
  for (int c = 0; c < 3; ++c)
    CHECK(tx.all()[c] == doctest::Approx(x.all()[c] - eta * grad[c]).epsilon(1e-12));
}

TEST_CASE("dimension mismatch raises") {
  DenseMatrix a(2, 3);
  a.at(0, 0) = 1.0;
  std::vector<double> b(2, 0.0);
  auto op = make_linear_gradient(a, b, 0.5, LinearGradientRegime::kMaintainAx);
  BlockVector wrong(make_partition({2}));
  BlockVector out(make_partition({2}));
  CHECK_THROWS_AS(op->apply_full(wrong, out), DimensionError);
  CHECK_THROWS_AS(make_linear_gradient(DenseMatrix(0, 0), {}, 1.0,
                                       LinearGradientRegime::kMaintainAx),
                  DimensionError);
}

TEST_CASE("coordinate updates agree with the full update for every regime") {
  Rng rng(21);
  DenseMatrix a = random_matrix(5, 8, rng);
  std::vector<double> b(5);
  rng.fill_gaussian(b);
  for (auto regime : {LinearGradientRegime::kPrecomputedNormal,
                      LinearGradientRegime::kMaintainTx,
                      LinearGradientRegime::kMaintainAx}) {
    auto op = make_linear_gradient(a, b, 0.04, regime);
    for (int trial = 0; trial < 20; ++trial) {
      BlockVector x = random_iterate(*op, rng);
      MaintainedCache cache;
      op->init_cache(x, cache);
      BlockVector tx = op->apply(x);
      for (std::size_t i = 0; i < op->partition().num_blocks(); ++i) {
        std::vector<double> val(1);
        op->coordinate_value(x, i, cache, val);
        CHECK(std::abs(val[0] - tx[i]) <=
              1e-10 * std::max(1.0, std::abs(tx[i])));
      }
    }
  }
}

TEST_CASE("Example 2.2 regime reads Tx from the cache and refreshes rank-1") {
  Rng rng(5);
  DenseMatrix a = random_matrix(6, 4, rng);
  std::vector<double> b(6);
  rng.fill_gaussian(b);
  auto op = make_linear_gradient(a, b, 0.05, LinearGradientRegime::kMaintainTx);
  BlockVector x = random_iterate(*op, rng);
  MaintainedCache cache;
  op->init_cache(x, cache);
  // several undamped coordinate commits keep the cache faithful
  for (int t = 0; t < 200; ++t) apply_coordinate(*op, x, rng.below(4), cache);
  CHECK(cache_audit(*op, x, cache) <= 1e-8);
}

TEST_CASE("separable blocks need no cache") {
  auto part = make_partition({1, 1, 1});
  auto id = make_identity_operator(part);
  CHECK(id->cache_schema().empty());
  BlockVector x(part);
  x.raw() = {1.0, -2.0, 0.5};
  MaintainedCache cache;
  id->init_cache(x, cache);
  CHECK(cache.empty());
  std::vector<double> out(1);
  id->coordinate_value(x, 1, cache, out);
  CHECK(out[0] == -2.0);
}

TEST_CASE("cross-regime consistency: identical damped iterates over 10 sweeps") {
  Rng rng(31);
  DenseMatrix a = random_matrix(7, 5, rng);
  std::vector<double> b(7);
  rng.fill_gaussian(b);
  std::vector<OperatorPtr> ops;
  for (auto regime : {LinearGradientRegime::kPrecomputedNormal,
                      LinearGradientRegime::kMaintainTx,
                      LinearGradientRegime::kMaintainAx})
    ops.push_back(make_linear_gradient(a, b, 0.05, regime));

  std::vector<BlockVector> xs;
  std::vector<MaintainedCache> caches(3);
  for (int r = 0; r < 3; ++r) {
    xs.emplace_back(std::make_shared<const BlockPartition>(
        ops[r]->partition().sizes()));
    xs[r].raw().assign(5, 0.25);
    ops[r]->init_cache(xs[r], caches[r]);
  }
  std::vector<double> scratch(2);
  Rng seq(99);
  for (int t = 0; t < 50; ++t) {
    const std::size_t i = seq.below(5);
    for (int r = 0; r < 3; ++r)
      damped_coordinate_commit(*ops[r], xs[r], i, 0.9, caches[r], scratch);
  }
  for (std::size_t e = 0; e < 5; ++e) {
    CHECK(std::abs(xs[0].all()[e] - xs[1].all()[e]) <= 1e-12);
    CHECK(std::abs(xs[0].all()[e] - xs[2].all()[e]) <= 1e-12);
  }
}

TEST_CASE("cache_audit: fresh, stormed, and corrupted") {
  Rng rng(13);
  // Example 2.3 shape: p = 20, m = 200
  DenseMatrix a = random_matrix(20, 200, rng);
  std::vector<double> b(20);
  rng.fill_gaussian(b);
  auto op = make_linear_gradient(a, b, 1e-3, LinearGradientRegime::kMaintainAx);
  BlockVector x = random_iterate(*op, rng);
  MaintainedCache cache;
  op->init_cache(x, cache);
  CHECK(cache_audit(*op, x, cache) == 0.0);

  std::vector<double> scratch(2);
  for (int t = 0; t < 10000; ++t)
    damped_coordinate_commit(*op, x, rng.below(200), 0.8, cache, scratch);
  CHECK(cache_audit(*op, x, cache) <= 1e-8);

  cache.entry("Ax")[3] += 1.0;  // injected fault
  CHECK(cache_audit(*op, x, cache) > 1e-3);

  MaintainedCache empty;
  CHECK_THROWS_AS(cache_audit(*op, x, empty), CacheInvalidError);
  std::vector<double> out(1);
  CHECK_THROWS_AS(op->coordinate_value(x, 0, empty, out), CacheInvalidError);
}

TEST_CASE("classification calculus per the composition tables") {
  OperatorDescriptor sep{SepClass::kSeparable, CfClass::kType1, 100, 1};
  OperatorDescriptor near{SepClass::kNearlySeparable, CfClass::kType1, 100, 1};
  OperatorDescriptor non_t1{SepClass::kNonSeparable, CfClass::kType1, 10000, 100};
  OperatorDescriptor non_t2{SepClass::kNonSeparable, CfClass::kType2, 10000, 100};
  OperatorDescriptor cheap{SepClass::kNonSeparable, CfClass::kCheap, 100, 100};
  OperatorDescriptor none{SepClass::kNonSeparable, CfClass::kNone, 10000, 10000};

  // Table 1
  CHECK(compose_sep(sep.sep, sep.sep) == SepClass::kSeparable);
  CHECK(compose_sep(sep.sep, near.sep) == SepClass::kNearlySeparable);
  CHECK(compose_sep(sep.sep, non_t1.sep) == SepClass::kNonSeparable);
  CHECK(compose_sep(near.sep, sep.sep) == SepClass::kNearlySeparable);
  CHECK(compose_sep(near.sep, non_t1.sep) == SepClass::kNonSeparable);
  // the case-by-case cell resolves conservatively
  CHECK(compose_sep(near.sep, near.sep) == SepClass::kNonSeparable);
  CHECK(compose_sep(near.sep, near.sep, /*certificate=*/true) ==
        SepClass::kNearlySeparable);
  CHECK(compose_sep(non_t1.sep, sep.sep) == SepClass::kNonSeparable);

  // Table 2 rows 5-9
  CHECK(classify_composition(near, non_t1).cf == CfClass::kType1);   // sp-dens
  CHECK(classify_composition(near, non_t2).cf == CfClass::kCfWithCache);
  CHECK(classify_composition(non_t2, sep).cf == CfClass::kType2);    // log-grad
  CHECK(classify_composition(non_t1, non_t2).cf == CfClass::kCfWithCache);  // den-den
  CHECK(classify_composition(cheap, non_t2).cf == CfClass::kCfWithCache);
  CHECK(classify_composition(non_t1, cheap).cf == CfClass::kType1);
  // unknown combinations degrade to none
  CHECK(classify_composition(none, none).cf == CfClass::kNone);
  CHECK(classify_composition(non_t2, non_t2).cf == CfClass::kNone);
  CHECK(classify_composition(sep, sep).sep == SepClass::kSeparable);
  CHECK(is_cf(classify_composition(sep, sep).cf));
}

TEST_CASE("classification witnesses meet the declared cost bounds") {
  Rng rng(17);
  const std::size_t m = 60;

  // den-den witness (F1 ∘ F2): dense A, dense B, maintain Bx
  DenseMatrix da = random_matrix(m, m, rng), db = random_matrix(m, m, rng);
  {
    std::vector<double> bx(m), x(m);
    rng.fill_gaussian(x);
    ops::reset();
    kern::gemv(db.all(), m, m, x, bx);
    std::vector<double> abx(m);
    kern::gemv(da.all(), m, m, bx, abx);
    const auto full_cost = ops::count();

    // one coordinate update with the cache: read (A (Bx))_i and refresh Bx
    ops::reset();
    double vi = kern::dot(da.row(3), bx);
    (void)vi;
    std::vector<double> delta{0.7};
    da.add_col_block_times(1.0, 3, 1, delta, bx);
    const auto coord_cost = ops::count();
    CHECK(static_cast<double>(coord_cost) * m <= 4.0 * static_cast<double>(full_cost));
  }

  // sp-dens witness ((nearly-sep) ∘ F1): sparse rows over a dense map
  {
    std::vector<SparseMatrix::Triplet> trip;
    for (std::size_t r = 0; r < m; ++r) {
      trip.push_back({r, r, 1.0});
      trip.push_back({r, (r + 1) % m, -0.5});
    }
    SparseMatrix sp(m, m, std::move(trip));
    std::vector<double> x(m);
    rng.fill_gaussian(x);
    ops::reset();
    std::vector<double> bx(m), sbx(m);
    kern::gemv(db.all(), m, m, x, bx);
    sp.mul(bx, sbx);
    const auto full_cost = ops::count();

    // coordinate i needs only the sparse row's inputs from Bx
    ops::reset();
    double acc = 0.0;
    for (std::size_t k = sp.row_begin(4); k < sp.row_end(4); ++k)
      acc += sp.row_val(k) * kern::dot(db.row(sp.row_col(k)), x);
    (void)acc;
    const auto coord_cost = ops::count();
    CHECK(static_cast<double>(coord_cost) * m <= 4.0 * static_cast<double>(full_cost));
  }

  // separable witness: diagonal map has coordinate cost independent of m
  {
    std::vector<double> diag(m);
    rng.fill_gaussian(diag);
    ops::reset();
    double yi = diag[5] * 2.0;
    (void)yi;
    const auto cost_small = ops::count();
    CHECK(cost_small == 0);  // a single multiply is O(1), not counted via kernels
    // via kernels: one-element dot
    std::vector<double> one{diag[5]}, xin{2.0};
    ops::reset();
    kern::dot(one, xin);
    CHECK(ops::count() == 2);  // independent of m by construction
  }
}

TEST_CASE("squared-hinge gradient kernel: cache refresh and inactive branch") {
  Rng rng(3);
  const std::size_t m = 12;
  SquaredHingeGrad hinge;
  hinge.a.resize(m);
  rng.fill_gaussian(hinge.a);
  hinge.beta = 0.8;
  std::vector<double> x(m);
  rng.fill_gaussian(x);
  MaintainedCache cache;
  hinge.init_cache(x, cache);

  // matches finite differences of 0.5 max(0, 1 - beta a'x)^2
  auto f = [&](std::span<const double> xx) {
    double ax = 0.0;
    for (std::size_t i = 0; i < m; ++i) ax += hinge.a[i] * xx[i];
    const double hv = std::max(0.0, 1.0 - hinge.beta * ax);
    return 0.5 * hv * hv;
  };
  std::vector<double> grad(m);
  hinge.grad_full(cache, grad);
  auto fd = oracle::fd_gradient(f, x);
  for (std::size_t i = 0; i < m; ++i)
    CHECK(grad[i] == doctest::Approx(fd[i]).epsilon(1e-5));

  // inactive hinge: a'x >= 1/beta gives a zero gradient
  std::vector<double> xfar = x;
  const double ax = kern::dot(hinge.a, x);
  const double shift = (1.0 / hinge.beta + 10.0 - ax) / hinge.a[0];
  xfar[0] += shift;
  MaintainedCache cache2;
  hinge.init_cache(xfar, cache2);
  hinge.grad_full(cache2, grad);
  for (double g : grad) CHECK(g == 0.0);

  // O(1) refresh stays faithful over a storm
  for (int t = 0; t < 1000; ++t) {
    const std::size_t i = rng.below(m);
    const double nu = rng.gaussian();
    hinge.refresh(i, x[i], nu, cache);
    x[i] = nu;
  }
  CHECK(std::abs(cache.scalar("ax") - kern::dot(hinge.a, x)) <= 1e-9);

  // a = 0 gives a zero gradient
  SquaredHingeGrad zeroa;
  zeroa.a.assign(m, 0.0);
  MaintainedCache c3;
  zeroa.init_cache(x, c3);
  zeroa.grad_full(c3, grad);
  for (double g : grad) CHECK(g == 0.0);
}

TEST_CASE("scalar-affine gradient kernel vs central differences") {
  Rng rng(23);
  const std::size_t p = 9, m = 6;
  ScalarAffineGrad saff;
  saff.a = random_matrix(p, m, rng);
  saff.b.resize(p);
  rng.fill_gaussian(saff.b);
  std::vector<double> labels(p);
  for (double& v : labels) v = rng.uniform() < 0.5 ? -1.0 : 1.0;
  saff.dphi = [&labels](std::size_t j, double u) {
    return -labels[j] / (1.0 + std::exp(labels[j] * u));
  };
  auto f = [&](std::span<const double> x) {
    double s = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      double u = saff.b[j];
      for (std::size_t i = 0; i < m; ++i) u += saff.a.at(j, i) * x[i];
      s += std::log1p(std::exp(-labels[j] * u));
    }
    return s;
  };
  std::vector<double> x(m);
  rng.fill_gaussian(x);
  MaintainedCache cache;
  saff.init_cache(x, cache);
  std::vector<double> grad(m);
  saff.grad_full(cache, grad);
  auto fd = oracle::fd_gradient(f, x);
  for (std::size_t i = 0; i < m; ++i)
    CHECK(grad[i] == doctest::Approx(fd[i]).epsilon(1e-6));

  // phi_j(u) = u^2/2 with A = I, b = 0 gives grad = x
  ScalarAffineGrad idsq;
  idsq.a = DenseMatrix(m, m);
  for (std::size_t i = 0; i < m; ++i) idsq.a.at(i, i) = 1.0;
  idsq.b.assign(m, 0.0);
  idsq.dphi = [](std::size_t, double u) { return u; };
  MaintainedCache c2;
  idsq.init_cache(x, c2);
  idsq.grad_full(c2, grad);
  for (std::size_t i = 0; i < m; ++i)
    CHECK(grad[i] == doctest::Approx(x[i]).epsilon(1e-12));

  // block path equals the full path and the refresh stays faithful
  std::vector<double> g2(2);
  saff.grad_block(2, 2, cache, g2);
  saff.grad_full(cache, grad);
  CHECK(g2[0] == doctest::Approx(grad[2]).epsilon(1e-12));
  CHECK(g2[1] == doctest::Approx(grad[3]).epsilon(1e-12));

  std::vector<double> oldb{x[1]}, newb{x[1] + 0.37};
  saff.refresh_block(1, oldb, newb, cache);
  x[1] += 0.37;
  MaintainedCache fresh;
  saff.init_cache(x, fresh);
  auto u1 = cache.entry("affine");
  auto u2 = fresh.entry("affine");
  for (std::size_t j = 0; j < p; ++j)
    CHECK(u1[j] == doctest::Approx(u2[j]).epsilon(1e-12));
}

TEST_CASE("km_relax: eta = 1 is T, eta = 1/2 halves the residual step") {
  Rng rng(41);
  DenseMatrix a = random_matrix(4, 4, rng);
  std::vector<double> b(4);
  rng.fill_gaussian(b);
  auto t = make_linear_gradient(a, b, 0.02, LinearGradientRegime::kPrecomputedNormal);
  auto t1 = km_relax(t, 1.0);
  auto thalf = km_relax(t, 0.5);
  BlockVector x = random_iterate(*t, rng);
  BlockVector tx = t->apply(x), t1x = t1->apply(x), thx = thalf->apply(x);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(t1x.all()[i] == doctest::Approx(tx.all()[i]).epsilon(1e-14));
    CHECK(thx.all()[i] ==
          doctest::Approx(0.5 * x.all()[i] + 0.5 * tx.all()[i]).epsilon(1e-14));
  }
  CHECK_THROWS_AS(km_relax(t, 0.0), ConfigError);
  CHECK_THROWS_AS(km_relax(t, 1.5), ConfigError);
}

TEST_CASE("fixed_point_residual definition") {
  Rng rng(43);
  auto part = make_partition({1});
  // T = I/2 at x = (2): ||x - Tx|| = 1
  auto halfop = make_full_update_operator(
      part,
      [](std::span<const double> in, std::span<double> out) {
        out[0] = 0.5 * in[0];
      },
      OperatorDescriptor{});
  BlockVector x(part);
  x.raw() = {2.0};
  CHECK(fixed_point_residual(*halfop, x) == doctest::Approx(1.0));
  x.raw() = {0.0};
  CHECK(fixed_point_residual(*halfop, x) == doctest::Approx(0.0));
}
