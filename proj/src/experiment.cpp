#include "cfsplit/experiment.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "cfsplit/kernels.hpp"
#include "cfsplit/linalg.hpp"
#include "cfsplit/rng.hpp"

namespace cfsplit {

namespace {

std::string get(const ConfigMap& cfg, const std::string& key,
                const std::string& fallback = {}) {
  auto it = cfg.find(key);
  return it == cfg.end() ? fallback : it->second;
}

double get_num(const ConfigMap& cfg, const std::string& key, double fallback) {
  auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw ConfigError("config: bad numeric value for " + key);
  }
}

std::size_t get_size(const ConfigMap& cfg, const std::string& key,
                     std::size_t fallback) {
  const double v = get_num(cfg, key, static_cast<double>(fallback));
  if (v < 0) throw ConfigError("config: " + key + " must be >= 0");
  return static_cast<std::size_t>(v);
}

}  // namespace

ProblemInstance build_from_config(const ConfigMap& cfg) {
  const std::string problem = get(cfg, "problem");
  if (problem.empty()) throw ConfigError("config: problem is required");
  const std::uint64_t seed = static_cast<std::uint64_t>(get_num(cfg, "seed", 1));
  SyntheticDims dims;
  dims.rows = get_size(cfg, "rows", 0);
  dims.cols = get_size(cfg, "cols", 0);
  dims.rank = get_size(cfg, "rank", 0);
  const std::string data = get(cfg, "data");

  if (problem == "logistic" && !data.empty()) {
    auto ds = read_libsvm(data);
    if (!ds.labels_are_binary())
      throw ConfigError("logistic: labels must be +-1 in " + data);
    return build_logistic_l1(ds, get_num(cfg, "lambda", 1e-4),
                             get_size(cfg, "block", 50));
  }
  if (problem == "least-squares" && !data.empty()) {
    auto ds = read_libsvm(data);
    DenseMatrix a = ds.to_dense();
    auto coord = make_coordinate_least_squares(a, ds.labels);
    const double norm = linalg::spectral_norm(a);
    auto full = make_linear_gradient(a, ds.labels, 2.0 / (norm * norm),
                                     LinearGradientRegime::kMaintainTx);
    ProblemInstance inst;
    inst.name = "least-squares";
    inst.full_op = full;
    inst.coord = make_operator_process(coord);
    inst.z0 = BlockVector(std::make_shared<const BlockPartition>(
        coord->partition().sizes()));
    inst.solution_dim = a.cols();
    inst.extract_solution = [](const BlockVector& z) {
      return std::vector<double>(z.all().begin(), z.all().end());
    };
    auto ac = std::make_shared<DenseMatrix>(std::move(a));
    auto bc = std::make_shared<std::vector<double>>(ds.labels);
    inst.objective = [ac, bc](std::span<const double> x) {
      std::vector<double> r(ac->rows());
      ac->mul(x, r);
      kern::axpy(-1.0, *bc, r);
      return 0.5 * kern::nrm2sq(r);
    };
    return inst;
  }
  if (problem == "tv-image" && !get(cfg, "image").empty()) {
    Image img = read_pgm(get(cfg, "image"));
    Rng rng(seed);
    std::vector<SparseMatrix::Triplet> trip;
    std::vector<double> b;
    const double frac = get_num(cfg, "sample", 0.5);
    for (std::size_t q = 0; q < img.pixels.size(); ++q)
      if (rng.uniform() < frac) {
        trip.push_back({b.size(), q, 1.0});
        b.push_back(img.pixels[q] / static_cast<double>(img.maxval));
      }
    if (b.empty()) throw ConfigError("tv-image: sampling produced no rows");
    TvProblem tv;
    tv.grid_h = img.height;
    tv.grid_w = img.width;
    tv.sampling = SparseMatrix(b.size(), img.pixels.size(), std::move(trip));
    tv.b = std::move(b);
    tv.lambda = get_num(cfg, "lambda", 0.05);
    return build_tv_reconstruction(tv);
  }
  if (problem == "svm-unbiased" || problem == "svm-biased-pd" ||
      problem == "svm-biased-3s") {
    DenseMatrix samples;
    std::vector<double> labels;
    if (!data.empty()) {
      auto ds = read_libsvm(data);
      if (!ds.labels_are_binary())
        throw ConfigError("svm: labels must be +-1 in " + data);
      samples = ds.to_dense();
      labels = ds.labels;
    } else {
      const std::size_t m = dims.rows ? dims.rows : 20;
      const std::size_t feat = dims.cols ? dims.cols : 4;
      auto ds = gen_logistic_data(m, feat, seed);
      samples = ds.to_dense();
      labels = ds.labels;
    }
    const std::size_t m = samples.rows();
    DenseMatrix q(m, m);
    const double sigma = get_num(cfg, "sigma", 0.0);
    DenseMatrix k = sigma > 0.0 ? gaussian_kernel(samples, sigma) : DenseMatrix();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        const double kij =
            sigma > 0.0 ? k.at(i, j) : kern::dot(samples.row(i), samples.row(j));
        q.at(i, j) = labels[i] * labels[j] * kij;
      }
    const double c = get_num(cfg, "C", 1.0);
    if (problem == "svm-unbiased") return build_svm_unbiased(q, c);
    if (problem == "svm-biased-pd") return build_svm_biased_pd(q, labels, c);
    return build_svm_biased_3s(q, labels, c);
  }
  if (problem == "group-lasso") {
    const std::size_t p = dims.rows ? dims.rows : 30;
    const std::size_t n = dims.cols ? dims.cols : 24;
    const std::size_t gsize = get_size(cfg, "group", 4);
    Rng rng(seed);
    DenseMatrix a(p, n);
    for (double& v : a.all()) v = rng.gaussian();
    std::vector<double> b(p);
    for (double& v : b) v = rng.gaussian();
    GroupSpec spec;
    for (std::size_t e = 0; e < n; e += gsize) {
      std::vector<std::size_t> g;
      for (std::size_t t = e; t < std::min(n, e + gsize); ++t) g.push_back(t);
      spec.groups.push_back(std::move(g));
      spec.lambdas.push_back(get_num(cfg, "lambda", 0.5));
    }
    return build_group_lasso(a, b, spec, /*overlapping=*/false);
  }
  if (problem == "network") {
    const std::size_t m = dims.rows ? dims.rows : 4;
    Rng rng(seed);
    std::vector<ProxFn> prox(m);
    std::vector<std::function<double(std::span<const double>)>> fv(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double target = rng.gaussian();
      prox[i] = [target](std::span<const double> v, double t, std::span<double> o) {
        for (std::size_t k = 0; k < v.size(); ++k)
          o[k] = (v[k] + t * target) / (1.0 + t);
      };
      fv[i] = [target](std::span<const double> y) {
        double s = 0.0;
        for (double v : y) s += 0.5 * (v - target) * (v - target);
        return s;
      };
    }
    return build_network_consensus(std::move(prox), dims.cols ? dims.cols : 1,
                                   get_num(cfg, "gamma", 0.2), std::move(fv));
  }
  if (problem == "mesh") {
    const std::size_t nodes = dims.rows ? dims.rows : 8;
    Rng rng(seed);
    MeshProblem mesh;
    mesh.nodes = nodes;
    mesh.dim = dims.cols ? dims.cols : 1;
    for (std::size_t i = 0; i + 1 < nodes; ++i) mesh.edges.push_back({i, i + 1});
    mesh.noisy.resize(nodes * mesh.dim);
    for (double& v : mesh.noisy) v = rng.gaussian();
    mesh.lambda = get_num(cfg, "lambda", 0.5);
    return build_mesh_denoise(mesh);
  }
  // synthetic kinds
  return gen_synthetic(problem, dims, seed);
}

ExperimentSummary run_experiment(const ConfigMap& cfg) {
  ProblemInstance inst = build_from_config(cfg);

  StopRule stop;
  stop.max_epochs = get_size(cfg, "epochs", 100);
  stop.tol = get_num(cfg, "tol", 1e-8);
  const std::uint64_t seed = static_cast<std::uint64_t>(get_num(cfg, "seed", 1));
  const std::string driver = get(cfg, "driver", "seq");
  const double eta_flag = get_num(cfg, "eta", 0.0);

  RunResult result{inst.z0, {}, false, 0.0, std::nullopt, 0, 0};
  if (driver == "seq") {
    IndexRule rule;
    rule.kind = parse_rule(get(cfg, "rule", "cyclic"));
    const double eta = eta_flag > 0.0 ? eta_flag : 1.0;
    result = run_sequential(*inst.coord, inst.z0, rule, constant_eta(eta), stop,
                            seed);
  } else if (driver == "sync") {
    const double eta = eta_flag > 0.0 ? eta_flag : 1.0;
    result = run_sync_parallel(*inst.coord, inst.z0,
                               full_sweep_schedule(inst.coord->num_units()),
                               get_size(cfg, "workers", 1), constant_eta(eta),
                               stop);
  } else if (driver == "async") {
    AsyncConfig acfg;
    acfg.workers = get_size(cfg, "workers", 1);
    acfg.tau = get_size(cfg, "tau", acfg.workers > 0 ? acfg.workers - 1 : 0);
    acfg.seed = seed;
    const std::string read = get(cfg, "async.read", "consistent");
    acfg.read = read == "inconsistent" ? ReadMode::kInconsistent
                                       : ReadMode::kConsistent;
    const std::string delay = get(cfg, "async.delay", "uniform");
    acfg.delay = delay == "fixed"       ? DelayModel::kFixed
                 : delay == "geometric" ? DelayModel::kGeometric
                                        : DelayModel::kUniform;
    acfg.use_threads = get_num(cfg, "async.threads", 0) != 0;
    const std::size_t units = inst.coord->num_units();
    acfg.eta = eta_flag > 0.0
                   ? eta_flag
                   : 0.99 * eta_max_bound(units, 1.0 / static_cast<double>(units),
                                          1.0, acfg.tau);
    result = run_async_parallel(*inst.coord, inst.z0, acfg, stop);
  } else if (driver == "full") {
    // I_k = [m]: every round is exactly one full update
    auto alias = make_operator_process(inst.full_op);
    const double eta = eta_flag > 0.0 ? eta_flag : 1.0;
    result = run_sync_parallel(*alias, inst.z0,
                               full_sweep_schedule(alias->num_units()), 1,
                               constant_eta(eta), stop);
  } else {
    throw ConfigError("unknown driver: " + driver);
  }

  ExperimentSummary s;
  s.converged = result.converged;
  s.exit_code = result.converged ? 0 : 2;
  s.final_residual = result.final_residual;
  s.final_objective = result.final_objective;
  if (!s.final_objective && inst.objective)
    s.final_objective = inst.objective_of(result.solution);
  s.epochs = result.epochs;
  s.ops = result.ops;
  s.trace_csv = result.trace.to_csv();
  if (inst.extract_solution) s.solution = inst.extract_solution(result.solution);

  const std::string out = get(cfg, "out");
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw ParseError("cannot open " + out + " for writing");
    f << s.trace_csv;
  }
  return s;
}

void generate_to_file(const std::string& kind, std::size_t rows,
                      std::size_t cols, std::uint64_t seed,
                      const std::string& path) {
  if (kind == "least-squares") {
    write_libsvm(gen_least_squares_data(rows ? rows : 100, cols ? cols : 100, seed),
                 path);
    return;
  }
  if (kind == "logistic") {
    write_libsvm(gen_logistic_data(rows ? rows : 40, cols ? cols : 60, seed), path);
    return;
  }
  if (kind == "tv-image") {
    write_pgm(gen_piecewise_image(rows ? rows : 32, cols ? cols : 32, seed), path);
    return;
  }
  if (kind == "portfolio") {
    std::ofstream f(path);
    if (!f) throw ParseError("cannot open " + path);
    write_csv_matrix(gen_portfolio_data(cols ? cols : 50, seed), f,
                     "row 0: expected returns; rows 1..m: risk matrix");
    return;
  }
  if (kind == "nmf") {
    std::ofstream f(path);
    if (!f) throw ParseError("cannot open " + path);
    write_csv_matrix(gen_nonneg_lowrank(rows ? rows : 20, cols ? cols : 16, 3, seed),
                     f, "nonnegative low-rank matrix");
    return;
  }
  throw ConfigError("gen: unknown kind " + kind);
}

// ---- verify suite ----

namespace {

struct VerifyLog {
  std::ostringstream out;
  int failures = 0;
  bool verbose = false;

  void check(bool ok, const std::string& name, const std::string& detail = {}) {
    if (!ok) ++failures;
    if (!ok || verbose) {
      out << (ok ? "[ok]   " : "[FAIL] ") << name;
      if (!ok && !detail.empty()) out << " (" << detail << ")";
      out << "\n";
    }
  }
};

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::abs(b));
}

}  // namespace

int run_verify_suite(std::uint64_t seed, bool verbose, std::string& report) {
  VerifyLog log;
  log.verbose = verbose;
  Rng rng(seed);

  // projections idempotent + firmly nonexpansive on random pairs
  {
    bool idem = true, firm = true;
    for (int t = 0; t < 200; ++t) {
      std::vector<double> x(6), y(6), px(6), py(6), ppx(6);
      rng.fill_gaussian(x);
      rng.fill_gaussian(y);
      proj_l2_ball(x, 1.0, px);
      proj_l2_ball(y, 1.0, py);
      proj_l2_ball(px, 1.0, ppx);
      for (std::size_t i = 0; i < x.size(); ++i)
        if (std::abs(ppx[i] - px[i]) > 1e-12) idem = false;
      double lhs = 0.0, rhs = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        lhs += (px[i] - py[i]) * (px[i] - py[i]);
        rhs += (x[i] - y[i]) * (px[i] - py[i]);
      }
      if (lhs > rhs + 1e-12) firm = false;
    }
    log.check(idem, "projection idempotent");
    log.check(firm, "projection firmly nonexpansive");
  }

  // Moreau decomposition x = prox_{g f}(x) + g prox_{(1/g) f*}(x/g)
  {
    bool ok = true;
    auto prox = make_prox_l1();
    for (int t = 0; t < 100; ++t) {
      std::vector<double> x(5), a(5), scaled(5), b(5);
      rng.fill_gaussian(x);
      const double g = 0.1 + 2.0 * rng.uniform();
      prox(x, g, a);
      for (std::size_t i = 0; i < x.size(); ++i) scaled[i] = x[i] / g;
      prox_conjugate(prox, scaled, 1.0 / g, b);
      for (std::size_t i = 0; i < x.size(); ++i)
        if (std::abs(a[i] + g * b[i] - x[i]) > 1e-12) ok = false;
    }
    log.check(ok, "Moreau decomposition (l1)");
  }

  // coordinate-full agreement, linear gradient regimes
  {
    DenseMatrix a(7, 5);
    for (double& v : a.all()) v = rng.gaussian();
    std::vector<double> b(7);
    rng.fill_gaussian(b);
    bool ok = true;
    for (auto regime : {LinearGradientRegime::kPrecomputedNormal,
                        LinearGradientRegime::kMaintainTx,
                        LinearGradientRegime::kMaintainAx}) {
      auto op = make_linear_gradient(a, b, 0.05, regime);
      BlockVector x(std::make_shared<const BlockPartition>(
          op->partition().sizes()));
      for (double& v : x.raw()) v = rng.gaussian();
      MaintainedCache cache;
      op->init_cache(x, cache);
      BlockVector tx = op->apply(x);
      for (std::size_t i = 0; i < x.num_blocks(); ++i) {
        std::vector<double> val(1);
        op->coordinate_value(x, i, cache, val);
        if (rel_err(val[0], tx[i]) > 1e-10) ok = false;
      }
    }
    log.check(ok, "coordinate/full agreement (least squares regimes)");
  }

  // cache audit after a short storm
  {
    DenseMatrix a(6, 10);
    for (double& v : a.all()) v = rng.gaussian();
    std::vector<double> b(6);
    rng.fill_gaussian(b);
    auto op = make_linear_gradient(a, b, 0.02, LinearGradientRegime::kMaintainAx);
    BlockVector x(std::make_shared<const BlockPartition>(
        op->partition().sizes()));
    MaintainedCache cache;
    op->init_cache(x, cache);
    std::vector<double> scratch(4);
    for (int t = 0; t < 2000; ++t)
      damped_coordinate_commit(*op, x, rng.below(10), 0.7, cache, scratch);
    log.check(cache_audit(*op, x, cache) <= 1e-8, "cache audit (maintain-Ax)");
  }

  // SOC refresh equals recompute
  {
    bool ok = true;
    for (int t = 0; t < 500; ++t) {
      std::vector<double> v(3 + rng.below(8));
      rng.fill_gaussian(v);
      std::vector<double> u(v.size());
      SocState st = soc_project(v, u);
      const std::size_t i = rng.below(v.size());
      const double nu = rng.gaussian();
      SocState re = soc_state_refresh(st, v, i, nu);
      v[i] = nu;
      SocState fresh = soc_state_from(v);
      if (std::abs(re.rho1 - fresh.rho1) > 1e-9 ||
          std::abs(re.rho2 - fresh.rho2) > 1e-9 || re.region != fresh.region)
        ok = false;
    }
    log.check(ok, "SOC O(1) state refresh");
  }

  // metric validity and nonexpansiveness scaffolding
  {
    DenseMatrix a(3, 4);
    for (double& v : a.all()) v = rng.gaussian();
    auto rep = validate_metric(a, 0.1, 0.1);
    auto bad = validate_metric(a, 100.0, 100.0);
    log.check(rep.valid && !bad.valid, "metric validity test");
  }

  // scheme reductions: RPRS(1/2) == DRS
  {
    auto ja = make_prox_l1();
    auto jb = make_proj_interval(-2.0, 2.0);
    bool ok = true;
    for (int t = 0; t < 50; ++t) {
      std::vector<double> x(6), d1(6), d2(6);
      rng.fill_gaussian(x);
      drs_step(ja, jb, 0.7, x, d1);
      rprs_step(ja, jb, 0.7, 0.5, x, d2);
      for (std::size_t i = 0; i < x.size(); ++i)
        if (std::abs(d1[i] - d2[i]) > 1e-12) ok = false;
    }
    log.check(ok, "RPRS(1/2) equals DRS");
  }

  // async step bound formula
  {
    const double v = eta_max_bound(10, 0.1, 1.0, 0);
    log.check(std::abs(v - 1.0) < 1e-12, "eta_max_bound(tau=0,kappa=1)");
  }

  report = log.out.str();
  return log.failures;
}

}  // namespace cfsplit
