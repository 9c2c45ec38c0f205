// Command-line harness over the cfsplit C API.
//
// Verbs: solve (run one experiment), gen (write synthetic datasets),
// verify (compiled-in invariant suites), bench (compare drivers/rules on one
// problem).  Everything flows through the flat key = value configuration.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cfsplit.h"

namespace {

struct CommonOpts {
  std::string problem, rule = "cyclic", driver = "seq";
  std::string config_path, out, data, image;
  std::uint64_t workers = 1, tau = 0, epochs = 100, seed = 1;
  std::uint64_t rows = 0, cols = 0, rank = 0;
  double tol = 1e-8, eta = 0.0, lambda = -1.0;
  bool tau_set = false, eta_set = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--problem", o.problem, "problem name");
  cmd->add_option("--rule", o.rule, "cyclic|shuffle|random|greedy");
  cmd->add_option("--driver", o.driver, "seq|sync|async|full");
  cmd->add_option("--workers", o.workers, "parallel agents");
  cmd->add_option("--tau", o.tau, "max async staleness")
      ->each([&](const std::string&) { o.tau_set = true; });
  cmd->add_option("--epochs", o.epochs, "epoch budget");
  cmd->add_option("--tol", o.tol, "residual tolerance");
  cmd->add_option("--seed", o.seed, "RNG seed");
  cmd->add_option("--eta", o.eta, "damping step")
      ->each([&](const std::string&) { o.eta_set = true; });
  cmd->add_option("--config", o.config_path, "key = value config file");
  cmd->add_option("--out", o.out, "trace CSV path");
  cmd->add_option("--data", o.data, "LIBSVM dataset path");
  cmd->add_option("--image", o.image, "PGM image path");
  cmd->add_option("--rows", o.rows, "synthetic rows / samples");
  cmd->add_option("--cols", o.cols, "synthetic cols / features");
  cmd->add_option("--rank", o.rank, "synthetic rank (nmf)");
  cmd->add_option("--lambda", o.lambda, "regularization weight");
}

int fail(const std::string& what) {
  std::fprintf(stderr, "error: %s: %s\n", what.c_str(), cfs_last_error());
  return 1;
}

struct ExperimentHandle {
  cfs_experiment* e = cfs_experiment_new();
  ~ExperimentHandle() { cfs_experiment_free(e); }
};

int configure(cfs_experiment* e, const CommonOpts& o) {
  auto set = [&](const char* k, const std::string& v) {
    return cfs_experiment_set(e, k, v.c_str()) == CFS_OK;
  };
  if (!o.problem.empty() && !set("problem", o.problem)) return 1;
  if (!set("rule", o.rule) || !set("driver", o.driver)) return 1;
  set("workers", std::to_string(o.workers));
  if (o.tau_set) set("tau", std::to_string(o.tau));
  set("epochs", std::to_string(o.epochs));
  set("tol", std::to_string(o.tol));
  set("seed", std::to_string(o.seed));
  if (o.eta_set) set("eta", std::to_string(o.eta));
  if (!o.out.empty()) set("out", o.out);
  if (!o.data.empty()) set("data", o.data);
  if (!o.image.empty()) set("image", o.image);
  if (o.rows) set("rows", std::to_string(o.rows));
  if (o.cols) set("cols", std::to_string(o.cols));
  if (o.rank) set("rank", std::to_string(o.rank));
  if (o.lambda >= 0.0) set("lambda", std::to_string(o.lambda));
  if (!o.config_path.empty() &&
      cfs_experiment_load_config(e, o.config_path.c_str()) != CFS_OK)
    return 1;
  return 0;
}

void print_summary(const cfs_summary& s) {
  std::printf("converged      %s\n", s.converged ? "yes" : "no (budget)");
  std::printf("epochs         %llu\n", static_cast<unsigned long long>(s.epochs));
  std::printf("counted ops    %llu\n", static_cast<unsigned long long>(s.ops));
  std::printf("residual       %.6e\n", s.final_residual);
  if (!std::isnan(s.final_objective))
    std::printf("objective      %.10e\n", s.final_objective);
}

int run_solve(const CommonOpts& o) {
  ExperimentHandle h;
  if (configure(h.e, o) != 0) return fail("configure");
  cfs_summary s{};
  if (cfs_experiment_run(h.e, &s) != CFS_OK) return fail("solve");
  print_summary(s);
  if (!o.out.empty()) std::printf("trace          %s\n", o.out.c_str());
  return s.exit_code;
}

int run_bench(const CommonOpts& o) {
  struct Row {
    const char* driver;
    const char* rule;
  };
  const Row rows[] = {{"full", "cyclic"},
                      {"seq", "cyclic"},
                      {"seq", "shuffle"},
                      {"seq", "random"},
                      {"sync", "cyclic"},
                      {"async", "random"}};
  std::printf("%-8s %-8s %-10s %-12s %-14s %s\n", "driver", "rule", "epochs",
              "ops", "residual", "objective");
  for (const auto& r : rows) {
    CommonOpts local = o;
    local.driver = r.driver;
    local.rule = r.rule;
    ExperimentHandle h;
    if (configure(h.e, local) != 0) return fail("configure");
    cfs_summary s{};
    if (cfs_experiment_run(h.e, &s) != CFS_OK) return fail("bench");
    std::printf("%-8s %-8s %-10llu %-12llu %-14.4e %.8e\n", r.driver, r.rule,
                static_cast<unsigned long long>(s.epochs),
                static_cast<unsigned long long>(s.ops), s.final_residual,
                std::isnan(s.final_objective) ? 0.0 : s.final_objective);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coordinate-friendly operator splitting toolkit"};
  app.require_subcommand(1);

  CommonOpts solve_opts, bench_opts;
  auto* solve = app.add_subcommand("solve", "run one experiment");
  add_common(solve, solve_opts);

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset/fixture");
  std::string gen_kind, gen_out;
  std::uint64_t gen_rows = 0, gen_cols = 0, gen_seed = 1;
  gen->add_option("--problem", gen_kind,
                  "least-squares|logistic|tv-image|portfolio|nmf")
      ->required();
  gen->add_option("--out", gen_out, "output path")->required();
  gen->add_option("--rows", gen_rows, "rows / samples / height");
  gen->add_option("--cols", gen_cols, "cols / features / width");
  gen->add_option("--seed", gen_seed, "RNG seed");

  auto* verify = app.add_subcommand("verify", "run the invariant suites");
  std::uint64_t verify_seed = 1;
  bool verify_verbose = false;
  verify->add_option("--seed", verify_seed, "RNG seed");
  verify->add_flag("-v,--verbose", verify_verbose, "print passing checks too");

  auto* bench = app.add_subcommand("bench", "compare drivers on one problem");
  add_common(bench, bench_opts);

  CLI11_PARSE(app, argc, argv);

  if (solve->parsed()) return run_solve(solve_opts);
  if (gen->parsed()) {
    if (cfs_gen(gen_kind.c_str(), gen_rows, gen_cols, gen_seed,
                gen_out.c_str()) != CFS_OK)
      return fail("gen");
    std::printf("wrote %s\n", gen_out.c_str());
    return 0;
  }
  if (verify->parsed()) {
    const char* report = nullptr;
    const int failures = cfs_verify(verify_seed, verify_verbose ? 1 : 0, &report);
    if (report && *report) std::fputs(report, stdout);
    std::printf("%s (%d failure%s)\n", failures == 0 ? "verify passed" : "verify FAILED",
                failures, failures == 1 ? "" : "s");
    return failures == 0 ? 0 : 1;
  }
  if (bench->parsed()) return run_bench(bench_opts);
  return 0;
}
