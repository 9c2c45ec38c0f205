#include "cfsplit.h"

#include <cmath>
#include <cstring>
#include <string>

#include "cfsplit/experiment.hpp"

namespace {

thread_local std::string g_last_error;
thread_local std::string g_verify_report;

void set_error(const std::string& msg) { g_last_error = msg; }

template <typename Fn>
cfs_status guarded(Fn&& fn) {
  try {
    fn();
    return CFS_OK;
  } catch (const cfsplit::ConfigError& e) {
    set_error(e.what());
    return CFS_ERR_INVALID;
  } catch (const std::invalid_argument& e) {
    set_error(e.what());
    return CFS_ERR_INVALID;
  } catch (const std::exception& e) {
    set_error(e.what());
    return CFS_ERR_RUNTIME;
  }
}

}  // namespace

struct cfs_experiment {
  cfsplit::ConfigMap cfg;
  cfsplit::ExperimentSummary last;
  bool has_run = false;
};

extern "C" {

cfs_experiment* cfs_experiment_new(void) { return new cfs_experiment(); }

void cfs_experiment_free(cfs_experiment* e) { delete e; }

cfs_status cfs_experiment_set(cfs_experiment* e, const char* key,
                              const char* value) {
  if (!e || !key || !value) {
    set_error("null argument");
    return CFS_ERR_INVALID;
  }
  e->cfg[key] = value;
  return CFS_OK;
}

cfs_status cfs_experiment_load_config(cfs_experiment* e, const char* path) {
  if (!e || !path) {
    set_error("null argument");
    return CFS_ERR_INVALID;
  }
  return guarded([&] {
    // file keys do not override values set explicitly beforehand
    cfsplit::ConfigMap file = cfsplit::read_config(path);
    file.merge(e->cfg);
    e->cfg = std::move(file);
  });
}

cfs_status cfs_experiment_run(cfs_experiment* e, cfs_summary* out) {
  if (!e) {
    set_error("null experiment");
    return CFS_ERR_INVALID;
  }
  return guarded([&] {
    e->last = cfsplit::run_experiment(e->cfg);
    e->has_run = true;
    if (out) {
      out->exit_code = e->last.exit_code;
      out->converged = e->last.converged ? 1 : 0;
      out->final_residual = e->last.final_residual;
      out->final_objective =
          e->last.final_objective ? *e->last.final_objective
                                  : std::nan("");
      out->epochs = e->last.epochs;
      out->ops = e->last.ops;
    }
  });
}

const char* cfs_experiment_trace(const cfs_experiment* e) {
  return e && e->has_run ? e->last.trace_csv.c_str() : "";
}

cfs_status cfs_experiment_solution(const cfs_experiment* e, const double** data,
                                   size_t* len) {
  if (!e || !data || !len) {
    set_error("null argument");
    return CFS_ERR_INVALID;
  }
  if (!e->has_run) {
    set_error("experiment has not run");
    return CFS_ERR_INVALID;
  }
  *data = e->last.solution.data();
  *len = e->last.solution.size();
  return CFS_OK;
}

cfs_status cfs_gen(const char* kind, uint64_t rows, uint64_t cols, uint64_t seed,
                   const char* out_path) {
  if (!kind || !out_path) {
    set_error("null argument");
    return CFS_ERR_INVALID;
  }
  return guarded([&] {
    cfsplit::generate_to_file(kind, static_cast<std::size_t>(rows),
                              static_cast<std::size_t>(cols), seed, out_path);
  });
}

int cfs_verify(uint64_t seed, int verbose, const char** report) {
  std::string text;
  int failures = 0;
  try {
    failures = cfsplit::run_verify_suite(seed, verbose != 0, text);
  } catch (const std::exception& e) {
    text += std::string("[FAIL] verify suite aborted: ") + e.what() + "\n";
    ++failures;
  }
  g_verify_report = std::move(text);
  if (report) *report = g_verify_report.c_str();
  return failures;
}

const char* cfs_last_error(void) { return g_last_error.c_str(); }

const char* cfs_version(void) { return "cfsplit 0.1.0"; }

}  // extern "C"
