#ifndef CFSPLIT_EXPERIMENT_HPP_
#define CFSPLIT_EXPERIMENT_HPP_

#include <optional>
#include <string>

#include "cfsplit/apps.hpp"
#include "cfsplit/io.hpp"

namespace cfsplit {

// Flat key = value configuration (file keys and CLI overrides share one
// namespace).  Recognized keys:
//   problem      least-squares | logistic | portfolio | tv-image | nmf |
//                group-lasso | svm-unbiased | svm-biased-pd | svm-biased-3s |
//                network | mesh
//   data         LIBSVM path (least-squares, logistic, svm-*)
//   image        PGM path (tv-image)
//   rows cols rank   synthetic dimensions
//   seed         instance + driver seed
//   driver       seq | sync | async | full
//   rule         cyclic | shuffle | random | greedy
//   workers tau  parallel driver knobs
//   async.read   consistent | inconsistent
//   async.delay  uniform | fixed | geometric
//   async.threads  0 | 1 (real-thread backend)
//   eta          damping step (async default: 0.99 * eta_max_bound)
//   lambda block ret   problem parameters
//   epochs tol   stopping rule
//   out          trace CSV path
struct ExperimentSummary {
  int exit_code = 0;  // 0 tol met, 2 budget exhausted
  bool converged = false;
  double final_residual = 0.0;
  std::optional<double> final_objective;
  std::uint64_t epochs = 0;
  std::uint64_t ops = 0;
  std::string trace_csv;
  std::vector<double> solution;  // extracted problem solution
};

ProblemInstance build_from_config(const ConfigMap& cfg);
ExperimentSummary run_experiment(const ConfigMap& cfg);

// dataset/image generation behind the `gen` verb
void generate_to_file(const std::string& kind, std::size_t rows,
                      std::size_t cols, std::uint64_t seed,
                      const std::string& path);

// compiled-in invariant suite (the `verify` verb); returns failure count
int run_verify_suite(std::uint64_t seed, bool verbose, std::string& report);

}  // namespace cfsplit

#endif  // CFSPLIT_EXPERIMENT_HPP_
