#ifndef CFSPLIT_EXECUTION_HPP_
#define CFSPLIT_EXECUTION_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "cfsplit/fixed_point.hpp"
#include "cfsplit/primal_dual.hpp"
#include "cfsplit/rng.hpp"

namespace cfsplit {

// ---- index rules ----

enum class IndexRuleKind : std::uint8_t {
  kCyclic,
  kShuffledCyclic,  // fresh permutation each epoch
  kRandom,          // sample from q (q_i > 0)
  kGreedy,          // Gauss-Southwell: argmax score, ties to lowest index
};

struct IndexRule {
  IndexRuleKind kind = IndexRuleKind::kCyclic;
  std::vector<double> q;  // random rule; empty = uniform
  static IndexRule cyclic() { return {IndexRuleKind::kCyclic, {}}; }
  static IndexRule shuffled() { return {IndexRuleKind::kShuffledCyclic, {}}; }
  static IndexRule random(std::vector<double> q = {}) {
    return {IndexRuleKind::kRandom, std::move(q)};
  }
  static IndexRule greedy() { return {IndexRuleKind::kGreedy, {}}; }
};

IndexRuleKind parse_rule(const std::string& name);

// Stateful selector; greedy consumes caller-supplied scores.
class IndexSelector {
 public:
  IndexSelector(IndexRule rule, std::size_t n, std::uint64_t seed);
  std::size_t next(std::uint64_t k,
                   const std::function<void(std::span<double>)>& scores = nullptr);
  const std::vector<double>& q() const { return q_; }
  double q_min() const { return q_min_; }
  bool uniform_q() const { return uniform_q_; }

 private:
  IndexRule rule_;
  std::size_t n_;
  Rng rng_;
  std::vector<double> q_, cum_, score_buf_;
  std::vector<std::size_t> order_;
  double q_min_ = 0.0;
  bool uniform_q_ = true;
};

// ---- traces ----

struct TraceRow {
  std::uint64_t k = 0;      // coordinate commits so far
  std::uint64_t epoch = 0;  // k / units
  std::uint64_t ops = 0;    // counted flops of iteration work
  double residual = 0.0;    // ||z - T z||
  std::optional<double> objective;
  double seconds = 0.0;     // 0 for simulated (deterministic) drivers
};

struct Trace {
  std::vector<TraceRow> rows;
  static const char* csv_header() { return "k,epoch,ops,residual,objective,seconds"; }
  void write_csv(std::ostream& os) const;
  std::string to_csv() const;
};

struct StopRule {
  std::size_t max_epochs = 100;
  double tol = 1e-8;
};

struct RunResult {
  BlockVector solution;
  Trace trace;
  bool converged = false;
  double final_residual = 0.0;
  std::optional<double> final_objective;
  std::uint64_t epochs = 0;
  std::uint64_t ops = 0;
};

// ---- drive-able process: what the drivers iterate on ----
// A unit is either one operator block or one overlapping block bundle; an
// update is computed from a read snapshot and committed indivisibly.
class CoordinateProcess {
 public:
  virtual ~CoordinateProcess() = default;
  virtual PartitionPtr partition() const = 0;
  virtual std::size_t num_units() const = 0;
  virtual void init_cache(const BlockVector& z, MaintainedCache& c) const = 0;
  // stage the unit's block deltas from the read snapshot
  virtual void compute_unit(const BlockVector& z_read,
                            const MaintainedCache& cache_read, std::size_t unit,
                            double weight, StagedUpdate& out) const = 0;
  // apply the deltas and refresh caches; indivisible
  virtual void commit_update(const StagedUpdate& u, BlockVector& z,
                             MaintainedCache& cache) const = 0;
  void update_unit(const BlockVector& z_read, const MaintainedCache& cache_read,
                   std::size_t unit, double weight, BlockVector& z,
                   MaintainedCache& cache) const {
    StagedUpdate u;
    compute_unit(z_read, cache_read, unit, weight, u);
    commit_update(u, z, cache);
  }
  // whether distinct units never touch the same block (false for overlap)
  virtual bool units_disjoint() const { return true; }
  virtual double residual(const BlockVector& z) const = 0;
  virtual std::optional<double> objective(const BlockVector& z) const {
    (void)z;
    return std::nullopt;
  }
  virtual bool scores(const BlockVector& z, const MaintainedCache& c,
                      std::span<double> out) const {
    (void)z;
    (void)c;
    (void)out;
    return false;
  }
};

using ProcessPtr = std::shared_ptr<const CoordinateProcess>;

// block-update process over a fixed-point operator (Eq. 4-style commits)
ProcessPtr make_operator_process(OperatorPtr op);
// overlapping-block process (Algorithm 2 unit semantics)
ProcessPtr make_overlap_process(std::shared_ptr<const OverlapCondatVu> scheme);

// ---- step-size bound (async convergence condition) ----
// eta_max = m q_min / (2 tau sqrt(kappa q_min) + kappa); kappa >= 1 required.
double eta_max_bound(std::size_t m, double q_min, double kappa, std::size_t tau);

// ---- drivers ----

using EtaSchedule = std::function<double(std::uint64_t k)>;
inline EtaSchedule constant_eta(double eta) {
  return [eta](std::uint64_t) { return eta; };
}

RunResult run_sequential(const CoordinateProcess& proc, const BlockVector& z0,
                         const IndexRule& rule, const EtaSchedule& eta,
                         const StopRule& stop, std::uint64_t seed);
RunResult run_sequential(const FixedPointOperator& op, const BlockVector& x0,
                         const IndexRule& rule, const EtaSchedule& eta,
                         const StopRule& stop, std::uint64_t seed);

// subsets schedule: round -> set of units, computed from one snapshot and
// committed barrier-style; duplicate units within a round are rejected
using SyncSchedule = std::function<std::vector<std::size_t>(std::uint64_t round)>;
SyncSchedule full_sweep_schedule(std::size_t units);
RunResult run_sync_parallel(const CoordinateProcess& proc, const BlockVector& z0,
                            const SyncSchedule& schedule, std::size_t workers,
                            const EtaSchedule& eta, const StopRule& stop);
RunResult run_sync_parallel(const FixedPointOperator& op, const BlockVector& x0,
                            const SyncSchedule& schedule, std::size_t workers,
                            const EtaSchedule& eta, const StopRule& stop);

enum class DelayModel : std::uint8_t { kUniform, kFixed, kGeometric };
enum class ReadMode : std::uint8_t { kConsistent, kInconsistent };

struct AsyncConfig {
  std::size_t workers = 1;
  std::size_t tau = 0;  // max staleness in committed updates
  DelayModel delay = DelayModel::kFixed;
  ReadMode read = ReadMode::kConsistent;
  double eta = 0.5;
  std::vector<double> q;  // empty = uniform (weight reduces to eta exactly)
  std::uint64_t seed = 1;
  bool use_threads = false;  // real-thread backend instead of the simulator
  // when > 0, eta is checked against eta_max_bound with this kappa
  double certify_kappa = 0.0;

  void validate(std::size_t units) const;
};

RunResult run_async_parallel(const CoordinateProcess& proc, const BlockVector& z0,
                             const AsyncConfig& cfg, const StopRule& stop);
RunResult run_async_parallel(const FixedPointOperator& op, const BlockVector& x0,
                             const AsyncConfig& cfg, const StopRule& stop);

}  // namespace cfsplit

#endif  // CFSPLIT_EXECUTION_HPP_
