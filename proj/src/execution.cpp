#include "cfsplit/execution.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <chrono>
#include <cmath>
#include <deque>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "cfsplit/kernels.hpp"

namespace cfsplit {

IndexRuleKind parse_rule(const std::string& name) {
  if (name == "cyclic") return IndexRuleKind::kCyclic;
  if (name == "shuffle" || name == "shuffled") return IndexRuleKind::kShuffledCyclic;
  if (name == "random") return IndexRuleKind::kRandom;
  if (name == "greedy") return IndexRuleKind::kGreedy;
  throw ConfigError("unknown index rule: " + name);
}

IndexSelector::IndexSelector(IndexRule rule, std::size_t n, std::uint64_t seed)
    : rule_(std::move(rule)), n_(n), rng_(seed) {
  if (n_ == 0) throw ConfigError("index selector: no units");
  if (rule_.kind == IndexRuleKind::kRandom) {
    q_ = rule_.q;
    if (q_.empty()) {
      uniform_q_ = true;
      q_min_ = 1.0 / static_cast<double>(n_);
    } else {
      if (q_.size() != n_) throw ConfigError("index rule: q length");
      double sum = 0.0;
      for (double v : q_) {
        if (v <= 0.0) throw ConfigError("index rule: q_i must be > 0");
        sum += v;
      }
      cum_.resize(n_);
      double acc = 0.0;
      q_min_ = 1.0;
      for (std::size_t i = 0; i < n_; ++i) {
        q_[i] /= sum;
        q_min_ = std::min(q_min_, q_[i]);
        acc += q_[i];
        cum_[i] = acc;
      }
      cum_.back() = 1.0;
      uniform_q_ = false;
    }
  } else {
    q_min_ = 1.0 / static_cast<double>(n_);
  }
  if (rule_.kind == IndexRuleKind::kShuffledCyclic) {
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
  }
  if (rule_.kind == IndexRuleKind::kGreedy) score_buf_.resize(n_);
}

std::size_t IndexSelector::next(
    std::uint64_t k, const std::function<void(std::span<double>)>& scores) {
  switch (rule_.kind) {
    case IndexRuleKind::kCyclic:
      return static_cast<std::size_t>(k % n_);
    case IndexRuleKind::kShuffledCyclic: {
      const std::size_t pos = static_cast<std::size_t>(k % n_);
      if (pos == 0) rng_.shuffle(order_);
      return order_[pos];
    }
    case IndexRuleKind::kRandom: {
      const double u = rng_.uniform();
      if (uniform_q_) {
        std::size_t i = static_cast<std::size_t>(u * static_cast<double>(n_));
        return i >= n_ ? n_ - 1 : i;
      }
      auto it = std::lower_bound(cum_.begin(), cum_.end(), u);
      return static_cast<std::size_t>(it - cum_.begin());
    }
    case IndexRuleKind::kGreedy: {
      if (!scores)
        throw ConfigError("greedy rule requires caller-supplied scores");
      scores(score_buf_);
      std::size_t best = 0;
      for (std::size_t i = 1; i < n_; ++i)
        if (score_buf_[i] > score_buf_[best]) best = i;  // ties -> lowest index
      return best;
    }
  }
  return 0;
}

void Trace::write_csv(std::ostream& os) const {
  os << csv_header() << "\n";
  for (const auto& r : rows) {
    os << r.k << "," << r.epoch << "," << r.ops << ",";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", r.residual);
    os << buf << ",";
    if (r.objective) {
      std::snprintf(buf, sizeof buf, "%.17g", *r.objective);
      os << buf;
    }
    os << ",";
    std::snprintf(buf, sizeof buf, "%.17g", r.seconds);
    os << buf << "\n";
  }
}

std::string Trace::to_csv() const {
  std::ostringstream os;
  write_csv(os);
  return os.str();
}

double eta_max_bound(std::size_t m, double q_min, double kappa, std::size_t tau) {
  if (m == 0) throw ConfigError("eta_max_bound: m must be >= 1");
  if (q_min <= 0.0 || q_min > 1.0) throw ConfigError("eta_max_bound: q_min in (0,1]");
  if (kappa < 1.0) throw ConfigError("eta_max_bound: kappa must be >= 1");
  const double t = static_cast<double>(tau);
  return static_cast<double>(m) * q_min /
         (2.0 * t * std::sqrt(kappa * q_min) + kappa);
}

// ---- process adapters ----

namespace {

class OperatorProcess final : public CoordinateProcess {
 public:
  explicit OperatorProcess(OperatorPtr op) : op_(std::move(op)) {
    part_ = op_->partition().sizes().empty()
                ? nullptr
                : std::make_shared<const BlockPartition>(op_->partition().sizes());
  }
  PartitionPtr partition() const override { return part_; }
  std::size_t num_units() const override { return part_->num_blocks(); }
  void init_cache(const BlockVector& z, MaintainedCache& c) const override {
    op_->init_cache(z, c);
  }
  void compute_unit(const BlockVector& z_read, const MaintainedCache& cache_read,
                    std::size_t unit, double weight,
                    StagedUpdate& out) const override {
    out.clear();
    const std::size_t w = part_->block_size(unit);
    std::vector<double> value(w);
    op_->coordinate_value(z_read, unit, cache_read, value);
    auto& delta = out.stage(unit, w);
    auto zi = z_read.block(unit);
    for (std::size_t j = 0; j < w; ++j) delta[j] = -weight * (zi[j] - value[j]);
    ops::add(3 * w);
  }
  void commit_update(const StagedUpdate& u, BlockVector& z,
                     MaintainedCache& cache) const override {
    for (std::size_t n = 0; n < u.blocks.size(); ++n) {
      const std::size_t b = u.blocks[n];
      auto blk = z.block(b);
      std::vector<double> old(blk.begin(), blk.end());
      kern::axpy(1.0, u.deltas[n], blk);
      op_->refresh_cache(z, b, old, blk, cache);
    }
    cache.bump_epoch();
  }
  double residual(const BlockVector& z) const override {
    return fixed_point_residual(*op_, z);
  }
  std::optional<double> objective(const BlockVector& z) const override {
    return op_->objective(z);
  }
  bool scores(const BlockVector& z, const MaintainedCache& c,
              std::span<double> out) const override {
    return op_->scores(z, c, out);
  }

 private:
  OperatorPtr op_;
  PartitionPtr part_;
};

class OverlapProcess final : public CoordinateProcess {
 public:
  explicit OverlapProcess(std::shared_ptr<const OverlapCondatVu> s)
      : scheme_(std::move(s)) {}
  PartitionPtr partition() const override { return scheme_->zpart_ptr(); }
  std::size_t num_units() const override { return scheme_->num_units(); }
  void init_cache(const BlockVector& z, MaintainedCache& c) const override {
    scheme_->init_cache(z, c);
  }
  void compute_unit(const BlockVector& z_read, const MaintainedCache& cache_read,
                    std::size_t unit, double weight,
                    StagedUpdate& out) const override {
    scheme_->compute_unit(z_read, cache_read, unit, weight, out);
  }
  void commit_update(const StagedUpdate& u, BlockVector& z,
                     MaintainedCache& cache) const override {
    scheme_->commit_update(u, z, cache);
  }
  bool units_disjoint() const override { return false; }
  double residual(const BlockVector& z) const override {
    return fixed_point_residual(scheme_->cv(), z);
  }
  std::optional<double> objective(const BlockVector& z) const override {
    return scheme_->cv().objective(z);
  }

 private:
  std::shared_ptr<const OverlapCondatVu> scheme_;
};

struct Monitor {
  const CoordinateProcess& proc;
  const StopRule& stop;
  bool track_ops = true;  // thread-local flop counts are meaningless cross-thread
  Trace trace;
  double initial_residual = -1.0;
  ops::Section section;

  // returns true when converged
  bool record(const BlockVector& z, std::uint64_t k, std::uint64_t epoch,
              double seconds) {
    const double r = proc.residual(z);
    if (!std::isfinite(r))
      throw DivergenceError("non-finite fixed-point residual at epoch " +
                            std::to_string(epoch));
    if (initial_residual < 0.0) initial_residual = r;
    if (r > 1e6 * std::max(initial_residual, 1e-12))
      throw DivergenceError(
          "residual grew by more than 1e6x the initial value (" +
          std::to_string(r) + " vs " + std::to_string(initial_residual) + ")");
    TraceRow row;
    row.k = k;
    row.epoch = epoch;
    row.ops = track_ops ? section.elapsed() : 0;
    row.residual = r;
    row.objective = proc.objective(z);
    row.seconds = seconds;
    trace.rows.push_back(row);
    return r <= stop.tol;
  }
};

RunResult finish(const CoordinateProcess& proc, BlockVector z, Monitor&& mon,
                 bool converged, std::uint64_t epochs) {
  RunResult res{std::move(z), std::move(mon.trace), converged, 0.0,
                std::nullopt, epochs, 0};
  res.final_residual = res.trace.rows.empty() ? 0.0 : res.trace.rows.back().residual;
  res.final_objective = res.trace.rows.empty() ? std::nullopt
                                               : res.trace.rows.back().objective;
  res.ops = res.trace.rows.empty() ? 0 : res.trace.rows.back().ops;
  return res;
}

}  // namespace

ProcessPtr make_operator_process(OperatorPtr op) {
  return std::make_shared<OperatorProcess>(std::move(op));
}

ProcessPtr make_overlap_process(std::shared_ptr<const OverlapCondatVu> scheme) {
  return std::make_shared<OverlapProcess>(std::move(scheme));
}

// ---- sequential ----

RunResult run_sequential(const CoordinateProcess& proc, const BlockVector& z0,
                         const IndexRule& rule, const EtaSchedule& eta,
                         const StopRule& stop, std::uint64_t seed) {
  BlockVector z = z0;
  MaintainedCache cache;
  proc.init_cache(z, cache);
  const std::size_t units = proc.num_units();
  IndexSelector sel(rule, units, seed);
  Monitor mon{proc, stop};

  std::function<void(std::span<double>)> score_fn;
  if (rule.kind == IndexRuleKind::kGreedy)
    score_fn = [&](std::span<double> out) {
      if (!proc.scores(z, cache, out))
        throw ConfigError("greedy rule requires operator-supplied scores");
    };

  bool converged = mon.record(z, 0, 0, 0.0);
  std::uint64_t k = 0, epoch = 0;
  StagedUpdate staged;
  while (!converged && epoch < stop.max_epochs) {
    for (std::size_t t = 0; t < units; ++t) {
      const std::size_t i = sel.next(k, score_fn);
      proc.compute_unit(z, cache, i, eta(k), staged);
      proc.commit_update(staged, z, cache);
      ++k;
    }
    ++epoch;
    converged = mon.record(z, k, epoch, 0.0);
  }
  return finish(proc, std::move(z), std::move(mon), converged, epoch);
}

RunResult run_sequential(const FixedPointOperator& op, const BlockVector& x0,
                         const IndexRule& rule, const EtaSchedule& eta,
                         const StopRule& stop, std::uint64_t seed) {
  // non-owning wrapper
  auto alias = OperatorPtr(const_cast<FixedPointOperator*>(&op),
                           [](FixedPointOperator*) {});
  OperatorProcess proc(alias);
  return run_sequential(proc, x0, rule, eta, stop, seed);
}

// ---- sync-parallel ----

SyncSchedule full_sweep_schedule(std::size_t units) {
  std::vector<std::size_t> all(units);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return [all](std::uint64_t) { return all; };
}

RunResult run_sync_parallel(const CoordinateProcess& proc, const BlockVector& z0,
                            const SyncSchedule& schedule, std::size_t workers,
                            const EtaSchedule& eta, const StopRule& stop) {
  if (workers == 0) throw ConfigError("sync: workers must be >= 1");
  BlockVector z = z0;
  MaintainedCache cache;
  proc.init_cache(z, cache);
  const std::size_t units = proc.num_units();
  Monitor mon{proc, stop};

  bool converged = mon.record(z, 0, 0, 0.0);
  std::uint64_t k = 0, round = 0, epoch = 0;
  std::uint64_t commits_at_epoch = 0;
  while (!converged && epoch < stop.max_epochs) {
    std::vector<std::size_t> subset = schedule(round);
    if (subset.empty()) throw ConfigError("sync: empty subset");
    {
      std::vector<std::size_t> sorted = subset;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ConfigError("sync: overlapping subsets within one round");
      if (sorted.back() >= units) throw ConfigError("sync: unit out of range");
    }
    const double w = eta(k);

    // all updates are computed from the same snapshot, commits are barriered
    BlockVector snapshot = z;
    MaintainedCache cache_snapshot = cache;
    std::vector<StagedUpdate> staged(subset.size());
    const bool parallel = workers > 1 && subset.size() > 1;
    if (parallel) {
      std::atomic<std::size_t> next{0};
      auto work = [&]() {
        for (;;) {
          const std::size_t t = next.fetch_add(1);
          if (t >= subset.size()) break;
          proc.compute_unit(snapshot, cache_snapshot, subset[t], w, staged[t]);
        }
      };
      std::vector<std::thread> pool;
      const std::size_t nthreads = std::min<std::size_t>(workers, subset.size());
      pool.reserve(nthreads);
      for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(work);
      for (auto& th : pool) th.join();
    } else {
      for (std::size_t t = 0; t < subset.size(); ++t)
        proc.compute_unit(snapshot, cache_snapshot, subset[t], w, staged[t]);
    }
    for (const auto& u : staged) proc.commit_update(u, z, cache);
    k += subset.size();
    ++round;

    if (k - commits_at_epoch >= units) {
      commits_at_epoch = k;
      ++epoch;
      converged = mon.record(z, k, epoch, 0.0);
    }
  }
  return finish(proc, std::move(z), std::move(mon), converged, epoch);
}

RunResult run_sync_parallel(const FixedPointOperator& op, const BlockVector& x0,
                            const SyncSchedule& schedule, std::size_t workers,
                            const EtaSchedule& eta, const StopRule& stop) {
  auto alias = OperatorPtr(const_cast<FixedPointOperator*>(&op),
                           [](FixedPointOperator*) {});
  OperatorProcess proc(alias);
  return run_sync_parallel(proc, x0, schedule, workers, eta, stop);
}

// ---- async ----

void AsyncConfig::validate(std::size_t units) const {
  if (workers == 0) throw ConfigError("async: workers must be >= 1");
  if (eta <= 0.0) throw ConfigError("async: eta must be > 0");
  if (!q.empty() && q.size() != units) throw ConfigError("async: q length");
  if (certify_kappa > 0.0) {
    double q_min = 1.0 / static_cast<double>(units);
    if (!q.empty()) {
      double sum = 0.0;
      for (double v : q) sum += v;
      q_min = *std::min_element(q.begin(), q.end()) / sum;
    }
    const double bound = eta_max_bound(units, q_min, certify_kappa, tau);
    if (eta >= bound)
      throw ConfigError("async: eta violates the convergence bound (" +
                        std::to_string(eta) + " >= " + std::to_string(bound) + ")");
  }
}

namespace {

// bounded history of committed states for snapshot reconstruction
struct History {
  std::deque<std::pair<BlockVector, MaintainedCache>> versions;
  std::size_t cap;

  void push(const BlockVector& z, const MaintainedCache& c) {
    versions.emplace_back(z, c);
    while (versions.size() > cap) versions.pop_front();
  }
};

std::size_t sample_delay(Rng& rng, DelayModel model, std::size_t bound) {
  if (bound == 0) return 0;
  switch (model) {
    case DelayModel::kUniform:
      return rng.below(bound + 1);
    case DelayModel::kFixed:
      return bound;
    case DelayModel::kGeometric: {
      std::size_t d = 0;
      while (d < bound && rng.uniform() < 0.5) ++d;
      return d;
    }
  }
  return 0;
}

RunResult run_async_simulated(const CoordinateProcess& proc,
                              const BlockVector& z0, const AsyncConfig& cfg,
                              const StopRule& stop) {
  BlockVector z = z0;
  MaintainedCache cache;
  proc.init_cache(z, cache);
  const std::size_t units = proc.num_units();
  IndexSelector sel(IndexRule::random(cfg.q), units, cfg.seed);
  Rng delay_rng(cfg.seed ^ 0xd1ffc0feULL);
  Monitor mon{proc, stop};

  History hist{{}, cfg.tau + 1};
  if (cfg.tau > 0) hist.push(z, cache);

  // under uniform q the Algorithm-1 weight eta/(units * q_i) is exactly eta
  std::vector<double> weight(units, cfg.eta);
  if (!sel.uniform_q()) {
    for (std::size_t i = 0; i < units; ++i)
      weight[i] = cfg.eta / (static_cast<double>(units) * sel.q()[i]);
  }

  bool converged = mon.record(z, 0, 0, 0.0);
  std::uint64_t k = 0, epoch = 0;
  StagedUpdate staged;
  BlockVector scratch = z;
  MaintainedCache scratch_cache;
  while (!converged && epoch < stop.max_epochs) {
    for (std::size_t t = 0; t < units; ++t) {
      const std::size_t i = sel.next(k);
      if (cfg.tau == 0) {
        // no delay: identical arithmetic to the sequential random-rule path
        proc.compute_unit(z, cache, i, weight[i], staged);
      } else if (cfg.read == ReadMode::kConsistent) {
        const std::size_t avail = hist.versions.size() - 1;
        const std::size_t d =
            sample_delay(delay_rng, cfg.delay, std::min(cfg.tau, avail));
        assert(d <= cfg.tau);
        const auto& snap = hist.versions[hist.versions.size() - 1 - d];
        proc.compute_unit(snap.first, snap.second, i, weight[i], staged);
      } else {
        // inconsistent read: each block's version sampled independently
        // within the staleness window; snapshot assembly is bookkeeping,
        // not algorithm work
        {
          ops::SuspendCounting pause;
          const std::size_t avail = hist.versions.size() - 1;
          for (std::size_t b = 0; b < z.num_blocks(); ++b) {
            const std::size_t d =
                sample_delay(delay_rng, cfg.delay, std::min(cfg.tau, avail));
            assert(d <= cfg.tau);
            const auto& snap = hist.versions[hist.versions.size() - 1 - d];
            kern::copy(snap.first.block(b), scratch.block(b));
          }
          proc.init_cache(scratch, scratch_cache);
        }
        proc.compute_unit(scratch, scratch_cache, i, weight[i], staged);
      }
      proc.commit_update(staged, z, cache);
      if (cfg.tau > 0) {
        ops::SuspendCounting pause;
        hist.push(z, cache);
      }
      ++k;
    }
    ++epoch;
    converged = mon.record(z, k, epoch, 0.0);
  }
  return finish(proc, std::move(z), std::move(mon), converged, epoch);
}

// Shared-iterate thread pool: block-granular indivisible commits under a
// mutex, bounded staleness enforced by dropping over-stale computations.
RunResult run_async_threaded(const CoordinateProcess& proc, const BlockVector& z0,
                             const AsyncConfig& cfg, const StopRule& stop) {
  BlockVector z = z0;
  MaintainedCache cache;
  proc.init_cache(z, cache);
  const std::size_t units = proc.num_units();

  std::vector<double> q = cfg.q;
  if (q.empty()) q.assign(units, 1.0 / static_cast<double>(units));
  double qsum = 0.0;
  for (double v : q) qsum += v;
  std::vector<double> cum(units), weight(units);
  double acc = 0.0;
  for (std::size_t i = 0; i < units; ++i) {
    acc += q[i] / qsum;
    cum[i] = acc;
    weight[i] = cfg.q.empty()
                    ? cfg.eta
                    : cfg.eta / (static_cast<double>(units) * q[i] / qsum);
  }
  cum.back() = 1.0;

  std::mutex mu;
  std::uint64_t k = 0, epoch = 0, next_epoch_k = units;
  bool done = false, converged = false;
  std::uint64_t dropped = 0;
  Monitor mon{proc, stop, /*track_ops=*/false};
  converged = mon.record(z, 0, 0, 0.0);
  done = converged || stop.max_epochs == 0;
  const auto t0 = std::chrono::steady_clock::now();
  std::string failure;

  auto worker = [&](std::size_t wid) {
    Rng rng(cfg.seed + 0x9e3779b97f4a7c15ULL * (wid + 1));
    BlockVector local = z0;
    MaintainedCache local_cache;
    StagedUpdate staged;
    for (;;) {
      std::uint64_t k_read;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (done) return;
        local = z;
        local_cache = cache;
        k_read = k;
      }
      const double u = rng.uniform();
      auto it = std::lower_bound(cum.begin(), cum.end(), u);
      const std::size_t i = static_cast<std::size_t>(it - cum.begin());
      proc.compute_unit(local, local_cache, i, weight[i], staged);
      {
        std::lock_guard<std::mutex> lock(mu);
        if (done) return;
        if (k - k_read > cfg.tau) {
          ++dropped;  // over-stale: throttle by recomputing from a fresh read
          continue;
        }
        try {
          proc.commit_update(staged, z, cache);
        } catch (const std::exception& e) {
          failure = e.what();
          done = true;
          return;
        }
        ++k;
        if (k >= next_epoch_k) {
          next_epoch_k += units;
          ++epoch;
          const double secs =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                  .count();
          try {
            converged = mon.record(z, k, epoch, secs);
          } catch (const std::exception& e) {
            failure = e.what();
            done = true;
            return;
          }
          if (converged || epoch >= stop.max_epochs) done = true;
        }
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(cfg.workers);
  for (std::size_t wid = 0; wid < cfg.workers; ++wid) pool.emplace_back(worker, wid);
  for (auto& th : pool) th.join();
  if (!failure.empty()) throw DivergenceError(failure);
  return finish(proc, std::move(z), std::move(mon), converged, epoch);
}

}  // namespace

RunResult run_async_parallel(const CoordinateProcess& proc, const BlockVector& z0,
                             const AsyncConfig& cfg, const StopRule& stop) {
  cfg.validate(proc.num_units());
  if (!cfg.use_threads) return run_async_simulated(proc, z0, cfg, stop);
  return run_async_threaded(proc, z0, cfg, stop);
}

RunResult run_async_parallel(const FixedPointOperator& op, const BlockVector& x0,
                             const AsyncConfig& cfg, const StopRule& stop) {
  auto alias = OperatorPtr(const_cast<FixedPointOperator*>(&op),
                           [](FixedPointOperator*) {});
  OperatorProcess proc(alias);
  return run_async_parallel(proc, x0, cfg, stop);
}

}  // namespace cfsplit
