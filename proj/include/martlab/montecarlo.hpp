#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "martlab/delayedwalk.hpp"
#include "martlab/excursion.hpp"
#include "martlab/kernels.hpp"
#include "martlab/marginals.hpp"
#include "martlab/report.hpp"
#include "martlab/sampling.hpp"

namespace martlab {

/// Anything that produces integer-time paths: a kernel chain, the excursion
/// construction under a coupling, or the delayed walk under a schedule.
using PathSource = std::variant<Kernel, CouplingStrategy, Schedule>;

std::string source_name(const PathSource& src);

/// Samples kernel paths, caching a double-precision cumulative table per
/// (n, x) row on first use. Not thread-safe; use one per worker.
class KernelSampler {
 public:
  explicit KernelSampler(const Kernel& k);

  /// M_0..M_horizon from substream 0 of path_seed.
  std::vector<State> sample(int horizon, std::uint64_t path_seed);
  std::size_t cached_rows() const { return cache_.size(); }

 private:
  struct Table {
    std::vector<State> targets;
    std::vector<double> cumulative;  // last entry is exactly 1
  };
  struct Key {
    int n;
    State x;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const;
  };

  static Table make_table(const Dist& d);
  static State draw(const Table& t, double u);
  const Table& row(int n, State x);

  const Kernel* kernel_;
  Table initial_;
  std::unordered_map<Key, Table, KeyHash> cache_;
};

/// Samples path `index` of a source. Holds the per-worker row cache.
class PathWorker {
 public:
  PathWorker(const PathSource& src, int horizon, SeedPlan plan);
  std::vector<State> sample(std::uint64_t index);

 private:
  const PathSource* src_;
  int horizon_;
  SeedPlan plan_;
  std::optional<KernelSampler> kernel_sampler_;
};

/// Feeds every path of the run to acc.observe(index, path) on `workers`
/// threads; results are merged with Acc::merge and do not depend on the
/// worker count.
template <class Acc>
Acc run_paths(const PathSource& src, std::uint64_t paths, int horizon, SeedPlan plan, const Acc& proto,
              unsigned workers = default_workers()) {
  if (paths < 1) throw std::invalid_argument("need at least one path");
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  return accumulate_paths(paths, workers, proto, [&] {
    return [worker = PathWorker(src, horizon, plan)](Acc& acc, std::uint64_t i) mutable {
      const std::vector<State> path = worker.sample(i);
      acc.observe(i, path);
    };
  });
}

/// Keeps every path by index.
struct PathCollector {
  std::map<std::uint64_t, std::vector<State>> paths;

  void observe(std::uint64_t i, std::span<const State> path) { paths.emplace(i, std::vector<State>(path.begin(), path.end())); }
  void merge(const PathCollector& o) { paths.insert(o.paths.begin(), o.paths.end()); }
};

/// State counts at selected times.
struct MarginalCounter {
  std::map<int, std::map<State, std::uint64_t>> counts;  // n -> state -> paths
  std::uint64_t paths = 0;

  explicit MarginalCounter(const std::vector<int>& times = {});
  void observe(std::uint64_t, std::span<const State> path);
  void merge(const MarginalCounter& o);
};

/// Per time n: paths with M_n in {+-1}, and of those the ones with
/// M_{n+1} = -M_n (flip) or M_{n+1} = M_n (hold).
struct AlternationCounter {
  std::vector<std::uint64_t> at_pm1;
  std::vector<std::uint64_t> flipped;
  std::vector<std::uint64_t> held;

  explicit AlternationCounter(int horizon = 0);
  void observe(std::uint64_t, std::span<const State> path);
  void merge(const AlternationCounter& o);
};

/// Paths constant on the time window [first, last], by constant value.
struct AbsorptionCounter {
  int first = 0;
  int last = 0;
  std::uint64_t paths = 0;
  std::map<State, std::uint64_t> constant;

  AbsorptionCounter() = default;
  AbsorptionCounter(int first_time, int last_time);
  void observe(std::uint64_t, std::span<const State> path);
  void merge(const AbsorptionCounter& o);
};

/// Increment moments of M_{n+1} - M_n grouped by (n, M_n).
struct StepMeanCounter {
  struct Moments {
    std::uint64_t count = 0;
    __int128 sum = 0;
    unsigned __int128 sum_squares = 0;
    // Set when some increment reached 2^48; moments are then not tracked.
    bool wide = false;
  };
  int max_time = 0;
  std::map<std::pair<int, State>, Moments> moments;

  explicit StepMeanCounter(int max_time_ = 0) : max_time(max_time_) {}
  void observe(std::uint64_t, std::span<const State> path);
  void merge(const StepMeanCounter& o);
};

/// Empirical law of M_n (double-valued frequencies).
struct FrequencyTable {
  int n = 0;
  std::uint64_t paths = 0;
  std::map<State, std::uint64_t> counts;

  double frequency(State x) const;
  /// Sum of all frequencies; 1 up to rounding.
  double total() const;
};

FrequencyTable empirical_marginal(const MarginalCounter& c, int n);
FrequencyTable empirical_marginal(std::span<const std::vector<State>> paths, int n);
double tv_distance(const FrequencyTable& empirical, const Dist& exact);

struct AlternationEstimate {
  int n = 0;
  std::uint64_t conditioning = 0;  // paths with M_n in {+-1}
  std::uint64_t flips = 0;
  double rate = 0.0;
  double radius = 0.0;
  Rational exact_alternating;  // 1 - 2^-n
};

/// Frequency of M_{n+1} = -M_n given M_n in {+-1}; nullopt when fewer than
/// min_observations paths sit in {+-1} at time n.
std::optional<AlternationEstimate> alternation_rate(const AlternationCounter& c, int n,
                                                    std::uint64_t min_observations = 100);

struct AbsorptionEstimate {
  double fraction = 0.0;
  double radius = 0.0;
  std::uint64_t absorbed = 0;
  std::uint64_t paths = 0;
  std::uint64_t absorbed_pm1 = 0;  // constant value in {+-1}
  double plus_share = 0.0;         // P(constant = +1 | constant in {+-1})
  double plus_radius = 0.0;
};

AbsorptionEstimate absorption_fraction(const AbsorptionCounter& c);

/// All counters a simulate run can ask for, filled in one pass.
struct PathStats {
  std::optional<MarginalCounter> marginal;
  std::optional<AlternationCounter> alternation;
  std::optional<AbsorptionCounter> absorption;
  std::optional<StepMeanCounter> steps;

  void observe(std::uint64_t i, std::span<const State> path);
  void merge(const PathStats& o);
};

/// Frequencies at each counted time; with `exact`, adds per-time tv distance
/// entries that pass when within `tv_tolerance`.
McReport marginal_report(const MarginalCounter& c, SeedPlan plan, const MarginalFlow* exact = nullptr,
                         double tv_tolerance = 0.02);
/// Alternation rates at each time in `times` against 1 - 2^-n when `against_exact`.
McReport alternation_report(const AlternationCounter& c, const std::vector<int>& times, SeedPlan plan,
                            std::uint64_t paths, bool against_exact);
McReport absorption_report(const AbsorptionCounter& c, SeedPlan plan);
/// Conditional mean increment per (n, M_n) cell with at least `min_count`
/// observations; passes when within 3 sigma of 0.
McReport step_mean_report(const StepMeanCounter& c, SeedPlan plan, std::uint64_t paths, std::uint64_t min_count = 100);

}  // namespace martlab
