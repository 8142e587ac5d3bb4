#include "martlab/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace martlab {

unsigned default_workers() {
  if (const char* env = std::getenv("MARTLAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

std::string source_name(const PathSource& src) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Kernel>) {
          return s.name();
        } else if constexpr (std::is_same_v<T, CouplingStrategy>) {
          return "excursion:" + s.seq.name() + ":" + to_string(s.tag);
        } else {
          return "delayedwalk:K=" + std::to_string(s.K());
        }
      },
      src);
}

std::size_t KernelSampler::KeyHash::operator()(const Key& k) const {
  const auto u = static_cast<unsigned __int128>(k.x);
  return static_cast<std::size_t>(mix64(static_cast<std::uint64_t>(u) ^ mix64(static_cast<std::uint64_t>(u >> 64)) ^
                                        (static_cast<std::uint64_t>(k.n) << 1)));
}

KernelSampler::KernelSampler(const Kernel& k) : kernel_(&k), initial_(make_table(k.initial())) {}

KernelSampler::Table KernelSampler::make_table(const Dist& d) {
  Table t;
  Rational running;
  for (const auto& [x, m] : d.atoms()) {
    running += m;
    t.targets.push_back(x);
    t.cumulative.push_back(running.to_double());
  }
  t.cumulative.back() = 1.0;
  return t;
}

State KernelSampler::draw(const Table& t, double u) {
  const auto it = std::upper_bound(t.cumulative.begin(), t.cumulative.end(), u);
  return t.targets[static_cast<std::size_t>(it - t.cumulative.begin())];
}

const KernelSampler::Table& KernelSampler::row(int n, State x) {
  const Key key{n, x};
  auto it = cache_.find(key);
  if (it == cache_.end()) it = cache_.emplace(key, make_table(kernel_->law(n, x))).first;
  return it->second;
}

std::vector<State> KernelSampler::sample(int horizon, std::uint64_t path_seed) {
  SplitMix64 rng = substream(path_seed, 0);
  std::vector<State> path;
  path.reserve(static_cast<std::size_t>(horizon) + 1);
  State x = draw(initial_, rng.uniform01());
  path.push_back(x);
  for (int n = 0; n < horizon; ++n) {
    x = draw(row(n, x), rng.uniform01());
    path.push_back(x);
  }
  return path;
}

PathWorker::PathWorker(const PathSource& src, int horizon, SeedPlan plan) : src_(&src), horizon_(horizon), plan_(plan) {
  if (const auto* k = std::get_if<Kernel>(&src)) kernel_sampler_.emplace(*k);
}

std::vector<State> PathWorker::sample(std::uint64_t index) {
  const std::uint64_t seed = plan_.path_seed(index);
  if (kernel_sampler_) return kernel_sampler_->sample(horizon_, seed);
  if (const auto* cs = std::get_if<CouplingStrategy>(src_)) return sample_excursion_path(*cs, horizon_, seed).values;
  return sample_delayed_path(std::get<Schedule>(*src_), horizon_, seed);
}

MarginalCounter::MarginalCounter(const std::vector<int>& times) {
  for (const int n : times) counts[n];
}

void MarginalCounter::observe(std::uint64_t, std::span<const State> path) {
  for (auto& [n, table] : counts) {
    if (n >= 0 && static_cast<std::size_t>(n) < path.size()) ++table[path[static_cast<std::size_t>(n)]];
  }
  ++paths;
}

void MarginalCounter::merge(const MarginalCounter& o) {
  for (const auto& [n, table] : o.counts) {
    auto& mine = counts[n];
    for (const auto& [x, c] : table) mine[x] += c;
  }
  paths += o.paths;
}

AlternationCounter::AlternationCounter(int horizon)
    : at_pm1(static_cast<std::size_t>(std::max(horizon, 0)), 0),
      flipped(at_pm1.size(), 0),
      held(at_pm1.size(), 0) {}

void AlternationCounter::observe(std::uint64_t, std::span<const State> path) {
  const std::size_t last = std::min(at_pm1.size(), path.size() - 1);
  for (std::size_t n = 0; n < last; ++n) {
    const State x = path[n];
    if (x != 1 && x != -1) continue;
    ++at_pm1[n];
    if (path[n + 1] == -x) ++flipped[n];
    if (path[n + 1] == x) ++held[n];
  }
}

void AlternationCounter::merge(const AlternationCounter& o) {
  for (std::size_t n = 0; n < at_pm1.size(); ++n) {
    at_pm1[n] += o.at_pm1[n];
    flipped[n] += o.flipped[n];
    held[n] += o.held[n];
  }
}

AbsorptionCounter::AbsorptionCounter(int first_time, int last_time) : first(first_time), last(last_time) {
  if (first < 0 || last < first) throw std::invalid_argument("absorption window must satisfy 0 <= first <= last");
}

void AbsorptionCounter::observe(std::uint64_t, std::span<const State> path) {
  if (static_cast<std::size_t>(last) >= path.size()) throw std::invalid_argument("absorption window exceeds the horizon");
  ++paths;
  const State v = path[static_cast<std::size_t>(first)];
  for (int n = first + 1; n <= last; ++n) {
    if (path[static_cast<std::size_t>(n)] != v) return;
  }
  ++constant[v];
}

void AbsorptionCounter::merge(const AbsorptionCounter& o) {
  paths += o.paths;
  for (const auto& [x, c] : o.constant) constant[x] += c;
}

void StepMeanCounter::observe(std::uint64_t, std::span<const State> path) {
  const std::size_t last = std::min(static_cast<std::size_t>(max_time), path.size() - 1);
  for (std::size_t n = 0; n < last; ++n) {
    const State d = path[n + 1] - path[n];
    auto& m = moments[{static_cast<int>(n), path[n]}];
    ++m.count;
    if (abs_state(d) >= (State{1} << 48)) m.wide = true;
    if (m.wide) continue;
    m.sum += d;
    m.sum_squares += static_cast<unsigned __int128>(d * d);
  }
}

void StepMeanCounter::merge(const StepMeanCounter& o) {
  for (const auto& [key, m] : o.moments) {
    auto& mine = moments[key];
    mine.count += m.count;
    mine.sum += m.sum;
    mine.sum_squares += m.sum_squares;
    mine.wide = mine.wide || m.wide;
  }
}

double FrequencyTable::frequency(State x) const {
  const auto it = counts.find(x);
  return it == counts.end() || paths == 0 ? 0.0 : static_cast<double>(it->second) / static_cast<double>(paths);
}

double FrequencyTable::total() const {
  double sum = 0.0;
  for (const auto& [x, c] : counts) sum += static_cast<double>(c) / static_cast<double>(paths);
  return sum;
}

FrequencyTable empirical_marginal(const MarginalCounter& c, int n) {
  const auto it = c.counts.find(n);
  if (it == c.counts.end()) throw std::invalid_argument("time " + std::to_string(n) + " was not counted");
  return FrequencyTable{n, c.paths, it->second};
}

FrequencyTable empirical_marginal(std::span<const std::vector<State>> paths, int n) {
  MarginalCounter c({n});
  for (const auto& p : paths) {
    if (static_cast<std::size_t>(n) >= p.size()) throw std::invalid_argument("time beyond the path horizon");
    c.observe(0, p);
  }
  return empirical_marginal(c, n);
}

double tv_distance(const FrequencyTable& empirical, const Dist& exact) {
  double sum = 0.0;
  for (const auto& [x, m] : exact.atoms()) sum += std::abs(empirical.frequency(x) - m.to_double());
  for (const auto& [x, c] : empirical.counts) {
    if (!exact.atoms().contains(x)) sum += empirical.frequency(x);
  }
  return 0.5 * sum;
}

std::optional<AlternationEstimate> alternation_rate(const AlternationCounter& c, int n, std::uint64_t min_observations) {
  if (n < 0 || static_cast<std::size_t>(n) >= c.at_pm1.size()) throw std::invalid_argument("time outside the counted range");
  const auto i = static_cast<std::size_t>(n);
  if (c.at_pm1[i] < min_observations) return std::nullopt;
  AlternationEstimate e;
  e.n = n;
  e.conditioning = c.at_pm1[i];
  e.flips = c.flipped[i];
  e.rate = static_cast<double>(e.flips) / static_cast<double>(e.conditioning);
  e.radius = frequency_radius(e.rate, e.conditioning);
  e.exact_alternating = Rational(1) - Rational::pow2(-n);
  return e;
}

AbsorptionEstimate absorption_fraction(const AbsorptionCounter& c) {
  AbsorptionEstimate e;
  e.paths = c.paths;
  for (const auto& [x, count] : c.constant) {
    e.absorbed += count;
    if (x == 1 || x == -1) e.absorbed_pm1 += count;
  }
  e.fraction = c.paths == 0 ? 0.0 : static_cast<double>(e.absorbed) / static_cast<double>(c.paths);
  e.radius = frequency_radius(e.fraction, c.paths);
  if (e.absorbed_pm1 > 0) {
    const auto plus = c.constant.contains(1) ? c.constant.at(1) : 0;
    e.plus_share = static_cast<double>(plus) / static_cast<double>(e.absorbed_pm1);
    e.plus_radius = frequency_radius(e.plus_share, e.absorbed_pm1);
  }
  return e;
}

void PathStats::observe(std::uint64_t i, std::span<const State> path) {
  if (marginal) marginal->observe(i, path);
  if (alternation) alternation->observe(i, path);
  if (absorption) absorption->observe(i, path);
  if (steps) steps->observe(i, path);
}

void PathStats::merge(const PathStats& o) {
  if (marginal) marginal->merge(*o.marginal);
  if (alternation) alternation->merge(*o.alternation);
  if (absorption) absorption->merge(*o.absorption);
  if (steps) steps->merge(*o.steps);
}

McReport marginal_report(const MarginalCounter& c, SeedPlan plan, const MarginalFlow* exact, double tv_tolerance) {
  McReport r{"empirical-marginal", c.paths, plan.master_seed, {}, {}, {}};
  for (const auto& [n, table] : c.counts) {
    const FrequencyTable f{n, c.paths, table};
    const Dist* reference = exact != nullptr && static_cast<std::size_t>(n) < exact->mu.size()
                                ? &exact->mu[static_cast<std::size_t>(n)]
                                : nullptr;
    for (const auto& [x, count] : table) {
      const double p = f.frequency(x);
      McEntry e{"P(M_n=" + to_string(x) + ")", n, p, frequency_radius(p, c.paths), std::nullopt, count, c.paths, std::nullopt};
      if (reference != nullptr) e.reference = reference->mass(x).to_double();
      r.add(std::move(e));
    }
    if (reference != nullptr) {
      const double tv = tv_distance(f, *reference);
      r.add({"tv(empirical exact)", n, tv, 0.0, tv_tolerance, 0, c.paths, tv <= tv_tolerance});
      if (tv > tv_tolerance) r.flags.push_back("tv distance above tolerance at n=" + std::to_string(n));
    }
  }
  return r;
}

McReport alternation_report(const AlternationCounter& c, const std::vector<int>& times, SeedPlan plan,
                            std::uint64_t paths, bool against_exact) {
  McReport r{"alternation", paths, plan.master_seed, {}, {}, {}};
  for (const int n : times) {
    if (n < 0 || static_cast<std::size_t>(n) >= c.at_pm1.size()) {
      throw std::invalid_argument("alternation time " + std::to_string(n) + " outside the counted range");
    }
    const auto e = alternation_rate(c, n);
    if (!e) {
      r.add({"insufficient-data", n, 0.0, 0.0, std::nullopt, 0, c.at_pm1[static_cast<std::size_t>(n)], std::nullopt});
      continue;
    }
    McEntry entry{"P(M_n+1=-M_n | M_n in +-1)", n, e->rate, e->radius, std::nullopt, e->flips, e->conditioning, std::nullopt};
    if (against_exact) {
      const double exact = e->exact_alternating.to_double();
      entry.reference = exact;
      entry.pass = std::abs(e->rate - exact) <= e->radius;
      if (!*entry.pass) r.flags.push_back("alternation rate off 1 - 2^-n at n=" + std::to_string(n));
    }
    r.add(std::move(entry));
  }
  return r;
}

McReport absorption_report(const AbsorptionCounter& c, SeedPlan plan) {
  const AbsorptionEstimate e = absorption_fraction(c);
  McReport r{"absorption", c.paths, plan.master_seed, {}, {}, {}};
  r.add({"constant on [" + std::to_string(c.first) + " " + std::to_string(c.last) + "]", c.first, e.fraction, e.radius,
         std::nullopt, e.absorbed, c.paths, std::nullopt});
  for (const auto& [x, count] : c.constant) {
    const double p = static_cast<double>(count) / static_cast<double>(c.paths);
    r.add({"constant value " + to_string(x), c.first, p, frequency_radius(p, c.paths), std::nullopt, count, c.paths,
           std::nullopt});
  }
  if (e.absorbed_pm1 > 0) {
    r.add({"P(limit=+1 | absorbed in +-1)", c.first, e.plus_share, e.plus_radius, 0.5, 0, e.absorbed_pm1,
           std::abs(e.plus_share - 0.5) <= e.plus_radius});
  }
  return r;
}

McReport step_mean_report(const StepMeanCounter& c, SeedPlan plan, std::uint64_t paths, std::uint64_t min_count) {
  McReport r{"step-mean", paths, plan.master_seed, {}, {}, {}};
  for (const auto& [key, m] : c.moments) {
    if (m.count < min_count) continue;
    if (m.wide) {
      r.add({"E[dM | M_n=" + to_string(key.second) + "] (increments too wide)", key.first, 0.0, 0.0, std::nullopt, 0,
             m.count, std::nullopt});
      continue;
    }
    const double n = static_cast<double>(m.count);
    const double mean = static_cast<double>(m.sum) / n;
    const double var = (static_cast<double>(m.sum_squares) - n * mean * mean) / std::max(1.0, n - 1.0);
    const double radius = 3.0 * std::sqrt(std::max(var, 0.0) / n);
    const bool ok = std::abs(mean) <= radius || (var == 0.0 && mean == 0.0);
    r.add({"E[dM | M_n=" + to_string(key.second) + "]", key.first, mean, radius, 0.0, 0, m.count, ok});
    if (!ok) r.flags.push_back("conditional mean increment off 0 at n=" + std::to_string(key.first));
  }
  return r;
}

}  // namespace martlab
