#include "martlab/delayedwalk.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace martlab {

CrossingLaw::CrossingLaw(int budget) : budget_(budget) {
  if (budget < 2) throw std::invalid_argument("crossing law budget must be >= 2");
  killed_.assign(static_cast<std::size_t>(budget) + 1, mpz_class(0));
  // alive[y]: paths at distance y above the absorbing state -1 (start: y = 2).
  std::vector<mpz_class> alive(3);
  alive[2] = 1;
  for (int m = 1; m <= budget; ++m) {
    killed_[static_cast<std::size_t>(m)] = alive.size() > 1 ? alive[1] : mpz_class(0);
    // Paths above budget - m cannot be absorbed within the budget.
    const std::size_t top = static_cast<std::size_t>(std::max(0, budget - m));
    std::vector<mpz_class> next(std::min(alive.size() + 1, top + 1));
    for (std::size_t y = 1; y < next.size(); ++y) {
      if (y >= 2 && y - 1 < alive.size()) next[y] += alive[y - 1];
      if (y + 1 < alive.size()) next[y] += alive[y + 1];
    }
    alive = std::move(next);
  }
}

Rational CrossingLaw::mass(int m) const {
  if (m < 0 || m > budget_) throw std::out_of_range("crossing length outside the tabulated budget");
  return Rational(mpq_class(killed_[static_cast<std::size_t>(m)])) * Rational::pow2(-m);
}

Rational CrossingLaw::survival(int m) const {
  if (m < 0 || m > budget_) throw std::out_of_range("crossing length outside the tabulated budget");
  // sum_{j<=m} killed_j 2^-j = (sum_j killed_j 2^(m-j)) / 2^m
  mpz_class scaled(0);
  for (int j = 0; j <= m; ++j) {
    scaled <<= 1;
    scaled += killed_[static_cast<std::size_t>(j)];
  }
  return Rational(1) - Rational(mpq_class(scaled)) * Rational::pow2(-m);
}

CrossingLaw crossing_law(int budget) { return CrossingLaw(budget); }

int quantile(const CrossingLaw& law, const Rational& eps) {
  if (law.tail() > eps) {
    throw BudgetInsufficient("P(L > " + std::to_string(law.budget()) + ") = " + law.tail().str() + " exceeds " +
                             eps.str() + "; enlarge the budget");
  }
  Rational survival(1);
  for (int m = 1; m <= law.budget(); ++m) {
    survival -= law.mass(m);
    if (m >= 2 && survival <= eps) return m;
  }
  return law.budget();
}

namespace {

// Numerator of P(S_m in {-1, 0, 1, 2}) over the denominator 2^m.
mpz_class survival_count(std::int64_t m) {
  mpz_class total(0);
  for (int s = -1; s <= 2; ++s) {
    if ((m + s) % 2 != 0) continue;
    const std::int64_t up = (m + s) / 2;
    if (up < 0 || up > m) continue;
    mpz_class c;
    mpz_bin_uiui(c.get_mpz_t(), static_cast<unsigned long>(m), static_cast<unsigned long>(up));
    total += c;
  }
  return total;
}

// P(L > m) <= eps, decided without canonicalizing huge fractions.
bool survival_at_most(std::int64_t m, const Rational& eps) {
  mpz_class lhs = survival_count(m) * eps.denominator();
  mpz_class rhs = eps.numerator();
  rhs <<= static_cast<unsigned long>(m);
  return lhs <= rhs;
}

}  // namespace

Rational crossing_survival(std::int64_t m) {
  if (m < 0) throw std::invalid_argument("crossing length must be >= 0");
  return Rational(mpq_class(survival_count(m))) * Rational::pow2(static_cast<int>(-m));
}

Rational crossing_mass(std::int64_t m) {
  if (m < 2 || m % 2 != 0) return Rational();
  mpz_class c;
  mpz_bin_uiui(c.get_mpz_t(), static_cast<unsigned long>(m), static_cast<unsigned long>(m / 2 + 1));
  return Rational(mpq_class(2 * c, mpz_class(m))) * Rational::pow2(static_cast<int>(-m));
}

std::int64_t crossing_quantile(const Rational& eps, std::int64_t budget) {
  if (eps.sign() <= 0) throw std::invalid_argument("quantile level must be positive");
  if (budget < 2) throw std::invalid_argument("crossing budget must be >= 2");
  const std::int64_t last = budget - budget % 2;
  auto insufficient = [&] {
    return BudgetInsufficient("no crossing length <= " + std::to_string(budget) + " has P(L > m) <= " + eps.str());
  };
  // L is even, so P(L > m) only drops at even m: search even m >= 2.
  if (survival_at_most(2, eps)) return 2;
  std::int64_t lo = 2;  // P(L > lo) > eps
  std::int64_t hi = 4;
  for (;;) {
    if (hi >= last) {
      hi = last;
      if (!survival_at_most(hi, eps)) throw insufficient();
      break;
    }
    if (survival_at_most(hi, eps)) break;
    lo = hi;
    hi *= 2;
  }
  while (hi - lo > 2) {
    std::int64_t mid = lo + (hi - lo) / 2;
    mid -= mid % 2;
    if (survival_at_most(mid, eps)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

EpsRule EpsRule::parse(std::string_view text) {
  EpsRule rule;
  rule.spec_ = std::string(text);
  const auto colon = text.find(':');
  const std::string_view head = text.substr(0, colon);
  const std::string_view arg = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  if (head == "pow2" && colon == std::string_view::npos) {
    rule.kind_ = Kind::Pow2;
  } else if (head == "geometric" && !arg.empty()) {
    rule.kind_ = Kind::Geometric;
    rule.param_ = Rational::parse(arg);
  } else if (head == "constant" && !arg.empty()) {
    rule.kind_ = Kind::Constant;
    rule.param_ = Rational::parse(arg);
  } else if (head == "list" && !arg.empty()) {
    rule.kind_ = Kind::List;
    std::stringstream ss{std::string(arg)};
    for (std::string item; std::getline(ss, item, ',');) rule.list_.push_back(Rational::parse(item));
  } else {
    throw std::invalid_argument("unknown eps rule '" + std::string(text) +
                                "' (expected pow2, geometric:r, constant:c or list:e1,e2,...)");
  }
  return rule;
}

Rational EpsRule::operator()(int k) const {
  if (k < 1) throw std::invalid_argument("eps index must be >= 1");
  switch (kind_) {
    case Kind::Pow2:
      return Rational::pow2(-k);
    case Kind::Geometric: {
      mpq_class r = param_.raw();
      mpq_class out(1);
      for (int i = 0; i < k; ++i) out *= r;
      return Rational(out);
    }
    case Kind::Constant:
      return param_;
    case Kind::List:
      if (static_cast<std::size_t>(k) > list_.size()) {
        throw std::invalid_argument("eps list has no entry for k=" + std::to_string(k));
      }
      return list_[static_cast<std::size_t>(k - 1)];
  }
  return param_;
}

namespace {

void check_eps_sequence(int K, const EpsRule& eps) {
  if (K < 1) throw std::invalid_argument("schedule needs K >= 1");
  const Rational first = eps(1);
  if (first.sign() <= 0 || first > Rational(1)) throw std::invalid_argument("eps_1 must lie in (0, 1]");
  for (int k = 2; k <= K; ++k) {
    const Rational e = eps(k);
    if (e.sign() <= 0 || e >= eps(k - 1)) {
      throw std::invalid_argument("eps rule '" + eps.spec() + "' is not strictly decreasing and positive at k=" +
                                  std::to_string(k));
    }
  }
}

}  // namespace

Schedule build_schedule(int K, const EpsRule& eps, std::int64_t time_cap) {
  check_eps_sequence(K, eps);
  Schedule s;
  s.rows.push_back({1, eps(1), 1, {}, {}, {}});
  for (int k = 1; k < K; ++k) {
    const Rational target = eps(k + 1) * Rational(1, 2);
    // Any usable L* satisfies 2 L* (1 + 1/target) <= t_{k+1} <= time_cap.
    const Rational room = Rational(time_cap / 2) / (Rational(1) + Rational(1) / target);
    const mpz_class room_floor = room.numerator() / room.denominator();
    const std::int64_t budget = room_floor.fits_slong_p() ? room_floor.get_si() : time_cap;
    std::int64_t bound = 0;
    try {
      bound = crossing_quantile(target, std::max<std::int64_t>(budget, 2));
    } catch (const BudgetInsufficient&) {
      throw ScheduleOverflow("t_" + std::to_string(k + 1) + " would exceed the time cap " + std::to_string(time_cap) +
                                 "; " + std::to_string(k) + " of " + std::to_string(K) + " schedule times fit",
                             k);
    }
    // Smallest h with bound / (h - bound) <= target, i.e. h >= bound + bound / target.
    const Rational slack = Rational(bound) / target;
    mpz_class slack_ceil;
    mpz_cdiv_q(slack_ceil.get_mpz_t(), slack.numerator().get_mpz_t(), slack.denominator().get_mpz_t());
    std::int64_t half = bound + slack_ceil.get_si();
    half = std::max(half, s.rows.back().t + 1);
    if (2 * half > time_cap) {
      throw ScheduleOverflow("t_" + std::to_string(k + 1) + " = " + std::to_string(2 * half) + " exceeds the time cap " +
                                 std::to_string(time_cap) + "; " + std::to_string(k) + " of " + std::to_string(K) +
                                 " schedule times fit",
                             k);
    }
    auto& row = s.rows.back();
    row.crossing_bound = bound;
    row.certificate_lhs = Rational(bound) / Rational(half - bound);
    row.certificate_rhs = target;
    s.rows.push_back({k + 1, eps(k + 1), 2 * half, {}, {}, {}});
  }
  return s;
}

Schedule minimal_schedule(int K, const EpsRule& eps) {
  check_eps_sequence(K, eps);
  Schedule s;
  s.certified = false;
  s.rows.push_back({1, eps(1), 1, {}, {}, {}});
  for (int k = 2; k <= K; ++k) s.rows.push_back({k, eps(k), 2 * s.rows.back().t + 2, {}, {}, {}});
  return s;
}

nlohmann::json schedule_to_json(const Schedule& s) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : s.rows) {
    nlohmann::json j;
    j["k"] = r.k;
    j["eps_k"] = r.eps.str();
    j["L*_k"] = r.crossing_bound ? nlohmann::json(*r.crossing_bound) : nlohmann::json(nullptr);
    j["t_k"] = r.t;
    j["certificate_lhs"] = r.certificate_lhs ? nlohmann::json(r.certificate_lhs->str()) : nlohmann::json(nullptr);
    j["certificate_rhs"] = r.certificate_rhs ? nlohmann::json(r.certificate_rhs->str()) : nlohmann::json(nullptr);
    rows.push_back(std::move(j));
  }
  return {{"K", s.K()}, {"certified", s.certified}, {"rows", rows}};
}

namespace {

struct Materializer {
  std::vector<State> values;

  void walk(std::int64_t, State v) { values.push_back(v); }
  void hold(std::int64_t begin, std::int64_t end, State v) { values.insert(values.end(), static_cast<std::size_t>(end - begin), v); }
};

struct DelayedStats {
  std::vector<std::int32_t> off_diff;     // difference array of #paths with M_n outside {+-1}
  std::vector<std::uint64_t> aligned;     // per probe k: M_{t_k} = (-1)^(k-1) M_1
  std::vector<std::uint64_t> on_pm1;      // per probe k: M_{t_k} in {+-1}
  std::uint64_t bad_increment_paths = 0;
  std::uint64_t paths = 0;

  void merge(const DelayedStats& o) {
    for (std::size_t i = 0; i < off_diff.size(); ++i) off_diff[i] += o.off_diff[i];
    for (std::size_t i = 0; i < aligned.size(); ++i) {
      aligned[i] += o.aligned[i];
      on_pm1[i] += o.on_pm1[i];
    }
    bad_increment_paths += o.bad_increment_paths;
    paths += o.paths;
  }
};

class StatsVisitor {
 public:
  StatsVisitor(DelayedStats& stats, const std::vector<std::int64_t>& probes) : stats_(stats), probes_(probes) {}

  void walk(std::int64_t n, State v) {
    if (n == 1) m1_ = v;
    observe_increment(n, v);
    last_n_ = n;
    while (next_probe_ < probes_.size() && probes_[next_probe_] == n) record_probe(v);
    track_occupancy(n, v);
  }

  void hold(std::int64_t begin, std::int64_t end, State v) {
    observe_increment(begin, v);
    last_n_ = end - 1;
    while (next_probe_ < probes_.size() && probes_[next_probe_] < end) record_probe(v);
    track_occupancy(begin, v);
  }

  void finish(std::int64_t horizon) {
    if (in_run_) close_run(horizon + 1);
    if (bad_increment_) ++stats_.bad_increment_paths;
    ++stats_.paths;
  }

 private:
  static bool on_pm1(State v) { return v == 1 || v == -1; }

  void observe_increment(std::int64_t n, State v) {
    if (started_ && (n != last_n_ + 1 || abs_state(v - last_) > 1)) bad_increment_ = true;
    started_ = true;
    last_ = v;
  }

  void record_probe(State v) {
    const std::size_t k = next_probe_ + 1;
    const State expected = k % 2 == 1 ? m1_ : -m1_;
    if (v == expected) ++stats_.aligned[next_probe_];
    if (on_pm1(v)) ++stats_.on_pm1[next_probe_];
    ++next_probe_;
  }

  void track_occupancy(std::int64_t n, State v) {
    const bool off = !on_pm1(v);
    if (off && !in_run_) {
      in_run_ = true;
      run_start_ = n;
    } else if (!off && in_run_) {
      close_run(n);
    }
  }

  void close_run(std::int64_t end) {
    ++stats_.off_diff[static_cast<std::size_t>(run_start_)];
    --stats_.off_diff[static_cast<std::size_t>(end)];
    in_run_ = false;
  }

  DelayedStats& stats_;
  const std::vector<std::int64_t>& probes_;
  std::size_t next_probe_ = 0;
  State m1_ = 0;
  State last_ = 0;
  std::int64_t last_n_ = -1;
  bool started_ = false;
  bool bad_increment_ = false;
  bool in_run_ = false;
  std::int64_t run_start_ = 0;
};

}  // namespace

std::vector<State> sample_delayed_path(const Schedule& s, std::int64_t horizon, std::uint64_t path_seed) {
  Materializer m;
  m.values.reserve(static_cast<std::size_t>(horizon) + 1);
  simulate_delayed_path(s, horizon, path_seed, m);
  return std::move(m.values);
}

std::vector<McReport> delayed_walk_checks(const Schedule& s, std::int64_t horizon, std::uint64_t paths,
                                          SeedPlan plan, unsigned workers) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  std::vector<std::int64_t> probes;
  for (const auto& r : s.rows) {
    if (r.t <= horizon) probes.push_back(r.t);
  }
  DelayedStats proto;
  proto.off_diff.assign(static_cast<std::size_t>(horizon) + 2, 0);
  proto.aligned.assign(probes.size(), 0);
  proto.on_pm1.assign(probes.size(), 0);
  const DelayedStats stats = accumulate_paths(paths, workers, proto, [&] {
    return [&](DelayedStats& acc, std::uint64_t i) {
      StatsVisitor v(acc, probes);
      simulate_delayed_path(s, horizon, plan.path_seed(i), v);
      v.finish(horizon);
    };
  });

  const double total = static_cast<double>(paths);
  McReport alternation{"alternation", paths, plan.master_seed, {}, {}, {}};
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const int k = static_cast<int>(i) + 1;
    const double p_hat = static_cast<double>(stats.aligned[i]) / total;
    const double radius = frequency_radius(p_hat, paths);
    const double reference = (Rational(1) - s.eps(k)).to_double();
    const bool ok = p_hat >= reference - radius;
    alternation.add({"P(M_t_k = (-1)^(k-1) M_1)", k, p_hat, radius, reference, stats.aligned[i], paths, ok});
    if (!ok) alternation.flags.push_back("alternation below 1 - eps_k - 3 sigma at k=" + std::to_string(k));
  }
  alternation.add({"paths with an increment of size > 1", 0, static_cast<double>(stats.bad_increment_paths), 0.0, 0.0,
                   stats.bad_increment_paths, paths, stats.bad_increment_paths == 0});
  if (stats.bad_increment_paths != 0) alternation.flags.push_back("unbounded increment observed");

  McReport occupancy{"occupancy", paths, plan.master_seed, {}, {}, {}};
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const int k = static_cast<int>(i) + 1;
    const double p_hat = static_cast<double>(stats.on_pm1[i]) / total;
    const double radius = frequency_radius(p_hat, paths);
    const double reference = (Rational(1) - s.eps(k)).to_double();
    const bool ok = p_hat + radius >= reference;
    occupancy.add({"P(M_t_k in {+-1})", k, p_hat, radius, reference, stats.on_pm1[i], paths, ok});
    if (!ok) occupancy.flags.push_back("t_" + std::to_string(k) + ": occupancy below 1 - eps_k");
  }
  // Window profiles need the prefix sums of the difference array.
  std::vector<std::int64_t> off(static_cast<std::size_t>(horizon) + 1, 0);
  std::int64_t running = 0;
  for (std::size_t n = 0; n < off.size(); ++n) {
    running += stats.off_diff[n];
    off[n] = running;
  }
  for (int k = 1; k < s.K(); ++k) {
    const std::int64_t lo = s.t(k);
    const std::int64_t hi = s.t(k + 1);
    if (hi > horizon) break;
    const double bound = (Rational(1) - Rational(2) * s.eps(k)).to_double();
    double min_p = 2.0;
    std::int64_t min_n = lo;
    std::uint64_t flagged = 0;
    std::int64_t first_flag = -1;
    for (std::int64_t n = lo; n <= hi; ++n) {
      const auto off_count = static_cast<std::uint64_t>(off[static_cast<std::size_t>(n)]);
      const double p_hat = 1.0 - static_cast<double>(off_count) / total;
      if (p_hat < min_p) {
        min_p = p_hat;
        min_n = n;
      }
      if (p_hat + frequency_radius(p_hat, paths) < bound) {
        if (flagged++ == 0) first_flag = n;
      }
    }
    const auto min_hits = paths - static_cast<std::uint64_t>(off[static_cast<std::size_t>(min_n)]);
    occupancy.add({"min P(M_n in {+-1}) on [t_k t_k+1] at n=" + std::to_string(min_n), k, min_p, frequency_radius(min_p, paths), bound,
                   min_hits, paths, flagged == 0});
    if (flagged != 0) {
      occupancy.flags.push_back("window k=" + std::to_string(k) + ": " + std::to_string(flagged) +
                                " times below 1 - 2 eps_k, first n=" + std::to_string(first_flag));
    }
  }
  return {alternation, occupancy};
}

McReport occupancy_check(const Schedule& s, std::int64_t horizon, std::uint64_t paths, SeedPlan plan, unsigned workers) {
  return delayed_walk_checks(s, horizon, paths, plan, workers)[1];
}

McReport alternation_check(const Schedule& s, std::int64_t horizon, std::uint64_t paths, SeedPlan plan,
                           unsigned workers) {
  return delayed_walk_checks(s, horizon, paths, plan, workers)[0];
}

}  // namespace martlab
