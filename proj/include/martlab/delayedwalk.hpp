#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "martlab/exactprob.hpp"
#include "martlab/kernels.hpp"
#include "martlab/report.hpp"
#include "martlab/sampling.hpp"

namespace martlab {

class BudgetInsufficient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exact law of the crossing length L: steps for a fair walk started at +1
/// to first reach -1. Tabulated up to a step budget by dynamic programming on
/// the walk killed at -1; the mass beyond the budget is kept as `tail()`.
class CrossingLaw {
 public:
  explicit CrossingLaw(int budget);

  int budget() const { return budget_; }
  /// P(L = m) for 0 <= m <= budget.
  Rational mass(int m) const;
  /// P(L > m) for 0 <= m <= budget.
  Rational survival(int m) const;
  /// P(L > budget)
  Rational tail() const { return survival(budget_); }

 private:
  int budget_;
  std::vector<mpz_class> killed_;  // killed_[m]: paths of length m crossing at step m
};

CrossingLaw crossing_law(int budget);

/// Smallest m >= 2 with P(L > m) <= eps, read from the table.
/// Throws BudgetInsufficient when tail() > eps.
int quantile(const CrossingLaw& law, const Rational& eps);

// Closed forms from the reflection principle:
//   P(L > m) = P(S_m in {-1, 0, 1, 2}),  P(L = m) = (2/m) P(S_m = 2).
Rational crossing_survival(std::int64_t m);
Rational crossing_mass(std::int64_t m);

/// Same quantile as above via the closed form, searching m <= budget.
std::int64_t crossing_quantile(const Rational& eps, std::int64_t budget);

/// Tolerances eps_k, k >= 1.
class EpsRule {
 public:
  /// "pow2" (2^-k), "geometric:r" (r^k), "constant:c", or "list:e1,e2,..."
  static EpsRule parse(std::string_view text);
  static EpsRule pow2() { return parse("pow2"); }

  Rational operator()(int k) const;
  const std::string& spec() const { return spec_; }

 private:
  enum class Kind { Pow2, Geometric, Constant, List };
  Kind kind_ = Kind::Pow2;
  Rational param_;
  std::vector<Rational> list_;
  std::string spec_ = "pow2";
};

struct ScheduleRow {
  int k = 0;
  Rational eps;
  std::int64_t t = 0;
  // The remaining fields describe how t_{k+1} was chosen; empty on the last row.
  std::optional<std::int64_t> crossing_bound;  // L*_k
  std::optional<Rational> certificate_lhs;     // L*_k / (t_{k+1}/2 - L*_k)
  std::optional<Rational> certificate_rhs;     // eps_{k+1} / 2
};

struct Schedule {
  std::vector<ScheduleRow> rows;
  bool certified = true;

  int K() const { return static_cast<int>(rows.size()); }
  std::int64_t t(int k) const { return rows.at(static_cast<std::size_t>(k - 1)).t; }
  const Rational& eps(int k) const { return rows.at(static_cast<std::size_t>(k - 1)).eps; }
  std::int64_t horizon() const { return rows.back().t; }
};

inline constexpr std::int64_t kScheduleTimeCap = std::int64_t{1} << 31;

class ScheduleOverflow : public CapExceeded {
 public:
  ScheduleOverflow(const std::string& what, int fitted) : CapExceeded(what), fitted_(fitted) {}
  /// Number of times t_1..t_fitted that fit under the cap.
  int fitted() const { return fitted_; }

 private:
  int fitted_;
};

/// t_1 = 1; for k < K, L*_k = crossing quantile at eps_{k+1}/2 and t_{k+1} is
/// the smallest even integer with t_{k+1}/2 > t_k and
/// L*_k / (t_{k+1}/2 - L*_k) <= eps_{k+1}/2.
/// Throws std::invalid_argument unless eps_1 > eps_2 > ... > eps_K > 0 with
/// eps_1 <= 1, and ScheduleOverflow when some t_k would exceed time_cap.
Schedule build_schedule(int K, const EpsRule& eps, std::int64_t time_cap = kScheduleTimeCap);

/// Uncalibrated control schedule: t_{k+1} = 2 t_k + 2, no certificates.
Schedule minimal_schedule(int K, const EpsRule& eps);

/// [{k, eps_k, L*_k, t_k, certificate_lhs, certificate_rhs}, ...]
nlohmann::json schedule_to_json(const Schedule& s);

/// Simulates one delayed-walk path on times 0..horizon and reports it to
/// `visitor` in time order, each time exactly once:
///   visitor.hold(begin, end, value)   M_n = value for begin <= n < end
///   visitor.walk(n, value)            M_n = value
/// M_0 = 0 and M_1 = +-1 from the first walk bit. Crossing k (k < K) starts at
/// max(S_k, U_k) where U_k is uniform on the integers of [t_{k+1}/2, t_{k+1})
/// and S_k is the completion time of crossing k - 1; it then follows fair
/// +-1 steps until it first hits the opposite sign. Walk bits come from
/// substream 0 of path_seed, start times from substream 1.
template <class Visitor>
void simulate_delayed_path(const Schedule& s, std::int64_t horizon, std::uint64_t path_seed, Visitor& visitor) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  BitSource bits(substream(path_seed, 0));
  SplitMix64 delays = substream(path_seed, 1);
  visitor.walk(0, 0);
  State pos = bits.step();
  std::int64_t n = 1;
  visitor.walk(1, pos);
  for (int k = 1; k < s.K(); ++k) {
    if (n >= horizon) return;
    const std::int64_t half = s.t(k + 1) / 2;
    const std::int64_t drawn = half + static_cast<std::int64_t>(delays.uniform_below(static_cast<std::uint64_t>(half)));
    const std::int64_t start = std::max(drawn, n);
    if (start > n) {
      const std::int64_t end = std::min(start, horizon);
      visitor.hold(n + 1, end + 1, pos);
      n = end;
      if (n >= horizon) return;
    }
    const State target = -pos;
    while (pos != target) {
      pos += bits.step();
      ++n;
      visitor.walk(n, pos);
      if (n >= horizon) return;
    }
  }
  if (n < horizon) visitor.hold(n + 1, horizon + 1, pos);
}

/// Materialized path M_0..M_horizon.
std::vector<State> sample_delayed_path(const Schedule& s, std::int64_t horizon, std::uint64_t path_seed);

/// Per-window profile of P(M_n in {+-1}) over n in [t_k, t_{k+1}] and the
/// sign check at each t_k. Flags every n whose estimate + 3 sigma falls below
/// 1 - 2 eps_k, and every t_k whose estimate + 3 sigma of
/// P(M_{t_k} in {+-1}) falls below 1 - eps_k.
McReport occupancy_check(const Schedule& s, std::int64_t horizon, std::uint64_t paths, SeedPlan plan,
                         unsigned workers = default_workers());

/// P(M_{t_k} = (-1)^(k-1) M_1) for every t_k <= horizon, against 1 - eps_k,
/// plus a count of paths with an increment outside {-1, 0, 1}.
McReport alternation_check(const Schedule& s, std::int64_t horizon, std::uint64_t paths, SeedPlan plan,
                           unsigned workers = default_workers());

/// Both checks above from a single simulation: {alternation, occupancy}.
std::vector<McReport> delayed_walk_checks(const Schedule& s, std::int64_t horizon, std::uint64_t paths,
                                          SeedPlan plan, unsigned workers = default_workers());

}  // namespace martlab
