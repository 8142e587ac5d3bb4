#include "martlab/kernels.hpp"

#include <utility>

#include "martlab/marginals.hpp"

namespace martlab {

Kernel::Kernel(std::string name, Dist initial, Law law, bool declared_martingale)
    : name_(std::move(name)), initial_(std::move(initial)), law_(std::move(law)), declared_martingale_(declared_martingale) {}

Dist Kernel::law(int n, State x) const {
  if (n < 0) throw std::invalid_argument("kernel queried at negative time");
  return law_(n, x);
}

Dist ssrw_row(State x) {
  if (abs_state(x) == kStateMax) throw std::overflow_error("walk step leaves the State range");
  return Dist::from_masses({{x - 1, Rational(1, 2)}, {x + 1, Rational(1, 2)}});
}

namespace {

// Accumulates, so coinciding targets (e.g. 2^1 - 1 == 1 at n = 0) merge.
Dist row_from(std::initializer_list<std::pair<State, Rational>> atoms) {
  Dist::Atoms merged;
  for (const auto& [x, m] : atoms) merged[x] += m;
  return Dist::from_masses(std::move(merged));
}

void check_row_time(int n) {
  if (n > kMaxRowTime) {
    throw std::overflow_error("row at time " + std::to_string(n) + " jumps outside the State range");
  }
}

}  // namespace

PnQn pn_qn(int n) {
  const Rational p = Rational(1) / (Rational(2) - Rational::pow2(-n));
  return PnQn{n, p, Rational(1) - p};
}

Kernel ssrw_kernel() {
  return Kernel("ssrw", Dist::point(0), [](int, State x) { return ssrw_row(x); });
}

Kernel alternating_kernel() {
  return Kernel("alternating", Dist::point(0), [](int n, State x) {
    if (x != 1 && x != -1) return ssrw_row(x);
    check_row_time(n);
    const Rational jump = Rational::pow2(-n);
    const State far = pow2_state(n + 1) - 1;
    // x = 1 flips to -1 or jumps up to 2^(n+1)-1; x = -1 mirrors it.
    return row_from({{-x, Rational(1) - jump}, {x * far, jump}});
  });
}

Kernel holding_kernel() {
  return Kernel("holding", Dist::point(0), [](int n, State x) {
    if (x != 1 && x != -1) return ssrw_row(x);
    check_row_time(n);
    const Rational jump = Rational::pow2(-n);
    const State far = pow2_state(n + 1) - 1;
    const PnQn pq = pn_qn(n);
    return row_from({{x, Rational(1) - jump}, {x * far, jump * pq.p}, {-x * far, jump * pq.q}});
  });
}

MartingaleReport verify_martingale(const Kernel& k, int horizon, int cap) {
  if (horizon < 1) throw std::invalid_argument("verify_martingale needs horizon >= 1");
  if (horizon > cap) {
    throw CapExceeded("horizon " + std::to_string(horizon) + " exceeds the state-width cap " + std::to_string(cap));
  }
  MartingaleReport report{k.name(), horizon, 0, {}};
  const auto supports = reachable_supports(k, horizon);
  for (int n = 0; n <= horizon; ++n) {
    for (const State x : supports[static_cast<std::size_t>(n)]) {
      const Rational mean = dist_mean(k.law(n, x));
      ++report.rows_checked;
      if (mean != Rational::from_state(x)) report.violations.push_back({n, x, mean});
    }
  }
  return report;
}

}  // namespace martlab
