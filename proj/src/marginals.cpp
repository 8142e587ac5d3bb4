#include "martlab/marginals.hpp"

#include <ostream>

namespace martlab {

std::vector<std::set<State>> reachable_supports(const Kernel& k, int horizon) {
  std::vector<std::set<State>> supports;
  supports.reserve(static_cast<std::size_t>(horizon) + 1);
  std::set<State> current;
  for (const auto& [x, m] : k.initial().atoms()) current.insert(x);
  supports.push_back(current);
  for (int n = 0; n < horizon; ++n) {
    std::set<State> next;
    for (const State x : current) {
      for (const auto& [y, m] : k.law(n, x).atoms()) next.insert(y);
    }
    supports.push_back(next);
    current = std::move(next);
  }
  return supports;
}

MarginalFlow forward_marginals(const Kernel& k, int horizon, int cap) {
  if (horizon < 0) throw std::invalid_argument("horizon must be >= 0");
  if (horizon > cap) {
    throw CapExceeded("horizon " + std::to_string(horizon) + " exceeds the state-width cap " + std::to_string(cap));
  }
  MarginalFlow flow{k.name(), horizon, {k.initial()}};
  flow.mu.reserve(static_cast<std::size_t>(horizon) + 1);
  for (int n = 0; n < horizon; ++n) {
    Dist::Atoms next;
    for (const auto& [x, mass] : flow.mu.back().atoms()) {
      for (const auto& [y, step] : k.law(n, x).atoms()) next[y] += mass * step;
    }
    flow.mu.push_back(Dist::from_masses(std::move(next)));
  }
  return flow;
}

namespace {

struct PathEnumerator {
  const Kernel& kernel;
  int horizon;
  std::uint64_t budget;
  std::uint64_t visited = 0;
  std::vector<Dist::Atoms> sums;

  void descend(int n, State x, const Rational& weight) {
    if (++visited > budget) {
      throw BudgetExceeded("path enumeration exceeded " + std::to_string(budget) + " nodes");
    }
    sums[static_cast<std::size_t>(n)][x] += weight;
    if (n == horizon) return;
    for (const auto& [y, step] : kernel.law(n, x).atoms()) descend(n + 1, y, weight * step);
  }
};

}  // namespace

MarginalFlow enumerate_paths_oracle(const Kernel& k, int horizon, std::uint64_t budget) {
  if (horizon < 0) throw std::invalid_argument("horizon must be >= 0");
  PathEnumerator e{k, horizon, budget, 0, std::vector<Dist::Atoms>(static_cast<std::size_t>(horizon) + 1)};
  for (const auto& [x, m] : k.initial().atoms()) e.descend(0, x, m);
  MarginalFlow flow{k.name(), horizon, {}};
  for (auto& atoms : e.sums) flow.mu.push_back(Dist::from_masses(std::move(atoms)));
  return flow;
}

bool FlowComparison::equal() const { return first_difference() == nullptr; }

const StepComparison* FlowComparison::first_difference() const {
  for (const auto& s : steps) {
    if (!s.equal) return &s;
  }
  return nullptr;
}

FlowComparison compare_flows(const MarginalFlow& a, const MarginalFlow& b) {
  if (a.horizon != b.horizon || a.mu.size() != b.mu.size()) {
    throw std::invalid_argument("cannot compare flows with horizons " + std::to_string(a.horizon) + " and " +
                                std::to_string(b.horizon));
  }
  FlowComparison out{a.kernel, b.kernel, {}};
  for (std::size_t n = 0; n < a.mu.size(); ++n) {
    StepComparison step;
    step.n = static_cast<int>(n);
    const Dist& da = a.mu[n];
    const Dist& db = b.mu[n];
    step.equal = da == db;
    if (!step.equal) {
      step.tv = tv_distance(da, db);
      std::set<State> keys;
      for (const auto& [x, m] : da.atoms()) keys.insert(x);
      for (const auto& [x, m] : db.atoms()) keys.insert(x);
      for (const State x : keys) {
        if (da.mass(x) != db.mass(x)) {
          step.first_x = x;
          step.mass_a = da.mass(x);
          step.mass_b = db.mass(x);
          break;
        }
      }
    }
    out.steps.push_back(std::move(step));
  }
  return out;
}

void write_flow_csv(std::ostream& os, const MarginalFlow& flow) {
  os << "n,x,numerator,denominator\n";
  for (std::size_t n = 0; n < flow.mu.size(); ++n) {
    for (const auto& [x, m] : flow.mu[n].atoms()) {
      os << n << ',' << to_string(x) << ',' << m.numerator().get_str() << ',' << m.denominator().get_str() << '\n';
    }
  }
}

nlohmann::json flow_to_json(const MarginalFlow& flow) {
  nlohmann::json mu = nlohmann::json::array();
  for (const auto& d : flow.mu) mu.push_back(dist_to_json(d));
  return {{"kernel", flow.kernel}, {"horizon", flow.horizon}, {"mu", mu}};
}

}  // namespace martlab
