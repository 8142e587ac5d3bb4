#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "martlab/exactprob.hpp"
#include "martlab/kernels.hpp"

namespace martlab {

/// Exact marginal laws mu[0..horizon] of a chain.
struct MarginalFlow {
  std::string kernel;
  int horizon = 0;
  std::vector<Dist> mu;
};

/// Sets of states reachable at each time 0..horizon (no masses).
std::vector<std::set<State>> reachable_supports(const Kernel& k, int horizon);

/// Exact forward recursion mu[n+1](y) = sum_x mu[n](x) law(n, x)(y). No pruning.
MarginalFlow forward_marginals(const Kernel& k, int horizon, int cap = kDefaultHorizonCap);

class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kDefaultPathBudget = 10'000'000;

/// Same flow computed by summing the probabilities of every individual path.
/// Throws BudgetExceeded once more than `budget` path nodes have been visited.
MarginalFlow enumerate_paths_oracle(const Kernel& k, int horizon, std::uint64_t budget = kDefaultPathBudget);

struct StepComparison {
  int n = 0;
  bool equal = true;
  Rational tv;
  // First atom (ascending x) where the masses differ.
  std::optional<State> first_x;
  Rational mass_a;
  Rational mass_b;
};

struct FlowComparison {
  std::string kernel_a;
  std::string kernel_b;
  std::vector<StepComparison> steps;

  bool equal() const;
  /// First unequal step in n order, if any.
  const StepComparison* first_difference() const;
};

/// Throws std::invalid_argument on a horizon mismatch.
FlowComparison compare_flows(const MarginalFlow& a, const MarginalFlow& b);

/// Rows "n,x,numerator,denominator", n then x ascending.
void write_flow_csv(std::ostream& os, const MarginalFlow& flow);
nlohmann::json flow_to_json(const MarginalFlow& flow);

}  // namespace martlab
