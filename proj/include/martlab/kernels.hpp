#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "martlab/exactprob.hpp"

namespace martlab {

/// Largest horizon accepted by the exact routines unless a caller asks for more.
inline constexpr int kDefaultHorizonCap = 60;

/// Largest time index n at which the two-point-set rows can be evaluated:
/// the jump target 2^(n+1) - 1 must fit in a State.
inline constexpr int kMaxRowTime = 125;

class CapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Time-inhomogeneous transition law on the integers together with the law of
/// the starting state. Rows are pure functions of (n, x).
class Kernel {
 public:
  using Law = std::function<Dist(int n, State x)>;

  Kernel(std::string name, Dist initial, Law law, bool declared_martingale = true);

  const std::string& name() const { return name_; }
  const Dist& initial() const { return initial_; }
  bool declared_martingale() const { return declared_martingale_; }

  /// Law of M_{n+1} given M_n = x. Throws std::invalid_argument for n < 0.
  Dist law(int n, State x) const;

 private:
  std::string name_;
  Dist initial_;
  Law law_;
  bool declared_martingale_;
};

Kernel ssrw_kernel();
/// Alternation between +-1 with compensating jumps to +-(2^(n+1) - 1).
Kernel alternating_kernel();
/// Holding in +-1 with nearly symmetric jumps to +-(2^(n+1) - 1).
Kernel holding_kernel();

/// Fair +-1 step from x.
Dist ssrw_row(State x);

struct PnQn {
  int n = 0;
  Rational p;
  Rational q;
};

/// p_n = 1 / (2 - 2^-n), q_n = 1 - p_n.
PnQn pn_qn(int n);

struct MartingaleViolation {
  int n = 0;
  State x = 0;
  Rational mean;
};

struct MartingaleReport {
  std::string kernel;
  int horizon = 0;
  std::size_t rows_checked = 0;
  std::vector<MartingaleViolation> violations;

  bool ok() const { return violations.empty(); }
};

/// Checks mean(law(n, x)) == x exactly at every (n, x) with x reachable at
/// time n, for 0 <= n <= horizon. Violations are reported, not thrown.
/// Throws CapExceeded when horizon > cap.
MartingaleReport verify_martingale(const Kernel& k, int horizon, int cap = kDefaultHorizonCap);

}  // namespace martlab
