#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "martlab/exactprob.hpp"
#include "martlab/kernels.hpp"
#include "martlab/marginals.hpp"
#include "martlab/report.hpp"
#include "martlab/sampling.hpp"

namespace martlab {

/// Event probabilities p_k, k = 1, 2, ...: an explicit prefix followed by a
/// tail rule. Every p_k lies in (0, 1].
class ProbSeq {
 public:
  struct Constant {
    Rational value;
  };
  /// p_k = 1 / (a k + b)
  struct Reciprocal {
    Rational a;
    Rational b;
  };
  using Tail = std::variant<Constant, Reciprocal>;

  /// Throws std::invalid_argument if some p_k falls outside (0, 1].
  ProbSeq(std::string name, std::vector<Rational> prefix, Tail tail);

  /// p_k = 1/k
  static ProbSeq harmonic();
  static ProbSeq constant(const Rational& p);
  /// {"values": ["1/1", ...], "tail": {"rule": "constant", "value": "1/3"}}
  /// or tail {"rule": "reciprocal", "a": "1/1", "b": "0/1"}.
  static ProbSeq from_json(const nlohmann::json& j, std::string name);

  const std::string& name() const { return name_; }
  Rational operator()(int k) const;
  /// Whether p_1 >= p_2 >= ... over all k.
  bool nonincreasing() const;
  nlohmann::json to_json() const;

 private:
  std::string name_;
  std::vector<Rational> prefix_;
  Tail tail_;
};

enum class Coupling { Independent, Nested };

std::string to_string(Coupling c);
Coupling parse_coupling(std::string_view text);

/// How the events A_k are drawn jointly. Nested requires a nonincreasing sequence.
struct CouplingStrategy {
  CouplingStrategy(Coupling tag, ProbSeq seq);

  Coupling tag;
  ProbSeq seq;
};

/// Lazily sampled indicators 1(A_k) of one path, drawn from the path's
/// auxiliary stream. Nested uses a single uniform U with A_k = {U < p_k};
/// Independent draws a fresh uniform per k.
class EventSampler {
 public:
  EventSampler(const CouplingStrategy& cs, std::uint64_t path_seed);
  bool occurred(int k);

 private:
  const CouplingStrategy* cs_;
  SplitMix64 rng_;
  double shared_uniform_ = 0.0;
  std::vector<char> drawn_;
};

/// q_n(x, j): probability that S_n = x after exactly j returns to 0 in steps 1..n.
class JointZeroCount {
 public:
  explicit JointZeroCount(int horizon, int cap = kDefaultHorizonCap);

  int horizon() const { return horizon_; }
  Rational q(int n, State x, int j) const;
  /// Number of walk paths (out of 2^n) with S_n = x and j returns.
  const mpz_class& paths(int n, State x, int j) const;

 private:
  int horizon_;
  // counts_[n][x + n][j], j <= n / 2
  std::vector<std::vector<std::vector<mpz_class>>> counts_;
};

JointZeroCount joint_zero_count(int horizon, int cap = kDefaultHorizonCap);

/// mu[n](x) = sum_j q_n(x, j) p_{j+1} for x != 0; mu[n](0) is the complement.
MarginalFlow excursion_marginal(const ProbSeq& ps, int horizon, int cap = kDefaultHorizonCap);

struct ExcursionEvent {
  int k = 0;
  bool occurred = false;
};

struct ExcursionPath {
  std::vector<State> walk;    // S_0..S_horizon
  std::vector<State> values;  // M_0..M_horizon
  // One entry per excursion that has taken at least one step by the horizon.
  std::vector<ExcursionEvent> events;
};

/// Walk steps come from substream 0 of `path_seed`, events from substream 1.
ExcursionPath sample_excursion_path(const CouplingStrategy& cs, int horizon, std::uint64_t path_seed);

/// Empirical P(N >= k) against the exact p_k under the nested coupling, k <= K.
/// N is counted over the first K events of each path.
McReport nested_tail_check(const ProbSeq& ps, int K, std::uint64_t paths, SeedPlan plan,
                           unsigned workers = default_workers());

/// Empirical mean number of occurred events among the first K excursions,
/// against sum_{k<=K} p_k.
McReport event_count_check(const CouplingStrategy& cs, int K, std::uint64_t paths, SeedPlan plan,
                           unsigned workers = default_workers());

/// sum_{k<=K} p_k
Rational expected_event_count(const ProbSeq& ps, int K);

}  // namespace martlab
