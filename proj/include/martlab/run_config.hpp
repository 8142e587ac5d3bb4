#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "martlab/delayedwalk.hpp"
#include "martlab/excursion.hpp"
#include "martlab/kernels.hpp"
#include "martlab/marginals.hpp"
#include "martlab/montecarlo.hpp"

namespace martlab {

/// Everything one CLI run depends on. Serialized as JSON with a fixed key
/// order; `serialize(parse(text)) == text` for any serialized config.
struct RunConfig {
  std::string chain = "alternating";  // ssrw | alternating | holding | excursion | delayedwalk | custom:<file>
  int horizon = -1;                   // -1: chain default (see resolved_horizon)
  std::uint64_t paths = 100000;
  std::uint64_t seed = 1;
  std::string coupling = "nested";    // independent | nested
  std::string prob_seq = "harmonic";  // harmonic | list:<file>
  std::string eps_rule = "pow2";
  int K = 6;
  std::vector<std::string> stats;     // simulate statistics
  std::vector<int> at;                // times for marginal / alternation statistics
  std::string window;                 // "first:last"; empty = last quarter of the horizon
  int p = 1;                          // probe moment exponent
  std::vector<std::int64_t> y;        // probe tail thresholds; empty = powers of two
  bool allow_nonmartingale = false;
  std::string output = "csv";         // csv | json
  std::string out_path;               // empty = stdout

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Throws std::invalid_argument on unknown keys, wrong types or bad values.
RunConfig parse_run_config(const std::string& text);
std::string serialize_run_config(const RunConfig& c);
/// Checks field values (chain names, coupling, output, ...).
void validate_run_config(const RunConfig& c);
/// git-style digest of the config with out_path cleared.
std::string config_digest(const RunConfig& c);

bool is_kernel_chain(const RunConfig& c);
Kernel make_kernel(const RunConfig& c);
ProbSeq make_prob_seq(const RunConfig& c);
CouplingStrategy make_coupling(const RunConfig& c);
PathSource make_path_source(const RunConfig& c);
/// Exact marginal flow for kernel and excursion chains; throws
/// std::invalid_argument for delayedwalk.
MarginalFlow exact_flow(const RunConfig& c);
/// Horizon of a run: c.horizon when set, else t_K for a simulated delayed
/// walk, 64 for other simulations and 18 for exact computations.
std::int64_t resolved_horizon(const RunConfig& c, bool simulate);
/// Absorption window: c.window or the last quarter [3h/4, h].
std::pair<int, int> absorption_window(const RunConfig& c, int horizon);

}  // namespace martlab
