#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>

#include "martlab/kernels.hpp"

namespace martlab {

/// Declarative integer kernel:
///
///   {
///     "name": "lazy-zero",
///     "initial": {"0": "1/1"},
///     "default": "ssrw" | "hold",
///     "overrides": [
///       {"x": 0, "row": {"-1": "1/4", "0": "1/2", "1": "1/4"}},          // every n
///       {"n": 2, "x": 1, "row": {"-1": "3/4", "7": "1/4"}}              // one (n, x)
///     ]
///   }
///
/// Masses are exact "num/den" strings. A (n, x) override beats an every-n
/// override for the same x, which beats the default row.
struct KernelSpec {
  enum class DefaultRow { Ssrw, Hold };

  std::string name;
  Dist initial;
  DefaultRow default_row = DefaultRow::Ssrw;
  std::map<State, Dist> every_time;
  std::map<std::pair<int, State>, Dist> at_time;
};

/// Throws std::invalid_argument on malformed input or rows not summing to 1.
KernelSpec parse_kernel_spec(const nlohmann::json& j);
KernelSpec load_kernel_spec(const std::filesystem::path& file);

Kernel make_kernel(KernelSpec spec);

}  // namespace martlab
