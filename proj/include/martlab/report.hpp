#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace martlab {

/// 3 * sqrt(p (1 - p) / trials), the pass/fail radius of a frequency.
double frequency_radius(double p, std::uint64_t trials);

/// One estimated quantity. `hits`/`trials` are set for frequencies.
struct McEntry {
  std::string label;
  std::int64_t index = 0;
  double estimate = 0.0;
  double radius = 0.0;
  std::optional<double> reference;
  std::uint64_t hits = 0;
  std::uint64_t trials = 0;
  std::optional<bool> pass;
};

struct McReport {
  std::string statistic;
  std::uint64_t paths = 0;
  std::uint64_t master_seed = 0;
  std::string config_digest;
  std::vector<McEntry> entries;
  std::vector<std::string> flags;

  bool passed() const;
  McEntry& add(McEntry e) { return entries.emplace_back(std::move(e)); }
};

nlohmann::ordered_json report_to_json(const McReport& r);
/// Header: statistic,label,index,estimate,radius,reference,hits,trials,pass,
/// paths,master_seed,config_digest. Fields with commas or quotes are quoted.
void write_reports_csv(std::ostream& os, const std::vector<McReport>& reports);

/// Formats a double so that it reads back to the same value.
std::string format_double(double v);

/// git-style object id: SHA-1 of "blob <size>\0<content>", lowercase hex.
std::string git_blob_digest(std::string_view content);

}  // namespace martlab
