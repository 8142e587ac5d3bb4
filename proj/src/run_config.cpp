#include "martlab/run_config.hpp"

#include <fstream>

#include "martlab/kernel_spec.hpp"
#include "martlab/report.hpp"

namespace martlab {

namespace {

template <class T>
T field(const nlohmann::json& j, const char* key, const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw std::invalid_argument(std::string("config field '") + key + "' has the wrong type");
  }
}

const char* const kKeys[] = {"chain",  "horizon", "paths", "seed", "coupling", "prob_seq",
                             "eps_rule", "K", "stats", "at", "window", "p", "y",
                             "allow_nonmartingale", "output", "out_path"};

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      throw std::invalid_argument("unknown config field '" + key + "'");
    }
  }
  RunConfig d;
  RunConfig c;
  c.chain = field(j, "chain", d.chain);
  c.horizon = field(j, "horizon", d.horizon);
  c.paths = field(j, "paths", d.paths);
  c.seed = field(j, "seed", d.seed);
  c.coupling = field(j, "coupling", d.coupling);
  c.prob_seq = field(j, "prob_seq", d.prob_seq);
  c.eps_rule = field(j, "eps_rule", d.eps_rule);
  c.K = field(j, "K", d.K);
  c.stats = field(j, "stats", d.stats);
  c.at = field(j, "at", d.at);
  c.window = field(j, "window", d.window);
  c.p = field(j, "p", d.p);
  c.y = field(j, "y", d.y);
  c.allow_nonmartingale = field(j, "allow_nonmartingale", d.allow_nonmartingale);
  c.output = field(j, "output", d.output);
  c.out_path = field(j, "out_path", d.out_path);
  validate_run_config(c);
  return c;
}

std::string serialize_run_config(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["chain"] = c.chain;
  j["horizon"] = c.horizon;
  j["paths"] = c.paths;
  j["seed"] = c.seed;
  j["coupling"] = c.coupling;
  j["prob_seq"] = c.prob_seq;
  j["eps_rule"] = c.eps_rule;
  j["K"] = c.K;
  j["stats"] = c.stats;
  j["at"] = c.at;
  j["window"] = c.window;
  j["p"] = c.p;
  j["y"] = c.y;
  j["allow_nonmartingale"] = c.allow_nonmartingale;
  j["output"] = c.output;
  j["out_path"] = c.out_path;
  return j.dump(2) + "\n";
}

void validate_run_config(const RunConfig& c) {
  static const std::vector<std::string> kChains = {"ssrw", "alternating", "holding", "excursion", "delayedwalk"};
  if (std::find(kChains.begin(), kChains.end(), c.chain) == kChains.end() && !c.chain.starts_with("custom:")) {
    throw std::invalid_argument("unknown chain '" + c.chain + "'");
  }
  if (c.horizon < -1) throw std::invalid_argument("horizon must be >= 0, or -1 for the chain default");
  if (c.paths < 1) throw std::invalid_argument("paths must be >= 1");
  parse_coupling(c.coupling);
  if (c.prob_seq != "harmonic" && !c.prob_seq.starts_with("list:")) {
    throw std::invalid_argument("prob_seq must be harmonic or list:<file>");
  }
  EpsRule::parse(c.eps_rule);
  if (c.K < 1) throw std::invalid_argument("K must be >= 1");
  static const std::vector<std::string> kStats = {"marginal", "alternation", "absorption", "tail",
                                                  "events",   "occupancy",   "step-mean"};
  for (const auto& s : c.stats) {
    if (std::find(kStats.begin(), kStats.end(), s) == kStats.end()) throw std::invalid_argument("unknown statistic '" + s + "'");
  }
  for (const int n : c.at) {
    if (n < 0) throw std::invalid_argument("times in 'at' must be >= 0");
  }
  if (c.p < 1) throw std::invalid_argument("moment exponent p must be >= 1");
  for (const auto v : c.y) {
    if (v < 0) throw std::invalid_argument("tail thresholds must be >= 0");
  }
  if (c.output != "csv" && c.output != "json") throw std::invalid_argument("output must be csv or json");
  if (!c.window.empty()) {
    const auto colon = c.window.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("window must look like first:last");
    try {
      const int first = std::stoi(c.window.substr(0, colon));
      const int last = std::stoi(c.window.substr(colon + 1));
      if (first < 0 || last < first) throw std::invalid_argument("window needs 0 <= first <= last");
    } catch (const std::logic_error&) {
      throw std::invalid_argument("window must look like first:last");
    }
  }
}

std::string config_digest(const RunConfig& c) {
  RunConfig copy = c;
  copy.out_path.clear();
  return git_blob_digest(serialize_run_config(copy));
}

bool is_kernel_chain(const RunConfig& c) {
  return c.chain == "ssrw" || c.chain == "alternating" || c.chain == "holding" || c.chain.starts_with("custom:");
}

Kernel make_kernel(const RunConfig& c) {
  if (c.chain == "ssrw") return ssrw_kernel();
  if (c.chain == "alternating") return alternating_kernel();
  if (c.chain == "holding") return holding_kernel();
  if (c.chain.starts_with("custom:")) return make_kernel(load_kernel_spec(c.chain.substr(7)));
  throw std::invalid_argument("chain '" + c.chain + "' is not a kernel chain");
}

ProbSeq make_prob_seq(const RunConfig& c) {
  if (c.prob_seq == "harmonic") return ProbSeq::harmonic();
  const std::string file = c.prob_seq.substr(5);
  std::ifstream in(file);
  if (!in) throw std::invalid_argument("cannot open probability sequence " + file);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("probability sequence " + file + ": " + e.what());
  }
  return ProbSeq::from_json(j, "list:" + file);
}

CouplingStrategy make_coupling(const RunConfig& c) { return CouplingStrategy(parse_coupling(c.coupling), make_prob_seq(c)); }

PathSource make_path_source(const RunConfig& c) {
  if (c.chain == "excursion") return make_coupling(c);
  if (c.chain == "delayedwalk") return build_schedule(c.K, EpsRule::parse(c.eps_rule));
  return make_kernel(c);
}

MarginalFlow exact_flow(const RunConfig& c) {
  if (c.chain == "delayedwalk") {
    throw std::invalid_argument("delayedwalk marginals depend on the sampled delays; use simulate instead");
  }
  const auto h = static_cast<int>(resolved_horizon(c, false));
  if (c.chain == "excursion") return excursion_marginal(make_prob_seq(c), h);
  return forward_marginals(make_kernel(c), h);
}

std::int64_t resolved_horizon(const RunConfig& c, bool simulate) {
  if (c.horizon >= 0) return c.horizon;
  if (!simulate) return 18;
  if (c.chain == "delayedwalk") return build_schedule(c.K, EpsRule::parse(c.eps_rule)).horizon();
  return 64;
}

std::pair<int, int> absorption_window(const RunConfig& c, int horizon) {
  if (c.window.empty()) return {3 * horizon / 4, horizon};
  const auto colon = c.window.find(':');
  return {std::stoi(c.window.substr(0, colon)), std::stoi(c.window.substr(colon + 1))};
}

}  // namespace martlab
