#include "martlab/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "martlab/run_config.hpp"

namespace martlab {

namespace {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Raw flag values; a flag overrides the --config file only when given.
struct Flags {
  std::string config_file;
  std::string save_config;
  std::string other;
  RunConfig v;
  std::vector<std::pair<CLI::Option*, void (*)(RunConfig&, const RunConfig&)>> bound;
};

#define MARTLAB_FIELD(name) [](RunConfig& dst, const RunConfig& src) { dst.name = src.name; }

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config_file, "JSON run config; explicit flags override it");
  sub->add_option("--save-config", f.save_config, "Write the effective run config to this file");
  auto bind = [&](CLI::Option* o, void (*copy)(RunConfig&, const RunConfig&)) { f.bound.emplace_back(o, copy); };
  bind(sub->add_option("--chain", f.v.chain, "ssrw, alternating, holding, excursion, delayedwalk or custom:<file>"),
       MARTLAB_FIELD(chain));
  bind(sub->add_option("--horizon", f.v.horizon, "Last time index"), MARTLAB_FIELD(horizon));
  bind(sub->add_option("--paths", f.v.paths, "Monte Carlo paths"), MARTLAB_FIELD(paths));
  bind(sub->add_option("--seed", f.v.seed, "Master seed"), MARTLAB_FIELD(seed));
  bind(sub->add_option("--coupling", f.v.coupling, "independent or nested"), MARTLAB_FIELD(coupling));
  bind(sub->add_option("--prob-seq", f.v.prob_seq, "harmonic or list:<file>"), MARTLAB_FIELD(prob_seq));
  bind(sub->add_option("--eps-rule", f.v.eps_rule, "pow2, geometric:r, constant:c or list:e1,e2,..."),
       MARTLAB_FIELD(eps_rule));
  bind(sub->add_option("-K,--K", f.v.K, "Number of scheduled crossings or counted events"), MARTLAB_FIELD(K));
  bind(sub->add_option("--stats", f.v.stats, "marginal,alternation,absorption,tail,events,occupancy,step-mean")
           ->delimiter(','),
       MARTLAB_FIELD(stats));
  bind(sub->add_option("--at", f.v.at, "Times for marginal and alternation statistics")->delimiter(','),
       MARTLAB_FIELD(at));
  bind(sub->add_option("--window", f.v.window, "Absorption window first:last"), MARTLAB_FIELD(window));
  bind(sub->add_option("-p,--p", f.v.p, "Moment exponent for probe"), MARTLAB_FIELD(p));
  bind(sub->add_option("--y", f.v.y, "Tail thresholds for probe")->delimiter(','), MARTLAB_FIELD(y));
  bind(sub->add_flag("--allow-nonmartingale", f.v.allow_nonmartingale, "Use custom kernels that fail verification"),
       MARTLAB_FIELD(allow_nonmartingale));
  bind(sub->add_option("--output", f.v.output, "csv or json"), MARTLAB_FIELD(output));
  bind(sub->add_option("--out", f.v.out_path, "Output file (default stdout)"), MARTLAB_FIELD(out_path));
}

#undef MARTLAB_FIELD

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig effective_config(const Flags& f) {
  RunConfig c = f.config_file.empty() ? RunConfig{} : parse_run_config(read_file(f.config_file));
  for (const auto& [opt, copy] : f.bound) {
    if (opt->count() > 0) copy(c, f.v);
  }
  validate_run_config(c);
  if (!f.save_config.empty()) {
    std::ofstream o(f.save_config, std::ios::binary);
    if (!o) throw ConfigError("cannot write " + f.save_config);
    o << serialize_run_config(c);
  }
  return c;
}

void emit(const RunConfig& c, const std::string& text, std::ostream& out) {
  if (c.out_path.empty()) {
    out << text;
    return;
  }
  std::ofstream o(c.out_path, std::ios::binary);
  if (!o) throw ConfigError("cannot write " + c.out_path);
  o << text;
}

int exact_horizon(const RunConfig& c) { return static_cast<int>(resolved_horizon(c, false)); }

void require_exact(const RunConfig& c, const char* command) {
  if (c.chain == "delayedwalk") {
    throw ConfigError(std::string(command) +
                      ": delayedwalk marginals depend on the sampled start times and are only available via simulate");
  }
}

// Custom kernels must pass the martingale check unless explicitly allowed.
bool custom_kernel_ok(const RunConfig& c, int horizon, std::ostream& err) {
  if (!c.chain.starts_with("custom:") || c.allow_nonmartingale) return true;
  const MartingaleReport r = verify_martingale(make_kernel(c), std::max(horizon, 1));
  if (r.ok()) return true;
  err << "kernel " << r.kernel << " is not a martingale (pass --allow-nonmartingale to use it anyway)\n";
  for (const auto& v : r.violations) {
    err << "  n=" << v.n << " x=" << to_string(v.x) << " mean=" << v.mean << "\n";
  }
  return false;
}

int cmd_marginals(const RunConfig& c, std::ostream& out, std::ostream& err) {
  require_exact(c, "marginals");
  if (!custom_kernel_ok(c, exact_horizon(c), err)) return kExitFailed;
  const MarginalFlow flow = exact_flow(c);
  std::ostringstream text;
  if (c.output == "json") {
    text << flow_to_json(flow).dump(2) << "\n";
  } else {
    write_flow_csv(text, flow);
  }
  emit(c, text.str(), out);
  return kExitOk;
}

int cmd_compare(const RunConfig& c, const std::string& other, std::ostream& out, std::ostream& err) {
  if (other.empty()) throw ConfigError("compare needs --other <chain>");
  RunConfig b = c;
  b.chain = other;
  validate_run_config(b);
  require_exact(c, "compare");
  require_exact(b, "compare");
  const int h = exact_horizon(c);
  if (!custom_kernel_ok(c, h, err) || !custom_kernel_ok(b, h, err)) return kExitFailed;
  const FlowComparison cmp = compare_flows(exact_flow(c), exact_flow(b));
  std::ostringstream text;
  text << "compare " << cmp.kernel_a << " " << cmp.kernel_b << "\n";
  for (const auto& s : cmp.steps) {
    text << "n=" << s.n;
    if (s.equal) {
      text << " equal\n";
    } else {
      text << " differ tv=" << s.tv << " x=" << to_string(*s.first_x) << " a=" << s.mass_a << " b=" << s.mass_b
           << "\n";
    }
  }
  const StepComparison* first = cmp.first_difference();
  if (first == nullptr) {
    text << "EQUAL\n";
  } else {
    text << "DIFFERENT first n=" << first->n << " x=" << to_string(*first->first_x) << "\n";
  }
  emit(c, text.str(), out);
  return first == nullptr ? kExitOk : kExitFailed;
}

struct CheckLog {
  std::ostringstream text;
  bool ok = true;

  void check(const std::string& name, bool passed, const std::string& detail = {}) {
    text << "check " << name << ": " << (passed ? "ok" : "FAILED");
    if (!detail.empty()) text << " (" << detail << ")";
    text << "\n";
    ok = ok && passed;
  }
};

// Checks on an exact flow shared by kernel and excursion chains.
void check_flow(const MarginalFlow& flow, bool symmetric, CheckLog& log) {
  const Rational mean0 = dist_mean(flow.mu.front());
  std::optional<int> mean_bad;
  std::optional<int> sym_bad;
  for (std::size_t n = 0; n < flow.mu.size(); ++n) {
    const Dist& d = flow.mu[n];
    if (!mean_bad && dist_mean(d) != mean0) mean_bad = static_cast<int>(n);
    if (symmetric && !sym_bad) {
      for (const auto& [x, m] : d.atoms()) {
        if (d.mass(-x) != m) {
          sym_bad = static_cast<int>(n);
          break;
        }
      }
    }
  }
  log.check("constant mean", !mean_bad, mean_bad ? "n=" + std::to_string(*mean_bad) : "");
  if (symmetric) log.check("symmetry", !sym_bad, sym_bad ? "n=" + std::to_string(*sym_bad) : "");
}

void verify_kernel(const RunConfig& c, int h, CheckLog& log) {
  const Kernel k = make_kernel(c);
  const MartingaleReport r = verify_martingale(k, std::max(h, 1));
  log.check("martingale", r.ok(),
            std::to_string(r.rows_checked) + " rows, " + std::to_string(r.violations.size()) + " violations");
  for (const auto& v : r.violations) {
    log.text << "  violation n=" << v.n << " x=" << to_string(v.x) << " mean=" << v.mean << "\n";
  }
  const MarginalFlow flow = forward_marginals(k, h);
  const bool builtin = c.chain == "ssrw" || c.chain == "alternating" || c.chain == "holding";
  check_flow(flow, builtin, log);
  if (!builtin) return;
  const bool two_point = c.chain != "ssrw";
  std::optional<int> zero_bad;
  std::optional<int> bound_bad;
  for (int n = 0; n <= h; ++n) {
    const Dist& d = flow.mu[static_cast<std::size_t>(n)];
    // |S_n| <= n for the walk, |M_n| <= 2^n - 1 for the two-point-set chains.
    const State bound = two_point ? pow2_state(n) - 1 : State{n};
    if (!bound_bad && (abs_state(d.min_state()) > bound || abs_state(d.max_state()) > bound)) bound_bad = n;
    if (two_point && n >= 1 && !zero_bad && d.mass(0) != Rational(0)) zero_bad = n;
  }
  log.check("support bound", !bound_bad, bound_bad ? "n=" + std::to_string(*bound_bad) : "");
  if (two_point) log.check("zero avoidance", !zero_bad, zero_bad ? "n=" + std::to_string(*zero_bad) : "");
}

void verify_excursion(const RunConfig& c, int h, CheckLog& log) {
  const ProbSeq ps = make_prob_seq(c);
  if (parse_coupling(c.coupling) == Coupling::Nested) log.check("nonincreasing p_k", ps.nonincreasing());
  const MarginalFlow flow = excursion_marginal(ps, h);
  check_flow(flow, true, log);
  std::optional<int> bound_bad;
  for (int n = 0; n <= h && !bound_bad; ++n) {
    const Dist& d = flow.mu[static_cast<std::size_t>(n)];
    if (abs_state(d.min_state()) > n || abs_state(d.max_state()) > n) bound_bad = n;
  }
  log.check("support bound", !bound_bad, bound_bad ? "n=" + std::to_string(*bound_bad) : "");
}

void verify_schedule(const RunConfig& c, CheckLog& log) {
  const Schedule s = build_schedule(c.K, EpsRule::parse(c.eps_rule));
  log.check("t_1 = 1", s.t(1) == 1);
  for (int k = 1; k < s.K(); ++k) {
    const ScheduleRow& r = s.rows[static_cast<std::size_t>(k - 1)];
    const std::int64_t next = s.t(k + 1);
    const std::string at = "k=" + std::to_string(k);
    log.check("even t_k+1 " + at, next % 2 == 0);
    log.check("t_k+1 / 2 > t_k " + at, next / 2 > r.t);
    log.check("certificate " + at, r.certificate_lhs && r.certificate_rhs && *r.certificate_lhs <= *r.certificate_rhs,
              r.certificate_lhs ? r.certificate_lhs->str() + " <= " + r.certificate_rhs->str() : "missing");
  }
}

int cmd_verify(const RunConfig& c, std::ostream& out) {
  CheckLog log;
  log.text << "verify " << c.chain << "\n";
  const int h = exact_horizon(c);
  if (c.chain == "delayedwalk") {
    verify_schedule(c, log);
  } else if (c.chain == "excursion") {
    verify_excursion(c, h, log);
  } else {
    verify_kernel(c, h, log);
  }
  log.text << (log.ok ? "PASS" : "FAIL") << "\n";
  emit(c, log.text.str(), out);
  return log.ok ? kExitOk : kExitFailed;
}

std::vector<int> times_up_to(const std::vector<int>& wanted, int last) {
  std::vector<int> t;
  for (const int n : wanted) {
    if (n <= last) t.push_back(n);
  }
  return t;
}

std::vector<std::string> default_stats(const RunConfig& c) {
  if (c.chain == "delayedwalk") return {"alternation", "occupancy"};
  if (c.chain == "excursion") {
    return {"marginal", parse_coupling(c.coupling) == Coupling::Nested ? "tail" : "events"};
  }
  return {"marginal", "alternation", "absorption"};
}

std::vector<McReport> simulate_delayed(const RunConfig& c, const std::vector<std::string>& stats, SeedPlan plan) {
  for (const auto& s : stats) {
    if (s != "alternation" && s != "occupancy") {
      throw ConfigError("statistic '" + s + "' is not available for delayedwalk (use alternation or occupancy)");
    }
  }
  const Schedule schedule = build_schedule(c.K, EpsRule::parse(c.eps_rule));
  const std::int64_t h = resolved_horizon(c, true);
  const std::vector<McReport> both = delayed_walk_checks(schedule, h, c.paths, plan);
  std::vector<McReport> reports;
  for (const auto& s : stats) reports.push_back(s == "alternation" ? both[0] : both[1]);
  return reports;
}

std::vector<McReport> simulate_paths(const RunConfig& c, const std::vector<std::string>& stats, SeedPlan plan) {
  const std::int64_t h64 = resolved_horizon(c, true);
  if (h64 < 1) throw ConfigError("simulate needs horizon >= 1");
  if (is_kernel_chain(c) && h64 > kMaxRowTime) {
    throw ConfigError("kernel simulations are limited to horizon " + std::to_string(kMaxRowTime));
  }
  if (h64 > 1'000'000) throw ConfigError("path simulations are limited to horizon 1000000");
  const int h = static_cast<int>(h64);
  const bool excursion = c.chain == "excursion";
  const std::vector<int> marginal_times = times_up_to(c.at.empty() ? std::vector<int>{8, 16, 32} : c.at, h);
  const std::vector<int> alternation_times =
      times_up_to(c.at.empty() ? std::vector<int>{4, 5, 6, 7, 8, 9, 10} : c.at, h - 1);
  const auto window = absorption_window(c, h);
  if (window.second > h) throw ConfigError("absorption window ends after the horizon");

  PathStats proto;
  bool need_paths = false;
  for (const auto& s : stats) {
    if (s == "marginal") {
      proto.marginal.emplace(marginal_times);
    } else if (s == "alternation") {
      proto.alternation.emplace(h);
    } else if (s == "absorption") {
      proto.absorption.emplace(window.first, window.second);
    } else if (s == "step-mean") {
      proto.steps.emplace(h);
    } else if ((s == "tail" || s == "events") && !excursion) {
      throw ConfigError("statistic '" + s + "' needs the excursion chain");
    } else if (s == "tail" && parse_coupling(c.coupling) != Coupling::Nested) {
      throw ConfigError("statistic 'tail' needs the nested coupling (use 'events' for independent)");
    } else if (s == "occupancy") {
      throw ConfigError("statistic 'occupancy' needs the delayedwalk chain");
    }
    need_paths = need_paths || (s != "tail" && s != "events");
  }

  const PathSource src = make_path_source(c);
  PathStats acc = proto;
  if (need_paths) acc = run_paths(src, c.paths, h, plan, proto);

  std::optional<MarginalFlow> exact;
  if (proto.marginal && !marginal_times.empty()) {
    const int last = *std::max_element(marginal_times.begin(), marginal_times.end());
    if (last <= kDefaultHorizonCap) {
      exact = excursion ? excursion_marginal(make_prob_seq(c), last) : forward_marginals(make_kernel(c), last);
    }
  }

  std::vector<McReport> reports;
  for (const auto& s : stats) {
    if (s == "marginal") {
      reports.push_back(marginal_report(*acc.marginal, plan, exact ? &*exact : nullptr));
    } else if (s == "alternation") {
      reports.push_back(alternation_report(*acc.alternation, alternation_times, plan, c.paths, c.chain == "alternating"));
    } else if (s == "absorption") {
      reports.push_back(absorption_report(*acc.absorption, plan));
    } else if (s == "step-mean") {
      reports.push_back(step_mean_report(*acc.steps, plan, c.paths));
    } else if (s == "tail") {
      reports.push_back(nested_tail_check(make_prob_seq(c), c.K, c.paths, plan));
    } else if (s == "events") {
      reports.push_back(event_count_check(make_coupling(c), c.K, c.paths, plan));
    }
  }
  return reports;
}

int cmd_simulate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const std::vector<std::string> stats = c.stats.empty() ? default_stats(c) : c.stats;
  if (is_kernel_chain(c) && !custom_kernel_ok(c, static_cast<int>(resolved_horizon(c, true)), err)) return kExitFailed;
  const SeedPlan plan{c.seed};
  std::vector<McReport> reports = c.chain == "delayedwalk" ? simulate_delayed(c, stats, plan) : simulate_paths(c, stats, plan);
  const std::string digest = config_digest(c);
  for (auto& r : reports) r.config_digest = digest;

  std::ostringstream text;
  if (c.output == "json") {
    nlohmann::ordered_json j;
    j["config"] = nlohmann::ordered_json::parse(serialize_run_config(c));
    j["config_digest"] = digest;
    j["reports"] = nlohmann::ordered_json::array();
    for (const auto& r : reports) j["reports"].push_back(report_to_json(r));
    text << j.dump(2) << "\n";
  } else {
    write_reports_csv(text, reports);
  }
  emit(c, text.str(), out);

  bool ok = true;
  for (const auto& r : reports) {
    for (const auto& f : r.flags) err << r.statistic << ": " << f << "\n";
    ok = ok && r.passed();
  }
  return ok ? kExitOk : kExitFailed;
}

int cmd_probe(const RunConfig& c, std::ostream& out, std::ostream& err) {
  require_exact(c, "probe");
  const int h = exact_horizon(c);
  if (!custom_kernel_ok(c, h, err)) return kExitFailed;
  const MarginalFlow flow = exact_flow(c);
  std::vector<State> ys;
  if (c.y.empty()) {
    for (int j = 0; j <= std::min(h + 1, 62); ++j) ys.push_back(pow2_state(j));
  } else {
    for (const auto v : c.y) ys.push_back(v);
  }
  std::ostringstream text;
  if (c.output == "json") {
    nlohmann::ordered_json j;
    j["chain"] = flow.kernel;
    j["p"] = c.p;
    j["y"] = nlohmann::ordered_json::array();
    for (const State y : ys) j["y"].push_back(to_string(y));
    j["rows"] = nlohmann::ordered_json::array();
    for (std::size_t n = 0; n < flow.mu.size(); ++n) {
      nlohmann::ordered_json row;
      row["n"] = n;
      row["abs_moment"] = abs_moment(flow.mu[n], c.p).str();
      row["ui_tail"] = nlohmann::ordered_json::array();
      for (const State y : ys) row["ui_tail"].push_back(ui_tail(flow.mu[n], y).str());
      j["rows"].push_back(std::move(row));
    }
    text << j.dump(2) << "\n";
  } else {
    text << "n,abs_moment";
    for (const State y : ys) text << ",ui_tail_" << to_string(y);
    text << "\n";
    for (std::size_t n = 0; n < flow.mu.size(); ++n) {
      text << n << "," << abs_moment(flow.mu[n], c.p);
      for (const State y : ys) text << "," << ui_tail(flow.mu[n], y);
      text << "\n";
    }
  }
  emit(c, text.str(), out);
  return kExitOk;
}

int cmd_schedule(const RunConfig& c, std::ostream& out, std::ostream& err) {
  Schedule s;
  try {
    s = build_schedule(c.K, EpsRule::parse(c.eps_rule));
  } catch (const ScheduleOverflow& e) {
    err << "schedule: " << e.what() << "\n";
    err << "crossings that fit: " << e.fitted() << " of " << c.K << "\n";
    return kExitFailed;
  }
  std::ostringstream text;
  if (c.output == "json") {
    text << schedule_to_json(s).dump(2) << "\n";
  } else {
    text << "k,eps_k,L*_k,t_k,certificate_lhs,certificate_rhs\n";
    for (const auto& r : s.rows) {
      text << r.k << "," << r.eps << "," << (r.crossing_bound ? std::to_string(*r.crossing_bound) : "") << "," << r.t
           << "," << (r.certificate_lhs ? r.certificate_lhs->str() : "") << ","
           << (r.certificate_rhs ? r.certificate_rhs->str() : "") << "\n";
    }
  }
  emit(c, text.str(), out);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exact and Monte Carlo laboratory for martingale counterexamples", "martlab"};
  app.require_subcommand(1);
  Flags flags;
  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {"marginals", "Exact marginal laws mu[0..horizon]"},
      {"compare", "Exact comparison of two marginal flows"},
      {"verify", "Exact martingale and structural checks"},
      {"simulate", "Monte Carlo statistics"},
      {"probe", "Moment and uniform-integrability tails of the exact marginals"},
      {"schedule", "Calibrated times t_k of the bounded-increment construction"},
  };
  std::map<std::string, CLI::App*> apps;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    add_common(sub, flags);
    apps[s.name] = sub;
  }
  apps["compare"]->add_option("--other", flags.other, "Chain compared against --chain")->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const RunConfig c = effective_config(flags);
    if (apps["marginals"]->parsed()) return cmd_marginals(c, out, err);
    if (apps["compare"]->parsed()) return cmd_compare(c, flags.other, out, err);
    if (apps["verify"]->parsed()) return cmd_verify(c, out);
    if (apps["simulate"]->parsed()) return cmd_simulate(c, out, err);
    if (apps["probe"]->parsed()) return cmd_probe(c, out, err);
    return cmd_schedule(c, out, err);
  } catch (const ScheduleOverflow& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailed;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CapExceeded& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const BudgetExceeded& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::overflow_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailed;
  }
}

}  // namespace martlab
