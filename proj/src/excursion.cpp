#include "martlab/excursion.hpp"

#include <cmath>

namespace martlab {

namespace {

Rational tail_value(const ProbSeq::Tail& tail, int k) {
  if (const auto* c = std::get_if<ProbSeq::Constant>(&tail)) return c->value;
  const auto& r = std::get<ProbSeq::Reciprocal>(tail);
  const Rational den = r.a * Rational(k) + r.b;
  if (den.sign() <= 0) throw std::invalid_argument("reciprocal tail has a nonpositive denominator at k=" + std::to_string(k));
  return Rational(1) / den;
}

bool in_unit_interval(const Rational& p) { return p.sign() > 0 && p <= Rational(1); }

}  // namespace

ProbSeq::ProbSeq(std::string name, std::vector<Rational> prefix, Tail tail)
    : name_(std::move(name)), prefix_(std::move(prefix)), tail_(std::move(tail)) {
  for (std::size_t i = 0; i < prefix_.size(); ++i) {
    if (!in_unit_interval(prefix_[i])) {
      throw std::invalid_argument("p_" + std::to_string(i + 1) + " = " + prefix_[i].str() + " is outside (0, 1]");
    }
  }
  const int first_tail = static_cast<int>(prefix_.size()) + 1;
  if (const auto* c = std::get_if<Constant>(&tail_)) {
    if (!in_unit_interval(c->value)) throw std::invalid_argument("constant tail " + c->value.str() + " is outside (0, 1]");
  } else {
    // a k + b must be >= 1 from the first tail index on, which needs a >= 0.
    const auto& r = std::get<Reciprocal>(tail_);
    if (r.a.sign() < 0 || r.a * Rational(first_tail) + r.b < Rational(1)) {
      throw std::invalid_argument("reciprocal tail 1/(" + r.a.str() + " k + " + r.b.str() + ") leaves (0, 1]");
    }
  }
}

ProbSeq ProbSeq::harmonic() { return ProbSeq("harmonic", {}, Reciprocal{Rational(1), Rational(0)}); }

ProbSeq ProbSeq::constant(const Rational& p) { return ProbSeq("constant:" + p.str(), {}, Constant{p}); }

ProbSeq ProbSeq::from_json(const nlohmann::json& j, std::string name) {
  std::vector<Rational> prefix;
  for (const auto& v : j.value("values", nlohmann::json::array())) prefix.push_back(Rational::parse(v.get<std::string>()));
  if (!j.contains("tail")) throw std::invalid_argument("probability sequence needs a \"tail\" rule");
  const auto& t = j.at("tail");
  const auto rule = t.at("rule").get<std::string>();
  if (rule == "constant") return ProbSeq(std::move(name), std::move(prefix), Constant{Rational::parse(t.at("value").get<std::string>())});
  if (rule == "reciprocal") {
    return ProbSeq(std::move(name), std::move(prefix),
                   Reciprocal{Rational::parse(t.at("a").get<std::string>()), Rational::parse(t.at("b").get<std::string>())});
  }
  throw std::invalid_argument("unknown tail rule '" + rule + "'");
}

Rational ProbSeq::operator()(int k) const {
  if (k < 1) throw std::invalid_argument("event index must be >= 1");
  const auto i = static_cast<std::size_t>(k - 1);
  return i < prefix_.size() ? prefix_[i] : tail_value(tail_, k);
}

bool ProbSeq::nonincreasing() const {
  for (std::size_t i = 1; i < prefix_.size(); ++i) {
    if (prefix_[i] > prefix_[i - 1]) return false;
  }
  const int first_tail = static_cast<int>(prefix_.size()) + 1;
  if (!prefix_.empty() && (*this)(first_tail) > prefix_.back()) return false;
  // Both tail rules are nonincreasing once valid (reciprocal needs a >= 0).
  return true;
}

nlohmann::json ProbSeq::to_json() const {
  nlohmann::json values = nlohmann::json::array();
  for (const auto& p : prefix_) values.push_back(p.str());
  nlohmann::json tail;
  if (const auto* c = std::get_if<Constant>(&tail_)) {
    tail = {{"rule", "constant"}, {"value", c->value.str()}};
  } else {
    const auto& r = std::get<Reciprocal>(tail_);
    tail = {{"rule", "reciprocal"}, {"a", r.a.str()}, {"b", r.b.str()}};
  }
  return {{"values", values}, {"tail", tail}};
}

std::string to_string(Coupling c) { return c == Coupling::Independent ? "independent" : "nested"; }

Coupling parse_coupling(std::string_view text) {
  if (text == "independent") return Coupling::Independent;
  if (text == "nested") return Coupling::Nested;
  throw std::invalid_argument("unknown coupling '" + std::string(text) + "' (expected independent or nested)");
}

CouplingStrategy::CouplingStrategy(Coupling t, ProbSeq s) : tag(t), seq(std::move(s)) {
  if (tag == Coupling::Nested && !seq.nonincreasing()) {
    throw std::invalid_argument("nested coupling needs a nonincreasing probability sequence");
  }
}

EventSampler::EventSampler(const CouplingStrategy& cs, std::uint64_t path_seed)
    : cs_(&cs), rng_(substream(path_seed, 1)) {
  if (cs.tag == Coupling::Nested) shared_uniform_ = rng_.uniform01();
}

bool EventSampler::occurred(int k) {
  if (k < 1) throw std::invalid_argument("event index must be >= 1");
  while (static_cast<int>(drawn_.size()) < k) {
    const int next = static_cast<int>(drawn_.size()) + 1;
    const double u = cs_->tag == Coupling::Nested ? shared_uniform_ : rng_.uniform01();
    drawn_.push_back(u < cs_->seq(next).to_double() ? 1 : 0);
  }
  return drawn_[static_cast<std::size_t>(k - 1)] != 0;
}

JointZeroCount::JointZeroCount(int horizon, int cap) : horizon_(horizon) {
  if (horizon < 0) throw std::invalid_argument("horizon must be >= 0");
  if (horizon > cap) throw CapExceeded("horizon " + std::to_string(horizon) + " exceeds the cap " + std::to_string(cap));
  counts_.resize(static_cast<std::size_t>(horizon) + 1);
  counts_[0] = {{mpz_class(1)}};
  for (int n = 0; n < horizon; ++n) {
    const auto& cur = counts_[static_cast<std::size_t>(n)];
    auto& next = counts_[static_cast<std::size_t>(n) + 1];
    next.assign(static_cast<std::size_t>(2 * (n + 1) + 1), std::vector<mpz_class>(static_cast<std::size_t>((n + 1) / 2 + 1)));
    for (int xi = 0; xi < static_cast<int>(cur.size()); ++xi) {
      const int x = xi - n;
      for (int j = 0; j < static_cast<int>(cur[static_cast<std::size_t>(xi)].size()); ++j) {
        const mpz_class& c = cur[static_cast<std::size_t>(xi)][static_cast<std::size_t>(j)];
        if (c == 0) continue;
        for (const int y : {x - 1, x + 1}) {
          const int jj = y == 0 ? j + 1 : j;
          next[static_cast<std::size_t>(y + n + 1)][static_cast<std::size_t>(jj)] += c;
        }
      }
    }
  }
}

const mpz_class& JointZeroCount::paths(int n, State x, int j) const {
  static const mpz_class kZero(0);
  if (n < 0 || n > horizon_ || j < 0) return kZero;
  const auto& table = counts_[static_cast<std::size_t>(n)];
  if (abs_state(x) > n) return kZero;
  const auto& row = table[static_cast<std::size_t>(static_cast<int>(x) + n)];
  if (j >= static_cast<int>(row.size())) return kZero;
  return row[static_cast<std::size_t>(j)];
}

Rational JointZeroCount::q(int n, State x, int j) const {
  return Rational(mpq_class(paths(n, x, j))) * Rational::pow2(-n);
}

JointZeroCount joint_zero_count(int horizon, int cap) { return JointZeroCount(horizon, cap); }

MarginalFlow excursion_marginal(const ProbSeq& ps, int horizon, int cap) {
  const JointZeroCount table(horizon, cap);
  MarginalFlow flow{"excursion:" + ps.name(), horizon, {}};
  for (int n = 0; n <= horizon; ++n) {
    Dist::Atoms atoms;
    Rational off_zero;
    for (int x = -n; x <= n; ++x) {
      if (x == 0) continue;
      Rational m;
      // Being at x != 0 after j returns means the walk is inside excursion j + 1.
      for (int j = 0; j <= n / 2; ++j) {
        const mpz_class& c = table.paths(n, x, j);
        if (c != 0) m += Rational(mpq_class(c)) * ps(j + 1);
      }
      m *= Rational::pow2(-n);
      if (m.sign() != 0) {
        off_zero += m;
        atoms.emplace(x, m);
      }
    }
    atoms.emplace(0, Rational(1) - off_zero);
    flow.mu.push_back(Dist::from_masses(std::move(atoms)));
  }
  return flow;
}

ExcursionPath sample_excursion_path(const CouplingStrategy& cs, int horizon, std::uint64_t path_seed) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  BitSource steps(substream(path_seed, 0));
  EventSampler events(cs, path_seed);
  ExcursionPath path;
  path.walk.reserve(static_cast<std::size_t>(horizon) + 1);
  path.values.reserve(static_cast<std::size_t>(horizon) + 1);
  path.walk.push_back(0);
  path.values.push_back(0);
  State s = 0;
  int returns = 0;
  bool active = false;
  for (int n = 1; n <= horizon; ++n) {
    if (s == 0) {
      // Excursion returns + 1 starts with this step.
      const int k = returns + 1;
      active = events.occurred(k);
      path.events.push_back({k, active});
    }
    s += steps.step();
    if (s == 0) ++returns;
    path.walk.push_back(s);
    path.values.push_back(active ? s : 0);
  }
  return path;
}

namespace {

struct EventCounts {
  std::vector<std::uint64_t> at_least;  // at_least[k-1]: paths with N_K >= k
  std::uint64_t paths = 0;
  std::uint64_t sum = 0;
  std::uint64_t sum_squares = 0;

  void merge(const EventCounts& o) {
    for (std::size_t i = 0; i < at_least.size(); ++i) at_least[i] += o.at_least[i];
    paths += o.paths;
    sum += o.sum;
    sum_squares += o.sum_squares;
  }
};

EventCounts count_events(const CouplingStrategy& cs, int K, std::uint64_t paths, SeedPlan plan, unsigned workers) {
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  EventCounts proto;
  proto.at_least.assign(static_cast<std::size_t>(K), 0);
  return accumulate_paths(paths, workers, proto, [&] {
    return [&](EventCounts& acc, std::uint64_t i) {
      EventSampler events(cs, plan.path_seed(i));
      std::uint64_t count = 0;
      for (int k = 1; k <= K; ++k) count += events.occurred(k) ? 1 : 0;
      for (std::uint64_t k = 1; k <= count; ++k) ++acc.at_least[k - 1];
      ++acc.paths;
      acc.sum += count;
      acc.sum_squares += count * count;
    };
  });
}

}  // namespace

McReport nested_tail_check(const ProbSeq& ps, int K, std::uint64_t paths, SeedPlan plan, unsigned workers) {
  const CouplingStrategy cs(Coupling::Nested, ps);
  const EventCounts counts = count_events(cs, K, paths, plan, workers);
  McReport report{"tail", paths, plan.master_seed, {}, {}, {}};
  for (int k = 1; k <= K; ++k) {
    const std::uint64_t hits = counts.at_least[static_cast<std::size_t>(k - 1)];
    const double p_hat = static_cast<double>(hits) / static_cast<double>(paths);
    const double exact = ps(k).to_double();
    const double radius = frequency_radius(p_hat, paths);
    report.add({"P(N>=k)", k, p_hat, radius, exact, hits, paths, std::abs(p_hat - exact) <= radius});
  }
  return report;
}

McReport event_count_check(const CouplingStrategy& cs, int K, std::uint64_t paths, SeedPlan plan, unsigned workers) {
  const EventCounts counts = count_events(cs, K, paths, plan, workers);
  const double n = static_cast<double>(paths);
  const double mean = static_cast<double>(counts.sum) / n;
  const double var = paths > 1 ? (static_cast<double>(counts.sum_squares) - n * mean * mean) / (n - 1.0) : 0.0;
  const double radius = 3.0 * std::sqrt(std::max(var, 0.0) / n);
  const double exact = expected_event_count(cs.seq, K).to_double();
  McReport report{"event-count", paths, plan.master_seed, {}, {}, {}};
  report.add({"E[N_K] " + to_string(cs.tag), K, mean, radius, exact, 0, paths, std::abs(mean - exact) <= radius});
  return report;
}

Rational expected_event_count(const ProbSeq& ps, int K) {
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  Rational sum;
  for (int k = 1; k <= K; ++k) sum += ps(k);
  return sum;
}

}  // namespace martlab
