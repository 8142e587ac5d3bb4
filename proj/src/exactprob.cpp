#include "martlab/exactprob.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace martlab {

std::string to_string(State x) {
  if (x == 0) return "0";
  const bool negative = x < 0;
  auto u = negative ? -static_cast<unsigned __int128>(x) : static_cast<unsigned __int128>(x);
  std::string digits;
  while (u != 0) {
    digits.push_back(static_cast<char>('0' + static_cast<int>(u % 10)));
    u /= 10;
  }
  if (negative) digits.push_back('-');
  std::reverse(digits.begin(), digits.end());
  return digits;
}

State parse_state(std::string_view text) {
  std::size_t i = 0;
  bool negative = false;
  if (i < text.size() && (text[i] == '-' || text[i] == '+')) {
    negative = text[i] == '-';
    ++i;
  }
  if (i == text.size()) throw std::invalid_argument("empty integer state");
  unsigned __int128 u = 0;
  constexpr auto limit = static_cast<unsigned __int128>(kStateMax);
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (c < '0' || c > '9') throw std::invalid_argument("bad integer state '" + std::string(text) + "'");
    u = u * 10 + static_cast<unsigned>(c - '0');
    if (u > limit) throw std::overflow_error("integer state out of range: " + std::string(text));
  }
  const auto s = static_cast<State>(u);
  return negative ? -s : s;
}

mpz_class to_mpz(State x) {
  const bool negative = x < 0;
  const auto u = negative ? -static_cast<unsigned __int128>(x) : static_cast<unsigned __int128>(x);
  mpz_class result(static_cast<unsigned long>(u >> 64));
  result <<= 64;
  result += mpz_class(static_cast<unsigned long>(u & 0xFFFFFFFFFFFFFFFFULL));
  return negative ? mpz_class(-result) : result;
}

State abs_state(State x) { return x < 0 ? -x : x; }

State pow2_state(int e) {
  if (e < 0 || e > 126) throw std::overflow_error("2^" + std::to_string(e) + " does not fit a State");
  return static_cast<State>(1) << e;
}

Rational::Rational(long num, long den) {
  if (den == 0) throw std::domain_error("zero denominator");
  value_ = mpq_class(num, den);
  value_.canonicalize();
}

Rational::Rational(mpq_class value) : value_(std::move(value)) { value_.canonicalize(); }

Rational Rational::from_state(State x) { return Rational(mpq_class(to_mpz(x))); }

Rational Rational::parse(std::string_view text) {
  auto parse_int = [&](std::string_view part) {
    if (part.empty()) throw std::invalid_argument("bad rational '" + std::string(text) + "'");
    std::size_t start = (part[0] == '-' || part[0] == '+') ? 1 : 0;
    if (start == part.size()) throw std::invalid_argument("bad rational '" + std::string(text) + "'");
    for (std::size_t i = start; i < part.size(); ++i) {
      if (part[i] < '0' || part[i] > '9') throw std::invalid_argument("bad rational '" + std::string(text) + "'");
    }
    if (part[0] == '+') part.remove_prefix(1);
    return mpz_class(std::string(part), 10);
  };
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) return Rational(mpq_class(parse_int(text)));
  mpz_class num = parse_int(text.substr(0, slash));
  mpz_class den = parse_int(text.substr(slash + 1));
  if (den == 0) throw std::invalid_argument("zero denominator in '" + std::string(text) + "'");
  return Rational(mpq_class(num, den));
}

Rational Rational::pow2(int e) {
  mpz_class p(1);
  p <<= static_cast<unsigned long>(e < 0 ? -e : e);
  return e >= 0 ? Rational(mpq_class(p)) : Rational(mpq_class(mpz_class(1), p));
}

std::string Rational::str() const { return value_.get_num().get_str() + "/" + value_.get_den().get_str(); }

Rational Rational::abs() const { return Rational(mpq_class(::abs(value_))); }

Rational& Rational::operator+=(const Rational& o) {
  value_ += o.value_;
  return *this;
}
Rational& Rational::operator-=(const Rational& o) {
  value_ -= o.value_;
  return *this;
}
Rational& Rational::operator*=(const Rational& o) {
  value_ *= o.value_;
  return *this;
}
Rational& Rational::operator/=(const Rational& o) {
  if (o.sign() == 0) throw std::domain_error("division by zero");
  value_ /= o.value_;
  return *this;
}

std::ostream& operator<<(std::ostream& os, const Rational& r) { return os << r.str(); }

Dist Dist::from_masses(Atoms masses) {
  Rational total;
  for (auto it = masses.begin(); it != masses.end();) {
    if (it->second.sign() < 0) {
      throw std::invalid_argument("negative mass " + it->second.str() + " at state " + to_string(it->first));
    }
    if (it->second.sign() == 0) {
      it = masses.erase(it);
      continue;
    }
    total += it->second;
    ++it;
  }
  if (masses.empty()) throw std::invalid_argument("distribution has empty support");
  if (total != Rational(1)) throw std::invalid_argument("masses sum to " + total.str() + ", not 1");
  Dist d;
  d.atoms_ = std::move(masses);
  return d;
}

Dist Dist::point(State x) {
  Dist d;
  d.atoms_ = {{x, Rational(1)}};
  return d;
}

Rational Dist::mass(State x) const {
  const auto it = atoms_.find(x);
  return it == atoms_.end() ? Rational() : it->second;
}

Dist uniform_pm1() { return Dist::from_masses({{-1, Rational(1, 2)}, {1, Rational(1, 2)}}); }

Rational dist_mean(const Dist& d) {
  Rational sum;
  for (const auto& [x, m] : d.atoms()) sum += Rational::from_state(x) * m;
  return sum;
}

Rational abs_moment(const Dist& d, int p) {
  if (p < 1) throw std::invalid_argument("moment exponent must be an integer >= 1");
  mpq_class sum(0);
  for (const auto& [x, m] : d.atoms()) {
    mpz_class power;
    mpz_pow_ui(power.get_mpz_t(), to_mpz(abs_state(x)).get_mpz_t(), static_cast<unsigned long>(p));
    sum += mpq_class(power) * m.raw();
  }
  return Rational(sum);
}

Rational ui_tail(const Dist& d, State y) {
  if (y < 0) throw std::invalid_argument("ui_tail threshold must be >= 0");
  Rational sum;
  for (const auto& [x, m] : d.atoms()) {
    if (abs_state(x) > y) sum += Rational::from_state(abs_state(x)) * m;
  }
  return sum;
}

Rational tv_distance(const Dist& a, const Dist& b) {
  // Merge walk over the two sorted supports.
  Rational sum;
  auto ia = a.atoms().begin();
  auto ib = b.atoms().begin();
  const auto ea = a.atoms().end();
  const auto eb = b.atoms().end();
  while (ia != ea || ib != eb) {
    if (ib == eb || (ia != ea && ia->first < ib->first)) {
      sum += ia->second;
      ++ia;
    } else if (ia == ea || ib->first < ia->first) {
      sum += ib->second;
      ++ib;
    } else {
      sum += (ia->second - ib->second).abs();
      ++ia;
      ++ib;
    }
  }
  return sum * Rational(1, 2);
}

void write_dist_csv(std::ostream& os, const Dist& d) {
  os << "x,numerator,denominator\n";
  for (const auto& [x, m] : d.atoms()) {
    os << to_string(x) << ',' << m.numerator().get_str() << ',' << m.denominator().get_str() << '\n';
  }
}

Dist read_dist_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "x,numerator,denominator") {
    throw std::invalid_argument("distribution CSV must start with header x,numerator,denominator");
  }
  Dist::Atoms atoms;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream row(line);
    for (std::string f; std::getline(row, f, ',');) fields.push_back(f);
    if (fields.size() != 3) throw std::invalid_argument("bad distribution CSV row '" + line + "'");
    const State x = parse_state(fields[0]);
    if (atoms.contains(x)) throw std::invalid_argument("duplicate state " + fields[0]);
    atoms.emplace(x, Rational::parse(fields[1] + "/" + fields[2]));
  }
  return Dist::from_masses(std::move(atoms));
}

nlohmann::json dist_to_json(const Dist& d) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [x, m] : d.atoms()) j[to_string(x)] = m.str();
  return j;
}

Dist dist_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("distribution JSON must be an object");
  Dist::Atoms atoms;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_string()) throw std::invalid_argument("mass for state " + key + " must be a \"num/den\" string");
    atoms.emplace(parse_state(key), Rational::parse(value.get<std::string>()));
  }
  return Dist::from_masses(std::move(atoms));
}

}  // namespace martlab
