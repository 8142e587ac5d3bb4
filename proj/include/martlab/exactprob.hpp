#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

#include <gmpxx.h>

#include "json.hpp"

namespace martlab {

/// Integer state of a chain. 128 bits so that the jump targets
/// +-(2^(n+1) - 1) stay representable well past the exact-DP horizon cap.
using State = __int128;

inline constexpr State kStateMax = static_cast<State>((static_cast<unsigned __int128>(1) << 127) - 1);

std::string to_string(State x);
State parse_state(std::string_view text);
mpz_class to_mpz(State x);
State abs_state(State x);

/// 2^e as a State; throws std::overflow_error when e > 126.
State pow2_state(int e);

/// Exact rational number, always in lowest terms with a positive denominator.
class Rational {
 public:
  Rational() = default;
  Rational(long value) : value_(value) {}  // NOLINT(google-explicit-constructor)
  Rational(long num, long den);
  explicit Rational(mpq_class value);

  static Rational from_state(State x);
  /// Parses "num/den" or a bare integer. Throws std::invalid_argument.
  static Rational parse(std::string_view text);
  /// 2^e for any integer e.
  static Rational pow2(int e);

  mpz_class numerator() const { return value_.get_num(); }
  mpz_class denominator() const { return value_.get_den(); }
  const mpq_class& raw() const { return value_; }

  /// Always "num/den", including "0/1" and "3/1".
  std::string str() const;
  double to_double() const { return value_.get_d(); }
  int sign() const { return sgn(value_); }
  Rational abs() const;

  Rational& operator+=(const Rational& o);
  Rational& operator-=(const Rational& o);
  Rational& operator*=(const Rational& o);
  Rational& operator/=(const Rational& o);

  friend Rational operator+(Rational a, const Rational& b) { return a += b; }
  friend Rational operator-(Rational a, const Rational& b) { return a -= b; }
  friend Rational operator*(Rational a, const Rational& b) { return a *= b; }
  friend Rational operator/(Rational a, const Rational& b) { return a /= b; }
  friend Rational operator-(const Rational& a) { return Rational(mpq_class(-a.value_)); }

  friend bool operator==(const Rational& a, const Rational& b) { return cmp(a.value_, b.value_) == 0; }
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
    const int c = cmp(a.value_, b.value_);
    return c < 0 ? std::strong_ordering::less : c > 0 ? std::strong_ordering::greater : std::strong_ordering::equal;
  }

 private:
  mpq_class value_{0};
};

std::ostream& operator<<(std::ostream& os, const Rational& r);

/// Finite-support law on the integers with exact masses. Every stored mass is
/// strictly positive and the masses sum to exactly one.
class Dist {
 public:
  using Atoms = std::map<State, Rational>;

  /// Drops zero masses; throws std::invalid_argument on negative masses,
  /// an empty support or a total different from 1.
  static Dist from_masses(Atoms masses);
  static Dist point(State x);

  const Atoms& atoms() const& { return atoms_; }
  // By value on temporaries, so `for (... : k.law(n, x).atoms())` is safe.
  Atoms atoms() && { return std::move(atoms_); }
  Rational mass(State x) const;
  std::size_t size() const { return atoms_.size(); }
  State min_state() const { return atoms_.begin()->first; }
  State max_state() const { return atoms_.rbegin()->first; }

  friend bool operator==(const Dist&, const Dist&) = default;

 private:
  Atoms atoms_{{0, Rational(1)}};
};

/// U(+-1)
Dist uniform_pm1();

Rational dist_mean(const Dist& d);
/// sum |x|^p d(x) for an integer exponent p >= 1.
Rational abs_moment(const Dist& d, int p);
/// sum over |x| > y of |x| d(x).
Rational ui_tail(const Dist& d, State y);
Rational tv_distance(const Dist& a, const Dist& b);

// CSV rows "x,numerator,denominator"; JSON object {"x": "num/den"}.
void write_dist_csv(std::ostream& os, const Dist& d);
Dist read_dist_csv(std::istream& is);
nlohmann::json dist_to_json(const Dist& d);
Dist dist_from_json(const nlohmann::json& j);

}  // namespace martlab
