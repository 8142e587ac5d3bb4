#include <sstream>

#include "doctest.h"
#include "martlab/exactprob.hpp"

using namespace martlab;

namespace {

Dist dist(std::initializer_list<std::pair<State, const char*>> atoms) {
  Dist::Atoms m;
  for (const auto& [x, s] : atoms) m[x] = Rational::parse(s);
  return Dist::from_masses(m);
}

}  // namespace

TEST_CASE("state text round-trips at the extremes") {
  for (const State x : {State{0}, State{-1}, State{12345}, kStateMax, -kStateMax}) {
    CHECK(parse_state(to_string(x)) == x);
  }
  CHECK(to_string(pow2_state(100)) == "1267650600228229401496703205376");
  CHECK_THROWS_AS(parse_state("12a"), std::invalid_argument);
  CHECK_THROWS_AS(parse_state(""), std::invalid_argument);
  CHECK_THROWS_AS(parse_state("170141183460469231731687303715884105728"), std::overflow_error);
  CHECK_THROWS_AS(pow2_state(127), std::overflow_error);
}

TEST_CASE("rationals are canonical") {
  CHECK(Rational::parse("2/4").str() == "1/2");
  CHECK(Rational::parse("-6/-4").str() == "3/2");
  CHECK(Rational::parse("3").str() == "3/1");
  CHECK(Rational(0).str() == "0/1");
  CHECK(Rational(4, -6).str() == "-2/3");
  CHECK(Rational::pow2(-3) == Rational(1, 8));
  CHECK(Rational::pow2(70).numerator() == mpz_class("1180591620717411303424"));
  CHECK(Rational(1, 3) + Rational(1, 6) == Rational(1, 2));
  CHECK(Rational(1, 3) < Rational(1, 2));
  CHECK_THROWS(Rational::parse("1/0"));
  CHECK_THROWS(Rational::parse("x/2"));
  CHECK_THROWS(Rational(1) / Rational(0));
}

TEST_CASE("distributions hold only positive masses summing to one") {
  const Dist d = dist({{-1, "1/2"}, {0, "0/1"}, {3, "1/2"}});
  CHECK(d.size() == 2);
  CHECK(d.mass(0) == Rational(0));
  CHECK(d.min_state() == -1);
  CHECK(d.max_state() == 3);
  CHECK_THROWS_AS(dist({{0, "1/2"}}), std::invalid_argument);
  CHECK_THROWS_AS(dist({{0, "3/2"}, {1, "-1/2"}}), std::invalid_argument);
  CHECK_THROWS_AS(Dist::from_masses({}), std::invalid_argument);
  CHECK(Dist() == Dist::point(0));
}

TEST_CASE("moments and tails") {
  const Dist d = dist({{-3, "1/4"}, {-1, "1/4"}, {1, "1/4"}, {3, "1/4"}});
  CHECK(dist_mean(d) == Rational(0));
  CHECK(abs_moment(d, 1) == Rational(2));
  CHECK(abs_moment(d, 2) == Rational(5));
  CHECK(ui_tail(d, 0) == Rational(2));
  CHECK(ui_tail(d, 1) == Rational(3, 2));
  CHECK(ui_tail(d, 3) == Rational(0));
  CHECK_THROWS(abs_moment(d, 0));
  CHECK_THROWS(ui_tail(d, -1));
}

TEST_CASE("moment inequalities hold on assorted laws") {
  const std::vector<Dist> laws = {
      dist({{-5, "1/3"}, {2, "1/2"}, {7, "1/6"}}),
      dist({{0, "1/1"}}),
      dist({{-1, "9/10"}, {9, "1/10"}}),
      dist({{-100, "1/1000"}, {1, "997/1000"}, {50, "2/1000"}}),
  };
  for (const Dist& d : laws) {
    CHECK(dist_mean(d).abs() <= abs_moment(d, 1));
    const Rational m1 = abs_moment(d, 1);
    CHECK(m1 * m1 <= abs_moment(d, 2));
    CHECK(ui_tail(d, 0) == abs_moment(d, 1));
  }
}

TEST_CASE("total variation is a metric on small laws") {
  const std::vector<Dist> laws = {
      uniform_pm1(),
      Dist::point(0),
      dist({{-1, "1/4"}, {0, "1/2"}, {1, "1/4"}}),
      dist({{-3, "1/4"}, {-1, "1/4"}, {1, "1/4"}, {3, "1/4"}}),
  };
  for (const Dist& a : laws) {
    CHECK(tv_distance(a, a) == Rational(0));
    for (const Dist& b : laws) {
      CHECK(tv_distance(a, b) == tv_distance(b, a));
      CHECK(tv_distance(a, b) <= Rational(1));
      if (!(a == b)) CHECK(tv_distance(a, b) > Rational(0));
      for (const Dist& c : laws) CHECK(tv_distance(a, c) <= tv_distance(a, b) + tv_distance(b, c));
    }
  }
  CHECK(tv_distance(uniform_pm1(), Dist::point(0)) == Rational(1));
  CHECK(tv_distance(uniform_pm1(), laws[2]) == Rational(1, 2));
}

TEST_CASE("CSV and JSON round-trip") {
  const Dist d = dist({{-kStateMax, "1/3"}, {0, "1/6"}, {7, "1/2"}});
  std::stringstream csv;
  write_dist_csv(csv, d);
  CHECK(csv.str().starts_with("x,numerator,denominator\n"));
  CHECK(read_dist_csv(csv) == d);
  CHECK(dist_from_json(dist_to_json(d)) == d);
  CHECK(dist_to_json(d)["7"] == "1/2");
  std::stringstream bad("x,numerator,denominator\n1,1,2\n1,1,2\n");
  CHECK_THROWS(read_dist_csv(bad));
  CHECK_THROWS(dist_from_json(nlohmann::json{{"1", 0.5}}));
}
