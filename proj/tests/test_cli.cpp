#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "martlab/cli.hpp"
#include "martlab/run_config.hpp"

using namespace martlab;

namespace {

const std::filesystem::path kFixtures = MARTLAB_FIXTURES;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "martlab");
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "martlab-tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("config round-trips byte for byte") {
  const std::string text = slurp(kFixtures / "configs" / "excursion_nested.json");
  const RunConfig c = parse_run_config(text);
  CHECK(serialize_run_config(c) == text);
  CHECK(parse_run_config(serialize_run_config(c)) == c);
  CHECK(c.K == 8);
  CHECK(c.stats == std::vector<std::string>{"marginal", "tail"});
  const RunConfig d = parse_run_config(R"({"chain": "ssrw"})");
  CHECK(d.horizon == -1);
  CHECK(parse_run_config(serialize_run_config(d)) == d);
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(parse_run_config(slurp(kFixtures / "configs" / "unknown_key.json")), std::invalid_argument);
  const char* bad[] = {
      R"({"chain": "brownian"})", R"({"horizon": "ten"})",       R"({"paths": 0})",
      R"({"coupling": "loose"})", R"({"output": "xml"})",         R"({"window": "5"})",
      R"({"window": "9:3"})",     R"({"stats": ["variance"]})",   R"({"eps_rule": "fast"})",
      R"([1, 2])",                R"({"prob_seq": "geometric"})", R"({"p": 0})",
  };
  for (const char* text : bad) {
    CAPTURE(text);
    CHECK_THROWS_AS(parse_run_config(text), std::invalid_argument);
  }
}

TEST_CASE("digest ignores the output path") {
  RunConfig a;
  RunConfig b;
  b.out_path = "somewhere.csv";
  CHECK(config_digest(a) == config_digest(b));
  b.seed = 2;
  CHECK(config_digest(a) != config_digest(b));
  CHECK(config_digest(a).size() == 40);
}

TEST_CASE("marginals command") {
  const Run r = cli({"marginals", "--chain", "alternating", "--horizon", "2"});
  CHECK(r.code == 0);
  CHECK(r.out.find("2,-3,1,4\n") != std::string::npos);
  CHECK(r.out.find("2,3,1,4\n") != std::string::npos);
  const Run e = cli({"marginals", "--chain", "excursion", "--prob-seq", "harmonic", "--horizon", "2"});
  CHECK(e.out.find("2,2,1,4\n") != std::string::npos);
  const Run dw = cli({"marginals", "--chain", "delayedwalk"});
  CHECK(dw.code == 2);
  CHECK(dw.err.find("simulate") != std::string::npos);
  const Run j = cli({"marginals", "--chain", "ssrw", "--horizon", "1", "--output", "json"});
  CHECK(nlohmann::json::parse(j.out)["mu"][1]["1"] == "1/2");
  const Run list = cli({"marginals", "--chain", "excursion", "--prob-seq",
                        "list:" + (kFixtures / "probseq" / "quarter_tail.json").string(), "--horizon", "3"});
  CHECK(list.code == 0);
}

TEST_CASE("compare command") {
  const Run eq = cli({"compare", "--chain", "alternating", "--other", "holding", "--horizon", "18"});
  CHECK(eq.code == 0);
  CHECK(eq.out.ends_with("EQUAL\n"));
  const Run ne = cli({"compare", "--chain", "alternating", "--other", "ssrw", "--horizon", "2"});
  CHECK(ne.code == 1);
  CHECK(ne.out.find("DIFFERENT first n=2") != std::string::npos);
  CHECK(cli({"compare", "--chain", "ssrw", "--other", "ssrw", "--horizon", "5"}).code == 0);
  CHECK(cli({"compare", "--chain", "ssrw"}).code == 2);
  CHECK(cli({"compare", "--chain", "ssrw", "--other", "delayedwalk"}).code == 2);
}

TEST_CASE("verify command") {
  CHECK(cli({"verify", "--chain", "holding", "--horizon", "14"}).code == 0);
  CHECK(cli({"verify", "--chain", "ssrw", "--horizon", "14"}).code == 0);
  CHECK(cli({"verify", "--chain", "excursion", "--horizon", "10"}).code == 0);
  CHECK(cli({"verify", "--chain", "delayedwalk", "-K", "4"}).code == 0);
  const std::string drift = "custom:" + (kFixtures / "nonmartingale" / "drift_at_zero.json").string();
  const Run bad = cli({"verify", "--chain", drift, "--horizon", "4"});
  CHECK(bad.code == 1);
  CHECK(bad.out.find("violation n=0 x=0 mean=1/3") != std::string::npos);
  CHECK(cli({"marginals", "--chain", drift, "--horizon", "3"}).code == 1);
  CHECK(cli({"marginals", "--chain", drift, "--horizon", "3", "--allow-nonmartingale"}).code == 0);
  for (const auto& entry : std::filesystem::directory_iterator(kFixtures / "kernels")) {
    CHECK(cli({"verify", "--chain", "custom:" + entry.path().string(), "--horizon", "12"}).code == 0);
  }
  CHECK(cli({"verify", "--chain", "custom:missing.json"}).code == 2);
}

TEST_CASE("probe command") {
  const Run walk = cli({"probe", "--chain", "ssrw", "-p", "2", "--horizon", "10", "--y", "3"});
  REQUIRE(walk.code == 0);
  std::istringstream lines(walk.out);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "n,abs_moment,ui_tail_3");
  for (int n = 0; n <= 10; ++n) {
    std::getline(lines, line);
    CHECK(line.starts_with(std::to_string(n) + "," + std::to_string(n) + "/1,"));
  }
  const Run zero = cli({"probe", "--chain", "alternating", "-p", "1", "--horizon", "0"});
  CHECK(zero.out == "n,abs_moment,ui_tail_1,ui_tail_2\n0,0/1,0/1,0/1\n");
  CHECK(cli({"probe", "--chain", "delayedwalk"}).code == 2);
  CHECK(cli({"probe", "--chain", "ssrw", "-p", "0"}).code == 2);
}

TEST_CASE("schedule command") {
  const Run one = cli({"schedule", "-K", "1", "--output", "json"});
  CHECK(one.code == 0);
  CHECK(nlohmann::json::parse(one.out)["rows"][0]["t_k"] == 1);
  const Run three = cli({"schedule", "-K", "3"});
  CHECK(three.out.find("\n3,1/8,,22100,,\n") != std::string::npos);
  const Run big = cli({"schedule", "-K", "50"});
  CHECK(big.code == 1);
  CHECK(big.err.find("8 of 50") != std::string::npos);
  CHECK(cli({"schedule", "-K", "0"}).code == 2);
  CHECK(cli({"schedule", "-K", "3", "--eps-rule", "constant:1/2"}).code == 2);
}

TEST_CASE("simulate command") {
  const auto out = scratch("sim.json");
  const Run r = cli({"simulate", "--config", (kFixtures / "configs" / "excursion_nested.json").string(), "--out",
                     out.string()});
  CHECK(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(out));
  CHECK(j["config"]["K"] == 8);
  CHECK(j["reports"][0]["statistic"] == "empirical-marginal");
  CHECK(j["reports"][1]["statistic"] == "tail");
  CHECK(j["reports"][1]["config_digest"] == j["config_digest"]);

  const Run csv = cli({"simulate", "--chain", "alternating", "--paths", "3000", "--horizon", "16", "--stats",
                       "alternation", "--at", "4,5"});
  CHECK(csv.code == 0);
  CHECK(csv.out.starts_with("statistic,label,index,"));
  CHECK(csv.out.find("alternation,") != std::string::npos);

  CHECK(cli({"simulate", "--chain", "ssrw", "--stats", "tail"}).code == 2);
  CHECK(cli({"simulate", "--chain", "excursion", "--coupling", "independent", "--stats", "tail"}).code == 2);
  CHECK(cli({"simulate", "--chain", "delayedwalk", "--stats", "marginal"}).code == 2);
  CHECK(cli({"simulate", "--chain", "holding", "--horizon", "200"}).code == 2);
  CHECK(cli({"simulate", "--chain", "delayedwalk", "-K", "3", "--paths", "2000"}).code == 0);
}

TEST_CASE("simulate output is reproducible") {
  const std::vector<std::string> args = {"simulate", "--chain", "holding", "--paths", "4000", "--horizon", "24",
                                         "--stats", "marginal,absorption,step-mean", "--at", "4,8", "--seed", "77"};
  setenv("MARTLAB_THREADS", "1", 1);
  const Run a = cli(args);
  setenv("MARTLAB_THREADS", "4", 1);
  const Run b = cli(args);
  unsetenv("MARTLAB_THREADS");
  CHECK(a.out == b.out);
  CHECK(a.code == b.code);
}

TEST_CASE("config files and flags combine") {
  const auto saved = scratch("saved.json");
  CHECK(cli({"marginals", "--chain", "ssrw", "--horizon", "3", "--save-config", saved.string()}).code == 0);
  const RunConfig c = parse_run_config(slurp(saved));
  CHECK(c.chain == "ssrw");
  CHECK(c.horizon == 3);
  const Run r = cli({"marginals", "--config", saved.string(), "--horizon", "1"});
  CHECK(r.out == "n,x,numerator,denominator\n0,0,1,1\n1,-1,1,2\n1,1,1,2\n");
  CHECK(cli({"marginals", "--config", (kFixtures / "configs" / "unknown_key.json").string()}).code == 2);
  CHECK(cli({"marginals", "--config", "missing.json"}).code == 2);
}

TEST_CASE("usage errors") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"bogus"}).code == 2);
  CHECK(cli({"marginals", "--horizon", "x"}).code == 2);
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({"simulate", "--help"}).code == 0);
}
