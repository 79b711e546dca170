// SPDX-License-Identifier: Apache-2.0
//
// End-to-end checks of the command-line harness.  The binary path arrives
// through ALLOCLAB_CLI_PATH (set by the build); stderr is discarded so
// expected-failure cases stay quiet in the test log.
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

namespace {

struct CmdResult {
  int status = -1;
  std::string out;
};

const char* cli_path() {
#ifdef ALLOCLAB_CLI_PATH
  return ALLOCLAB_CLI_PATH;
#else
  const char* p = std::getenv("ALLOCLAB_CLI_PATH");
  REQUIRE(p != nullptr);
  return p;
#endif
}

CmdResult run_cli(const std::string& args) {
  const std::string cmd =
      std::string("'") + cli_path() + "' " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CmdResult r;
  char buf[4096];
  std::size_t got = 0;
  while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) {
    r.out.append(buf, got);
  }
  const int rc = pclose(pipe);
  r.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return r;
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> lines;
  std::istringstream in(s);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("parameter fitting on the command line", "[cli]") {
  CHECK(run_cli("theta --family geometric --alpha 2").out ==
        "0.666666666667\n");
  CHECK(run_cli("theta --family poisson --alpha 1.5").out == "1.5\n");
  CHECK(run_cli("theta --family 'binomial(3)' --alpha 1").out == "0.5\n");

  const auto bad = run_cli("theta --family 'binomial(3)' --alpha 4");
  CHECK(bad.status == 1);
}

TEST_CASE("conditional probabilities on the command line", "[cli]") {
  CHECK(run_cli("prob --family geometric --N 10 --n 10 --s 0").out ==
        "0.473684210526\n");
  CHECK(run_cli("prob --family poisson --N 3 --n 4 --counts '2;1;1'").out ==
        "0.148148148148\n");

  SECTION("exactly one query form") {
    CHECK(run_cli("prob --family poisson --N 3 --n 4").status == 1);
    CHECK(run_cli("prob --family poisson --N 3 --n 4 --s 1 --counts '1;1;2'")
              .status == 1);
  }

  SECTION("bad inputs exit 1") {
    CHECK(run_cli("prob --family zeta --N 3 --n 4 --s 0").status == 1);
    CHECK(run_cli("prob --family poisson --N 3 --n 4 --counts '1;1'")
              .status == 1);
  }
}

TEST_CASE("list of built-in families", "[cli]") {
  const auto r = run_cli("families");
  CHECK(r.status == 0);
  const auto lines = lines_of(r.out);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0].rfind("poisson", 0) == 0);
  CHECK(lines[3].rfind("custom", 0) == 0);
}

TEST_CASE("sampling on the command line", "[cli]") {
  const std::string args =
      "sample --family poisson --N 4 --n 6 --reps 3 --seed 7";
  const auto r = run_cli(args);
  CHECK(r.status == 0);
  const auto lines = lines_of(r.out);
  REQUIRE(lines.size() == 3);
  for (const auto& line : lines) {
    std::istringstream in(line);
    long long v = 0, sum = 0;
    int fields = 0;
    while (in >> v) {
      sum += v;
      ++fields;
    }
    CHECK(fields == 4);
    CHECK(sum == 6);
  }

  SECTION("the seed makes reruns identical") {
    CHECK(run_cli(args).out == r.out);
    CHECK(run_cli(args + " --method rejection").out !=
          run_cli(args + " --method direct").out);
  }

  SECTION("every method draws rows with the right sum") {
    for (const char* method : {"direct", "table", "rejection"}) {
      const auto m = run_cli(args + " --method " + method);
      CHECK(m.status == 0);
      for (const auto& line : lines_of(m.out)) {
        std::istringstream in(line);
        long long v = 0, sum = 0;
        while (in >> v) sum += v;
        CHECK(sum == 6);
      }
    }
  }
}

TEST_CASE("experiment subcommands emit reports", "[cli]") {
  SECTION("identity probe prints a JSON report") {
    const auto r = run_cli(
        "identities --family poisson --alphas 1 --colour-counts 2 "
        "--s-max 2");
    REQUIRE(r.status == 0);
    const auto doc = nlohmann::json::parse(r.out);
    CHECK(doc.at("summary").at("all_product_hold").get<bool>());
    CHECK(doc.at("summary").at("all_composition_hold").get<bool>());
    CHECK(doc.at("config").at("kind") == "identities");
  }

  SECTION("occupancy-limit run writes the requested files") {
    TempFile csv("alloclab_cli_report.csv");
    TempFile json("alloclab_cli_report.json");
    const auto r = run_cli(
        "slln --family poisson --N 100 --n 100 --schedule list:50,100 "
        "--reps 2 --out alloclab_cli_report --format both");
    REQUIRE(r.status == 0);

    std::ifstream jin(json.path);
    REQUIRE(jin.good());
    nlohmann::json doc;
    jin >> doc;
    CHECK(doc.at("num_records").get<int>() == 4);

    std::ifstream cin_(csv.path);
    REQUIRE(cin_.good());
    std::string header;
    std::getline(cin_, header);
    CHECK(header.rfind("kind,N,n,s,", 0) == 0);

    // stdout carries the same JSON document
    const auto echoed = nlohmann::json::parse(r.out);
    CHECK(echoed.at("config_hash") == doc.at("config_hash"));
  }

  SECTION("unwritable output paths exit 2") {
    const auto r = run_cli(
        "slln --family poisson --N 50 --n 50 --reps 1 "
        "--out no_such_dir/report");
    CHECK(r.status == 2);
  }

  SECTION("invalid experiment flags exit 1") {
    CHECK(run_cli("lil --family poisson --N 1 --n 1 --schedule list:1 "
                  "--reps 1")
              .status == 1);
    CHECK(run_cli("tail --family poisson --N 64 --n 64 --reps 10 "
                  "--eps-grid 1.0")
              .status == 1);
    CHECK(run_cli("slln --family poisson --N 10 --n 10 --target 'total:-1' "
                  "--reps 1")
              .status == 1);
  }

  SECTION("unknown subcommands and flags exit 1") {
    CHECK(run_cli("frobnicate").status == 1);
    CHECK(run_cli("theta --family poisson --alpha 1 --bogus 3").status == 1);
  }
}
