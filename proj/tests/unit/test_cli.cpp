#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "jumpstop/commands.hpp"
#include "jumpstop/error.hpp"
#include "jumpstop/problem_spec.hpp"

using namespace jumpstop;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "jumpstop");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "jumpstop_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string spec_path(const char* name) { return std::string(JUMPSTOP_SPEC_DIR) + "/" + name; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path write_spec(const fs::path& dir, const std::string& text) {
  const auto p = dir / "problem.spec";
  std::ofstream(p) << text;
  return p;
}

double field(const std::string& text, const std::string& key) {
  const auto pos = text.find(key + "=");
  REQUIRE(pos != std::string::npos);
  return std::stod(text.substr(pos + key.size() + 1));
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> r;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) r.push_back(l);
  return r;
}

}  // namespace

TEST_CASE("spec parse errors carry line and column") {
  try {
    parse_problem_spec("[model]\npreset = gbm\nsigmaa = 0.2\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(e.column() == 1);
  }
  try {
    parse_problem_spec("[model]\nsigma = abc\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(e.column() == 9);
  }
  CHECK_THROWS_AS(parse_problem_spec("[nowhere]\n"), ParseError);
  CHECK_THROWS_AS(parse_problem_spec("[model]\nsigma = 0.2\nsigma = 0.3\n"), ParseError);
  CHECK_THROWS_AS(parse_problem_spec("[discretization]\nn_nodes = -4\n"), ParseError);
  CHECK_THROWS_AS(parse_problem_spec("[obstacle]\nh = constant(2)\ng = constant(1)\n"),
                  ConfigError);
}

TEST_CASE("an empty spec is the american put") {
  const auto s = parse_problem_spec("");
  CHECK(s.problem.x0 == 1.0);
  CHECK(s.problem.obstacle.g(0.8) == doctest::Approx(0.2));
  CHECK(s.grid.n_nodes > 0);
}

TEST_CASE("digest follows the file content") {
  const std::string a = "[problem]\nT = 1\n";
  const std::string b = "[problem]\nT = 1 \n";
  CHECK(spec_digest(a) == spec_digest(a));
  CHECK(spec_digest(a) != spec_digest(b));
  CHECK(parse_problem_spec(a).digest == spec_digest(a));
}

TEST_CASE("configuration problems exit with code 2") {
  const auto dir = scratch("config");
  const auto bad_key = write_spec(dir, "[model]\nvolatility = 0.2\n");
  auto r = run({"solve", "--spec", bad_key.string(), "--out", dir.string()});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("line 2, column 1") != std::string::npos);

  const auto inverted = write_spec(dir, "[obstacle]\nh = constant(2)\ng = constant(1)\n");
  r = run({"solve", "--spec", inverted.string(), "--out", dir.string()});
  CHECK(r.code == kExitConfig);

  r = run({"solve", "--spec", (dir / "missing.spec").string()});
  CHECK(r.code == kExitConfig);
  r = run({"solve"});
  CHECK(r.code == kExitConfig);
  r = run({"converge", "--spec", spec_path("smooth.spec"), "--axis", "space"});
  CHECK(r.code == kExitConfig);

  const std::string cmd = std::string(JUMPSTOP_CLI_PATH) + " solve --spec " + bad_key.string() +
                          " --out " + dir.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == kExitConfig);
}

TEST_CASE("constant problem solves with both engines") {
  const auto dir = scratch("constant");
  const auto r = run({"solve", "--spec", spec_path("constant.spec"), "--out", dir.string()});
  REQUIRE(r.code == kExitPass);
  for (const char* f : {"surface.csv", "boundary.csv", "report.txt", "manifest.txt"})
    CHECK(fs::exists(dir / f));
  const auto surface = lines(slurp(dir / "surface.csv"));
  CHECK(surface.front() == "t,x,u,h,in_region");
  const auto report = slurp(dir / "report.txt");
  CHECK(field(report, "pide_value") == doctest::Approx(1.0));
  CHECK(field(report, "mc_value") == doctest::Approx(1.0));
  CHECK(report.find("check=crossval") != std::string::npos);
  const auto manifest = slurp(dir / "manifest.txt");
  for (const char* key : {"spec_digest = ", "command = ", "started = ", "finished = ",
                          "jumpstop_version = ", "eigen_version = ", "compiler = "})
    CHECK(manifest.find(key) != std::string::npos);
}

TEST_CASE("mismatched cross-validation fails") {
  const auto dir = scratch("mismatch");
  const auto r = run({"solve", "--spec", spec_path("terminal_claim.spec"), "--mc-spec",
                      spec_path("terminal_claim_undiscounted.spec"), "--out", dir.string()});
  CHECK(r.code == kExitFailure);
  CHECK(slurp(dir / "report.txt").find("pass=false") != std::string::npos);
}

TEST_CASE("strict suite on a zero driver") {
  const auto dir = scratch("strict");
  const auto r = run({"validate", "--spec", spec_path("bounded.spec"), "--suite", "strict",
                      "--out", dir.string()});
  CHECK(r.code == kExitPass);
  CHECK(field(slurp(dir / "report.txt"), "strict_gap") == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("convergence studies") {
  SUBCASE("single level") {
    const auto dir = scratch("converge1");
    const auto r = run({"converge", "--spec", spec_path("smooth.spec"), "--axis", "dx",
                        "--levels", "1", "--out", dir.string()});
    REQUIRE(r.code == kExitPass);
    const auto rows = lines(slurp(dir / "convergence.csv"));
    REQUIRE(rows.size() == 2);
    CHECK(rows[0] == "level,parameter,value_at_probe,diff_from_finest,runtime_ms");
    CHECK(rows[1].find(",0,") != std::string::npos);
  }
  SUBCASE("space refinement of a smooth problem") {
    const auto dir = scratch("converge_dx");
    const auto r = run({"converge", "--spec", spec_path("smooth.spec"), "--axis", "dx",
                        "--levels", "4", "--out", dir.string()});
    REQUIRE(r.code == kExitPass);
    CHECK(lines(slurp(dir / "convergence.csv")).size() == 5);
    CHECK(field(slurp(dir / "report.txt"), "slope") >= 1.5);
  }
  SUBCASE("path refinement") {
    const auto dir = scratch("converge_paths");
    const auto r = run({"converge", "--spec", spec_path("constant.spec"), "--axis", "paths",
                        "--levels", "2", "--out", dir.string()});
    CHECK(r.code == kExitPass);
    CHECK(lines(slurp(dir / "convergence.csv")).size() == 3);
  }
}

TEST_CASE("output does not depend on the thread count") {
  const auto one = scratch("threads1");
  const auto many = scratch("threads8");
  const auto spec = spec_path("bounded.spec");
  REQUIRE(run({"solve", "--spec", spec, "--threads", "1", "--out", one.string()}).code ==
          kExitPass);
  REQUIRE(run({"solve", "--spec", spec, "--threads", "8", "--out", many.string()}).code ==
          kExitPass);
  CHECK(slurp(one / "surface.csv") == slurp(many / "surface.csv"));
  CHECK(slurp(one / "boundary.csv") == slurp(many / "boundary.csv"));
  CHECK(slurp(one / "report.txt") == slurp(many / "report.txt"));
}

TEST_CASE("seed override changes the Monte Carlo estimate") {
  const auto a = scratch("seed_a");
  const auto b = scratch("seed_b");
  const auto spec = spec_path("bounded.spec");
  REQUIRE(run({"solve", "--spec", spec, "--engine", "mc", "--seed", "5", "--out", a.string()})
              .code == kExitPass);
  REQUIRE(run({"solve", "--spec", spec, "--engine", "mc", "--seed", "6", "--out", b.string()})
              .code == kExitPass);
  CHECK(field(slurp(a / "report.txt"), "mc_value") !=
        field(slurp(b / "report.txt"), "mc_value"));
  CHECK_FALSE(fs::exists(a / "surface.csv"));
}
