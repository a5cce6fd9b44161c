#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "lft/cli.hpp"

using namespace lft;
namespace fs = std::filesystem;

namespace {

fs::path source_dir() { return fs::path(LFT_SOURCE_DIR); }
std::string cli_path() { return LFT_CLI_PATH; }

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run_cli(const std::string& args) {
  fs::path log = fs::temp_directory_path() / "lft_cli_test.log";
  std::string cmd = cli_path() + " " + args + " > " + log.string() + " 2>&1";
  int rc = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  std::ifstream in(log);
  std::ostringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const std::string& name, const std::string& body) {
  fs::path p = fs::temp_directory_path() / name;
  std::ofstream out(p);
  out << body;
  return p;
}

const char* kSmallThermo = R"(
[lattice]
d = 1
L = 1
[disorder]
seed = 3
vartheta = 0.4
lambda = 0.7
[interaction]
type = yukawa
strength = 0.7
[pulse]
t0 = 0
t1 = 1.0
amplitude = 0.8
support_radius = 1.0
[experiment]
name = thermo-ledger
beta = 1.0
times = 0.5, 1.0, 1.5
[numerics]
dt = 1e-3
)";

}  // namespace

TEST_CASE("ini parser handles sections, comments, and malformed input") {
  std::istringstream ok(R"(
# comment
[a]
x = 1.5  ; trailing
y = hello
[b]
z = 0:0.5:2
)");
  cli::Document doc = cli::parse_ini(ok);
  CHECK(cli::get_num(doc, "a", "x", 0) == 1.5);
  CHECK(cli::get_str(doc, "a", "y", "") == "hello");
  std::vector<double> grid = cli::get_list(doc, "b", "z");
  REQUIRE(grid.size() == 5);
  CHECK(grid[4] == 2.0);
  CHECK(cli::get_num(doc, "a", "missing", 7.0) == 7.0);

  std::istringstream bad1("x = 1\n");
  CHECK_THROWS_AS(cli::parse_ini(bad1), std::invalid_argument);
  std::istringstream bad2("[sec\nx = 1\n");
  CHECK_THROWS_AS(cli::parse_ini(bad2), std::invalid_argument);
  std::istringstream bad3("[sec]\njust words\n");
  CHECK_THROWS_AS(cli::parse_ini(bad3), std::invalid_argument);
}

TEST_CASE("config validation diagnostics") {
  cli::Document doc =
      cli::parse_ini_file((source_dir() / "configs/reference_thermo.ini").string());
  cli::Config c = cli::build_config(doc);
  CHECK(cli::validate(c).empty());

  cli::Config bad = c;
  bad.beta = 0;
  auto v = cli::validate(bad);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("beta") != std::string::npos);

  bad = c;
  bad.pulse.support_radius = 5.0;
  v = cli::validate(bad);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("support") != std::string::npos);

  bad = c;
  bad.etas = {1e-2, 1e-1};
  v = cli::validate(bad);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("decreasing") != std::string::npos);

  bad = c;
  bad.L = 7;  // 15 sites
  v = cli::validate(bad);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("capacity") != std::string::npos);

  CHECK_THROWS_AS(
      cli::build_config(cli::parse_ini(
          *std::make_unique<std::istringstream>("[lattice]\nbogus = 1\n"))),
      std::invalid_argument);
}

TEST_CASE("parallel_for covers every index once and propagates exceptions") {
  std::vector<std::atomic<int>> hits(101);
  cli::parallel_for(101, 7, [&](int i) { hits[i].fetch_add(1); });
  for (auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(cli::parallel_for(
                      8, 3, [](int i) { if (i == 5) throw std::runtime_error("x"); }),
                  std::runtime_error);
}

TEST_CASE("csv doubles round-trip through the shortest representation") {
  for (double v : {0.1, -1.0 / 3.0, 1e-300, 6.02e23, 0.0}) {
    double back = std::strtod(cli::fmt(v).c_str(), nullptr);
    CHECK(back == v);
  }
}

TEST_CASE("validate subcommand reports diagnostics and exits zero") {
  fs::path cfg = write_config("lft_valid.ini", kSmallThermo);
  RunResult r = run_cli("validate --config " + cfg.string());
  CHECK(r.exit_code == 0);
  CHECK(r.output.empty());

  fs::path bad = write_config("lft_beta0.ini", std::string(kSmallThermo) +
                                                   "[experiment]\nbeta = 0\n");
  // duplicate section: last assignment wins
  r = run_cli("validate --config " + bad.string());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("beta") != std::string::npos);

  r = run_cli("validate --config /nonexistent.ini");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("malformed") != std::string::npos);
}

TEST_CASE("run rejects malformed configs with exit 2 and no partial output") {
  fs::path cfg = write_config("lft_malformed.ini", "[lattice]\nno equals sign\n");
  fs::path out = fs::temp_directory_path() / "lft_out_malformed";
  fs::remove_all(out);
  RunResult r = run_cli("run --config " + cfg.string() + " --out " + out.string());
  CHECK(r.exit_code == 2);
  CHECK_FALSE(fs::exists(out));

  fs::path unknown = write_config(
      "lft_unknown.ini",
      "[lattice]\nd = 1\nL = 1\n[pulse]\nt1 = 1\nsupport_radius = 1\n"
      "[experiment]\nname = frobnicate\n");
  fs::remove_all(out);
  r = run_cli("run --config " + unknown.string() + " --out " + out.string());
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("frobnicate") != std::string::npos);
  CHECK_FALSE(fs::exists(out));

  r = run_cli("run --out " + out.string());  // missing --config
  CHECK(r.exit_code == 2);
}

TEST_CASE("thermo run passes, writes artifacts, and is byte-deterministic") {
  fs::path cfg = write_config("lft_run.ini", kSmallThermo);
  fs::path out1 = fs::temp_directory_path() / "lft_out_run1";
  fs::path out2 = fs::temp_directory_path() / "lft_out_run2";
  fs::remove_all(out1);
  fs::remove_all(out2);
  RunResult r1 =
      run_cli("run --config " + cfg.string() + " --out " + out1.string());
  REQUIRE(r1.exit_code == 0);
  CHECK(r1.output.find("PASS") != std::string::npos);
  RunResult r2 = run_cli("run --config " + cfg.string() + " --out " +
                         out2.string() + " --workers 3");
  REQUIRE(r2.exit_code == 0);
  CHECK(slurp(out1 / "ledger.csv") == slurp(out2 / "ledger.csv"));
  CHECK(slurp(out1 / "report.json") == slurp(out2 / "report.json"));

  nlohmann::json m;
  std::ifstream(out1 / "manifest.json") >> m;
  CHECK(m["pass"] == true);
  CHECK(m["experiment"] == "thermo-ledger");
  CHECK(m["config_hash"].get<std::string>().size() == 16);
  CHECK(m["seed"] == 3);
  CHECK(m.contains("versions"));
  CHECK(m["wall_time_s"].get<double>() > 0);

  // header row and column order of the ledger artifact
  std::string csv = slurp(out1 / "ledger.csv");
  CHECK(csv.rfind("t,Q,S,P,Work,Ip,Id\n", 0) == 0);
}

TEST_CASE("seed override changes the disorder realization") {
  fs::path cfg = write_config("lft_seed.ini", kSmallThermo);
  fs::path out1 = fs::temp_directory_path() / "lft_out_seed1";
  fs::path out2 = fs::temp_directory_path() / "lft_out_seed2";
  fs::remove_all(out1);
  fs::remove_all(out2);
  REQUIRE(run_cli("run --config " + cfg.string() + " --out " + out1.string())
              .exit_code == 0);
  REQUIRE(run_cli("run --config " + cfg.string() + " --out " + out2.string() +
                  " --seed-override 77")
              .exit_code == 0);
  CHECK(slurp(out1 / "ledger.csv") != slurp(out2 / "ledger.csv"));
  nlohmann::json m;
  std::ifstream(out2 / "manifest.json") >> m;
  CHECK(m["seed"] == 77);
}

TEST_CASE("quasifree crosscheck experiment passes end to end") {
  fs::path out = fs::temp_directory_path() / "lft_out_qf";
  fs::remove_all(out);
  RunResult r =
      run_cli("run --config " +
              (source_dir() / "configs/reference_quasifree.ini").string() +
              " --out " + out.string());
  CHECK(r.exit_code == 0);
  std::string csv = slurp(out / "quasifree.csv");
  CHECK(csv.rfind("seed,beta,defect\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);  // header + 9 cells
}
