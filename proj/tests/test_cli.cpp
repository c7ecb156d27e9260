#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "fks/experiment.hpp"

using namespace fks;
namespace fs = std::filesystem;

namespace {

int cli(const std::string& args) {
  const std::string cmd = std::string(FKS_CLI_PATH) + " " + args + " > cli_log.txt 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json report(const std::string& dir) {
  return nlohmann::json::parse(slurp(fs::path(dir) / "report.json"));
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream(path) << text;
}

// Small verification run. Below about 128 cells the spatial virial defect
// exceeds the 5% identity tolerance.
const char* kSmallVerify =
    R"({"model": {"s": 1.25}, "grid": {"N": 192, "R_max": 4.0},
        "experiment": {"hls_N": 256, "hls_R_max": 50.0, "n_random": 20,
                       "eps_list": [0.2, 0.1]}})";

}  // namespace

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse_config(R"({"model": {"s": 1.25, "epsilon": 0.1}})");
  CHECK(c.s == 1.25);
  CHECK(c.epsilon == 0.1);
  CHECK(c.N == 512);
  CHECK_NOTHROW(validate_config(c));

  auto message = [](const std::string& text) {
    try {
      validate_config(parse_config(text));
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("{}").find("model.s") != std::string::npos);
  CHECK(message(R"({"model": {"s": 1.25, "bogus": 1}})").find("model.bogus") != std::string::npos);
  CHECK(message(R"({"model": {"s": 1.25}, "grid": {"N": 2}})").find("grid.N") != std::string::npos);
  CHECK(message(R"({"model": {"s": 1.25}, "solver": {"cfl": "fast"}})").find("solver.cfl") !=
        std::string::npos);
  CHECK(message(R"({"model": {"s": 1.6}})").find("model.s") != std::string::npos);
  CHECK(message(R"({"model": {"s": 1.25}, "experiment": {"eps_list": [0.1, 0.2]}})")
            .find("experiment.eps_list[1]") != std::string::npos);
  CHECK(message("{\n\"model\": {\n\"s\": 1.25,,\n}}").find("line 3") != std::string::npos);
}

TEST_CASE("canonical config and hash") {
  const ExperimentConfig a = parse_config(R"({"model": {"s": 1.25}})");
  const ExperimentConfig b = parse_config(R"({"grid": {"N": 512}, "model": {"s": 1.25}})");
  CHECK(config_json(a) == config_json(b));
  CHECK(content_hash(a) == content_hash(b));
  ExperimentConfig c = a;
  c.N = 256;
  CHECK(content_hash(c) != content_hash(a));
  const ExperimentConfig round = parse_config(config_json(c));
  CHECK(config_json(round) == config_json(c));
}

TEST_CASE("constants command") {
  fs::remove_all("cli_constants");
  REQUIRE(cli("constants --s 1.25 -o cli_constants") == 0);
  const auto r = report("cli_constants");
  CHECK(r.at("command") == "constants");
  CHECK(r.at("results").at("c_ds").get<double>() > 0.0);
  CHECK(r.at("results").at("C_hls").get<double>() ==
        doctest::Approx(r.at("results").at("C_star_upper").get<double>()).epsilon(1e-12));
  CHECK(r.at("config").at("model").at("s") == 1.25);
  CHECK(r.at("input_hash").get<std::string>().size() == 16);
}

TEST_CASE("reports are byte-stable") {
  fs::remove_all("cli_a");
  fs::remove_all("cli_b");
  REQUIRE(cli("constants --s 1.25 -o cli_a") == 0);
  REQUIRE(cli("constants --s 1.25 -o cli_b") == 0);
  CHECK(report("cli_a").at("results").dump() == report("cli_b").at("results").dump());
  const std::string first = slurp("cli_b/report.json");
  REQUIRE(cli("constants --s 1.25 -o cli_b") == 0);
  CHECK(slurp("cli_b/report.json") == first);
}

TEST_CASE("configuration errors exit with 1") {
  CHECK(cli("constants -o cli_err") == 1);
  write_text("cli_bad.json", R"({"model": {"s": 1.25, "colour": "red"}})");
  CHECK(cli("constants --config cli_bad.json -o cli_err") == 1);
  CHECK(slurp("cli_log.txt").find("model.colour") != std::string::npos);
  write_text("cli_syntax.json", "{\"model\": {\"s\": 1.25\n");
  CHECK(cli("constants --config cli_syntax.json -o cli_err") == 1);
  CHECK(cli("constants --s 1.25 --cfl 2 -o cli_err") == 1);
  CHECK(cli("constants --s 1.25 --no-such-flag") == 1);
  CHECK(cli("no-such-command") == 1);
}

TEST_CASE("command-line values override the config file") {
  write_text("cli_base.json", R"({"model": {"s": 1.4}, "grid": {"N": 32}})");
  fs::remove_all("cli_over");
  REQUIRE(cli("constants --config cli_base.json --s 1.25 -o cli_over") == 0);
  const auto r = report("cli_over");
  CHECK(r.at("config").at("model").at("s") == 1.25);
  CHECK(r.at("config").at("grid").at("N") == 32);
}

TEST_CASE("verify passes on a coarse grid and catches faults") {
  write_text("cli_verify.json", kSmallVerify);
  fs::remove_all("cli_verify");
  CHECK(cli("verify --config cli_verify.json -o cli_verify") == 0);
  const auto r = report("cli_verify");
  for (const auto& c : r.at("results").at("checks")) CHECK(c.at("pass") == true);
  CHECK(cli("verify --config cli_verify.json --corrupt-kernel -o cli_verify_bad") == 2);
  const auto bad = report("cli_verify_bad");
  for (const auto& c : bad.at("results").at("checks")) {
    if (c.at("name") == "kernel_symmetry") CHECK(c.at("pass") == false);
  }
  CHECK(cli("verify --config cli_verify.json --tolerance 0 -o cli_verify_zero") == 2);
}

TEST_CASE("dichotomy with an empty ratio list") {
  write_text("cli_empty.json",
             R"({"model": {"s": 1.25}, "grid": {"N": 32}, "experiment": {"mass_ratios": []}})");
  fs::remove_all("cli_empty");
  CHECK(cli("dichotomy --config cli_empty.json -o cli_empty") == 0);
  CHECK(report("cli_empty").at("results").at("table").empty());
}

TEST_CASE("simulate and extremal on a coarse grid") {
  fs::remove_all("cli_sim");
  REQUIRE(cli("simulate --s 1.25 --N 64 --t-end-tau 0.2 --mass-ratio 0.5 --tag half -o cli_sim") ==
          0);
  const auto r = report("cli_sim");
  CHECK(r.at("results").at("status") == "Completed");
  CHECK(fs::exists("cli_sim/diagnostics_half.csv"));
  CHECK(fs::exists("cli_sim/profile_half.csv"));
  const std::string csv = slurp("cli_sim/diagnostics_half.csv");
  CHECK(csv.rfind("t,mass,lm_norm,linf_norm,m2,F,S,W,D,virial_rhs,dt\n", 0) == 0);

  fs::remove_all("cli_ext");
  REQUIRE(cli("extremal --s 1.25 --N 64 --n-starts 2 -o cli_ext") == 0);
  CHECK(fs::exists("cli_ext/profile_el.csv"));
  CHECK(fs::exists("cli_ext/profile_el.json"));
  CHECK(fs::exists("cli_ext/profile_vhls.csv"));

  // The stored profile can be fed back in.
  fs::remove_all("cli_prof");
  REQUIRE(cli("constants --s 1.25 --N 64 --profile cli_ext/profile_el.csv -o cli_prof") == 0);
  const auto c = report("cli_prof").at("results");
  CHECK(c.at("M_star_measured").get<double>() > 0.0);
  CHECK(c.contains("measured_within_upper"));
}
