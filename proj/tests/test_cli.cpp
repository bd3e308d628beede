#include "doctest.h"

#include "demix/cli.hpp"
#include "demix/io.hpp"
#include "json.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace demix;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "demix_cli_tests";

struct Result {
  int status = -1;
  std::string err;
};

Result demix_cmd(const std::string& args, const std::string& env = "") {
  fs::create_directories(kWork);
  const fs::path err = kWork / "stderr.txt";
  const std::string command =
      env + " " + std::string(DEMIX_CLI_PATH) + " " + args + " > /dev/null 2> " + err.string();
  const int raw = std::system(command.c_str());
  Result r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.err = read_text(err);
  return r;
}

std::string path(const std::string& name) { return (kWork / name).string(); }

const std::string& simulated() {
  static const std::string file = [] {
    const std::string out = path("sim.csv");
    REQUIRE(demix_cmd("simulate --n 100 --N 100 --K 3 --seed 7 --output " + out).status == 0);
    return out;
  }();
  return file;
}

}  // namespace

TEST_CASE("error records are single key=value lines") {
  CHECK(cli::error_record("input_error", 2, "bad \"x\"") == "error=input_error exit=2 message=\"bad \\\"x\\\"\"");
}

TEST_CASE("help and usage errors") {
  CHECK(demix_cmd("--help").status == 0);
  CHECK(demix_cmd("estimate --help").status == 0);
  CHECK(demix_cmd("estimate --no-such-flag 1").status == 2);
  CHECK(demix_cmd("estimate --k 3").status == 2);
  CHECK(demix_cmd("estimate --input x.csv --k 3 --out o --ridge sometimes").status == 2);
}

TEST_CASE("missing input exits with status 2 and a structured record") {
  const Result r = demix_cmd("estimate --input " + path("missing.csv") + " --k 3 --out " + path("never"));
  CHECK(r.status == 2);
  CHECK(r.err.find("error=input_error exit=2") != std::string::npos);
  CHECK(r.err.find("missing.csv") != std::string::npos);
}

TEST_CASE("simulate writes one row per point") {
  const LabeledSample s = read_sample_csv(simulated());
  CHECK(s.sample.total_points() == 10000);
  CHECK(s.sample.group_count() == 100);
  CHECK(fs::exists(simulated() + ".config.json"));
  const std::string bin = path("sim.bin");
  REQUIRE(demix_cmd("simulate --n 100 --N 100 --K 3 --seed 7 --output " + bin).status == 0);
  CHECK(read_sample_binary(bin).points() == s.sample.points());
}

TEST_CASE("estimate with a fixed bandwidth") {
  const std::string out = path("est_fixed");
  REQUIRE(demix_cmd("estimate --input " + simulated() + " --k 3 --bandwidth 0.31 --weights --out " + out).status == 0);
  const auto meta = nlohmann::json::parse(read_text(out + "/meta.json"));
  CHECK(meta["M"] == 54);
  CHECK(meta["h"].get<double>() == 0.31);
  CHECK(meta["h_cross_validated"] == false);
  CHECK(meta["n"] == 100);
  CHECK(meta["P"] == 10000);
  const Matrix grid = read_matrix_csv(out + "/grid.csv");
  CHECK(grid.rows() == 400);
  CHECK(grid.cols() == 4);
  const Matrix g = read_matrix_csv(out + "/G.csv");
  CHECK(g.rows() == 54);
  for (const char* f : {"/pi.csv", "/partition.json", "/weights.bin", "/config.json"}) CHECK(fs::exists(out + f));
  const auto config = nlohmann::json::parse(read_text(out + "/config.json"));
  CHECK(config.dump().find("0.31") != std::string::npos);
}

TEST_CASE("estimate with the cross-validated bandwidth") {
  const std::string out = path("est_auto");
  REQUIRE(demix_cmd("estimate --input " + simulated() + " --k 3 --subsample 300 --out " + out).status == 0);
  const auto meta = nlohmann::json::parse(read_text(out + "/meta.json"));
  CHECK(meta["h_cross_validated"] == true);
  CHECK(meta["h"].get<double>() > 0.0);
}

TEST_CASE("bandwidth scores") {
  const std::string out = path("cv.csv");
  REQUIRE(demix_cmd("bandwidth --input " + simulated() + " --k 3 --grid 5 --subsample 200 --output " + out).status == 0);
  const Matrix cv = read_matrix_csv(out);
  CHECK(cv.rows() == 5);
  CHECK(cv.cols() == 4);
}

TEST_CASE("topics are column stochastic") {
  const std::string out = path("G.csv");
  REQUIRE(demix_cmd("topics --data " + simulated() + " --k 3 --output " + out).status == 0);
  const Matrix g = read_matrix_csv(out);
  CHECK(g.rows() == 54);
  CHECK(g.cols() == 3);
  CHECK((g.array() >= 0.0).all());
  for (Index k = 0; k < 3; ++k) CHECK(g.col(k).sum() == doctest::Approx(1.0).epsilon(1e-9));

}

TEST_CASE("estimation failures exit with status 3") {
  const std::string lonely = path("lonely.csv");
  write_text(lonely, "a,1\na,2\na,2.5\nb,3\n");
  const Result r = demix_cmd("estimate --input " + lonely + " --k 1 --bins 2 --bandwidth 0.5 --out " + path("lonely"));
  CHECK(r.status == 3);
  CHECK(r.err.find("error=estimator_error exit=3") != std::string::npos);
}

TEST_CASE("configuration files") {
  const std::string toml = path("est.toml");
  write_text(toml, "input = \"" + simulated() + "\"\nk = 3\nbandwidth = \"0.4\"\n");
  const std::string out = path("est_toml");
  REQUIRE(demix_cmd("estimate --config " + toml + " --out " + out).status == 0);
  CHECK(nlohmann::json::parse(read_text(out + "/meta.json"))["h"].get<double>() == 0.4);

  const std::string json = path("est.json");
  write_text(json, "{\"estimate\": {\"input\": \"" + simulated() + "\", \"k\": 3, \"bandwidth\": \"0.5\"}}");
  REQUIRE(demix_cmd("estimate --config " + json + " --bandwidth 0.45 --out " + out).status == 0);
  CHECK(nlohmann::json::parse(read_text(out + "/meta.json"))["h"].get<double>() == 0.45);

  write_text(toml, "input = \"x\"\nno_such_key = 1\n");
  CHECK(demix_cmd("estimate --config " + toml + " --out " + out).status == 2);
  CHECK(demix_cmd("estimate --config " + path("nope.toml") + " --out " + out).status == 2);
}

TEST_CASE("experiment output is reproducible across runs and thread counts") {
  const std::string small = " --n 20 --N 40 --K 2 --reps 2 --bandwidth-grid 4 --eval-points 100"
                            " --quadrature-points 100 --subsample 100 --cdf-knots 2000 --seed 5 --out ";
  REQUIRE(demix_cmd("--threads 1 exp1" + small + path("e1a")).status == 0);
  REQUIRE(demix_cmd("--threads 1 exp1" + small + path("e1b")).status == 0);
  REQUIRE(demix_cmd("exp1" + small + path("e1c"), "DEMIX_THREADS=3").status == 0);
  const std::string first = read_text(path("e1a") + "/exp1.csv");
  CHECK(first == read_text(path("e1b") + "/exp1.csv"));
  CHECK(first == read_text(path("e1c") + "/exp1.csv"));
  CHECK(fs::exists(path("e1a") + "/summary.json"));
  CHECK(fs::exists(path("e1a") + "/config.json"));
}
