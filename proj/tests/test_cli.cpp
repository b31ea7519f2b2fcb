// End-to-end tests of the command-line front end: artifact schemas, exit
// codes, --help coverage, and byte-level reproducibility. The binary path
// comes in through the GLUCOKIN_BIN_PATH compile definition.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <glucokin/dataset_io.hpp>
#include <glucokin/estimation.hpp>
#include <glucokin/identifiability.hpp>
#include <glucokin/integrate.hpp>
#include <glucokin/model.hpp>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using glucokin::ModelFamily;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(GLUCOKIN_BIN_PATH) + " " + args;
  const int status = std::system(cmd.c_str());
  if (status < 0) return -1;
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("glucokin_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& sub) const {
    return (path / sub).string();
  }
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

const char* kGlucagonParams =
    "k1,1\nkH,1\nn,1\nn1,1\nn2,1\nn3,1\nn4,1\nx1,1\n";

const char* kReducedOnes =
    "k1,1\nki1_bar,1\nkH_bar,1\nrG,1\nm3_bar,1\nm4,1\nq,1\nn,1\nn1,1\n"
    "x1_bar,1\n";

}  // namespace

TEST_CASE("help enumerates every flag and subcommand") {
  TempDir d("help");
  REQUIRE(run(std::string("--help > ") + (d / "help.txt")) == 0);
  const std::string help = slurp(d / "help.txt");
  for (const char* flag :
       {"--model", "--experiment", "--params", "--optimizer", "--step",
        "--delta", "--alpha", "--split", "--seed", "--out", "--grid-points",
        "--grid-span", "--sv-threshold", "--sv-gap"})
    CHECK(help.find(flag) != std::string::npos);
  for (const char* sub : {"simulate", "generate", "fit", "profile", "svd",
                          "jacobi", "predict"})
    CHECK(help.find(sub) != std::string::npos);
}

TEST_CASE("unknown flags fail with a usage error before any work") {
  TempDir d("unknown");
  const std::string out = d / "work";
  CHECK(run("simulate --model reduced --bogus --out " + out + " > /dev/null 2>&1") == 2);
  CHECK(!fs::exists(out));
  CHECK(run("definitely-not-a-command > /dev/null 2>&1") == 2);
}

TEST_CASE("usage and runtime errors use distinct exit codes") {
  TempDir d("codes");
  // missing required flag -> usage error
  CHECK(run("fit --model reduced > /dev/null 2>&1") == 2);
  // well-formed flags, bad content -> runtime error
  CHECK(run("fit --experiment " + (d / "missing.exp") + " > /dev/null 2>&1") ==
        1);
  CHECK(run("simulate --model martian --out " + (d / "o") +
            " > /dev/null 2>&1") == 1);
}

TEST_CASE("zero-input simulate produces the constant-zero trajectory") {
  TempDir d("simzero");
  REQUIRE(run("simulate --model reduced --tf 0.02 --out " + (d / "s") +
              " > /dev/null") == 0);
  glucokin::Trajectory traj =
      glucokin::load_trajectory_csv(d / "s/trajectory.csv");
  CHECK(traj.model.family == ModelFamily::Reduced);
  REQUIRE(traj.times.size() > 10);
  CHECK(traj.states.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("generate with a fixed seed is byte-reproducible") {
  TempDir d("genrep");
  const std::string flags =
      "generate --model glucagon_sub --tf 0.05 --x0 '6;0;0;0;0' "
      "--sample-dt 0.005 --sigma 0.4 --seed 7 --out ";
  REQUIRE(run(flags + (d / "a") + " > /dev/null") == 0);
  REQUIRE(run(flags + (d / "b") + " > /dev/null") == 0);
  CHECK(slurp(d / "a/generated.exp") == slurp(d / "b/generated.exp"));

  const std::string other =
      "generate --model glucagon_sub --tf 0.05 --x0 '6;0;0;0;0' "
      "--sample-dt 0.005 --sigma 0.4 --seed 8 --out " + (d / "c");
  REQUIRE(run(other + " > /dev/null") == 0);
  CHECK(slurp(d / "a/generated.exp") != slurp(d / "c/generated.exp"));
}

TEST_CASE("fit writes a parameter report and a fitted trajectory") {
  TempDir d("fit");
  REQUIRE(run("generate --model reduced --tf 0.05 --x0 '5.5;0;0;0;0;1' "
              "--sample-dt 0.005 --sigma 0.1 --seed 3 --out " + (d / "gen") +
              " > /dev/null") == 0);
  const std::string fit_cmd =
      "fit --experiment " + (d / "gen/generated.exp") +
      " --optimizer nelder-mead --out ";
  REQUIRE(run(fit_cmd + (d / "f1") + " > /dev/null") == 0);

  glucokin::ModelSpec spec;
  glucokin::FitResult fit =
      glucokin::load_fit_result_json(d / "f1/fit.json", &spec);
  CHECK(spec.family == ModelFamily::Reduced);
  CHECK(fit.theta_hat.size() == 10);
  CHECK(fit.n == 11);
  CHECK(std::isfinite(fit.mse));
  CHECK(fit.mse == doctest::Approx(fit.cost / fit.n));

  glucokin::Trajectory traj =
      glucokin::load_trajectory_csv(d / "f1/fit_trajectory.csv");
  CHECK(traj.times.size() > 10);

  // Re-running the same fit reproduces the artifact byte for byte.
  REQUIRE(run(fit_cmd + (d / "f2") + " > /dev/null") == 0);
  CHECK(slurp(d / "f1/fit.json") == slurp(d / "f2/fit.json"));
  CHECK(slurp(d / "f1/fit_trajectory.csv") == slurp(d / "f2/fit_trajectory.csv"));
}

TEST_CASE("predict scores both sides of the split") {
  TempDir d("predict");
  REQUIRE(run("generate --model reduced --tf 0.05 --x0 '5.5;0;0;0;0;1' "
              "--sample-dt 0.005 --sigma 0.05 --seed 11 --out " + (d / "gen") +
              " > /dev/null") == 0);
  REQUIRE(run("predict --experiment " + (d / "gen/generated.exp") +
              " --split 0.025 --out " + (d / "p") + " > /dev/null") == 0);
  glucokin::SplitReport report =
      glucokin::load_split_report_json(d / "p/predict.json");
  CHECK(report.n_first + report.n_second == 11);
  CHECK(report.n_first >= 5);
  CHECK(report.split_time == 0.025);
  CHECK(std::isfinite(report.mse_second));
}

TEST_CASE("profile emits per-parameter curves and a summary") {
  TempDir d("profile");
  write_file(d / "ones.params", kGlucagonParams);
  REQUIRE(run("generate --model glucagon_sub --tf 0.05 --x0 '6;0;0;0;0' "
              "--sample-dt 0.0025 --sigma 0.05 --seed 5 --out " + (d / "gen") +
              " > /dev/null") == 0);
  const std::string cmd =
      "profile --experiment " + (d / "gen/generated.exp") + " --params " +
      (d / "ones.params") +
      " --grid-points 5 --grid-span 2 --threshold-mode chi-square --out ";
  REQUIRE(run(cmd + (d / "p1") + " > /dev/null") == 0);

  nlohmann::json summary =
      nlohmann::json::parse(std::ifstream(d / "p1/profile_summary.json"));
  REQUIRE(summary.at("params").size() == 8);
  CHECK(summary.at("params").at("k1").at("identifiable").get<bool>());

  const std::string csv = slurp(d / "p1/profile_k1.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);

  REQUIRE(run(cmd + (d / "p2") + " > /dev/null") == 0);
  CHECK(slurp(d / "p1/profile_summary.json") ==
        slurp(d / "p2/profile_summary.json"));
  CHECK(slurp(d / "p1/profile_k1.csv") == slurp(d / "p2/profile_k1.csv"));
}

TEST_CASE("svd writes a loadable report and spectrum") {
  TempDir d("svd");
  write_file(d / "ones.params", kReducedOnes);
  REQUIRE(run("generate --model reduced --tf 0.05 --x0 '5.5;0;0;0;0;1' "
              "--sample-dt 0.005 --sigma 0.1 --seed 9 --out " + (d / "gen") +
              " > /dev/null") == 0);
  REQUIRE(run("svd --experiment " + (d / "gen/generated.exp") + " --params " +
              (d / "ones.params") + " --out " + (d / "s") +
              " > /dev/null") == 0);
  glucokin::SVDReport report =
      glucokin::load_svd_report_json(d / "s/svd.json");
  REQUIRE(report.singular_values.size() == 10);
  for (int i = 1; i < 10; ++i)
    CHECK(report.singular_values[i] <= report.singular_values[i - 1]);
  CHECK(report.theta_ensemble.size() == 21);

  const std::string spectrum = slurp(d / "s/spectrum.csv");
  CHECK(std::count(spectrum.begin(), spectrum.end(), '\n') == 11);
}

TEST_CASE("jacobi reports vanishing analytic residuals") {
  TempDir d("jacobi");
  REQUIRE(run("jacobi --out " + (d / "j") + " > /dev/null") == 0);
  for (const char* name : {"jacobi_six.json", "jacobi_eight.json"}) {
    nlohmann::json j =
        nlohmann::json::parse(std::ifstream(d / ("j/" + std::string(name))));
    REQUIRE(j.at("residuals").size() == 3);
    for (const auto& r : j.at("residuals"))
      CHECK(r.get<double>() < 1e-10);
  }
}

TEST_CASE("worker cap does not change results") {
  TempDir d("threads");
  write_file(d / "ones.params", kGlucagonParams);
  REQUIRE(run("generate --model glucagon_sub --tf 0.05 --x0 '6;0;0;0;0' "
              "--sample-dt 0.0025 --sigma 0.05 --seed 5 --out " + (d / "gen") +
              " > /dev/null") == 0);
  const std::string tail =
      "profile --experiment " + (d / "gen/generated.exp") + " --params " +
      (d / "ones.params") + " --grid-points 5 --grid-span 2 --out ";
  REQUIRE(std::system(("GLUCOKIN_THREADS=1 " + std::string(GLUCOKIN_BIN_PATH) +
                       " " + tail + (d / "t1") + " > /dev/null")
                          .c_str()) == 0);
  REQUIRE(std::system(("GLUCOKIN_THREADS=4 " + std::string(GLUCOKIN_BIN_PATH) +
                       " " + tail + (d / "t2") + " > /dev/null")
                          .c_str()) == 0);
  CHECK(slurp(d / "t1/profile_summary.json") ==
        slurp(d / "t2/profile_summary.json"));
}
