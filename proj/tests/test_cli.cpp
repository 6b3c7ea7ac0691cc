// ============================================================================
// test_cli.cpp -- end-to-end tests that drive the real epdc binary
// ============================================================================
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "epdc/io.hpp"
#include "epdc/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

/// Scratch directory for pipeline artifacts, removed on destruction.
struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("epdc_cli_test_" + std::to_string(static_cast<unsigned long>(::getpid())) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int n = 0;
    return n;
  }
};

/// Runs `epdc <args>`, returning the exit code; stdout/stderr land in files.
int run_epdc(const std::string& args, const std::string& stdout_path = "/dev/null",
             const std::string& stderr_path = "/dev/null") {
  const std::string cmd =
      std::string(EPDC_BIN) + " " + args + " > " + stdout_path + " 2> " + stderr_path;
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.is_open());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_two_photon_scenario(const std::string& path, std::uint64_t seed) {
  epdc::SyntheticScenario sc;
  sc.truth.eta = 1.2e-4;
  sc.truth.p = {1e-6, 0.06, 0.37};
  sc.probe_grid = epdc::log_spaced_grid(1.0, 1e6, 15);
  sc.trials_per_point = 10000000;
  sc.seed = seed;
  epdc::write_scenario(path, sc);
}

void write_small_config(const std::string& path) {
  std::ofstream out(path);
  out << R"({
  "schema": "epdc.config/1",
  "selection": {"i_max_lo": 1, "i_max_hi": 3}
})";
}

}  // namespace

TEST_CASE("synth, fit, and select pipeline runs clean and recovers the truth") {
  TempDir dir;
  write_two_photon_scenario(dir.file("scenario.json"), 11);
  write_small_config(dir.file("config.json"));

  CHECK(run_epdc("synth --scenario " + dir.file("scenario.json") + " --output " +
                 dir.file("data.csv") + " --bias 17",
                 dir.file("synth.out")) == 0);
  REQUIRE(fs::exists(dir.file("data.csv")));
  CHECK(slurp(dir.file("synth.out")).find("wrote 15 points") != std::string::npos);

  CHECK(run_epdc("fit --data " + dir.file("data.csv") + " --i-max 2 --output " +
                 dir.file("fit.json"),
                 dir.file("fit.out")) == 0);
  const std::string fit_out = slurp(dir.file("fit.out"));
  CHECK(fit_out.find("i_max = 2") != std::string::npos);
  CHECK(fit_out.find("(converged)") != std::string::npos);
  CHECK(fit_out.find("chi2_reduced") != std::string::npos);
  REQUIRE(fs::exists(dir.file("fit.json")));

  CHECK(run_epdc("select --data " + dir.file("data.csv") + " --config " +
                 dir.file("config.json") + " --output " + dir.file("report.json") +
                 " --seed 1",
                 dir.file("select.out")) == 0);
  REQUIRE(fs::exists(dir.file("report.json")));
  CHECK(fs::exists(dir.file("report_points.tsv")));
  CHECK(fs::exists(dir.file("report_curve.tsv")));

  const auto report = nlohmann::json::parse(slurp(dir.file("report.json")));
  CHECK(report.at("schema") == "epdc.selection/1");
  CHECK(report.at("selected_i_max") == 2);
  const auto& model = report.at("selected").at("model");
  CHECK(model.at("eta").get<double>() == doctest::Approx(1.2e-4).epsilon(0.05));
  CHECK(model.at("p")[2].get<double>() == doctest::Approx(0.37).epsilon(0.10));
}

TEST_CASE("identical seeds give byte-identical reports across thread counts") {
  TempDir dir;
  write_two_photon_scenario(dir.file("scenario.json"), 23);
  write_small_config(dir.file("config.json"));
  REQUIRE(run_epdc("synth --scenario " + dir.file("scenario.json") + " --output " +
                   dir.file("data.csv")) == 0);

  const std::string common = "select --data " + dir.file("data.csv") + " --config " +
                             dir.file("config.json") + " --seed 5 --output ";
  REQUIRE(run_epdc(common + dir.file("a.json") + " --threads 1") == 0);
  REQUIRE(run_epdc(common + dir.file("b.json") + " --threads 1") == 0);
  REQUIRE(run_epdc(common + dir.file("c.json") + " --threads 4") == 0);

  const std::string a = slurp(dir.file("a.json"));
  CHECK(a == slurp(dir.file("b.json")));
  CHECK(a == slurp(dir.file("c.json")));

  // Re-synthesizing with the same scenario seed reproduces the CSV too.
  REQUIRE(run_epdc("synth --scenario " + dir.file("scenario.json") + " --output " +
                   dir.file("data2.csv")) == 0);
  CHECK(slurp(dir.file("data.csv")) == slurp(dir.file("data2.csv")));
}

TEST_CASE("parse and validation problems exit with code 2") {
  TempDir dir;

  // Unknown flag and missing subcommand are command-line errors.
  CHECK(run_epdc("select --data x.csv --frobnicate") == 2);
  CHECK(run_epdc("") == 2);
  CHECK(run_epdc("fit --data x.csv") == 2);  // missing required --i-max

  // Missing and malformed datasets.
  CHECK(run_epdc("select --data " + dir.file("absent.csv")) == 2);
  std::ofstream(dir.file("bad.csv")) << "voltage, clicks, trials\n1, 2, 3\n";
  CHECK(run_epdc("select --data " + dir.file("bad.csv"), "/dev/null",
                 dir.file("err.txt")) == 2);
  CHECK(slurp(dir.file("err.txt")).find("unrecognized column") != std::string::npos);

  // Ambiguous bias group without --bias.
  std::ofstream(dir.file("multi.csv")) << "bias_current_uA, mean_photons, clicks, trials\n"
                                          "14.0, 2.0, 10, 1000\n"
                                          "15.0, 2.0, 20, 1000\n";
  CHECK(run_epdc("fit --data " + dir.file("multi.csv") + " --i-max 1", "/dev/null",
                 dir.file("err2.txt")) == 2);
  CHECK(slurp(dir.file("err2.txt")).find("pass --bias") != std::string::npos);
  // ... and a bias that is not in the file.
  CHECK(run_epdc("fit --data " + dir.file("multi.csv") + " --i-max 1 --bias 99") == 2);

  // Unsupported report format and a broken scenario file.
  CHECK(run_epdc("fit --data " + dir.file("multi.csv") +
                 " --i-max 1 --bias 14 --format yaml") == 2);
  std::ofstream(dir.file("broken.json")) << "{ nope";
  CHECK(run_epdc("synth --scenario " + dir.file("broken.json") + " --output " +
                 dir.file("x.csv")) == 2);
}

TEST_CASE("convergence failure exits with code 3") {
  TempDir dir;
  write_two_photon_scenario(dir.file("scenario.json"), 31);
  REQUIRE(run_epdc("synth --scenario " + dir.file("scenario.json") + " --output " +
                   dir.file("data.csv")) == 0);
  std::ofstream(dir.file("config.json")) << R"({"fit": {"max_iterations": 1}})";

  CHECK(run_epdc("fit --data " + dir.file("data.csv") + " --i-max 2 --config " +
                 dir.file("config.json"),
                 "/dev/null", dir.file("err.txt")) == 3);
  CHECK(slurp(dir.file("err.txt")).find("error:") != std::string::npos);
}

TEST_CASE("selection failure exits with code 4") {
  TempDir dir;
  write_two_photon_scenario(dir.file("scenario.json"), 37);
  REQUIRE(run_epdc("synth --scenario " + dir.file("scenario.json") + " --output " +
                   dir.file("data.csv")) == 0);
  // No candidate can pass an absolute cap of 1e-9 with a sub-unity factor.
  std::ofstream(dir.file("config.json"))
      << R"({"selection": {"i_max_lo": 1, "i_max_hi": 2,
             "absolute_cap": 1e-9, "relative_factor": 0.5}})";

  CHECK(run_epdc("select --data " + dir.file("data.csv") + " --config " +
                 dir.file("config.json"),
                 "/dev/null", dir.file("err.txt")) == 4);
  CHECK(slurp(dir.file("err.txt")).find("error:") != std::string::npos);
}

TEST_CASE("convert translates power and photon number in both directions") {
  TempDir dir;

  // 2 nW at the defaults (1550 nm, 20 MHz) is ~755 photons per pulse.
  REQUIRE(run_epdc("convert --power 2.0e-9", dir.file("out.txt")) == 0);
  {
    std::istringstream out(slurp(dir.file("out.txt")));
    double n = 0.0;
    REQUIRE((out >> n));
    CHECK(n == doctest::Approx(755.117484).epsilon(1e-9));
  }

  REQUIRE(run_epdc("convert --photons 755.1174840476147", dir.file("back.txt")) == 0);
  {
    std::istringstream out(slurp(dir.file("back.txt")));
    double w = 0.0;
    REQUIRE((out >> w));
    CHECK(w == doctest::Approx(2.0e-9).epsilon(1e-12));
  }

  REQUIRE(run_epdc("convert --power 5.0e-6 --format json", dir.file("json.txt")) == 0);
  const auto j = nlohmann::json::parse(slurp(dir.file("json.txt")));
  CHECK(j.at("schema") == "epdc.convert/1");
  CHECK(j.at("power_W") == 5.0e-6);
  const double bright = j.at("mean_photons").get<double>();
  CHECK(bright > 1.8e6);
  CHECK(bright < 2.0e6);

  CHECK(run_epdc("convert") == 2);                       // nothing to convert
  CHECK(run_epdc("convert --power 1e-9 --format xml") == 2);
  CHECK(run_epdc("convert --power -1e-9") == 2);         // negative power
}

TEST_CASE("sweep verb writes the per-bias table") {
  TempDir dir;

  // Two bias groups drawn from one-photon detectors of different efficiency.
  epdc::SweepData data;
  for (auto [bias, eta, seed] : {std::tuple{14.0, 1.0e-4, std::uint64_t{51}},
                                 std::tuple{16.0, 2.0e-4, std::uint64_t{52}}}) {
    epdc::SyntheticScenario sc;
    sc.truth.eta = eta;
    sc.truth.p = {0.0, 0.8};
    sc.probe_grid = epdc::log_spaced_grid(10.0, 1e5, 10);
    sc.trials_per_point = 1000000;
    sc.seed = seed;
    data[bias] = epdc::generate_dataset(sc);
  }
  epdc::write_dataset_csv(dir.file("sweep.csv"), data);
  write_small_config(dir.file("config.json"));

  CHECK(run_epdc("sweep --data " + dir.file("sweep.csv") + " --config " +
                 dir.file("config.json") + " --output " + dir.file("sweep.json") +
                 " --threads 2",
                 dir.file("sweep.out")) == 0);
  REQUIRE(fs::exists(dir.file("sweep.json")));
  REQUIRE(fs::exists(dir.file("sweep_table.tsv")));
  CHECK(slurp(dir.file("sweep.out")).find("I_b = 14 uA") != std::string::npos);

  const auto j = nlohmann::json::parse(slurp(dir.file("sweep.json")));
  CHECK(j.at("schema") == "epdc.sweep/1");
  REQUIRE(j.at("points").size() == 2);
  CHECK(j.at("points")[0].at("ok") == true);
  CHECK(j.at("points")[0].at("selected_i_max") == 1);
  CHECK(j.at("points")[1].at("selected").at("model").at("eta").get<double>() ==
        doctest::Approx(2.0e-4).epsilon(0.05));
}
