#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "pdpfi/dgp.hpp"
#include "pdpfi/rng.hpp"

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PDPFI_CLI_PATH) + " " + args +
                          " >/dev/null 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

fs::path write_linear_csv(const fs::path& dir) {
  // Noiseless y = 2 x1 + 0.1 x2 plus a constant column x3: x1 clearly
  // dominates the ranking and x3 must come out exactly zero.
  pdpfi::Rng rng(3);
  std::ofstream out(dir / "toy.csv");
  out << "x1,x2,x3,y\n";
  for (int i = 0; i < 80; ++i) {
    const double x1 = rng.uniform01();
    const double x2 = rng.uniform01();
    out << x1 << ',' << x2 << ",1.0," << 2.0 * x1 + 0.1 * x2 << '\n';
  }
  return dir / "toy.csv";
}

}  // namespace

TEST_CASE("analyze writes the documented outputs") {
  TempDir tmp("pdpfi_cli_analyze");
  const fs::path csv = write_linear_csv(tmp.path);
  const fs::path out = tmp.path / "out";
  const int code = run_cli("analyze --data " + csv.string() +
                           " --target y --learner lm --m 5 --seed 7 --out " +
                           out.string());
  REQUIRE(code == 0);
  CHECK(fs::exists(out / "pd_x1.csv"));
  CHECK(fs::exists(out / "pd_x2.csv"));
  CHECK_FALSE(fs::exists(out / "pd_x3.csv"));  // constant column: PD skipped
  CHECK(fs::exists(out / "pfi.csv"));
  CHECK(fs::exists(out / "run_meta.json"));

  SECTION("pfi table ranks x1 first and gives the constant column zero") {
    std::ifstream in(out / "pfi.csv");
    std::string header, first;
    std::getline(in, header);
    CHECK(header ==
          "feature,mean,variance,lower,upper,df,kind,sampler,"
          "overlap_with_next");
    std::getline(in, first);
    CHECK(first.substr(0, 3) == "x1,");
    std::string line, last;
    while (std::getline(in, line))
      if (!line.empty()) last = line;
    CHECK(last.substr(0, 5) == "x3,0,");
  }
  SECTION("reruns are byte-identical") {
    const fs::path out2 = tmp.path / "out2";
    REQUIRE(run_cli("analyze --data " + csv.string() +
                    " --target y --learner lm --m 5 --seed 7 --out " +
                    out2.string()) == 0);
    CHECK(slurp(out / "pd_x1.csv") == slurp(out2 / "pd_x1.csv"));
    CHECK(slurp(out / "pfi.csv") == slurp(out2 / "pfi.csv"));
  }
  SECTION("PDPFI_SEED overrides the flag") {
    const fs::path out3 = tmp.path / "out3";
    const std::string cmd = "PDPFI_SEED=7 " + std::string(PDPFI_CLI_PATH) +
                            " analyze --data " + csv.string() +
                            " --target y --learner lm --m 5 --seed 999 --out " +
                            out3.string() + " >/dev/null 2>/dev/null";
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    CHECK(slurp(out / "pfi.csv") == slurp(out3 / "pfi.csv"));
  }
}

TEST_CASE("analyze validation failures exit 2 without writing") {
  TempDir tmp("pdpfi_cli_invalid");
  const fs::path csv = write_linear_csv(tmp.path);
  const fs::path out = tmp.path / "nope";
  SECTION("bad alpha") {
    CHECK(run_cli("analyze --data " + csv.string() +
                  " --target y --alpha 1.5 --out " + out.string()) == 2);
    CHECK_FALSE(fs::exists(out));
  }
  SECTION("missing target column") {
    CHECK(run_cli("analyze --data " + csv.string() +
                  " --target zz --out " + out.string()) == 2);
    CHECK_FALSE(fs::exists(out));
  }
  SECTION("missing file") {
    CHECK(run_cli("analyze --data /nonexistent.csv --target y --out " +
                  out.string()) == 2);
    CHECK_FALSE(fs::exists(out));
  }
}

TEST_CASE("compare of a learner with itself is a zero interval") {
  TempDir tmp("pdpfi_cli_compare");
  const fs::path csv = write_linear_csv(tmp.path);
  const fs::path out = tmp.path / "cmp";
  REQUIRE(run_cli("compare --data " + csv.string() +
                  " --target y --learner-a lm --learner-b lm --m 5 --out " +
                  out.string()) == 0);
  const auto j = nlohmann::json::parse(slurp(out / "compare.json"));
  CHECK(std::fabs(j.at("difference").at("mean").get<double>()) < 1e-12);
  CHECK(std::fabs(j.at("difference").at("upper").get<double>() -
                  j.at("difference").at("lower").get<double>()) < 1e-12);
}

TEST_CASE("simulate from a config file is reproducible") {
  TempDir tmp("pdpfi_cli_sim");
  const fs::path cfg_path = tmp.path / "config.json";
  {
    std::ofstream cfg(cfg_path);
    cfg << R"({"dgp":"linear","learner":{"name":"lm"},"n":60,"m":4,)"
        << R"("resampling":"bootstrap","corrected":true,"alpha":0.05,)"
        << R"("repetitions":25,"reference_runs":120,"seed":11,"pfi_l":2})";
  }
  const fs::path out = tmp.path / "sim";
  REQUIRE(run_cli("simulate --config " + cfg_path.string() + " --out " +
                  out.string() + " --threads 2") == 0);
  REQUIRE(fs::exists(out / "coverage.csv"));
  REQUIRE(fs::exists(out / "coverage_meta.json"));

  const std::string csv = slurp(out / "coverage.csv");
  CHECK(csv.find("dgp,model,n,mode,corrected,target,coverage,mean_width") ==
        0);
  CHECK(csv.find("linear,lm,60,bootstrap,1,pd,") != std::string::npos);

  const fs::path out2 = tmp.path / "sim2";
  REQUIRE(run_cli("simulate --config " + cfg_path.string() + " --out " +
                  out2.string() + " --threads 1") == 0);
  CHECK(slurp(out2 / "coverage.csv") == csv);  // thread count independent
}

TEST_CASE("simulate rejects bad invocations") {
  TempDir tmp("pdpfi_cli_sim_bad");
  CHECK(run_cli("simulate --out " + (tmp.path / "x").string()) == 2);
  CHECK(run_cli("simulate --preset nope --out " +
                (tmp.path / "y").string()) == 2);
}
