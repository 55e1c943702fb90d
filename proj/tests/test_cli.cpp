#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

// Drives the installed binary through its public command line only. The
// binary path arrives via the BBP_CLI environment variable.

namespace {

namespace fs = std::filesystem;

std::string cli_path() {
  const char* env = std::getenv("BBP_CLI");
  REQUIRE_MESSAGE(env != nullptr, "BBP_CLI must point at the cli binary");
  return env;
}

struct RunResult {
  int code = -1;
  std::string output;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = cli_path() + " " + args + " 2>&1";
  std::FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult res;
  char buf[512];
  while (std::fgets(buf, sizeof buf, pipe) != nullptr) res.output += buf;
  const int status = pclose(pipe);
  res.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::string scratch(const std::string& name) {
  const fs::path dir = fs::path("cli_scratch") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE_MESSAGE(is.good(), path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

// Numeric body of an emitted CSV: comment lines skipped, header separated.
struct Table {
  std::string banner;
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
};

Table load_table(const std::string& path) {
  std::ifstream is(path);
  REQUIRE_MESSAGE(is.good(), path);
  Table t;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      t.banner = line;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (t.names.empty()) {
      t.names = cells;
      continue;
    }
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(std::stod(c));
    t.rows.push_back(row);
  }
  return t;
}

bool same_bytes(const std::string& a, const std::string& b) {
  return read_file(a) == read_file(b);
}

void check_dirs_identical(const std::string& a, const std::string& b) {
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(a)) {
    names.push_back(entry.path().filename().string());
  }
  std::size_t matched = 0;
  for (const auto& entry : fs::directory_iterator(b)) {
    ++matched;
  }
  CHECK(names.size() == matched);
  for (const auto& name : names) {
    INFO(name);
    CHECK(same_bytes(a + "/" + name, b + "/" + name));
  }
}

}  // namespace

TEST_CASE("help, version, and usage failures use the documented codes") {
  CHECK(run_cli("--help").code == 0);
  const RunResult version = run_cli("--version");
  CHECK(version.code == 0);
  CHECK(version.output.find("0.1.0") != std::string::npos);
  CHECK(run_cli("").code == 1);
  CHECK(run_cli("simulate --no-such-flag").code == 1);
  CHECK(run_cli("bogus_command").code == 1);
}

TEST_CASE("simulate writes consistent tables and replays byte for byte") {
  const std::string dir_a = scratch("sim_a");
  const std::string dir_b = scratch("sim_b");
  const std::string dir_c = scratch("sim_c");
  const std::string base =
      "simulate --n-data 80 --rounds 300 --seed 7 --outdir ";
  REQUIRE(run_cli(base + dir_a).code == 0);
  REQUIRE(run_cli(base + dir_b).code == 0);

  for (const char* alpha : {"0", "0.3", "0.6"}) {
    const std::string tag = std::string("alpha_") + alpha;
    const Table prefix = load_table(dir_a + "/K_prefix_" + tag + ".csv");
    CHECK(prefix.banner == "# bbp 0.1.0 seed=7");
    CHECK(prefix.names ==
          std::vector<std::string>{"n", "K", "exact", "asymptotic"});
    REQUIRE(prefix.rows.size() == 80);
    for (std::size_t i = 0; i < prefix.rows.size(); ++i) {
      CHECK(prefix.rows[i][0] == static_cast<double>(i + 1));
      CHECK(prefix.rows[i][2] > 0.0);
      if (i > 0) CHECK(prefix.rows[i][1] >= prefix.rows[i - 1][1]);
    }

    const Table hist = load_table(dir_a + "/K_hist_" + tag + ".csv");
    double features = 0.0;
    for (const auto& row : hist.rows) features += row[1];
    CHECK(features == prefix.rows.back()[1]);

    const Table counts = load_table(dir_a + "/row_counts_" + tag + ".csv");
    REQUIRE(counts.rows.size() == 80);

    const Table ranked = load_table(dir_a + "/ranked_weights_" + tag + ".csv");
    REQUIRE(ranked.rows.size() > 0);
    for (std::size_t i = 0; i < ranked.rows.size(); ++i) {
      CHECK(ranked.rows[i][1] > 0.0);
      CHECK(ranked.rows[i][1] < 1.0);
      if (i > 0) CHECK(ranked.rows[i][1] <= ranked.rows[i - 1][1]);
    }
  }

  check_dirs_identical(dir_a, dir_b);

  REQUIRE(run_cli("replay " + dir_a + "/manifest.json --outdir " + dir_c)
              .code == 0);
  check_dirs_identical(dir_a, dir_c);
}

TEST_CASE("simulate handles a single data row") {
  const std::string dir = scratch("sim_one");
  REQUIRE(run_cli("simulate --n-data 1 --rounds 60 --outdir " + dir).code ==
          0);
  CHECK(load_table(dir + "/K_prefix_alpha_0.csv").rows.size() == 1);
  CHECK(load_table(dir + "/K_prefix_alpha_0.6.csv").rows.size() == 1);
}

TEST_CASE("curves reproduce the zero-discount closed form") {
  const std::string dir = scratch("curves_zero");
  REQUIRE(run_cli("curves --gamma 3 --theta 1 --alpha 0 --grid-min 1 "
                  "--grid-max 100 --points 3 --outdir " +
                  dir)
              .code == 0);
  const Table t = load_table(dir + "/curves.csv");
  REQUIRE(t.rows.size() == 3);
  for (const auto& row : t.rows) {
    const int n = static_cast<int>(std::lround(row[0]));
    double harmonic = 0.0;
    for (int k = 1; k <= n; ++k) harmonic += 1.0 / k;
    CHECK(row[1] == doctest::Approx(3.0 * harmonic).epsilon(1e-6));
    // with zero discount the asymptotic column is the same closed form
    CHECK(row[2] == doctest::Approx(row[1]).epsilon(1e-9));
  }
}

TEST_CASE("curves exact to asymptotic ratio settles monotonically") {
  const std::string dir = scratch("curves_ratio");
  REQUIRE(run_cli("curves --gamma 3 --theta 1 --alpha 0.5 --grid-min 100 "
                  "--grid-max 100000 --points 7 --outdir " +
                  dir)
              .code == 0);
  const Table t = load_table(dir + "/curves.csv");
  REQUIRE(t.rows.size() == 7);
  double prev_gap = 2.0;
  for (const auto& row : t.rows) {
    const double gap = std::fabs(row[1] / row[2] - 1.0);
    CHECK(gap < prev_gap);
    prev_gap = gap;
  }
  CHECK(prev_gap < 0.01);
}

TEST_CASE("curves reject an empty grid and unknown kinds") {
  CHECK(run_cli("curves --points 0 --outdir cli_scratch/never").code == 1);
  CHECK(run_cli("curves --kind sideways --outdir cli_scratch/never").code ==
        1);
}

TEST_CASE("synthetic inference runs, replays, and repeats bit for bit") {
  const std::string dir_a = scratch("inf_a");
  const std::string dir_b = scratch("inf_b");
  const std::string dir_c = scratch("inf_c");
  const std::string base =
      "infer --synthetic --n-data 20 --n-dims 4 --features 3 --iterations 10 "
      "--burn-in 2 --init-features 4 --stick-samples 64 --seed 11 --outdir ";
  REQUIRE(run_cli(base + dir_a).code == 0);
  REQUIRE(run_cli(base + dir_b).code == 0);

  const Table trace = load_table(dir_a + "/trace.csv");
  CHECK(trace.banner == "# bbp 0.1.0 seed=11");
  CHECK(trace.names == std::vector<std::string>{"iteration", "K", "theta",
                                                "alpha", "gamma", "rmse"});
  REQUIRE(trace.rows.size() == 11);
  for (std::size_t i = 0; i < trace.rows.size(); ++i) {
    CHECK(trace.rows[i][0] == static_cast<double>(i));
    CHECK(trace.rows[i][1] >= 0.0);
    CHECK(trace.rows[i][5] >= 0.0);
  }

  const Table acorr = load_table(dir_a + "/autocorrelation.csv");
  CHECK(acorr.names == std::vector<std::string>{"lag", "K", "theta", "alpha",
                                                "gamma", "rmse"});
  REQUIRE(acorr.rows.size() > 0);
  CHECK(acorr.rows[0][0] == 0.0);
  CHECK(acorr.rows[0][5] == 1.0);

  for (const char* name : {"gates.csv", "weights.csv", "factors.csv",
                           "trace_K.svg", "trace_hyper.svg"}) {
    CHECK(fs::exists(dir_a + "/" + name));
  }
  const Table gates = load_table(dir_a + "/gates.csv");
  for (const auto& row : gates.rows) {
    for (std::size_t c = 1; c < row.size(); ++c) {
      CHECK((row[c] == 0.0 || row[c] == 1.0));
    }
  }

  check_dirs_identical(dir_a, dir_b);
  REQUIRE(run_cli("replay " + dir_a + "/manifest.json --outdir " + dir_c)
              .code == 0);
  check_dirs_identical(dir_a, dir_c);
}

TEST_CASE("zero iterations leave exactly the initial trace row") {
  const std::string dir = scratch("inf_zero");
  REQUIRE(run_cli("infer --synthetic --n-data 10 --n-dims 3 --features 2 "
                  "--iterations 0 --burn-in 0 --outdir " +
                  dir)
              .code == 0);
  CHECK(load_table(dir + "/trace.csv").rows.size() == 1);
  CHECK(load_table(dir + "/autocorrelation.csv").rows.empty());
}

TEST_CASE("inference reads data files and honors the config file") {
  const std::string dir = scratch("inf_data");
  const std::string data_path = dir + "/data.csv";
  {
    std::ofstream os(data_path);
    os << "a,b,c\n";
    for (int i = 0; i < 12; ++i) {
      os << 0.1 * i << "," << std::sin(0.9 * i) << "," << std::cos(1.7 * i)
         << "\n";
    }
  }
  const std::string config_path = dir + "/settings.txt";
  {
    std::ofstream os(config_path);
    os << "# sampler settings\n";
    os << "iterations = 3\n";
    os << "burn_in = 1\n";
    os << "gamma = 0.7\n";
    os << "seed = 5\n";
    os << "init_features = 2\n";
  }
  REQUIRE(run_cli("infer " + data_path + " --config " + config_path +
                  " --outdir " + dir)
              .code == 0);
  const Table trace = load_table(dir + "/trace.csv");
  CHECK(trace.banner == "# bbp 0.1.0 seed=5");
  CHECK(trace.rows.size() == 4);
  CHECK(trace.rows[0][4] == 0.7);  // configured initial mass
  const std::string manifest = read_file(dir + "/manifest.json");
  CHECK(manifest.find("\"gamma\": 0.7") != std::string::npos);
  CHECK(manifest.find("\"mode\": \"data\"") != std::string::npos);

  // flag beats config
  const std::string dir2 = scratch("inf_data2");
  REQUIRE(run_cli("infer " + data_path + " --config " + config_path +
                  " --gamma 1.5 --init-features 2 --iterations 2 --burn-in 0"
                  " --outdir " +
                  dir2)
              .code == 0);
  CHECK(load_table(dir2 + "/trace.csv").rows[0][4] == 1.5);

  {
    std::ofstream os(config_path, std::ios::app);
    os << "mystery = 1\n";
  }
  CHECK(run_cli("infer " + data_path + " --config " + config_path +
                " --outdir " + dir)
            .code == 1);

  const std::string bad_path = dir + "/bad.csv";
  {
    std::ofstream os(bad_path);
    os << "a,b\n1,2\n3,oops\n";
  }
  const RunResult bad = run_cli("infer " + bad_path + " --outdir " + dir);
  CHECK(bad.code == 3);
  CHECK(bad.output.find("row") != std::string::npos);

  CHECK(run_cli("infer --outdir " + dir).code == 1);
  CHECK(run_cli("infer " + data_path + " --synthetic --outdir " + dir)
            .code == 1);
}

TEST_CASE("analyze recovers exact laws and flags bad input") {
  const std::string dir = scratch("analyze");
  const std::string series = dir + "/series.csv";
  {
    std::ofstream os(series);
    os << "x,y\n";
    char buf[64];
    for (int i = 1; i <= 40; ++i) {
      std::snprintf(buf, sizeof buf, "%d,%.17g\n", i,
                    2.5 * std::pow(static_cast<double>(i), 0.7));
      os << buf;
    }
  }
  REQUIRE(run_cli("analyze " + series + " --outdir " + dir).code == 0);
  const Table fit = load_table(dir + "/fit.csv");
  CHECK(fit.names ==
        std::vector<std::string>{"constant", "exponent", "residual_rms",
                                 "fit_min_x", "fit_max_x", "points_used"});
  REQUIRE(fit.rows.size() == 1);
  CHECK(fit.rows[0][0] == doctest::Approx(2.5).epsilon(1e-10));
  CHECK(fit.rows[0][1] == doctest::Approx(0.7).epsilon(1e-10));
  CHECK(fit.rows[0][2] < 1e-12);
  CHECK(fit.rows[0][3] >= 1.0);
  CHECK(fit.rows[0][4] == 40.0);

  const std::string flat = dir + "/flat.csv";
  {
    std::ofstream os(flat);
    os << "x,y\n";
    for (int i = 1; i <= 10; ++i) os << i << ",5\n";
  }
  REQUIRE(run_cli("analyze " + flat + " --outdir " + dir).code == 0);
  const Table flat_fit = load_table(dir + "/fit.csv");
  CHECK(std::fabs(flat_fit.rows[0][1]) < 1e-12);
  CHECK(flat_fit.rows[0][0] == doctest::Approx(5.0).epsilon(1e-12));

  const std::string negative = dir + "/neg.csv";
  {
    std::ofstream os(negative);
    os << "x,y\n1,2\n2,-1\n3,4\n";
  }
  CHECK(run_cli("analyze " + negative + " --outdir " + dir).code == 1);
  CHECK(run_cli("analyze " + dir + "/missing.csv --outdir " + dir).code == 3);
}

TEST_CASE("the documented simulation study feeds the exponent fit") {
  const std::string dir = scratch("study");
  REQUIRE(run_cli("simulate --outdir " + dir).code == 0);
  for (const char* alpha : {"0", "0.3", "0.6"}) {
    const Table prefix =
        load_table(dir + "/K_prefix_alpha_" + std::string(alpha) + ".csv");
    CHECK(prefix.rows.size() == 1000);
  }
  REQUIRE(run_cli("analyze " + dir + "/K_prefix_alpha_0.6.csv --outdir " +
                  dir + "/fit")
              .code == 0);
  const Table fit = load_table(dir + "/fit/fit.csv");
  CHECK(fit.rows[0][1] > 0.55);
  CHECK(fit.rows[0][1] < 0.65);
}

TEST_CASE("replay rejects missing and malformed manifests") {
  CHECK(run_cli("replay cli_scratch/not_there.json").code == 3);
  const std::string dir = scratch("bad_manifest");
  const std::string path = dir + "/manifest.json";
  {
    std::ofstream os(path);
    os << "{ not json";
  }
  CHECK(run_cli("replay " + path).code == 3);
  {
    std::ofstream os(path);
    os << "{\"command\": \"simulate\"}";
  }
  CHECK(run_cli("replay " + path).code == 3);
}
