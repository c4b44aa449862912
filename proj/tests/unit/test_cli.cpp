#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "mixres/cli/config.hpp"
#include "mixres/cli/output.hpp"

using namespace mixres;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  auto dir = fs::temp_directory_path() / "mixres_cli_tests";
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string mixres_bin() { return std::string(MIXRES_BIN_DIR) + "/mixres"; }

int run(const std::string& args) {
  int rc = std::system((mixres_bin() + " " + args + " > /dev/null 2>&1").c_str());
  return WEXITSTATUS(rc);
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("toml subset parsing") {
  std::string text =
      "# comment\n"
      "n = 12\n"
      "rate = 0.5  # trailing comment\n"
      "name = \"hello # not a comment\"\n"
      "flag = true\n"
      "levels = [0, 1, 2, 3]\n"
      "mix = [1.5, 2]\n"
      "\n"
      "[section]\n"
      "inner = -3\n";
  nlohmann::json j = cli::parse_toml(text);
  CHECK(j["n"] == 12);
  CHECK(j["rate"] == 0.5);
  CHECK(j["name"] == "hello # not a comment");
  CHECK(j["flag"] == true);
  CHECK(j["levels"].size() == 4);
  CHECK(j["levels"][3] == 3);
  CHECK(j["mix"][0] == 1.5);
  CHECK(j["section"]["inner"] == -3);

  CHECK_THROWS_AS(cli::parse_toml("oops\n"), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_toml("x = [1,\n2]\n"), cli::ConfigError);
  CHECK_THROWS_AS(cli::parse_toml("x = zzz\n"), cli::ConfigError);
}

TEST_CASE("unknown keys are hard errors") {
  nlohmann::json j = cli::parse_toml("a = 1\nb = 2\n");
  CHECK_NOTHROW(cli::check_known_keys(j, {"a", "b"}, "test"));
  CHECK_THROWS_WITH_AS(cli::check_known_keys(j, {"a"}, "test"),
                       doctest::Contains("unknown key 'b'"), cli::ConfigError);
}

TEST_CASE("format_double round trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-17, 123456.789, -0.0, 2.2250738585072014e-308}) {
    std::string s = cli::format_double(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
  CHECK(cli::format_double(std::nan("")) == "nan");
}

TEST_CASE("storage command prints the exact fractions") {
  auto out = temp_dir() / "storage_stdout.txt";
  std::string cmd = mixres_bin() + " storage --s 32 --t 12 --r 0.1 --out-dir " +
                    (temp_dir() / "storage_out").string() + " > " + out.string();
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  std::string text = read_file(out);
  CHECK(text.find("0.2265625") != std::string::npos);
  CHECK(text.find("0.140625") != std::string::npos);
  CHECK(fs::exists(temp_dir() / "storage_out" / "storage_grid.svg"));
  CHECK(fs::exists(temp_dir() / "storage_out" / "manifest.json"));
}

TEST_CASE("storage command rejects t > s with exit 1") {
  CHECK(run("storage --s 16 --t 32 --r 0.1") == 1);
}

TEST_CASE("config errors exit 1, missing subcommand exits nonzero") {
  auto bad = temp_dir() / "bad.toml";
  {
    std::ofstream out(bad);
    out << "unknown_key = 1\n";
  }
  CHECK(run("toy --config " + bad.string() + " --out-dir " +
            (temp_dir() / "nowhere").string()) == 1);
  CHECK(run("") != 0);
}

TEST_CASE("toy command: outputs exist and reruns are byte-identical") {
  auto cfg = temp_dir() / "toy.toml";
  {
    std::ofstream out(cfg);
    out << "n_high = 12\nn_low = 12\nseed = 3\nimages_n = 10\n"
        << "images_side = 16\nresolutions = [4, 8, 16]\n";
  }
  auto out1 = temp_dir() / "toy_run1";
  auto out2 = temp_dir() / "toy_run2";
  fs::remove_all(out1);
  fs::remove_all(out2);
  REQUIRE(run("toy --config " + cfg.string() + " --out-dir " + out1.string() +
              " --threads 1") == 0);
  REQUIRE(run("toy --config " + cfg.string() + " --out-dir " + out2.string() +
              " --threads 4") == 0);
  for (const char* name : {"toy_points.csv", "toy_variance.csv"}) {
    CHECK(read_file(out1 / name) == read_file(out2 / name));
    CHECK(!read_file(out1 / name).empty());
  }
  CHECK(fs::exists(out1 / "toy_scatter.svg"));
  CHECK(fs::exists(out1 / "toy_variance.svg"));
  CHECK(fs::exists(out1 / "manifest.json"));
  // CSVs reference the manifest.
  std::string csv = read_file(out1 / "toy_points.csv");
  CHECK(csv.rfind("# manifest: manifest.json", 0) == 0);
}

TEST_CASE("simulate-bounds micro run: row counts and determinism") {
  auto cfg = temp_dir() / "bounds.toml";
  {
    std::ofstream out(cfg);
    out << "n_per_class = 10\nside = 16\npca_dim = 4\nlevels = [0, 1]\n"
        << "m = 16\nseeds = [1, 2]\nepochs = 25\nhidden = 8\n";
  }
  auto out1 = temp_dir() / "bounds_run1";
  auto out2 = temp_dir() / "bounds_run2";
  fs::remove_all(out1);
  fs::remove_all(out2);
  REQUIRE(run("simulate-bounds --config " + cfg.string() + " --out-dir " +
              out1.string() + " --threads 2") == 0);
  REQUIRE(run("simulate-bounds --config " + cfg.string() + " --out-dir " +
              out2.string() + " --threads 1") == 0);
  std::string csv = read_file(out1 / "bounds.csv");
  CHECK(csv == read_file(out2 / "bounds.csv"));
  // 2 seeds x 2 levels + manifest line + header.
  int lines = 0;
  for (char c : csv) lines += c == '\n';
  CHECK(lines == 2 + 4);
  CHECK(fs::exists(out1 / "bounds_ratio.svg"));
  CHECK(fs::exists(out1 / "bounds_diff.svg"));
  CHECK(fs::exists(out1 / "covariance_checks.csv"));
}

TEST_CASE("train micro run respects the grid and rerun determinism") {
  auto cfg = temp_dir() / "train.toml";
  {
    std::ofstream out(cfg);
    out << "experiment = \"ratio\"\nmodel = \"mlp\"\nhigh_side = 16\n"
        << "low_side = 8\nepochs = 6\nwarmup_epochs = 1\nbatch_size = 16\n"
        << "replicates = 2\nn_per_class = 24\ngrid = [0.2, 0.6]\nseed = 11\n";
  }
  auto out1 = temp_dir() / "train_run1";
  auto out2 = temp_dir() / "train_run2";
  fs::remove_all(out1);
  fs::remove_all(out2);
  REQUIRE(run("train --config " + cfg.string() + " --out-dir " + out1.string() +
              " --threads 2") == 0);
  REQUIRE(run("train --config " + cfg.string() + " --out-dir " + out2.string() +
              " --threads 1") == 0);
  std::string results = read_file(out1 / "train_results.csv");
  CHECK(results == read_file(out2 / "train_results.csv"));
  CHECK(read_file(out1 / "loss_curves.csv") == read_file(out2 / "loss_curves.csv"));
  // 2 grid cells x 2 replicates + manifest + header.
  int lines = 0;
  for (char c : results) lines += c == '\n';
  CHECK(lines == 2 + 4);
  CHECK(fs::exists(out1 / "train_summary.json"));
  CHECK(fs::exists(out1 / "accuracy.svg"));
}

TEST_CASE("tightness micro run emits the full grid") {
  auto cfg = temp_dir() / "tight.toml";
  {
    std::ofstream out(cfg);
    out << "dims = [2, 4]\ndepths = [2]\nlevels = [1, 3]\nm = 12\n"
        << "seeds = [1]\nepochs = 20\n";
  }
  auto out1 = temp_dir() / "tight_run1";
  fs::remove_all(out1);
  REQUIRE(run("tightness --config " + cfg.string() + " --out-dir " +
              out1.string()) == 0);
  std::string csv = read_file(out1 / "tightness.csv");
  int lines = 0;
  for (char c : csv) lines += c == '\n';
  CHECK(lines == 2 + 2 * 1 * 2);  // dims x depths x levels + manifest + header
  CHECK(fs::exists(out1 / "gaps_ratio.svg"));
  CHECK(fs::exists(out1 / "gaps_diff.svg"));
}

TEST_CASE("seed override changes outputs") {
  auto cfg = temp_dir() / "toy2.toml";
  {
    std::ofstream out(cfg);
    out << "n_high = 8\nn_low = 8\nseed = 3\nimages_n = 8\nimages_side = 16\n"
        << "resolutions = [4, 8]\n";
  }
  auto out1 = temp_dir() / "toy_a";
  auto out2 = temp_dir() / "toy_b";
  fs::remove_all(out1);
  fs::remove_all(out2);
  REQUIRE(run("toy --config " + cfg.string() + " --out-dir " + out1.string()) == 0);
  REQUIRE(run("toy --config " + cfg.string() + " --out-dir " + out2.string() +
              " --seed-override 99") == 0);
  CHECK(read_file(out1 / "toy_points.csv") != read_file(out2 / "toy_points.csv"));
}

TEST_SUITE_END();
