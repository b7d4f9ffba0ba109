// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(STBEM_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("stbem_cli_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kSmall = R"({"M": 32, "K": 2, "P": 10, "n_blocks": 4})";

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run_cli(""), 2);
    EXPECT_EQ(run_cli("simulate"), 2);
    EXPECT_EQ(run_cli("simulate --scenario nope"), 2);
    EXPECT_EQ(run_cli("sweep --scenario ul_mse --snr 1:0:5"), 2);
    EXPECT_EQ(run_cli("sweep --scenario ul_mse --baselines dft_search"), 2);
    EXPECT_EQ(run_cli("simulate --scenario doa_track --config /nonexistent.json"), 2);
    EXPECT_EQ(run_cli("selftest --criterion no_such_criterion"), 2);
}

TEST(Cli, HelpExitsZero) { EXPECT_EQ(run_cli("--help"), 0); }

TEST(Cli, SweepWritesCsvAndManifest) {
    const fs::path dir = scratch("sweep");
    std::ofstream(dir / "cfg.json") << kSmall;
    ASSERT_EQ(run_cli("sweep --config " + (dir / "cfg.json").string() +
                      " --scenario doa_track --snr 0,10 --trials 2 --seed 5 --out " + (dir / "out").string()),
              0);
    const std::string csv = slurp(dir / "out" / "results.csv");
    EXPECT_EQ(csv.rfind("scenario,snr_db,block,method,trial,value\n", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 3 * 2);
    const std::string manifest = slurp(dir / "out" / "manifest.json");
    EXPECT_NE(manifest.find("\"seed\": 5"), std::string::npos);
    fs::remove_all(dir);
}

TEST(Cli, FixedUpsilonBaselineSetsTheWindowList) {
    const fs::path dir = scratch("upsilon");
    std::ofstream(dir / "cfg.json") << kSmall;
    ASSERT_EQ(run_cli("sweep --config " + (dir / "cfg.json").string() +
                      " --scenario ul_mse --snr 10 --baselines 'fixed_upsilon(3)' --out " + (dir / "out").string()),
              0);
    const std::string csv = slurp(dir / "out" / "results.csv");
    EXPECT_NE(csv.find(",fixed_upsilon_3,"), std::string::npos);
    EXPECT_EQ(csv.find(",aging,"), std::string::npos);
    fs::remove_all(dir);
}

TEST(Cli, TraceWritesDiagnostics) {
    const fs::path dir = scratch("trace");
    std::ofstream(dir / "cfg.json") << kSmall;
    ASSERT_EQ(run_cli("trace --config " + (dir / "cfg.json").string() + " --scenario as_track --out " +
                      (dir / "out").string()),
              0);
    const std::string csv = slurp(dir / "out" / "trace.csv");
    EXPECT_EQ(csv.rfind("user,block,true_doa", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 4);
    fs::remove_all(dir);
}

TEST(Cli, SelftestRunsOneCriterion) { EXPECT_EQ(run_cli("selftest --criterion pilot_orthogonality"), 0); }
