#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

using namespace aoi_copilot;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string &name) {
    const fs::path dir = fs::temp_directory_path() / ("aoi_copilot_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path &p, const std::string &s) { std::ofstream(p) << s; }

int run_cli(std::vector<std::string> args) { return cli::main_entry(std::move(args)); }

}  // namespace

TEST(Config, RoundTripsThroughJson) {
    SimConfig c;
    c.systems = 7;
    c.scheduler = SchedulerKind::round_robin;
    c.radio.snr_th = 2.5;
    c.gpr.lambda = 9.0;
    c.master_seed = 42;
    const SimConfig back = config_from_json(config_to_json(c));
    EXPECT_EQ(config_to_json(back), config_to_json(c));
}

TEST(Config, UnknownKeysAreRejectedWithAllDiagnostics) {
    const auto doc = nlohmann::json::parse(R"({"systems": 3, "foo": 1, "radio": {"snr": 4}})");
    try {
        config_from_json(doc);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError &e) {
        EXPECT_EQ(e.diagnostics().size(), 2u);
    }
}

TEST(Config, TypeAndRangeErrors) {
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"systems": "many"})")), ConfigError);
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"runs": -1})")), ConfigError);
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"radio": {"n0": 0}})")), ConfigError);
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"scheduler": "fifo"})")), ConfigError);
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"radio": {"sigma_x": [[1, 2], [2, 1]]}})")),
                 ConfigError);
}

TEST(Config, JitterFollowsOutputScaleUnlessGiven) {
    auto c = config_from_json(nlohmann::json::parse(R"({"gpr": {"h": 3.0}})"));
    EXPECT_DOUBLE_EQ(c.gpr.jitter, 9e-6);
    c = config_from_json(nlohmann::json::parse(R"({"gpr": {"h": 3.0, "jitter": 0.5}})"));
    EXPECT_EQ(c.gpr.jitter, 0.5);
}

TEST(Cli, MissingConfigFileExitsWithConfigError) {
    const auto dir = fresh_dir("missing");
    EXPECT_EQ(run_cli({"run", "--config", (dir / "nope.json").string(), "--out-dir", dir.string()}),
              cli::kConfigError);
}

TEST(Cli, InvalidValuesExitWithConfigError) {
    const auto dir = fresh_dir("invalid");
    EXPECT_EQ(run_cli({"run", "--runs", "0", "--out-dir", dir.string()}), cli::kConfigError);
    EXPECT_EQ(run_cli({"run", "--scheduler", "fifo", "--out-dir", dir.string()}), cli::kConfigError);
    write_text(dir / "bad.json", R"({"systems": 2, "radio": {"bogus": 1}})");
    EXPECT_EQ(run_cli({"run", "--config", (dir / "bad.json").string(), "--out-dir", dir.string()}),
              cli::kConfigError);
    EXPECT_EQ(run_cli({"explode"}), cli::kConfigError);
    EXPECT_FALSE(fs::exists(dir / "trace_proposed.csv"));
}

TEST(Cli, RunWritesTraceAndMetricsDeterministically) {
    const auto a = fresh_dir("run_a");
    const auto b = fresh_dir("run_b");
    for (const auto &dir : {a, b}) {
        const int rc = run_cli({"run", "--scheduler", "proposed", "--steps", "120", "--systems", "3",
                                "--runs", "2", "--seed", "5", "--out-dir", dir.string()});
        EXPECT_TRUE(rc == cli::kOk || rc == cli::kUnstable);
    }
    const std::string trace = slurp(a / "trace_proposed.csv");
    EXPECT_EQ(trace, slurp(b / "trace_proposed.csv"));
    EXPECT_EQ(slurp(a / "metrics_proposed.json"), slurp(b / "metrics_proposed.json"));

    std::istringstream lines(trace);
    std::string header;
    std::getline(lines, header);
    EXPECT_EQ(header, trace_csv_header(4));
    std::size_t rows = 0;
    for (std::string l; std::getline(lines, l);) { ++rows; }
    EXPECT_EQ(rows, 2u * 120u * 3u);

    const auto metrics = nlohmann::json::parse(slurp(a / "metrics_proposed.json"));
    ASSERT_TRUE(metrics.contains("fleet_mean_abs_angle"));
    EXPECT_EQ(metrics["fleet_mean_abs_angle"]["per_system"].size(), 3u);
    EXPECT_EQ(metrics["experiment"]["runs"], 2);
    EXPECT_FALSE(fs::exists(a / "trace_proposed.csv.tmp"));
}

TEST(Cli, ConfigFileIsAppliedBeforeFlags) {
    const auto dir = fresh_dir("cfgfile");
    write_text(dir / "c.json", R"({"systems": 2, "steps": 50, "runs": 1, "scheduler": "round_robin"})");
    run_cli({"run", "--config", (dir / "c.json").string(), "--steps", "20", "--out-dir", dir.string()});
    const std::string trace = slurp(dir / "trace_round_robin.csv");
    EXPECT_EQ(static_cast<std::size_t>(std::count(trace.begin(), trace.end(), '\n')), 1u + 20u * 2u);
}

TEST(Cli, CompareWritesBothSchemesAndSummary) {
    const auto dir = fresh_dir("compare");
    const int rc = run_cli({"compare", "--steps", "100", "--systems", "2", "--runs", "1", "--out-dir",
                            dir.string()});
    EXPECT_TRUE(rc == cli::kOk || rc == cli::kUnstable);
    EXPECT_TRUE(fs::exists(dir / "metrics_proposed.json"));
    EXPECT_TRUE(fs::exists(dir / "metrics_round_robin.json"));
    EXPECT_TRUE(fs::exists(dir / "trace_round_robin.csv"));
    const auto cmp = nlohmann::json::parse(slurp(dir / "comparison.json"));
    for (const char *key : {"error_ratio", "peak_aoi_ratio", "trk_gt_trv_fraction"}) {
        EXPECT_TRUE(cmp.contains(key)) << key;
    }
    const auto baseline = nlohmann::json::parse(slurp(dir / "metrics_round_robin.json"));
    EXPECT_EQ(baseline["experiment"]["predictor_enabled"], false);
}

TEST(Cli, OutputDirectoryFallsBackToEnvironment) {
    const auto dir = fresh_dir("env");
    ::setenv("AOI_COPILOT_OUT", dir.string().c_str(), 1);
    run_cli({"run", "--steps", "10", "--systems", "1", "--runs", "1"});
    ::unsetenv("AOI_COPILOT_OUT");
    EXPECT_TRUE(fs::exists(dir / "metrics_proposed.json"));
}
