#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "baa/experiment.hpp"
#include "support.hpp"

using namespace baa;
using namespace baa::cli;

namespace {

std::string csv_of(const ResultTable& t) {
    std::ostringstream os;
    write_csv(os, t);
    return os.str();
}

std::size_t column(const ResultTable& t, const std::string& name) {
    const auto it = std::find(t.columns.begin(), t.columns.end(), name);
    if (it == t.columns.end()) throw std::runtime_error("no column " + name);
    return static_cast<std::size_t>(it - t.columns.begin());
}

double num(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) return *d;
    return static_cast<double>(std::get<std::int64_t>(c));
}

std::string text(const Cell& c) { return std::get<std::string>(c); }

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig quick_config() {
    ExperimentConfig cfg;
    cfg.trials = 2000;
    cfg.extensions.trials = 50;
    cfg.extensions.instances = 3;
    cfg.extensions.pattern_points = 11;
    cfg.data.n_train = 400;
    cfg.data.n_test = 200;
    cfg.train.n_cr = 4;
    cfg.k_train = 4;
    cfg.partition = {learning::PartitionMode::Iid, 0, 0, 0};
    return cfg;
}

}  // namespace

TEST(Config, SectionsCommentsAndOverrides) {
    const auto cfg = parse_config(R"(
# header comment
seed = 42
[system]
alpha = 3.5      # inline comment
n0_dbm = -90
[train]
aggregation = digital
grid_r_in_ratios = 0.2, 0.4,0.6
mobility = iid
)");
    EXPECT_EQ(cfg.seed, 42u);
    EXPECT_EQ(cfg.system.alpha, 3.5);
    EXPECT_NEAR(cfg.system.n0 / 1e-12, 1.0, 1e-12);
    EXPECT_EQ(cfg.train.aggregation, learning::Aggregation::Digital);
    EXPECT_EQ(cfg.grid.r_in_ratios, (std::vector<double>{0.2, 0.4, 0.6}));
    EXPECT_EQ(cfg.mobility, network::Mobility::IidResample);
}

TEST(Config, DefaultNoiseIsMinusEightyDbm) {
    ExperimentConfig cfg;
    set_value(cfg, "system.n0_dbm", "-80");
    EXPECT_NEAR(cfg.system.n0 / 1e-11, 1.0, 1e-12);
}

TEST(Config, ErrorsNameTheLine) {
    try {
        parse_config("seed = 1\nsystem.bogus = 3\n");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
        EXPECT_NE(msg.find("system.bogus"), std::string::npos) << msg;
    }
    EXPECT_THROW(parse_config("seed = abc"), ConfigError);
    EXPECT_THROW(parse_config("no equals sign"), ConfigError);
    EXPECT_THROW(parse_config("[system\nalpha = 3"), ConfigError);
    EXPECT_THROW(parse_config("train.aggregation = smoke"), ConfigError);
    EXPECT_THROW(parse_config("train.tau = 0"), ConfigError);
}

TEST(Config, BerOutsideGapRangeIsRejected) {
    EXPECT_THROW(parse_config("system.ber = 0.2"), ConfigError);
    EXPECT_THROW(parse_config("latency.ber_values = 0.1, 0.3"), ConfigError);
    EXPECT_NO_THROW(parse_config("system.ber = 0.19"));
}

TEST(Config, MnistNeedsPaths) {
    EXPECT_THROW(parse_config("data.source = mnist"), ConfigError);
}

TEST(Config, CanonicalTextRoundTrips) {
    auto cfg = parse_config("seed = 9\nsystem.alpha = 2.75\ntrain.rounds = 7\n");
    const auto again = parse_config(canonical_text(cfg));
    EXPECT_EQ(canonical_text(again), canonical_text(cfg));
    EXPECT_EQ(config_hash(again), config_hash(cfg));
}

TEST(Config, HashTracksResultsNotOutputPath) {
    ExperimentConfig a, b;
    b.output_path = "elsewhere";
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a).size(), 16u);
    b.seed = 2;
    EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Results, CsvQuotesAndFormats) {
    ResultTable t{"x", {"a", "b", "c", "d"}, {}};
    t.add({cell(3), 0.25, std::string("x,\"y\""), true});
    EXPECT_EQ(csv_of(t), "a,b,c,d\n3,0.25,\"x,\"\"y\"\"\",true\n");
    EXPECT_EQ(cell_text(cell(std::uint64_t{18446744073709551615ull}, 0)), "18446744073709551615");
}

TEST(Results, JsonSchema) {
    ResultTable t{"tbl", {"a", "b"}, {}};
    t.add({cell(1), std::nan("")});
    std::ostringstream os;
    write_json(os, t, "exp");
    const auto j = nlohmann::json::parse(os.str());
    EXPECT_EQ(j["schema_version"], kSchemaVersion);
    EXPECT_EQ(j["experiment"], "exp");
    EXPECT_EQ(j["table"], "tbl");
    EXPECT_EQ(j["rows"][0]["a"], 1);
    EXPECT_TRUE(j["rows"][0]["b"].is_null());
}

TEST(Results, ManifestRecordsConfigAndOutputs) {
    auto cfg = quick_config();
    cfg.output_path = (std::filesystem::temp_directory_path() / "baa_cli_manifest").string();
    std::filesystem::remove_all(cfg.output_path);
    const auto files = write_results("latency", cmd_latency(cfg), cfg, OutputFormat::Csv);
    ASSERT_EQ(files.size(), 2u);
    EXPECT_EQ(files[0], "latency_latency.csv");
    const auto m = nlohmann::json::parse(read_file(std::filesystem::path(cfg.output_path) / "latency.manifest.json"));
    EXPECT_EQ(m["config_hash"], config_hash(cfg));
    EXPECT_EQ(m["tool_version"], kToolVersion);
    EXPECT_EQ(m["outputs"][0], "latency_latency.csv");
    EXPECT_FALSE(m["config"].contains("output"));
    EXPECT_EQ(m["config"]["system.alpha"], canonical_entries(cfg).at("system.alpha"));
}

TEST(Commands, OutputsAreDeterministic) {
    const auto cfg = quick_config();
    for (const std::string name : {"tradeoff", "montecarlo", "latency", "extensions", "train"}) {
        const auto a = run_command(name, cfg);
        const auto b = run_command(name, cfg);
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_FALSE(a[i].rows.empty()) << name << "/" << a[i].name;
            EXPECT_EQ(csv_of(a[i]), csv_of(b[i])) << name << "/" << a[i].name;
        }
    }
    EXPECT_THROW(run_command("nope", cfg), ConfigError);
}

TEST(Commands, LatencySweepShapes) {
    const auto t = cmd_latency(ExperimentConfig{}).front();
    const auto sweep = column(t, "sweep"), t_ana = column(t, "t_ana_s"), gamma = column(t, "gamma");
    double first_t = -1.0, prev_gamma = 0.0;
    for (const auto& row : t.rows) {
        if (text(row[sweep]) == "k_devices") {
            if (first_t < 0) first_t = num(row[t_ana]);
            EXPECT_EQ(num(row[t_ana]), first_t);
        }
        if (text(row[sweep]) == "ber") {
            EXPECT_GT(num(row[gamma]), prev_gamma);  // BER values run from 1e-1 down
            prev_gamma = num(row[gamma]);
        }
    }
    EXPECT_GT(first_t, 0.0);
}

TEST(Commands, TradeoffGainIsUnityAtFullCell) {
    const auto tables = cmd_tradeoff(ExperimentConfig{});
    const auto& g = tables[1];
    const auto f = column(g, "f_dat"), gain = column(g, "gain_linear");
    int hits = 0;
    for (const auto& row : g.rows)
        if (num(row[f]) == 1.0) {
            EXPECT_NEAR(num(row[gain]), 1.0, 1e-12);
            ++hits;
        }
    EXPECT_EQ(hits, 3);
    const auto& s = tables[0];
    EXPECT_EQ(s.rows.size(), 3u * 2u * 99u);
}

TEST(Commands, MonteCarloNegativeControlFails) {
    auto cfg = quick_config();
    cfg.trials = 20000;
    const auto rows = validation_checks(cfg);
    int controls = 0;
    for (const auto& r : rows)
        if (r.check == "negative_control_wrong_alpha") {
            EXPECT_FALSE(r.expect_pass);
            EXPECT_FALSE(r.pass);
            ++controls;
        }
    EXPECT_EQ(controls, 2);
}

TEST(Commands, ExtensionsFlagTooFewAntennas) {
    const auto tables = cmd_extensions(quick_config());
    const auto& b = tables[1];
    const auto n = column(b, "n_antennas"), feas = column(b, "sdma_feasible"), order = column(b, "ordering_holds");
    for (const auto& row : b.rows) {
        EXPECT_EQ(std::get<bool>(row[feas]), num(row[n]) >= 3.0);
        EXPECT_TRUE(std::get<bool>(row[order]));
    }
}

TEST(Commands, GridBestPicksHighestMean) {
    const std::vector<GridPoint> grid{{0.5, 0.1, 1, 0.6, 0, 0}, {0.5, 0.1, 2, 0.8, 0, 0},
                                      {0.5, 0.3, 1, 0.9, 0, 0}, {0.5, 0.3, 2, 0.4, 0, 0},
                                      {1.0, 0.1, 1, 0.2, 0, 0}};
    const auto best = best_over_g_th(grid);
    ASSERT_EQ(best.size(), 2u);
    EXPECT_EQ(best[0].best_g_th, 0.1);
    EXPECT_NEAR(best[0].mean_accuracy, 0.7, 1e-15);
    EXPECT_EQ(best[1].r_in_ratio, 1.0);
    EXPECT_EQ(median({3.0, 1.0, 2.0, 10.0}), 2.5);
}
