#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "baa/analytics.hpp"
#include "baa/errors.hpp"
#include "baa/extensions.hpp"
#include "baa/format.hpp"
#include "baa/learning.hpp"
#include "baa/montecarlo.hpp"
#include "baa/network.hpp"
#include "baa/params.hpp"
#include "baa/phy.hpp"
#include "baa/random.hpp"

namespace baa::cli {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::string_view kToolVersion = "1.0.0";

struct DataConfig {
    std::string source = "synthetic";  ///< synthetic | mnist
    std::string images, labels, test_images, test_labels;
    std::size_t n_train = 2000;
    std::size_t n_test = 2000;
    std::size_t dim = 20;
    int classes = 10;
    double separation = 3.0;
    std::uint64_t seed = 11;  ///< the test set uses seed + 1
};

struct TradeoffConfig {
    std::vector<double> alphas{2.5, 3.0, 3.5};
    std::vector<double> r_max{50.0, 100.0};
    std::size_t zeta_points = 99;
    std::size_t f_points = 100;
};

struct MonteCarloConfig {
    std::vector<double> k_values{5, 20};
    std::vector<double> r_in_ratios{0.3, 0.5, 0.8};
    std::vector<double> snr_k_values{10, 20};
    double interior_ratio = 0.5;
    std::int64_t n_cr = 20;
    std::vector<double> g_th_values{0.2, 0.5, 1.0};
    double wrong_alpha = 3.5;
};

struct LatencyConfig {
    std::vector<double> k_values{16, 32, 64, 128, 200, 256, 512, 1024};
    std::vector<double> q_values{4, 8, 16, 24, 32};
    std::vector<double> ber_values{1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
    std::vector<double> r_max_values{25, 50, 75, 100};
};

struct TrainGridConfig {
    bool enabled = false;
    std::vector<double> r_in_ratios{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    std::vector<double> g_th_values{1.0};
    std::size_t seeds = 1;
};

struct ExtensionsConfig {
    std::vector<double> gammas{1, 4, 16, 64};
    std::size_t trials = 10000;
    std::size_t devices = 2;
    std::size_t symbols = 64;
    double adversary_power = 1.0;
    std::size_t instances = 20;
    std::vector<double> antennas{2, 4, 8};
    std::size_t users = 3;
    std::size_t pattern_points = 181;
};

struct ExperimentConfig {
    SystemParams system;
    ScenarioParams scenario;
    learning::TrainConfig train;
    learning::PartitionSpec partition{learning::PartitionMode::NoniidShards, 40, 50, 2};
    network::SchedulingScheme scheme;
    network::Mobility mobility = network::Mobility::Static;
    std::int64_t k_train = 20;
    std::uint64_t seed = 1;
    std::size_t trials = 100000;
    std::string output_path = "out";
    double n0_dbm = -80.0;

    DataConfig data;
    TradeoffConfig tradeoff;
    MonteCarloConfig montecarlo;
    LatencyConfig latency;
    TrainGridConfig grid;
    ExtensionsConfig extensions;

    void validate() const;
};

// ---------------------------------------------------------------------------
// Value parsing

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out))
        throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
    return out;
}

inline std::int64_t parse_int(const std::string& key, const std::string& v) {
    std::int64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
    return out;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw ConfigError("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
    return out;
}

inline std::size_t parse_count(const std::string& key, const std::string& v) {
    return static_cast<std::size_t>(parse_uint(key, v));
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: '" + key + "' expects true or false, got '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
    if (out.empty()) throw ConfigError("config: '" + key + "' expects a comma-separated list");
    return out;
}

inline std::string fmt_list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += fmt_double(v[i]);
    }
    return out;
}

inline learning::Aggregation parse_aggregation(const std::string& key, const std::string& v) {
    if (v == "ideal") return learning::Aggregation::Ideal;
    if (v == "baa") return learning::Aggregation::Baa;
    if (v == "digital") return learning::Aggregation::Digital;
    throw ConfigError("config: '" + key + "' expects ideal|baa|digital, got '" + v + "'");
}

inline network::SchemeKind parse_scheme(const std::string& key, const std::string& v) {
    if (v == "all_inclusive") return network::SchemeKind::AllInclusive;
    if (v == "cell_interior") return network::SchemeKind::CellInterior;
    if (v == "alternating") return network::SchemeKind::Alternating;
    throw ConfigError("config: '" + key + "' expects all_inclusive|cell_interior|alternating, got '" + v + "'");
}

inline network::Mobility parse_mobility(const std::string& key, const std::string& v) {
    if (v == "static") return network::Mobility::Static;
    if (v == "iid") return network::Mobility::IidResample;
    throw ConfigError("config: '" + key + "' expects static|iid, got '" + v + "'");
}

inline learning::PartitionMode parse_partition(const std::string& key, const std::string& v) {
    if (v == "iid") return learning::PartitionMode::Iid;
    if (v == "noniid") return learning::PartitionMode::NoniidShards;
    throw ConfigError("config: '" + key + "' expects iid|noniid, got '" + v + "'");
}

inline std::string scheme_name(network::SchemeKind k) {
    switch (k) {
        case network::SchemeKind::AllInclusive: return "all_inclusive";
        case network::SchemeKind::CellInterior: return "cell_interior";
        case network::SchemeKind::Alternating: return "alternating";
    }
    return "?";
}

struct KeySpec {
    std::string_view key;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

#define BAA_KEY(name, field, parse, show)                                                          \
    KeySpec {                                                                                    \
        name, [](ExperimentConfig& c, const std::string& v) { c.field = parse(std::string(name), v); }, \
            [](const ExperimentConfig& c) { return show(c.field); }                              \
    }

inline std::string show_int(std::int64_t v) { return std::to_string(v); }
inline std::string show_uint(std::uint64_t v) { return std::to_string(v); }
inline std::string show_bool(bool v) { return v ? "true" : "false"; }
inline std::string show_str(const std::string& v) { return v; }
inline std::string take_str(const std::string&, const std::string& v) { return v; }
inline int parse_int32(const std::string& key, const std::string& v) { return static_cast<int>(parse_int(key, v)); }

inline const std::vector<KeySpec>& key_table() {
    static const std::vector<KeySpec> table = {
        BAA_KEY("seed", seed, parse_uint, show_uint),
        BAA_KEY("trials", trials, parse_count, show_uint),
        BAA_KEY("output", output_path, take_str, show_str),

        BAA_KEY("system.p0_w", system.p0, parse_double, fmt_double),
        BAA_KEY("system.subchannels", system.m, parse_int, show_int),
        BAA_KEY("system.bandwidth_hz", system.b, parse_double, fmt_double),
        BAA_KEY("system.alpha", system.alpha, parse_double, fmt_double),
        BAA_KEY("system.r_cell_m", system.r_cell, parse_double, fmt_double),
        BAA_KEY("system.g_th", system.g_th, parse_double, fmt_double),
        BAA_KEY("system.n0_dbm", n0_dbm, parse_double, fmt_double),
        BAA_KEY("system.q_bits", system.q_bits, parse_int32, show_int),
        BAA_KEY("system.ber", system.ber, parse_double, fmt_double),

        BAA_KEY("scenario.k_devices", scenario.k_devices, parse_int, show_int),
        BAA_KEY("scenario.r_in_m", scenario.r_in, parse_double, fmt_double),
        BAA_KEY("scenario.n_cr", scenario.n_cr, parse_int, show_int),
        BAA_KEY("scenario.q_dim", scenario.q_dim, parse_int, show_int),

        BAA_KEY("train.eta", train.eta, parse_double, fmt_double),
        BAA_KEY("train.tau", train.tau, parse_int32, show_int),
        BAA_KEY("train.rounds", train.n_cr, parse_int, show_int),
        BAA_KEY("train.batch_size", train.batch_size, parse_count, show_uint),
        KeySpec{"train.aggregation",
                [](ExperimentConfig& c, const std::string& v) { c.train.aggregation = parse_aggregation("train.aggregation", v); },
                [](const ExperimentConfig& c) { return std::string(learning::to_string(c.train.aggregation)); }},
        BAA_KEY("train.k_devices", k_train, parse_int, show_int),
        KeySpec{"train.mobility",
                [](ExperimentConfig& c, const std::string& v) { c.mobility = parse_mobility("train.mobility", v); },
                [](const ExperimentConfig& c) {
                    return std::string(c.mobility == network::Mobility::Static ? "static" : "iid");
                }},
        BAA_KEY("train.grid", grid.enabled, parse_bool, show_bool),
        BAA_KEY("train.grid_r_in_ratios", grid.r_in_ratios, parse_list, fmt_list),
        BAA_KEY("train.grid_g_th", grid.g_th_values, parse_list, fmt_list),
        BAA_KEY("train.seeds", grid.seeds, parse_count, show_uint),

        KeySpec{"partition.mode",
                [](ExperimentConfig& c, const std::string& v) { c.partition.mode = parse_partition("partition.mode", v); },
                [](const ExperimentConfig& c) {
                    return std::string(c.partition.mode == learning::PartitionMode::Iid ? "iid" : "noniid");
                }},
        BAA_KEY("partition.shards_total", partition.shards_total, parse_count, show_uint),
        BAA_KEY("partition.shard_size", partition.shard_size, parse_count, show_uint),
        BAA_KEY("partition.shards_per_device", partition.shards_per_device, parse_count, show_uint),

        KeySpec{"scheme.kind", [](ExperimentConfig& c, const std::string& v) { c.scheme.kind = parse_scheme("scheme.kind", v); },
                [](const ExperimentConfig& c) { return scheme_name(c.scheme.kind); }},
        BAA_KEY("scheme.r_in_m", scheme.r_in, parse_double, fmt_double),
        BAA_KEY("scheme.period", scheme.period, parse_int, show_int),

        BAA_KEY("data.source", data.source, take_str, show_str),
        BAA_KEY("data.images", data.images, take_str, show_str),
        BAA_KEY("data.labels", data.labels, take_str, show_str),
        BAA_KEY("data.test_images", data.test_images, take_str, show_str),
        BAA_KEY("data.test_labels", data.test_labels, take_str, show_str),
        BAA_KEY("data.n_train", data.n_train, parse_count, show_uint),
        BAA_KEY("data.n_test", data.n_test, parse_count, show_uint),
        BAA_KEY("data.dim", data.dim, parse_count, show_uint),
        BAA_KEY("data.classes", data.classes, parse_int32, show_int),
        BAA_KEY("data.separation", data.separation, parse_double, fmt_double),
        BAA_KEY("data.seed", data.seed, parse_uint, show_uint),

        BAA_KEY("tradeoff.alphas", tradeoff.alphas, parse_list, fmt_list),
        BAA_KEY("tradeoff.r_max_m", tradeoff.r_max, parse_list, fmt_list),
        BAA_KEY("tradeoff.zeta_points", tradeoff.zeta_points, parse_count, show_uint),
        BAA_KEY("tradeoff.f_points", tradeoff.f_points, parse_count, show_uint),

        BAA_KEY("montecarlo.k_values", montecarlo.k_values, parse_list, fmt_list),
        BAA_KEY("montecarlo.r_in_ratios", montecarlo.r_in_ratios, parse_list, fmt_list),
        BAA_KEY("montecarlo.snr_k_values", montecarlo.snr_k_values, parse_list, fmt_list),
        BAA_KEY("montecarlo.interior_ratio", montecarlo.interior_ratio, parse_double, fmt_double),
        BAA_KEY("montecarlo.n_cr", montecarlo.n_cr, parse_int, show_int),
        BAA_KEY("montecarlo.g_th_values", montecarlo.g_th_values, parse_list, fmt_list),
        BAA_KEY("montecarlo.wrong_alpha", montecarlo.wrong_alpha, parse_double, fmt_double),

        BAA_KEY("latency.k_values", latency.k_values, parse_list, fmt_list),
        BAA_KEY("latency.q_values", latency.q_values, parse_list, fmt_list),
        BAA_KEY("latency.ber_values", latency.ber_values, parse_list, fmt_list),
        BAA_KEY("latency.r_max_m_values", latency.r_max_values, parse_list, fmt_list),

        BAA_KEY("extensions.gammas", extensions.gammas, parse_list, fmt_list),
        BAA_KEY("extensions.trials", extensions.trials, parse_count, show_uint),
        BAA_KEY("extensions.devices", extensions.devices, parse_count, show_uint),
        BAA_KEY("extensions.symbols", extensions.symbols, parse_count, show_uint),
        BAA_KEY("extensions.adversary_power", extensions.adversary_power, parse_double, fmt_double),
        BAA_KEY("extensions.instances", extensions.instances, parse_count, show_uint),
        BAA_KEY("extensions.antennas", extensions.antennas, parse_list, fmt_list),
        BAA_KEY("extensions.users", extensions.users, parse_count, show_uint),
        BAA_KEY("extensions.pattern_points", extensions.pattern_points, parse_count, show_uint),
    };
    return table;
}

#undef BAA_KEY

inline bool is_integer_list(const std::vector<double>& v, double min_value) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x >= min_value && x == std::floor(x); });
}

}  // namespace detail

inline void ExperimentConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
    try {
        system.validate();
        scenario.validate(system.r_cell);
        train.validate();
    } catch (const DomainError& e) {
        fail(e.what());
    }
    if (system.ber >= 0.2) fail("system.ber must be < 0.2 for the MQAM gap approximation");
    if (k_train < 1) fail("train.k_devices must be >= 1");
    if (trials < 1) fail("trials must be >= 1");
    if (scheme.kind != network::SchemeKind::AllInclusive && !(scheme.r_in > 0.0 && scheme.r_in <= system.r_cell))
        fail("scheme.r_in_m must lie in (0, system.r_cell_m]");
    if (scheme.period < 1) fail("scheme.period must be >= 1");
    if (data.source != "synthetic" && data.source != "mnist") fail("data.source must be synthetic or mnist");
    if (data.source == "mnist" && (data.images.empty() || data.labels.empty() || data.test_images.empty() ||
                                   data.test_labels.empty()))
        fail("data.source = mnist needs data.images, data.labels, data.test_images and data.test_labels");
    if (data.n_train < 1 || data.n_test < 1 || data.dim < 1 || data.classes < 2) fail("data sizes are invalid");
    for (double a : tradeoff.alphas)
        if (!(a > 0.0)) fail("tradeoff.alphas must be > 0");
    for (double r : tradeoff.r_max)
        if (!(r > 0.0)) fail("tradeoff.r_max_m must be > 0");
    if (tradeoff.zeta_points < 2 || tradeoff.f_points < 2) fail("tradeoff grids need >= 2 points");
    if (!detail::is_integer_list(montecarlo.k_values, 1) || !detail::is_integer_list(montecarlo.snr_k_values, 1))
        fail("montecarlo K values must be positive integers");
    for (double r : montecarlo.r_in_ratios)
        if (!(r > 0.0 && r <= 1.0)) fail("montecarlo.r_in_ratios must lie in (0, 1]");
    if (!(montecarlo.interior_ratio > 0.0 && montecarlo.interior_ratio <= 1.0))
        fail("montecarlo.interior_ratio must lie in (0, 1]");
    for (double g : montecarlo.g_th_values)
        if (!(g > 0.0)) fail("montecarlo.g_th_values must be > 0");
    if (!detail::is_integer_list(latency.k_values, 1) || !detail::is_integer_list(latency.q_values, 1))
        fail("latency K and Q values must be positive integers");
    for (double b : latency.ber_values)
        if (!(b > 0.0 && b < 0.2)) fail("latency.ber_values must lie in (0, 0.2)");
    for (double r : latency.r_max_values)
        if (!(r > 0.0)) fail("latency.r_max_m_values must be > 0");
    for (double r : grid.r_in_ratios)
        if (!(r > 0.0 && r <= 1.0)) fail("train.grid_r_in_ratios must lie in (0, 1]");
    for (double g : grid.g_th_values)
        if (!(g > 0.0)) fail("train.grid_g_th must be > 0");
    if (grid.seeds < 1) fail("train.seeds must be >= 1");
    if (!detail::is_integer_list(extensions.gammas, 1)) fail("extensions.gammas must be positive integers");
    if (!detail::is_integer_list(extensions.antennas, 1)) fail("extensions.antennas must be positive integers");
    if (extensions.trials < 1 || extensions.devices < 1 || extensions.symbols < 1 || extensions.users < 1 ||
        extensions.instances < 1)
        fail("extensions counts must be >= 1");
}

/// Apply one key=value assignment. Unknown keys are rejected.
inline void set_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& spec : detail::key_table()) {
        if (spec.key == key) {
            spec.set(cfg, value);
            if (key == "system.n0_dbm") cfg.system.n0 = dbm_to_watts(cfg.n0_dbm);
            return;
        }
    }
    throw ConfigError("config: unknown key '" + key + "'");
}

/// Parse flat `key = value` text. `#` starts a comment; `[section]` headers
/// prefix the keys that follow with `section.`.
inline ExperimentConfig parse_config(std::string_view text, ExperimentConfig cfg = {}) {
    std::istringstream in{std::string(text)};
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigError("config line " + std::to_string(line_no) + ": malformed section");
            section = detail::trim(std::string_view(t).substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        std::string key = detail::trim(std::string_view(t).substr(0, eq));
        const std::string value = detail::trim(std::string_view(t).substr(eq + 1));
        if (!section.empty()) key = section + "." + key;
        try {
            set_value(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// Every key with its current value, sorted; the basis of the config hash.
inline std::map<std::string, std::string> canonical_entries(const ExperimentConfig& cfg) {
    std::map<std::string, std::string> out;
    for (const auto& spec : detail::key_table()) out[std::string(spec.key)] = spec.get(cfg);
    return out;
}

inline std::string canonical_text(const ExperimentConfig& cfg) {
    std::string out;
    for (const auto& [k, v] : canonical_entries(cfg)) out += k + " = " + v + "\n";
    return out;
}

inline std::string config_hash(const ExperimentConfig& cfg) {
    // The output path does not change results, so it stays out of the hash.
    ExperimentConfig c = cfg;
    c.output_path.clear();
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_text(c))));
    return buf;
}

// ---------------------------------------------------------------------------
// Result tables

using Cell = std::variant<std::int64_t, double, std::string, bool>;

struct ResultTable {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row) {
        if (row.size() != columns.size()) throw DomainError("ResultTable '" + name + "': row width mismatch");
        rows.push_back(std::move(row));
    }
};

inline Cell cell(int v) { return static_cast<std::int64_t>(v); }
inline Cell cell(std::int64_t v) { return v; }
inline Cell cell(std::size_t v) { return static_cast<std::int64_t>(v); }
inline Cell cell(std::uint64_t v, int) { return std::to_string(v); }
inline Cell cell(double v) { return v; }
inline Cell cell(bool v) { return v; }
inline Cell cell(std::string v) { return v; }
inline Cell cell(const char* v) { return std::string(v); }
inline Cell cell(std::string_view v) { return std::string(v); }

inline std::string cell_text(const Cell& c) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(v);
            else if constexpr (std::is_same_v<T, double>) return fmt_double(v);
            else if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
            else {
                if (v.find_first_of(",\"\n") == std::string::npos) return v;
                std::string q = "\"";
                for (char ch : v) {
                    if (ch == '"') q += '"';
                    q += ch;
                }
                return q + "\"";
            }
        },
        c);
}

inline void write_csv(std::ostream& os, const ResultTable& t) {
    for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
    os << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << cell_text(row[i]);
        os << '\n';
    }
}

inline nlohmann::ordered_json cell_json(const Cell& c) {
    return std::visit(
        [](const auto& v) -> nlohmann::ordered_json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) {
                if (!std::isfinite(v)) return nullptr;
                return v;
            } else {
                return v;
            }
        },
        c);
}

inline void write_json(std::ostream& os, const ResultTable& t, std::string_view experiment) {
    nlohmann::ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["experiment"] = experiment;
    j["table"] = t.name;
    j["columns"] = t.columns;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& row : t.rows) {
        nlohmann::ordered_json r;
        for (std::size_t i = 0; i < row.size(); ++i) r[t.columns[i]] = cell_json(row[i]);
        rows.push_back(std::move(r));
    }
    j["rows"] = std::move(rows);
    os << j.dump(2) << '\n';
}

enum class OutputFormat { Csv, Json };

/// Write every table plus `<experiment>.manifest.json` into the output directory.
/// Returns the written file names.
inline std::vector<std::string> write_results(const std::string& experiment, const std::vector<ResultTable>& tables,
                                              const ExperimentConfig& cfg, OutputFormat fmt) {
    namespace fs = std::filesystem;
    const fs::path dir = cfg.output_path.empty() ? fs::path(".") : fs::path(cfg.output_path);
    fs::create_directories(dir);
    std::vector<std::string> files;
    for (const auto& t : tables) {
        const std::string name = experiment + "_" + t.name + (fmt == OutputFormat::Csv ? ".csv" : ".json");
        std::ofstream os(dir / name, std::ios::binary);
        if (!os) throw ConfigError("cannot write '" + (dir / name).string() + "'");
        if (fmt == OutputFormat::Csv) write_csv(os, t);
        else write_json(os, t, experiment);
        files.push_back(name);
    }
    nlohmann::ordered_json m;
    m["experiment"] = experiment;
    m["schema_version"] = kSchemaVersion;
    m["tool_version"] = kToolVersion;
    m["seed"] = cfg.seed;
    m["config_hash"] = config_hash(cfg);
    nlohmann::ordered_json conf;
    for (const auto& [k, v] : canonical_entries(cfg))
        if (k != "output") conf[k] = v;
    m["config"] = std::move(conf);
    m["outputs"] = files;
    const std::string manifest = experiment + ".manifest.json";
    std::ofstream os(dir / manifest, std::ios::binary);
    os << m.dump(2) << '\n';
    files.push_back(manifest);
    return files;
}

// ---------------------------------------------------------------------------
// tradeoff

inline std::vector<double> open_unit_grid(std::size_t points) {
    std::vector<double> g(points);
    for (std::size_t i = 0; i < points; ++i) g[i] = static_cast<double>(i + 1) / static_cast<double>(points + 1);
    return g;
}

inline std::vector<ResultTable> cmd_tradeoff(const ExperimentConfig& cfg) {
    const auto seed = cell(cfg.seed, 0);
    ResultTable snr{"snr_truncation", {"seed", "alpha", "r_max_m", "zeta", "g_th", "snr_linear", "snr_db"}, {}};
    const auto zetas = open_unit_grid(cfg.tradeoff.zeta_points);
    for (double alpha : cfg.tradeoff.alphas) {
        for (double r_max : cfg.tradeoff.r_max) {
            SystemParams p = cfg.system;
            p.alpha = alpha;
            for (const auto& pt : analytics::snr_truncation_curve(p, r_max, zetas).points)
                snr.add({seed, alpha, r_max, pt.x, analytics::threshold_for_truncation(pt.x), pt.y, linear_to_db(pt.y)});
        }
    }

    ResultTable gain{"reliability_quantity",
                     {"seed", "alpha", "k_devices", "f_dat", "r_in_m", "prefactor_a", "gain_linear", "gain_db"}, {}};
    std::vector<double> fs(cfg.tradeoff.f_points);
    for (std::size_t i = 0; i < fs.size(); ++i) fs[i] = static_cast<double>(i + 1) / static_cast<double>(fs.size());
    for (double alpha : cfg.tradeoff.alphas) {
        SystemParams p = cfg.system;
        p.alpha = alpha;
        if (2.0 * static_cast<double>(cfg.scenario.k_devices) - alpha - 1.0 < 0.0) continue;
        for (const auto& pt : analytics::reliability_quantity_curve(p, cfg.scenario.k_devices, fs).points) {
            ScenarioParams s = cfg.scenario;
            s.r_in = std::min(p.r_cell, p.r_cell * std::sqrt(pt.x));
            gain.add({seed, alpha, cfg.scenario.k_devices, pt.x, s.r_in, analytics::snr_gain_prefactor(p, s), pt.y,
                      linear_to_db(pt.y)});
        }
    }
    return {snr, gain};
}

// ---------------------------------------------------------------------------
// montecarlo

struct CheckRow {
    std::string check;
    std::int64_t k_devices = 0;
    double parameter = 0.0;  ///< R_in/R, g_th or alpha depending on the check
    double analytic = 0.0;
    double empirical = 0.0;
    double error = 0.0;
    double tolerance = 0.0;
    bool expect_pass = true;
    bool pass = false;
};

inline double rel_error(double analytic, double empirical) { return std::abs(empirical - analytic) / std::abs(analytic); }

/// Analytic-versus-simulated checks of the distribution, SNR, coverage and truncation laws.
inline std::vector<CheckRow> validation_checks(const ExperimentConfig& cfg) {
    std::vector<CheckRow> rows;
    const auto& mc = cfg.montecarlo;
    const SystemParams& p = cfg.system;
    const std::size_t n = cfg.trials;
    const double r = p.r_cell;

    for (double kd : mc.k_values) {
        const auto k = static_cast<std::int64_t>(kd);
        for (double ratio : mc.r_in_ratios) {
            const auto emp = network::empirical_k_in(k, ratio * r, r, n, cfg.seed);
            const auto law = analytics::k_in_distribution(k, ratio * r, r);
            const double tv = network::total_variation(emp, law);
            rows.push_back({"k_in_distribution_tv", k, ratio, 0.0, tv, tv, 0.01, true, tv < 0.01});
        }
        const double mean = analytics::max_distance_moments(k, r).mean();
        const double emp = network::empirical_mean_max_distance(k, r, n, cfg.seed);
        const double e = rel_error(mean, emp);
        rows.push_back({"mean_max_distance", k, 1.0, mean, emp, e, 0.005, true, e < 0.005});
    }

    for (double kd : mc.snr_k_values) {
        const auto k = static_cast<std::int64_t>(kd);
        const double ana = analytics::expected_snr_all_inclusive(p, k);
        const double emp = network::empirical_snr_all_inclusive(p, k, n, cfg.seed);
        const double e = rel_error(ana, emp);
        rows.push_back({"snr_all_inclusive", k, 1.0, ana, emp, e, 0.02, true, e < 0.02});

        ScenarioParams s = cfg.scenario;
        s.k_devices = k;
        s.r_in = mc.interior_ratio * r;
        const auto ci = analytics::expected_snr_cell_interior(p, s);
        const auto est = network::empirical_snr_cell_interior(p, s, n, cfg.seed);
        const double e2 = rel_error(ci.snr, est.mean_with_zeros);
        rows.push_back({"snr_cell_interior", k, mc.interior_ratio, ci.snr, est.mean_with_zeros, e2, 0.03, true, e2 < 0.03});
        rows.push_back({"interior_factor_c", k, mc.interior_ratio, ci.c_factor, ci.c_factor, 0.0, 0.0, true,
                        ci.within_alpha3_bound});

        // Negative control: closed form at the configured alpha against a network simulated at another alpha.
        SystemParams wrong = p;
        wrong.alpha = mc.wrong_alpha;
        const double emp_wrong = network::empirical_snr_all_inclusive(wrong, k, n, cfg.seed);
        const double ew = rel_error(ana, emp_wrong);
        rows.push_back({"negative_control_wrong_alpha", k, mc.wrong_alpha, ana, emp_wrong, ew, 0.02, false, ew < 0.02});
    }

    {
        const auto k = static_cast<std::int64_t>(mc.k_values.back());
        const double ratio = mc.interior_ratio;
        const double p_in = analytics::fraction_exploited(ratio * r, r);
        const auto ana = analytics::p_all_exploited(k, mc.n_cr, p_in);
        const std::size_t runs = std::max<std::size_t>(1, n / 10);
        const double emp = network::empirical_all_exploited(k, ratio * r, r, mc.n_cr, runs, cfg.seed);
        const double e = std::abs(emp - ana.exact);
        rows.push_back({"all_devices_exploited", k, ratio, ana.exact, emp, e, 0.01, true, e < 0.01});
    }

    for (double g : mc.g_th_values) {
        const double zeta = analytics::truncation_ratio(g);
        const auto hits = parallel_trials(n, [&](std::size_t t) {
            Rng rng(cfg.seed, t, "mc.truncation");
            return std::norm(rng.complex_normal(1.0)) < g ? 1.0 : 0.0;
        });
        const double emp = network::mean_of(hits);
        const double e = std::abs(emp - zeta);
        rows.push_back({"truncation_ratio", 1, g, zeta, emp, e, 0.005, true, e < 0.005});
    }
    return rows;
}

inline std::vector<ResultTable> cmd_montecarlo(const ExperimentConfig& cfg) {
    ResultTable t{"validation",
                  {"seed", "trials", "check", "k_devices", "parameter", "analytic", "empirical", "error", "tolerance",
                   "expect_pass", "pass"},
                  {}};
    for (const auto& r : validation_checks(cfg))
        t.add({cell(cfg.seed, 0), cell(cfg.trials), r.check, r.k_devices, r.parameter, r.analytic, r.empirical, r.error,
               r.tolerance, r.expect_pass, r.pass});
    return {t};
}

// ---------------------------------------------------------------------------
// latency

inline std::vector<ResultTable> cmd_latency(const ExperimentConfig& cfg) {
    ResultTable t{"latency",
                  {"seed", "sweep", "k_devices", "q_bits", "ber", "r_max_m", "t_ana_s", "t_dig_s", "gamma",
                   "gamma_log2k_over_k"},
                  {}};
    auto row = [&](const char* sweep, std::int64_t k, int q, double ber, double r_max) {
        SystemParams p = cfg.system;
        p.q_bits = q;
        p.ber = ber;
        ScenarioParams s = cfg.scenario;
        s.k_devices = k;
        const double t_ana = analytics::latency_baa(s.q_dim, p);
        const double t_dig = analytics::latency_digital(p, s, r_max);
        const double gamma = t_dig / t_ana;
        const double kd = static_cast<double>(k);
        t.add({cell(cfg.seed, 0), sweep, k, q, ber, r_max, t_ana, t_dig, gamma, gamma * std::log2(kd) / kd});
    };
    const double r_max = cfg.system.r_cell;
    for (double k : cfg.latency.k_values) row("k_devices", static_cast<std::int64_t>(k), cfg.system.q_bits, cfg.system.ber, r_max);
    for (double q : cfg.latency.q_values) row("q_bits", cfg.scenario.k_devices, static_cast<int>(q), cfg.system.ber, r_max);
    for (double b : cfg.latency.ber_values) row("ber", cfg.scenario.k_devices, cfg.system.q_bits, b, r_max);
    for (double r : cfg.latency.r_max_values) row("r_max", cfg.scenario.k_devices, cfg.system.q_bits, cfg.system.ber, r);
    return {t};
}

// ---------------------------------------------------------------------------
// train / compare

struct Datasets {
    learning::LabeledDataset train;
    learning::LabeledDataset test;
};

inline Datasets load_datasets(const DataConfig& d) {
    if (d.source == "mnist") {
        auto train = learning::load_mnist_idx(d.images, d.labels);
        auto test = learning::load_mnist_idx(d.test_images, d.test_labels);
        return {learning::head(train, d.n_train), learning::head(test, d.n_test)};
    }
    return {learning::synth_gaussian_mixture(d.classes, d.dim, d.n_train, d.seed, d.separation),
            learning::synth_gaussian_mixture(d.classes, d.dim, d.n_test, d.seed + 1, d.separation)};
}

inline learning::FederatedSetup make_setup(const ExperimentConfig& cfg) {
    learning::FederatedSetup s;
    s.partition = cfg.partition;
    s.train = cfg.train;
    s.system = cfg.system;
    s.scheme = cfg.scheme;
    s.mobility = cfg.mobility;
    s.k_devices = cfg.k_train;
    s.seed = cfg.seed;
    return s;
}

/// Cell-interior scheduling at R_in = ratio R; ratio 1 schedules the whole cell.
inline network::SchedulingScheme interior_at(double ratio, double r_cell) {
    return ratio >= 1.0 ? network::SchedulingScheme::all_inclusive()
                        : network::SchedulingScheme::cell_interior(ratio * r_cell);
}

inline const std::vector<std::string>& trace_columns() {
    static const std::vector<std::string> cols = {"seed", "run_seed", "scheme", "aggregation", "r_in_m", "g_th",
                                                  "round", "accuracy", "test_loss", "latency_s", "rho0_db",
                                                  "truncation_frac", "scheduled", "skipped"};
    return cols;
}

inline void append_trace(ResultTable& t, const ExperimentConfig& cfg, const learning::FederatedSetup& s,
                         const learning::TrainResult& r) {
    for (const auto& rec : r.trace)
        t.add({cell(cfg.seed, 0), cell(s.seed, 0), detail::scheme_name(s.scheme.kind),
               std::string(learning::to_string(s.train.aggregation)),
               s.scheme.kind == network::SchemeKind::AllInclusive ? s.system.r_cell : s.scheme.r_in, s.system.g_th,
               rec.round, rec.accuracy, rec.loss, rec.latency_s, rec.rho0_db, rec.truncation_frac, rec.scheduled,
               rec.skipped});
}

inline double total_latency(const learning::TrainResult& r) {
    double t = 0.0;
    for (const auto& rec : r.trace) t += rec.latency_s;
    return t;
}

struct GridPoint {
    double r_in_ratio = 0.0;
    double g_th = 0.0;
    std::uint64_t run_seed = 0;
    double final_accuracy = 0.0;
    double final_loss = 0.0;
    double latency_s = 0.0;
};

/// Final accuracy over an R_in/R by g_th grid, repeated over run seeds seed, seed+1, ...
inline std::vector<GridPoint> r_in_grid(const Datasets& data, const learning::FederatedSetup& base,
                                        const std::vector<double>& ratios, const std::vector<double>& g_values,
                                        std::size_t seeds) {
    std::vector<GridPoint> jobs;
    for (double ratio : ratios)
        for (double g : g_values)
            for (std::size_t i = 0; i < seeds; ++i) jobs.push_back({ratio, g, base.seed + i, 0, 0, 0});
    return parallel_trials(jobs.size(), [&](std::size_t j) {
        GridPoint gp = jobs[j];
        learning::FederatedSetup s = base;
        s.scheme = interior_at(gp.r_in_ratio, s.system.r_cell);
        s.system.g_th = gp.g_th;
        s.seed = gp.run_seed;
        const auto r = learning::federated_train(data.train, data.test, s);
        gp.final_accuracy = r.trace.back().accuracy;
        gp.final_loss = r.trace.back().loss;
        gp.latency_s = total_latency(r);
        return gp;
    });
}

struct RatioSummary {
    double r_in_ratio = 0.0;
    double best_g_th = 0.0;
    double mean_accuracy = 0.0;
};

/// Per R_in/R: the g_th with the highest seed-averaged final accuracy.
inline std::vector<RatioSummary> best_over_g_th(const std::vector<GridPoint>& grid) {
    std::map<std::pair<double, double>, std::pair<double, int>> acc;
    for (const auto& g : grid) {
        auto& a = acc[{g.r_in_ratio, g.g_th}];
        a.first += g.final_accuracy;
        a.second += 1;
    }
    std::map<double, RatioSummary> best;
    for (const auto& [key, v] : acc) {
        const double mean = v.first / v.second;
        auto it = best.find(key.first);
        if (it == best.end() || mean > it->second.mean_accuracy) best[key.first] = {key.first, key.second, mean};
    }
    std::vector<RatioSummary> out;
    for (const auto& [ratio, s] : best) out.push_back(s);
    return out;
}

inline std::vector<ResultTable> cmd_train(const ExperimentConfig& cfg) {
    const auto data = load_datasets(cfg.data);
    const auto base = make_setup(cfg);
    if (!cfg.grid.enabled) {
        ResultTable t{"trace", trace_columns(), {}};
        append_trace(t, cfg, base, learning::federated_train(data.train, data.test, base));
        return {t};
    }
    const auto grid = r_in_grid(data, base, cfg.grid.r_in_ratios, cfg.grid.g_th_values, cfg.grid.seeds);
    ResultTable g{"grid", {"seed", "run_seed", "r_in_ratio", "g_th", "final_accuracy", "final_test_loss", "total_latency_s"}, {}};
    for (const auto& gp : grid)
        g.add({cell(cfg.seed, 0), cell(gp.run_seed, 0), gp.r_in_ratio, gp.g_th, gp.final_accuracy, gp.final_loss,
               gp.latency_s});
    ResultTable b{"grid_best", {"seed", "r_in_ratio", "best_g_th", "mean_final_accuracy"}, {}};
    for (const auto& s : best_over_g_th(grid)) b.add({cell(cfg.seed, 0), s.r_in_ratio, s.best_g_th, s.mean_accuracy});
    return {g, b};
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw DomainError("median of an empty set");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::vector<ResultTable> cmd_compare(const ExperimentConfig& cfg) {
    if (!(cfg.scheme.r_in > 0.0 && cfg.scheme.r_in <= cfg.system.r_cell))
        throw ConfigError("config: compare needs scheme.r_in_m in (0, system.r_cell_m]");
    const auto data = load_datasets(cfg.data);
    const auto base = make_setup(cfg);
    ResultTable trace{"trace", trace_columns(), {}};
    ResultTable summary{"summary",
                        {"seed", "run_seed", "comparison", "scheme", "aggregation", "final_accuracy", "total_latency_s"},
                        {}};

    struct Job {
        std::string comparison;
        learning::FederatedSetup setup;
    };
    std::vector<Job> jobs;
    for (std::size_t i = 0; i < cfg.grid.seeds; ++i) {
        for (auto agg : {learning::Aggregation::Ideal, learning::Aggregation::Baa, learning::Aggregation::Digital}) {
            auto s = base;
            s.seed = base.seed + i;
            s.train.aggregation = agg;
            jobs.push_back({"aggregation", s});
        }
        for (auto kind : {network::SchemeKind::AllInclusive, network::SchemeKind::CellInterior,
                          network::SchemeKind::Alternating}) {
            auto s = base;
            s.seed = base.seed + i;
            s.train.aggregation = learning::Aggregation::Baa;
            s.scheme.kind = kind;
            jobs.push_back({"scheduling", s});
        }
    }
    const auto results = parallel_trials(jobs.size(), [&](std::size_t j) {
        return learning::federated_train(data.train, data.test, jobs[j].setup);
    });
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        const auto& s = jobs[j].setup;
        append_trace(trace, cfg, s, results[j]);
        summary.add({cell(cfg.seed, 0), cell(s.seed, 0), jobs[j].comparison, detail::scheme_name(s.scheme.kind),
                     std::string(learning::to_string(s.train.aggregation)), results[j].trace.back().accuracy,
                     total_latency(results[j])});
    }
    return {trace, summary};
}

// ---------------------------------------------------------------------------
// extensions

struct BeamComparison {
    std::size_t n_antennas = 0;
    std::size_t k_users = 0;
    double aggregation_objective = 0.0;
    double sdma_min_objective = 0.0;
    double sdma_max_objective = 0.0;
    double max_residual = 0.0;
    bool sdma_feasible = false;
    bool ordering_holds = true;  ///< aggregation objective >= every SDMA per-user objective
    std::string reason;
};

inline BeamComparison compare_beamformers(const extensions::BeamProblem& prob) {
    BeamComparison c;
    c.n_antennas = prob.n_antennas();
    c.k_users = prob.k_devices();
    c.aggregation_objective = extensions::aggregation_beamformer(prob).objective;
    const auto sdma = extensions::sdma_beamformer(prob);
    c.sdma_feasible = sdma.feasible;
    c.reason = sdma.reason;
    if (sdma.feasible) {
        c.sdma_min_objective = std::numeric_limits<double>::infinity();
        for (const auto& b : sdma.beams) {
            c.sdma_min_objective = std::min(c.sdma_min_objective, b.objective);
            c.sdma_max_objective = std::max(c.sdma_max_objective, b.objective);
            c.max_residual = std::max(c.max_residual, b.max_residual);
        }
        c.ordering_holds = c.aggregation_objective >= c.sdma_max_objective * (1.0 - 1e-12);
    }
    return c;
}

inline std::vector<ResultTable> cmd_extensions(const ExperimentConfig& cfg) {
    const auto& e = cfg.extensions;
    const auto seed = cell(cfg.seed, 0);
    ResultTable dsss{"dsss",
                     {"seed", "gamma", "trials", "devices", "adversary_power", "interference_unspread",
                      "interference_despread", "suppression_ratio", "max_aggregate_error", "symbols_plain",
                      "symbols_spread"},
                     {}};
    for (double g : e.gammas) {
        const auto s = extensions::suppression_experiment(static_cast<std::size_t>(g), e.adversary_power, e.devices,
                                                          e.symbols, e.trials, cfg.seed);
        dsss.add({seed, cell(s.gamma), cell(s.trials), cell(e.devices), e.adversary_power, s.mean_unspread, s.mean_despread, s.ratio,
                  s.max_aggregate_error, s.symbols_plain, s.symbols_spread});
    }

    ResultTable beams{"beamforming",
                      {"seed", "instance", "n_antennas", "k_users", "aggregation_objective", "sdma_min_objective",
                       "sdma_max_objective", "sdma_max_residual", "sdma_feasible", "ordering_holds", "reason"},
                      {}};
    for (std::size_t inst = 0; inst < e.instances; ++inst) {
        for (double nd : e.antennas) {
            Rng rng(cfg.seed, inst * 1009 + static_cast<std::size_t>(nd), "ext.beam");
            extensions::BeamProblem prob;
            prob.h_matrix = extensions::rayleigh_channels(static_cast<std::size_t>(nd), e.users, rng);
            prob.weak_set.resize(e.users);
            for (std::size_t k = 0; k < e.users; ++k) prob.weak_set[k] = k;
            prob.n0 = 1.0;
            const auto c = compare_beamformers(prob);
            beams.add({seed, cell(inst), cell(c.n_antennas), cell(c.k_users), c.aggregation_objective, c.sdma_min_objective,
                       c.sdma_max_objective, c.max_residual, c.sdma_feasible, c.ordering_holds, c.reason});
        }
    }

    // Line-of-sight pattern for three users at fixed bearings with the largest array.
    ResultTable pattern{"beam_pattern", {"seed", "beam", "angle_rad", "gain"}, {}};
    const auto n_max = static_cast<std::size_t>(*std::max_element(e.antennas.begin(), e.antennas.end()));
    const std::vector<double> bearings{-0.7, 0.15, 0.9};
    extensions::BeamProblem los;
    los.h_matrix = extensions::ula_channels(n_max, bearings);
    los.weak_set = {0, 1, 2};
    const auto agg = extensions::aggregation_beamformer(los);
    const auto sdma = extensions::sdma_beamformer(los);
    const std::size_t pts = std::max<std::size_t>(e.pattern_points, 2);
    for (std::size_t i = 0; i < pts; ++i) {
        const double th = -std::numbers::pi / 2 + std::numbers::pi * static_cast<double>(i) / static_cast<double>(pts - 1);
        pattern.add({seed, "aggregation", th, extensions::array_gain(agg.f.col(0), th)});
    }
    for (std::size_t k = 0; k < sdma.beams.size(); ++k) {
        if (!sdma.beams[k].f) continue;
        for (std::size_t i = 0; i < pts; ++i) {
            const double th =
                -std::numbers::pi / 2 + std::numbers::pi * static_cast<double>(i) / static_cast<double>(pts - 1);
            pattern.add({seed, "sdma_user" + std::to_string(k), th, extensions::array_gain(*sdma.beams[k].f, th)});
        }
    }
    return {dsss, beams, pattern};
}

// ---------------------------------------------------------------------------

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {"tradeoff", "montecarlo", "latency", "train", "compare", "extensions"};
    return names;
}

inline std::vector<ResultTable> run_command(const std::string& name, const ExperimentConfig& cfg) {
    if (name == "tradeoff") return cmd_tradeoff(cfg);
    if (name == "montecarlo") return cmd_montecarlo(cfg);
    if (name == "latency") return cmd_latency(cfg);
    if (name == "train") return cmd_train(cfg);
    if (name == "compare") return cmd_compare(cfg);
    if (name == "extensions") return cmd_extensions(cfg);
    throw ConfigError("unknown command '" + name + "'");
}

}  // namespace baa::cli
