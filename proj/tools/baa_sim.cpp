#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "baa/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Broadband analog aggregation simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials;
    std::optional<std::string> out;
    std::string format = "csv";
    std::vector<std::string> overrides;

    for (const auto& name : baa::cli::command_names()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "flat key = value config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "root seed");
        sub->add_option("--trials", trials, "Monte Carlo repetitions");
        sub->add_option("--out", out, "output directory");
        sub->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--set", overrides, "extra key=value assignments");
    }
    CLI11_PARSE(app, argc, argv);

    // Training repeats the same warnings every run; show each distinct one once.
    std::set<std::string> seen;
    std::mutex seen_mutex;
    baa::set_warning_handler([&](const std::string& msg) {
        std::lock_guard lock(seen_mutex);
        if (seen.insert(msg).second) std::cerr << "warning: " << msg << '\n';
    });

    try {
        baa::cli::ExperimentConfig cfg = config_path.empty() ? baa::cli::ExperimentConfig{} : baa::cli::load_config(config_path);
        if (seed) cfg.seed = *seed;
        if (trials) cfg.trials = *trials;
        if (out) cfg.output_path = *out;
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw baa::ConfigError("--set expects key=value, got '" + kv + "'");
            baa::cli::set_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
        cfg.validate();

        const std::string name = app.get_subcommands().front()->get_name();
        const auto fmt = format == "json" ? baa::cli::OutputFormat::Json : baa::cli::OutputFormat::Csv;
        const auto tables = baa::cli::run_command(name, cfg);
        for (const auto& f : baa::cli::write_results(name, tables, cfg, fmt)) std::cout << cfg.output_path << "/" << f << '\n';
    } catch (const baa::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
