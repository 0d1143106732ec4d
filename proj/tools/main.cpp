// Command-line front end: loads a JSON run configuration, executes it, and
// writes machine-readable results.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "considerkf/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"considerkf: consider / desensitized Kalman filtering tools"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_path;
    std::string format;
    double tolerance = 0.0;

    CLI::App* run = app.add_subcommand("run", "Execute a run configuration");
    run->add_option("--config", config_path, "Path to a JSON run config")
        ->required();
    run->add_option("--output", output_path,
                    "Output file path (overrides the config)");
    run->add_option("--format", format, "Output format")
        ->check(CLI::IsMember({"csv", "json"}));
    run->add_option("--tolerance", tolerance,
                    "Equivalence exit tolerance (overrides the config)");

    CLI::App* fixtures =
        app.add_subcommand("fixtures", "List builtin scenarios");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    if (fixtures->parsed()) {
        for (const auto& [name, description] : ckf::builtin_fixture_catalog()) {
            std::printf("%-28s %s\n", name.c_str(), description.c_str());
        }
        return 0;
    }

    std::ifstream in(config_path, std::ios::binary);
    if (!in) {
        std::cerr << "error: cannot open config file '" << config_path
                  << "'\n";
        return 2;
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();

    ckf::RunConfig config;
    try {
        config = ckf::parse_config(buffer.str());
    } catch (const ckf::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    if (!output_path.empty()) {
        ckf::OutputSpec spec;
        spec.path = output_path;
        spec.format = !format.empty()
                          ? format
                          : (config.output ? config.output->format
                                           : std::string("csv"));
        config.output = std::move(spec);
    } else if (!format.empty()) {
        if (config.output) {
            config.output->format = format;
        } else {
            // No path anywhere: format applies to the stdout report.
            config.output = ckf::OutputSpec{"", format};
        }
    }
    if (run->count("--tolerance") > 0) {
        if (tolerance <= 0.0) {
            std::cerr << "error: tolerance must be positive\n";
            return 2;
        }
        config.tolerance = tolerance;
    }

    return ckf::execute(config);
}
