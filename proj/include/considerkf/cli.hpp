// Run configuration, JSON parsing, command execution and report writers.
//
// Config schema (JSON object):
//   scenario   fixture name string, or an object with keys
//              phi, psi, g, q, h, nmat, r, p_pp, p0 (row-major nested arrays),
//              p_hat, x0_hat (arrays) and optional s0
//   command    "equivalence" | "montecarlo" | "single-run"
//   filters    optional array from {"KF","CKF","SDKF","SMCKF"}; default all
//   weight     optional; "Ppp" (default) or an explicit l x l nested array
//   runs       required for montecarlo
//   steps      required
//   seed       required
//   tolerance  optional, default 1e-8 (equivalence exit gate)
//   output     optional {"path": ..., "format": "csv"|"json"}; default stdout
//
// Exit codes: 0 success, 1 tolerance violation, 2 config error, 3 runtime
// error. Floating-point output uses 17 significant digits so files round-trip
// doubles losslessly and re-runs are byte-identical.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "considerkf/bridge.hpp"
#include "considerkf/sim.hpp"

namespace ckf {

enum class Command { Equivalence, MonteCarlo, SingleRun };

/// Inline scenario: the full matrix set plus prior and initial conditions.
struct InlineScenarioSpec {
    Matrix phi, psi, g, q, h, nmat, r;
    Vector p_hat;
    Matrix p_pp;
    Vector x0_hat;
    Matrix p0;
    std::optional<Matrix> s0;

    bool operator==(const InlineScenarioSpec& other) const;
};

struct OutputSpec {
    std::string path;
    std::string format = "csv"; // "csv" | "json"

    bool operator==(const OutputSpec&) const = default;
};

struct RunConfig {
    std::variant<std::string, InlineScenarioSpec> scenario;
    Command command = Command::Equivalence;
    std::vector<FilterKind> filters; // empty = all four
    std::optional<Matrix> weight;    // nullopt = "Ppp"
    int runs = 0;                    // montecarlo only
    int steps = 0;
    std::uint64_t seed = 0;
    double tolerance = 1e-8;
    std::optional<OutputSpec> output;

    bool operator==(const RunConfig& other) const;
};

/// Parses and fully validates a JSON config. Referenced fixtures must exist,
/// inline matrices must be finite and mutually consistent, and an explicit
/// weight must be a valid sensitivity weight. Violations throw ConfigError
/// with the offending field path in the message.
RunConfig parse_config(const std::string& text);

/// Inverse of parse_config: parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& config);

/// Resolves the config's scenario reference and applies steps/seed.
Scenario make_scenario(const RunConfig& config);

/// Runs the configured command and writes its report. Returns the process
/// exit code (never throws): 0 on success, 1 when an equivalence run exceeds
/// the tolerance, 3 on any runtime failure (diagnostic on stderr).
int execute(const RunConfig& config);

// Report writers, exposed for tests. Format is "csv" or "json".
std::string format_equivalence_report(const EquivalenceReport& report,
                                      const std::string& format);
std::string format_mc_report(const McReport& report, const std::string& format);

} // namespace ckf
