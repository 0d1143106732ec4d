#include "considerkf/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace ckf {

namespace {

using nlohmann::json;

[[noreturn]] void config_fail(const std::string& path,
                              const std::string& what) {
    throw ConfigError("config error at '" + path + "': " + what);
}

const json& require_field(const json& j, const char* key) {
    if (!j.contains(key)) {
        config_fail(key, "missing required field");
    }
    return j.at(key);
}

double parse_finite(const json& j, const std::string& path) {
    if (!j.is_number()) {
        config_fail(path, "expected a number");
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
        config_fail(path, "entries must be finite");
    }
    return v;
}

Matrix parse_matrix(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) {
        config_fail(path, "expected a non-empty nested array");
    }
    const auto rows = j.size();
    if (!j.at(0).is_array() || j.at(0).empty()) {
        config_fail(path, "expected a nested array of rows");
    }
    const auto cols = j.at(0).size();
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const json& row = j.at(r);
        if (!row.is_array() || row.size() != cols) {
            config_fail(path, "rows must all have the same length");
        }
        for (std::size_t c = 0; c < cols; ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                parse_finite(row.at(c), path);
        }
    }
    return m;
}

Vector parse_vector(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) {
        config_fail(path, "expected a non-empty array");
    }
    Vector v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = parse_finite(j.at(i), path);
    }
    return v;
}

bool matrix_eq(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

InlineScenarioSpec parse_inline_scenario(const json& j) {
    InlineScenarioSpec spec;
    spec.phi = parse_matrix(require_field(j, "phi"), "scenario.phi");
    spec.psi = parse_matrix(require_field(j, "psi"), "scenario.psi");
    spec.g = parse_matrix(require_field(j, "g"), "scenario.g");
    spec.q = parse_matrix(require_field(j, "q"), "scenario.q");
    spec.h = parse_matrix(require_field(j, "h"), "scenario.h");
    spec.nmat = parse_matrix(require_field(j, "nmat"), "scenario.nmat");
    spec.r = parse_matrix(require_field(j, "r"), "scenario.r");
    spec.p_hat = parse_vector(require_field(j, "p_hat"), "scenario.p_hat");
    spec.p_pp = parse_matrix(require_field(j, "p_pp"), "scenario.p_pp");
    spec.x0_hat = parse_vector(require_field(j, "x0_hat"), "scenario.x0_hat");
    spec.p0 = parse_matrix(require_field(j, "p0"), "scenario.p0");
    if (j.contains("s0")) {
        spec.s0 = parse_matrix(j.at("s0"), "scenario.s0");
    }
    return spec;
}

/// Builds the scenario pieces out of an inline spec, translating failures
/// into config errors with field paths.
Scenario scenario_from_inline(const InlineScenarioSpec& spec) {
    StepMatrices sm{spec.phi, spec.psi, spec.g, spec.q,
                    spec.h,   spec.nmat, spec.r};
    SystemModel model = [&] {
        try {
            return SystemModel::constant(std::move(sm));
        } catch (const Error& e) {
            config_fail("scenario", e.what());
        }
    }();
    const ValidationReport audit = validate_model(model, 1);
    if (!audit.ok()) {
        config_fail("scenario", audit.issues.front());
    }

    const int n = model.state_dim();
    const int l = model.param_dim();
    if (spec.p_hat.size() != l) {
        config_fail("scenario.p_hat", "length must equal the parameter dim");
    }
    ParameterPrior prior = [&] {
        try {
            return ParameterPrior(spec.p_hat, spec.p_pp);
        } catch (const Error& e) {
            config_fail("scenario.p_pp", e.what());
        }
    }();

    if (spec.x0_hat.size() != n) {
        config_fail("scenario.x0_hat", "length must equal the state dim");
    }
    if (spec.p0.rows() != n || spec.p0.cols() != n) {
        config_fail("scenario.p0", "must be n x n");
    }
    if (max_asymmetry(spec.p0) > 1e-10 || min_eigenvalue(spec.p0) < -1e-10) {
        config_fail("scenario.p0", "must be symmetric positive semi-definite");
    }
    Matrix s0 = Matrix::Zero(n, l);
    if (spec.s0) {
        if (spec.s0->rows() != n || spec.s0->cols() != l) {
            config_fail("scenario.s0", "must be n x l");
        }
        s0 = *spec.s0;
    }
    return Scenario{std::move(model), std::move(prior), spec.x0_hat,
                    spec.p0,          s0,               0,
                    0};
}

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

json vector_to_json(const Vector& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        arr.push_back(v(i));
    }
    return arr;
}

FilterKind filter_from_name(const std::string& name) {
    if (name == "KF") {
        return FilterKind::Kf;
    }
    if (name == "CKF") {
        return FilterKind::Ckf;
    }
    if (name == "SDKF") {
        return FilterKind::Sdkf;
    }
    if (name == "SMCKF") {
        return FilterKind::Smckf;
    }
    config_fail("filters", "unknown filter '" + name + "'");
}

std::string command_name(Command c) {
    switch (c) {
    case Command::Equivalence:
        return "equivalence";
    case Command::MonteCarlo:
        return "montecarlo";
    case Command::SingleRun:
        return "single-run";
    }
    return "?";
}

/// 17 significant digits: doubles survive a round trip through text.
std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<FilterKind> effective_filters(const RunConfig& config) {
    if (!config.filters.empty()) {
        return config.filters;
    }
    return {FilterKind::Kf, FilterKind::Ckf, FilterKind::Sdkf,
            FilterKind::Smckf};
}

std::vector<Vector> measurement_sequence(const Scenario& sc) {
    std::vector<Vector> zs;
    zs.reserve(sc.steps);
    for (const TruthRecord& rec : simulate_truth(sc)) {
        zs.push_back(rec.z);
    }
    return zs;
}

std::string format_single_run(const Scenario& sc,
                              const std::vector<FilterKind>& filters,
                              const std::optional<SensitivityWeight>& weight,
                              const std::string& format) {
    const std::vector<TruthRecord> truth = simulate_truth(sc);
    const ParameterPrior& prior = sc.prior;
    const SensitivityWeight w =
        weight.value_or(SensitivityWeight(prior.p_pp));
    const bool weight_is_prior =
        w.w.rows() == prior.p_pp.rows() && w.w.isApprox(prior.p_pp, 1e-12);

    struct Record {
        int k;
        Vector x_true;
        Vector x_hat;
        double nees_value;
    };
    std::vector<std::vector<Record>> per_filter(filters.size());

    for (std::size_t f = 0; f < filters.size(); ++f) {
        KfState kf{sc.x0_hat, sc.p0};
        CkfState ckf{sc.x0_hat, sc.p0, sc.s0 * prior.p_pp};
        SdkfState sdkf{sc.x0_hat,
                       symmetrize(sc.p0 - sc.s0 * w.w * sc.s0.transpose()),
                       sc.s0};
        SmckfState smc{
            sc.x0_hat,
            symmetrize(sc.p0 - sc.s0 * prior.p_pp * sc.s0.transpose()),
            sc.s0};

        for (const TruthRecord& rec : truth) {
            const StepMatrices sm = sc.model.at(rec.k);
            Vector x_hat;
            Matrix cov;
            switch (filters[f]) {
            case FilterKind::Kf: {
                kf = kf_time_update(kf, sm);
                kf = kf_measurement_update(kf, rec.z, sm).state;
                x_hat = kf.x_hat;
                cov = kf.p;
                break;
            }
            case FilterKind::Ckf: {
                ckf = ckf_time_update(ckf, sm, prior);
                ckf = ckf_measurement_update(ckf, rec.z, sm, prior).state;
                x_hat = ckf.x_hat;
                cov = ckf.p;
                break;
            }
            case FilterKind::Sdkf: {
                sdkf = sdkf_time_update(sdkf, sm, prior);
                sdkf = sdkf_measurement_update(sdkf, rec.z, sm, prior, w).state;
                x_hat = sdkf.x_hat;
                cov = weight_is_prior
                          ? recover_full_covariance(sdkf.p, sdkf.s, prior)
                          : sdkf.p;
                break;
            }
            case FilterKind::Smckf: {
                smc = smckf_time_update(smc, sm, prior);
                const SmckfOutcome o =
                    smckf_measurement_update(smc, rec.z, sm, prior);
                smc = o.state;
                x_hat = smc.x_hat;
                cov = o.full_cov;
                break;
            }
            }
            per_filter[f].push_back(Record{rec.k, rec.x_true, x_hat,
                                           nees(x_hat - rec.x_true, cov)});
        }
    }

    std::ostringstream os;
    if (format == "csv") {
        os << "filter,k,state_index,x_true,x_hat,error,nees\n";
        for (std::size_t f = 0; f < filters.size(); ++f) {
            const std::string name = filter_name(filters[f]);
            for (const Record& rec : per_filter[f]) {
                for (Eigen::Index i = 0; i < rec.x_true.size(); ++i) {
                    os << name << ',' << rec.k << ',' << i << ','
                       << fmt17(rec.x_true(i)) << ',' << fmt17(rec.x_hat(i))
                       << ',' << fmt17(rec.x_hat(i) - rec.x_true(i)) << ','
                       << fmt17(rec.nees_value) << '\n';
                }
            }
        }
        return os.str();
    }

    os << "{\"steps\": " << sc.steps << ", \"filters\": [";
    for (std::size_t f = 0; f < filters.size(); ++f) {
        if (f > 0) {
            os << ", ";
        }
        os << "{\"filter\": \"" << filter_name(filters[f])
           << "\", \"records\": [";
        for (std::size_t r = 0; r < per_filter[f].size(); ++r) {
            const Record& rec = per_filter[f][r];
            if (r > 0) {
                os << ", ";
            }
            os << "{\"k\": " << rec.k << ", \"x_true\": [";
            for (Eigen::Index i = 0; i < rec.x_true.size(); ++i) {
                os << (i > 0 ? ", " : "") << fmt17(rec.x_true(i));
            }
            os << "], \"x_hat\": [";
            for (Eigen::Index i = 0; i < rec.x_hat.size(); ++i) {
                os << (i > 0 ? ", " : "") << fmt17(rec.x_hat(i));
            }
            os << "], \"error\": [";
            for (Eigen::Index i = 0; i < rec.x_hat.size(); ++i) {
                os << (i > 0 ? ", " : "")
                   << fmt17(rec.x_hat(i) - rec.x_true(i));
            }
            os << "], \"nees\": " << fmt17(rec.nees_value) << "}";
        }
        os << "]}";
    }
    os << "]}\n";
    return os.str();
}

} // namespace

bool InlineScenarioSpec::operator==(const InlineScenarioSpec& other) const {
    const bool s0_eq = s0.has_value() == other.s0.has_value() &&
                       (!s0 || matrix_eq(*s0, *other.s0));
    return matrix_eq(phi, other.phi) && matrix_eq(psi, other.psi) &&
           matrix_eq(g, other.g) && matrix_eq(q, other.q) &&
           matrix_eq(h, other.h) && matrix_eq(nmat, other.nmat) &&
           matrix_eq(r, other.r) && matrix_eq(p_pp, other.p_pp) &&
           matrix_eq(p0, other.p0) && p_hat.size() == other.p_hat.size() &&
           p_hat == other.p_hat && x0_hat.size() == other.x0_hat.size() &&
           x0_hat == other.x0_hat && s0_eq;
}

bool RunConfig::operator==(const RunConfig& other) const {
    const bool weight_eq = weight.has_value() == other.weight.has_value() &&
                           (!weight || matrix_eq(*weight, *other.weight));
    return scenario == other.scenario && command == other.command &&
           filters == other.filters && weight_eq && runs == other.runs &&
           steps == other.steps && seed == other.seed &&
           tolerance == other.tolerance && output == other.output;
}

RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw ConfigError("config must be a JSON object");
    }

    RunConfig config;

    // Scenario reference: fixture name or inline matrices.
    const json& scenario = require_field(j, "scenario");
    Scenario resolved = [&] {
        if (scenario.is_string()) {
            const std::string name = scenario.get<std::string>();
            try {
                Scenario sc = builtin_fixture(name);
                config.scenario = name;
                return sc;
            } catch (const Error& e) {
                config_fail("scenario", e.what());
            }
        }
        if (!scenario.is_object()) {
            config_fail("scenario",
                        "expected a fixture name or an inline object");
        }
        InlineScenarioSpec spec = parse_inline_scenario(scenario);
        Scenario sc = scenario_from_inline(spec);
        config.scenario = std::move(spec);
        return sc;
    }();

    const std::string command =
        require_field(j, "command").is_string()
            ? j.at("command").get<std::string>()
            : std::string();
    if (command == "equivalence") {
        config.command = Command::Equivalence;
    } else if (command == "montecarlo") {
        config.command = Command::MonteCarlo;
    } else if (command == "single-run") {
        config.command = Command::SingleRun;
    } else {
        config_fail("command",
                    "must be one of equivalence, montecarlo, single-run");
    }

    if (j.contains("filters")) {
        const json& filters = j.at("filters");
        if (!filters.is_array()) {
            config_fail("filters", "expected an array of filter names");
        }
        for (const json& f : filters) {
            if (!f.is_string()) {
                config_fail("filters", "expected an array of filter names");
            }
            config.filters.push_back(filter_from_name(f.get<std::string>()));
        }
    }

    if (j.contains("weight") && !j.at("weight").is_null()) {
        const json& weight = j.at("weight");
        if (weight.is_string()) {
            if (weight.get<std::string>() != "Ppp") {
                config_fail("weight", "the only named weight is \"Ppp\"");
            }
        } else {
            const Matrix w = parse_matrix(weight, "weight");
            const int l = resolved.model.param_dim();
            if (w.rows() != l || w.cols() != l) {
                config_fail("weight", "must be l x l for the scenario");
            }
            try {
                SensitivityWeight check(w);
            } catch (const Error& e) {
                config_fail("weight", e.what());
            }
            config.weight = w;
        }
    }

    const json& steps = require_field(j, "steps");
    if (!steps.is_number_integer() || steps.get<long long>() < 1) {
        config_fail("steps", "must be an integer >= 1");
    }
    config.steps = steps.get<int>();

    const json& seed = require_field(j, "seed");
    if (!seed.is_number_integer() || seed.get<long long>() < 0) {
        config_fail("seed", "must be a non-negative integer");
    }
    config.seed = seed.get<std::uint64_t>();

    if (config.command == Command::MonteCarlo) {
        const json& runs = require_field(j, "runs");
        if (!runs.is_number_integer() || runs.get<long long>() < 1) {
            config_fail("runs", "must be an integer >= 1");
        }
        config.runs = runs.get<int>();
    } else if (j.contains("runs")) {
        config.runs = j.at("runs").get<int>();
    }

    if (j.contains("tolerance")) {
        const double tol = parse_finite(j.at("tolerance"), "tolerance");
        if (tol <= 0.0) {
            config_fail("tolerance", "must be positive");
        }
        config.tolerance = tol;
    }

    if (j.contains("output") && !j.at("output").is_null()) {
        const json& output = j.at("output");
        if (!output.is_object() || !output.contains("path") ||
            !output.at("path").is_string()) {
            config_fail("output", "expected an object with a \"path\" string");
        }
        OutputSpec spec;
        spec.path = output.at("path").get<std::string>();
        if (output.contains("format")) {
            spec.format = output.at("format").get<std::string>();
            if (spec.format != "csv" && spec.format != "json") {
                config_fail("output.format", "must be \"csv\" or \"json\"");
            }
        }
        config.output = std::move(spec);
    }

    return config;
}

std::string serialize_config(const RunConfig& config) {
    json j;
    if (const auto* name = std::get_if<std::string>(&config.scenario)) {
        j["scenario"] = *name;
    } else {
        const auto& spec = std::get<InlineScenarioSpec>(config.scenario);
        json s;
        s["phi"] = matrix_to_json(spec.phi);
        s["psi"] = matrix_to_json(spec.psi);
        s["g"] = matrix_to_json(spec.g);
        s["q"] = matrix_to_json(spec.q);
        s["h"] = matrix_to_json(spec.h);
        s["nmat"] = matrix_to_json(spec.nmat);
        s["r"] = matrix_to_json(spec.r);
        s["p_hat"] = vector_to_json(spec.p_hat);
        s["p_pp"] = matrix_to_json(spec.p_pp);
        s["x0_hat"] = vector_to_json(spec.x0_hat);
        s["p0"] = matrix_to_json(spec.p0);
        if (spec.s0) {
            s["s0"] = matrix_to_json(*spec.s0);
        }
        j["scenario"] = std::move(s);
    }
    j["command"] = command_name(config.command);
    if (!config.filters.empty()) {
        json names = json::array();
        for (const FilterKind f : config.filters) {
            names.push_back(filter_name(f));
        }
        j["filters"] = std::move(names);
    }
    if (config.weight) {
        j["weight"] = matrix_to_json(*config.weight);
    }
    if (config.runs > 0) {
        j["runs"] = config.runs;
    }
    j["steps"] = config.steps;
    j["seed"] = config.seed;
    j["tolerance"] = config.tolerance;
    if (config.output) {
        j["output"] = {{"path", config.output->path},
                       {"format", config.output->format}};
    }
    return j.dump(2);
}

Scenario make_scenario(const RunConfig& config) {
    Scenario sc = [&] {
        if (const auto* name = std::get_if<std::string>(&config.scenario)) {
            return builtin_fixture(*name);
        }
        return scenario_from_inline(
            std::get<InlineScenarioSpec>(config.scenario));
    }();
    sc.steps = config.steps;
    sc.seed = config.seed;
    return sc;
}

std::string format_equivalence_report(const EquivalenceReport& report,
                                      const std::string& format) {
    std::ostringstream os;
    if (format == "csv") {
        os << "k,dev_state,dev_gain,dev_cov,dev_cross\n";
        for (const DeviationRow& row : report.per_step) {
            os << row.k << ',' << fmt17(row.dev_state) << ','
               << fmt17(row.dev_gain) << ',' << fmt17(row.dev_cov) << ','
               << fmt17(row.dev_cross) << '\n';
        }
        os << "-1," << fmt17(report.max_rel_dev_state) << ','
           << fmt17(report.max_rel_dev_gain) << ','
           << fmt17(report.max_rel_dev_cov) << ','
           << fmt17(report.max_rel_dev_cross) << '\n';
        return os.str();
    }

    os << "{\"steps\": " << report.steps << ",\n"
       << " \"max_rel_dev_state\": " << fmt17(report.max_rel_dev_state)
       << ",\n"
       << " \"max_rel_dev_gain\": " << fmt17(report.max_rel_dev_gain) << ",\n"
       << " \"max_rel_dev_cov\": " << fmt17(report.max_rel_dev_cov) << ",\n"
       << " \"max_rel_dev_cross\": " << fmt17(report.max_rel_dev_cross)
       << ",\n"
       << " \"per_step\": [";
    for (std::size_t i = 0; i < report.per_step.size(); ++i) {
        const DeviationRow& row = report.per_step[i];
        if (i > 0) {
            os << ", ";
        }
        os << "{\"k\": " << row.k << ", \"dev_state\": "
           << fmt17(row.dev_state) << ", \"dev_gain\": " << fmt17(row.dev_gain)
           << ", \"dev_cov\": " << fmt17(row.dev_cov)
           << ", \"dev_cross\": " << fmt17(row.dev_cross) << "}";
    }
    os << "]}\n";
    return os.str();
}

std::string format_mc_report(const McReport& report,
                             const std::string& format) {
    std::ostringstream os;
    if (format == "csv") {
        os << "filter,state_index,rmse,avg_nees\n";
        for (const FilterMetrics& metrics : report.filters) {
            const std::string name = filter_name(metrics.kind);
            for (Eigen::Index i = 0; i < metrics.rmse.size(); ++i) {
                os << name << ',' << i << ',' << fmt17(metrics.rmse(i)) << ','
                   << fmt17(metrics.avg_nees) << '\n';
            }
        }
        return os.str();
    }

    os << "{\"runs\": " << report.runs << ", \"steps\": " << report.steps
       << ", \"filters\": [";
    for (std::size_t f = 0; f < report.filters.size(); ++f) {
        const FilterMetrics& metrics = report.filters[f];
        if (f > 0) {
            os << ", ";
        }
        os << "{\"filter\": \"" << filter_name(metrics.kind)
           << "\", \"calibrated_covariance\": "
           << (metrics.calibrated_covariance ? "true" : "false")
           << ", \"avg_nees\": " << fmt17(metrics.avg_nees) << ", \"rmse\": [";
        for (Eigen::Index i = 0; i < metrics.rmse.size(); ++i) {
            os << (i > 0 ? ", " : "") << fmt17(metrics.rmse(i));
        }
        os << "], \"mean_nees\": [";
        for (Eigen::Index i = 0; i < metrics.mean_nees.size(); ++i) {
            os << (i > 0 ? ", " : "") << fmt17(metrics.mean_nees(i));
        }
        os << "]}";
    }
    os << "]}\n";
    return os.str();
}

int execute(const RunConfig& config) {
    try {
        const Scenario sc = make_scenario(config);
        const std::string format =
            config.output ? config.output->format : std::string("csv");
        std::optional<SensitivityWeight> weight;
        if (config.weight) {
            weight = SensitivityWeight(*config.weight);
        }

        std::string text;
        bool within_tolerance = true;
        switch (config.command) {
        case Command::Equivalence: {
            const EquivalenceReport report =
                run_equivalence(sc, measurement_sequence(sc), weight);
            text = format_equivalence_report(report, format);
            within_tolerance = report.max_deviation() <= config.tolerance;
            if (!within_tolerance) {
                std::cerr << "equivalence deviation "
                          << fmt17(report.max_deviation())
                          << " exceeds tolerance " << fmt17(config.tolerance)
                          << "\n";
            }
            break;
        }
        case Command::MonteCarlo: {
            const McReport report = run_monte_carlo(
                sc, config.runs, effective_filters(config), weight);
            text = format_mc_report(report, format);
            break;
        }
        case Command::SingleRun:
            text = format_single_run(sc, effective_filters(config), weight,
                                     format);
            break;
        }

        // An empty output path means stdout.
        if (config.output && !config.output->path.empty()) {
            std::ofstream out(config.output->path, std::ios::binary);
            if (!out) {
                throw Error("cannot open output file '" + config.output->path +
                            "'");
            }
            out << text;
            if (!out) {
                throw Error("failed writing output file '" +
                            config.output->path + "'");
            }
        } else {
            std::cout << text;
        }
        return within_tolerance ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

} // namespace ckf
