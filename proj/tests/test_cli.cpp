#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>
#include <sys/wait.h>

#include "considerkf/cli.hpp"

using namespace ckf;
namespace fs = std::filesystem;

namespace {

fs::path test_dir() {
    static fs::path dir = [] {
        fs::path d = fs::temp_directory_path() /
                     ("considerkf_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

std::string basic_config(const std::string& extra = "") {
    return R"({"scenario": "SCALAR-1", "command": "equivalence",
               "steps": 100, "seed": 7)" +
           extra + "}";
}

const std::string inline_scalar1 = R"(
  {"phi": [[1.0]], "psi": [[1.0]], "g": [[1.0]], "q": [[0.0]],
   "h": [[1.0]], "nmat": [[0.0]], "r": [[1.0]],
   "p_hat": [0.0], "p_pp": [[1.0]], "x0_hat": [0.0], "p0": [[1.0]]})";

int run_binary(const std::string& args) {
    const std::string cmd = std::string(CKF_CLI_PATH) + " " + args;
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    return WEXITSTATUS(rc);
}

} // namespace

TEST_CASE("parse_config accepts a minimal fixture config") {
    const RunConfig cfg = parse_config(basic_config());
    CHECK(std::get<std::string>(cfg.scenario) == "SCALAR-1");
    CHECK(cfg.command == Command::Equivalence);
    CHECK(cfg.steps == 100);
    CHECK(cfg.seed == 7);
    CHECK(cfg.tolerance == 1e-8);
    CHECK_FALSE(cfg.weight.has_value());
    CHECK_FALSE(cfg.output.has_value());

    const Scenario sc = make_scenario(cfg);
    CHECK(sc.steps == 100);
    CHECK(sc.seed == 7);
}

TEST_CASE("weight parsing") {
    const RunConfig named =
        parse_config(basic_config(R"(, "weight": "Ppp")"));
    CHECK_FALSE(named.weight.has_value()); // resolves to the scenario's Ppp

    const RunConfig explicit_w =
        parse_config(basic_config(R"(, "weight": [[2.0]])"));
    REQUIRE(explicit_w.weight.has_value());
    CHECK((*explicit_w.weight)(0, 0) == 2.0);

    CHECK_THROWS_WITH_AS(parse_config(basic_config(R"(, "weight": [[-1.0]])")),
                         doctest::Contains("weight"), ConfigError);
    CHECK_THROWS_WITH_AS(
        parse_config(basic_config(R"(, "weight": [[1.0, 0.0]])")),
        doctest::Contains("weight"), ConfigError);
}

TEST_CASE("missing and malformed fields are reported with their path") {
    CHECK_THROWS_WITH_AS(
        parse_config(R"({"scenario": "SCALAR-1", "command": "equivalence",
                         "steps": 100})"),
        doctest::Contains("seed"), ConfigError);

    CHECK_THROWS_WITH_AS(
        parse_config(R"({"scenario": "SCALAR-1", "command": "equivalence",
                         "seed": 1})"),
        doctest::Contains("steps"), ConfigError);

    CHECK_THROWS_WITH_AS(
        parse_config(R"({"scenario": "SCALAR-1", "command": "montecarlo",
                         "steps": 10, "seed": 1})"),
        doctest::Contains("runs"), ConfigError);

    CHECK_THROWS_AS(parse_config("{not json"), ConfigError);

    CHECK_THROWS_WITH_AS(parse_config(basic_config(R"(, "command": "x")")),
                         doctest::Contains("command"), ConfigError);

    CHECK_THROWS_WITH_AS(
        parse_config(R"({"scenario": "NOPE", "command": "equivalence",
                         "steps": 10, "seed": 1})"),
        doctest::Contains("scenario"), ConfigError);

    CHECK_THROWS_WITH_AS(
        parse_config(basic_config(R"(, "filters": ["CKF", "BOGUS"])")),
        doctest::Contains("filters"), ConfigError);

    CHECK_THROWS_WITH_AS(
        parse_config(basic_config(R"(, "output": {"path": "x", "format": "xml"})")),
        doctest::Contains("format"), ConfigError);
}

TEST_CASE("inline scenarios are validated field by field") {
    const std::string good = R"({"scenario": )" + inline_scalar1 +
                             R"(, "command": "equivalence",
                                 "steps": 50, "seed": 7})";
    const RunConfig cfg = parse_config(good);
    const Scenario sc = make_scenario(cfg);
    CHECK(sc.model.state_dim() == 1);
    CHECK(sc.prior.p_pp(0, 0) == 1.0);

    // phi must be square and consistent with x0_hat.
    std::string bad = good;
    const auto pos = bad.find("[[1.0]], \"psi\"");
    REQUIRE(pos != std::string::npos);
    bad.replace(pos, 7, "[[1.0, 2.0]]");
    CHECK_THROWS_WITH_AS(parse_config(bad), doctest::Contains("scenario"),
                         ConfigError);

    // Non-PSD p_pp is rejected with its field path.
    std::string neg = good;
    const auto ppos = neg.find("\"p_pp\": [[1.0]]");
    REQUIRE(ppos != std::string::npos);
    neg.replace(ppos, 15, "\"p_pp\": [[-1.0]]");
    CHECK_THROWS_WITH_AS(parse_config(neg), doctest::Contains("p_pp"),
                         ConfigError);

    // Numbers that overflow double precision are rejected outright.
    std::string inf = good;
    const auto hpos = inf.find("\"h\": [[1.0]]");
    REQUIRE(hpos != std::string::npos);
    inf.replace(hpos, 12, "\"h\": [[1e999]]");
    CHECK_THROWS_AS(parse_config(inf), ConfigError);
}

TEST_CASE("configs round-trip through serialization") {
    const RunConfig fixture_cfg = parse_config(basic_config(
        R"(, "weight": [[2.0]], "tolerance": 1e-6,
           "filters": ["CKF", "SMCKF"],
           "output": {"path": "out.csv", "format": "csv"})"));
    CHECK(parse_config(serialize_config(fixture_cfg)) == fixture_cfg);

    const RunConfig inline_cfg = parse_config(
        R"({"scenario": )" + inline_scalar1 +
        R"(, "command": "montecarlo", "runs": 10, "steps": 5, "seed": 3})");
    CHECK(parse_config(serialize_config(inline_cfg)) == inline_cfg);
    CHECK_FALSE(inline_cfg == fixture_cfg);
}

TEST_CASE("equivalence command writes a report and respects the tolerance") {
    const fs::path out = test_dir() / "equiv.csv";
    RunConfig cfg = parse_config(basic_config());
    cfg.output = OutputSpec{out.string(), "csv"};

    CHECK(execute(cfg) == 0);

    const std::string text = slurp(out);
    std::istringstream lines(text);
    std::string header;
    std::getline(lines, header);
    CHECK(header == "k,dev_state,dev_gain,dev_cov,dev_cross");

    // Summary row carries k = -1 and the maxima.
    std::string line, last;
    int rows = 0;
    while (std::getline(lines, line)) {
        if (!line.empty()) {
            last = line;
            ++rows;
        }
    }
    CHECK(rows == 101); // 100 steps + summary
    REQUIRE(last.rfind("-1,", 0) == 0);
    std::istringstream fields(last);
    std::string tok;
    std::getline(fields, tok, ','); // k
    for (int i = 0; i < 4; ++i) {
        std::getline(fields, tok, ',');
        CHECK(std::stod(tok) <= 1e-12);
    }
}

TEST_CASE("equivalence with a doubled weight fails the tolerance gate") {
    RunConfig cfg = parse_config(basic_config(R"(, "weight": [[2.0]])"));
    cfg.output = OutputSpec{(test_dir() / "equiv_bad.csv").string(), "csv"};
    CHECK(execute(cfg) == 1);
}

TEST_CASE("fixture and inline configs of the same system agree byte for byte") {
    RunConfig by_name = parse_config(basic_config());
    by_name.output = OutputSpec{(test_dir() / "by_name.csv").string(), "csv"};
    RunConfig by_value = parse_config(
        R"({"scenario": )" + inline_scalar1 +
        R"(, "command": "equivalence", "steps": 100, "seed": 7})");
    by_value.output = OutputSpec{(test_dir() / "by_value.csv").string(), "csv"};

    CHECK(execute(by_name) == 0);
    CHECK(execute(by_value) == 0);
    CHECK(slurp(test_dir() / "by_name.csv") ==
          slurp(test_dir() / "by_value.csv"));
}

TEST_CASE("monte carlo outputs are byte-identical across runs") {
    const std::string text =
        R"({"scenario": "SCALAR-1", "command": "montecarlo", "runs": 100,
            "steps": 10, "seed": 1,
            "filters": ["KF", "CKF", "SDKF", "SMCKF"]})";
    RunConfig cfg = parse_config(text);

    cfg.output = OutputSpec{(test_dir() / "mc1.csv").string(), "csv"};
    CHECK(execute(cfg) == 0);
    cfg.output = OutputSpec{(test_dir() / "mc2.csv").string(), "csv"};
    CHECK(execute(cfg) == 0);

    const std::string a = slurp(test_dir() / "mc1.csv");
    CHECK(a == slurp(test_dir() / "mc2.csv"));
    CHECK(a.rfind("filter,state_index,rmse,avg_nees", 0) == 0);
}

TEST_CASE("json outputs are well formed") {
    RunConfig cfg = parse_config(basic_config());
    cfg.output = OutputSpec{(test_dir() / "equiv.json").string(), "json"};
    CHECK(execute(cfg) == 0);
    const nlohmann::json j = nlohmann::json::parse(slurp(test_dir() / "equiv.json"));
    CHECK(j["steps"] == 100);
    CHECK(j["max_rel_dev_state"].get<double>() <= 1e-12);
    CHECK(j["per_step"].size() == 100);

    RunConfig mc = parse_config(
        R"({"scenario": "SCALAR-1", "command": "montecarlo", "runs": 20,
            "steps": 5, "seed": 2, "filters": ["CKF"]})");
    mc.output = OutputSpec{(test_dir() / "mc.json").string(), "json"};
    CHECK(execute(mc) == 0);
    const nlohmann::json m = nlohmann::json::parse(slurp(test_dir() / "mc.json"));
    CHECK(m["runs"] == 20);
    CHECK(m["filters"][0]["filter"] == "CKF");
    CHECK(m["filters"][0]["rmse"].size() == 1);
}

TEST_CASE("single-run command writes one row per filter, step and component") {
    RunConfig cfg = parse_config(
        R"({"scenario": "SCALAR-2", "command": "single-run", "steps": 12,
            "seed": 4, "filters": ["KF", "CKF"]})");
    cfg.output = OutputSpec{(test_dir() / "single.csv").string(), "csv"};
    CHECK(execute(cfg) == 0);

    const std::string text = slurp(test_dir() / "single.csv");
    std::istringstream lines(text);
    std::string header;
    std::getline(lines, header);
    CHECK(header == "filter,k,state_index,x_true,x_hat,error,nees");
    int rows = 0;
    std::string line;
    while (std::getline(lines, line)) {
        if (!line.empty()) {
            ++rows;
        }
    }
    CHECK(rows == 12 * 2 * 1);
}

TEST_CASE("cli binary end to end") {
    const fs::path cfg_path = test_dir() / "cfg.json";
    spit(cfg_path, basic_config());

    const fs::path out = test_dir() / "cli_out.csv";
    CHECK(run_binary("run --config " + cfg_path.string() + " --output " +
                     out.string() + " > /dev/null 2>&1") == 0);
    CHECK(fs::exists(out));

    // Tolerance violation surfaces as exit code 1.
    const fs::path bad_cfg = test_dir() / "bad cfg.json";
    spit(bad_cfg, basic_config(R"(, "weight": [[2.0]])"));
    CHECK(run_binary("run --config \"" + bad_cfg.string() + "\" --output " +
                     (test_dir() / "cli_bad.csv").string() +
                     " > /dev/null 2>&1") == 1);

    // Config problems surface as exit code 2.
    spit(test_dir() / "broken.json", "{");
    CHECK(run_binary("run --config " + (test_dir() / "broken.json").string() +
                     " > /dev/null 2>&1") == 2);
    CHECK(run_binary("run --config " + (test_dir() / "missing.json").string() +
                     " > /dev/null 2>&1") == 2);

    // --format alone switches the stdout report.
    const fs::path piped = test_dir() / "piped.json";
    CHECK(run_binary("run --config " + cfg_path.string() +
                     " --format json > " + piped.string() + " 2>/dev/null") ==
          0);
    const nlohmann::json piped_report = nlohmann::json::parse(slurp(piped));
    CHECK(piped_report.contains("max_rel_dev_state"));

    // Fixture listing.
    const fs::path listing = test_dir() / "fixtures.txt";
    CHECK(run_binary("fixtures > " + listing.string()) == 0);
    const std::string names = slurp(listing);
    CHECK(names.find("SCALAR-1") != std::string::npos);
    CHECK(names.find("RANDOM-STABLE") != std::string::npos);
}
