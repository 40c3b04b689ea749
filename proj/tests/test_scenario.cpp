#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "epflow/scenario.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace epflow;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name)
{
    fs::path p = fs::temp_directory_path() / ("epflow_test_scenario_" + name);
    fs::remove_all(p);
    return p;
}

RunConfig parsed(const std::string& text, const fs::path& out)
{
    RunConfig c = parse_config(text);
    c.out_dir = out.string();
    return c;
}

const char* kAffineFree = R"(
[run]
scenario = affine
[gas]
gamma = 1.5
delta = 0
[affine]
A0 = 1 0.1 0  0 1.1 0.05  0.02 0 0.9
A1 = 1.2 0 0.1  0 1 0  -0.05 0 0.8
t_end = 10
)";

}  // namespace

TEST_CASE("config parsing and validation")
{
    RunConfig c = parse_config(kAffineFree);
    CHECK(c.scenario == Scenario::affine);
    CHECK(c.params.delta == 0.0);
    CHECK(c.params.alpha == doctest::Approx(2.0));
    CHECK(c.A0(1, 2) == 0.05);
    CHECK(c.A1(2, 0) == -0.05);
    CHECK(c.t_end == 10.0);
    CHECK(c.stepper.rule.n_u == 8);
    CHECK_NOTHROW(c.validate());

    // every example config in the repository loads and validates
    int n = 0;
    for (const auto& e : fs::directory_iterator(EPFLOW_CONFIG_DIR)) {
        if (e.path().extension() != ".ini") continue;
        CAPTURE(e.path().string());
        CHECK_NOTHROW(load_config(e.path().string()).validate());
        ++n;
    }
    CHECK(n >= 12);

    auto config_error = [](const std::string& text) {
        try {
            parse_config(text).validate();
        } catch (const Error& e) {
            return e.code() == ErrorCode::config;
        }
        return false;
    };
    CHECK(config_error("[gas]\ngamma = 1.5\n"));                              // scenario missing
    CHECK(config_error("[run]\nscenario = warp\n"));                          // unknown scenario
    CHECK(config_error("[run]\nscenario = affine\n[gas]\ngama = 1.5\n"));     // unknown key
    CHECK(config_error("[run]\nscenario = affine\n[extra]\nx = 1\n"));        // unknown section
    CHECK(config_error("[run]\nscenario = affine\n[gas]\ngamma = abc\n"));    // not a number
    CHECK(config_error("[run]\nscenario = affine\n[gas]\ngamma = 0.9\n"));    // gamma <= 1
    CHECK(config_error("[run]\nscenario = radial\n[gas]\ndelta = -1\n"));     // delta <= 0 for dynamics
    CHECK(config_error("[run]\nscenario = radial\n[gas]\ngamma = 1.7\n"));    // gamma >= 5/3 for dynamics
    CHECK(config_error("[run]\nscenario = affine\n[affine]\nA0 = 1 2 3\n"));  // wrong matrix size
    CHECK(config_error("[run]\nscenario = radial\n[affine]\nA1 = 2 0 0 0 1 0 0 0 1\n"));  // anisotropic radial
    CHECK(config_error("[run]\nscenario = full3d\n[stepper]\ncadence = 0\n"));
    CHECK(config_error("[run]\nscenario = field_validation\n[field]\nlambda = 2 0 0 0 1 0 0 0 1\n"));
    CHECK(config_error("[run]\nscenario = full3d\n[stepper]\nsnapshot_every = 2\n[checks]\ncurl_transport = true\n"));
    CHECK_THROWS_AS(load_config("/nonexistent/epflow.ini"), Error);
}

TEST_CASE("affine scenario: outputs, exit codes and report")
{
    fs::path out = scratch("affine");
    RunOutcome r = run_scenario(parsed(kAffineFree, out));
    CHECK(r.exit_code == exit_ok);
    for (const char* f : {"summary.jsonl", "invariants.csv", "affine_series.csv", "trajectory.csv"})
        CHECK(fs::exists(out / f));
    bool exact = false;
    for (const auto& c : r.checks)
        if (c.name.find("exactness") != std::string::npos) exact = c.pass && c.value <= 1e-10;
    CHECK(exact);

    std::string md = emit_report(out.string());
    CHECK(md.find("# Run report: affine") != std::string::npos);
    CHECK(md.find("energy_drift") != std::string::npos);
    CHECK(md.find("det_lambda_dev") != std::string::npos);
    CHECK(md.find("FAIL") == std::string::npos);
    CHECK(fs::exists(out / "report.md"));

    // missing artifacts are listed by name
    fs::remove(out / "affine_series.csv");
    fs::remove(out / "trajectory.csv");
    try {
        emit_report(out.string());
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::io);
        std::string what = e.what();
        CHECK(what.find("affine_series.csv") != std::string::npos);
        CHECK(what.find("trajectory.csv") != std::string::npos);
    }
    CHECK_THROWS_AS(emit_report(scratch("empty").string()), Error);

    // loose tolerances break energy conservation: acceptance failure, not an abort
    RunConfig loose = parsed(kAffineFree, scratch("loose"));
    loose.params = GasParams::make(1.5, 1e-2);
    loose.t_end = 50.0;
    loose.tol.rtol = 1e-3;
    loose.tol.atol = 1e-3;
    RunOutcome lr = run_scenario(loose);
    CHECK(lr.exit_code == exit_acceptance);
    CHECK(emit_report(loose.out_dir).find("acceptance failure") != std::string::npos);

    RunConfig bad = loose;
    bad.A0(0, 0) = -1.0;
    CHECK(run_scenario(bad).exit_code == exit_config);
}

TEST_CASE("numerical aborts get their own exit code")
{
    fs::path out = scratch("abort");
    RunOutcome r = run_scenario(parsed(R"(
[run]
scenario = radial
[affine]
t_end = 100
[stepper]
tau_max = 1
[data]
t1 = -1.2
)", out));
    CHECK(r.exit_code == exit_numerical);
    CHECK(r.message.find("vacuum_degeneracy") != std::string::npos);
    std::string summary = slurp(out / "summary.jsonl");
    CHECK(summary.find("\"record\":\"abort\"") != std::string::npos);
    CHECK(emit_report(out.string()).find("numerical abort") != std::string::npos);
}

TEST_CASE("outputs are byte-identical across repeats and thread counts")
{
    const char* text = R"(
[run]
scenario = field_validation
[gas]
gamma = 2
delta = 1
[grid]
n_r = 8
n_theta = 6
n_phi = 12
[field]
center_rule = 6 12 6
base_rule = 4 8 4
levels = 2
)";
    fs::path a = scratch("det_a"), b = scratch("det_b");
    RunConfig ca = parsed(text, a), cb = parsed(text, b);
    cb.threads = 3;
    CHECK(run_scenario(ca).exit_code == exit_ok);
    CHECK(run_scenario(cb).exit_code == exit_ok);
    for (const char* f : {"summary.jsonl", "invariants.csv", "poisson_levels.csv"}) {
        CAPTURE(f);
        CHECK(!slurp(a / f).empty());
        CHECK(slurp(a / f) == slurp(b / f));
    }

    const char* radial = R"(
[run]
scenario = radial
[affine]
t_end = 100
[grid]
n_r = 8
n_theta = 6
n_phi = 12
radial_n_r = 8
[stepper]
tau_max = 0.5
snapshot_every = 2
[data]
t1 = 0.002
v3 = 0.002
[checks]
scattering = true
)";
    fs::path ra = scratch("rad_a"), rb = scratch("rad_b");
    RunOutcome r1 = run_scenario(parsed(radial, ra));
    run_scenario(parsed(radial, rb));
    CHECK(r1.exit_code != exit_config);
    CHECK(r1.exit_code != exit_numerical);
    for (const char* f : {"summary.jsonl", "series.csv", "radial_profile.csv"}) CHECK(slurp(ra / f) == slurp(rb / f));
    std::string header = slurp(ra / "series.csv").substr(0, slurp(ra / "series.csv").find('\n'));
    CHECK(header == "tau,t,mu,S_norm,B_norm,D_norm,mass,max_J_dev,apriori_flag");
    std::string md = emit_report(ra.string());
    CHECK(md.find("t3_rho_center_drift") != std::string::npos);
    CHECK(md.find("boundary_expansion_rate") != std::string::npos);
    CHECK(md.find("A priori flag history") != std::string::npos);
}

TEST_CASE("norms and sweep scenarios")
{
    fs::path out = scratch("norms");
    RunOutcome r = run_scenario(parsed(R"(
[run]
scenario = norms
[grid]
n_r = 8
n_theta = 6
n_phi = 12
[norms]
N = 1
gammas = 1.25 1.5
[data]
v_rot = 0.001
)", out));
    CHECK(r.exit_code == exit_ok);
    std::string weights = slurp(out / "weights.csv");
    CHECK(std::count(weights.begin(), weights.end(), '\n') == 3);
    CHECK(emit_report(out.string()).find("refinement_ratio_gamma_1.25") != std::string::npos);

    fs::path sw = scratch("sweep");
    RunOutcome s = run_scenario(parsed(R"(
[run]
scenario = sweep
[affine]
A1 = 1.2 0 0 0 1 0 0 0 0.8
t_end = 1000
[sweep]
delta = 1e-2 1e-3
)", sw));
    CHECK(s.exit_code == exit_ok);
    std::string table = slurp(sw / "sweep.csv");
    CHECK(std::count(table.begin(), table.end(), '\n') == 3);
    std::string md = emit_report(sw.string());
    CHECK(md.find("| accel_slope, gamma 1.5, delta 0.001 |") != std::string::npos);
    CHECK(md.find("## sweep.csv") != std::string::npos);
    CHECK(md.find("b_minus_A1_over_delta_spread") != std::string::npos);
}
