#pragma once

#include "epflow/affine.hpp"
#include "epflow/dynamics.hpp"
#include "epflow/validation.hpp"

#include <string>
#include <vector>

namespace epflow {

enum class Scenario { affine, field_validation, radial, full3d, norms, sweep };
const char* scenario_name(Scenario s);

// Everything a run needs; defaults are listed in configs/reference.ini.
struct RunConfig {
    Scenario scenario = Scenario::affine;
    std::string out_dir = "run";
    int threads = 1;

    GasParams params;
    Mat3 A0 = Mat3::Identity();
    Mat3 A1 = Mat3::Identity();
    double t_end = 100.0;
    Tolerances tol;
    double picard_T = 0.0;           // 0 disables the Picard comparison
    double linear_rel_tol = 0.05;    // horizon check of the linear-part decomposition
    double fit_lo = 10.0, fit_hi = 1000.0;

    int grid_n_r = 12, grid_n_theta = 8, grid_n_phi = 16;
    int radial_n_r = 16;

    StepperConfig stepper;
    double tau_max = 1.0;            // radial runs
    int n_steps = 10;                // full 3-D runs
    double dt = 0.05;
    int snapshot_every = 1;

    RadialInitialData radial_data;
    Full3DInitialData full3d_data;

    int norm_order = 2;
    std::vector<double> norm_gammas;  // norms scenario; empty means params.gamma

    // field_validation
    bool field_poisson = true;
    bool field_identities = false;
    Mat3 Lambda = Mat3::Identity();
    PolarRule center_rule;
    PolarRule base_rule{4, 8, 4};
    int levels = 3;

    // sweep
    std::vector<double> sweep_delta, sweep_gamma;
    bool sweep_response = false;

    // opt-in checks
    bool check_scattering = false;
    bool check_curl_transport = false;

    // Throws Error(config) naming the offending key.
    void validate() const;
};

// Flat INI text with section headers. Unknown sections or keys are rejected.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text);

enum ExitStatus { exit_ok = 0, exit_config = 2, exit_numerical = 3, exit_acceptance = 4 };

struct RunOutcome {
    int exit_code = exit_ok;
    std::string message;
    std::vector<Check> checks;
    std::vector<std::string> artifacts;
};

// Runs one scenario and writes summary.jsonl, invariants.csv and the scenario's CSV series into
// config.out_dir. Outputs are byte-identical for identical configs and independent of the thread count.
RunOutcome run_scenario(const RunConfig& config);
// Loads, validates and runs; configuration problems come back as exit_config.
RunOutcome run_config_file(const std::string& path, const std::string& out_override = {}, int threads_override = 0);

// Markdown summary of a completed run directory; also written to <run_dir>/report.md.
// Throws Error(io) listing every missing artifact.
std::string emit_report(const std::string& run_dir);

}  // namespace epflow
