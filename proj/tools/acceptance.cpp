// Runs every acceptance criterion through its config and prints one [PASS]/[FAIL] line each.
// Usage: epflow_acceptance [config-dir] [output-dir]
#include "epflow/scenario.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#ifndef EPFLOW_CONFIG_DIR
#define EPFLOW_CONFIG_DIR "configs"
#endif

namespace {

struct Criterion {
    int id;
    const char* title;
    std::vector<const char*> configs;
    const char* key;    // substring of the check that headlines the line
    double time_limit;  // seconds, 0 when the criterion sets none
};

const std::vector<Criterion> kCriteria = {
    {1, "affine exactness at delta = 0", {"criterion_01_affine_exact.ini"}, "exactness", 1.0},
    {2, "affine energy conservation", {"criterion_02_affine_energy.ini"}, "energy", 0.0},
    {3, "Picard oracle equivalence", {"criterion_03_picard.ini"}, "Picard", 0.0},
    {4, "affine asymptotics", {"criterion_04_asymptotics.ini"}, "max/min", 0.0},
    {5, "Poisson validation", {"criterion_05_poisson.ini"}, "centre potential", 30.0},
    {6, "identity suite", {"criterion_06_identities.ini"}, "div identity at theta = eps", 0.0},
    {7, "mass conservation, c = +1 and c = -1", {"criterion_07_mass_attract.ini", "criterion_07_mass_repel.ini"}, "mass", 0.0},
    {8, "zero-data response scaling", {"criterion_08_zero_data.ini"}, "zero-data response", 300.0},
    {9, "linear expansion and scattering", {"criterion_09_scattering.ini"}, "t^3 rho", 0.0},
    {10, "curl transport", {"criterion_10_curl_transport.ini"}, "B^N decay", 0.0},
    {11, "pure Euler fixed point", {"criterion_11_pure_euler.ini"}, "pure Euler", 0.0},
};

std::string describe(const epflow::Check& c)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, "%s = %.3g %s %.3g", c.name.c_str(), c.value, c.upper ? "<=" : ">=", c.bound);
    return buf;
}

}  // namespace

int main(int argc, char** argv)
{
    namespace fs = std::filesystem;
    const fs::path config_dir = argc > 1 ? argv[1] : EPFLOW_CONFIG_DIR;
    const fs::path out_dir = argc > 2 ? argv[2] : "acceptance_runs";
    int failed = 0;
    for (const Criterion& cr : kCriteria) {
        auto t0 = std::chrono::steady_clock::now();
        bool pass = true;
        std::string detail;
        std::size_t n_checks = 0;
        bool keyed = false;
        for (const char* cfg : cr.configs) {
            fs::path out = out_dir / fs::path(cfg).stem();
            epflow::RunOutcome r = epflow::run_config_file((config_dir / cfg).string(), out.string());
            n_checks += r.checks.size();
            if (r.exit_code != epflow::exit_ok) {
                pass = false;
                const epflow::Check* bad = nullptr;
                for (const auto& c : r.checks)
                    if (!c.pass) {
                        bad = &c;
                        break;
                    }
                detail = std::string(cfg) + ": " + (bad ? describe(*bad) : r.message);
                break;
            }
            for (const auto& c : r.checks)
                if (c.name.find(cr.key) != std::string::npos) {
                    detail += (detail.empty() ? "" : "; ") + describe(c);
                    keyed = true;
                    break;
                }
        }
        if (pass && !keyed) {
            pass = false;
            detail = std::string("the defining check (") + cr.key + ") was not evaluated";
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        char timing[96];
        if (cr.time_limit > 0.0) {
            std::snprintf(timing, sizeof timing, "%.2f s (limit %.0f s)", secs, cr.time_limit);
            if (pass && secs >= cr.time_limit) {
                pass = false;
                detail = "runtime over the limit";
            }
        } else {
            std::snprintf(timing, sizeof timing, "%.2f s", secs);
        }
        failed += !pass;
        std::printf("[%s] %d %s: %s; %zu checks; %s\n", pass ? "PASS" : "FAIL", cr.id, cr.title, detail.c_str(),
                    n_checks, timing);
        std::fflush(stdout);
    }
    std::printf("%zu of %zu criteria pass\n", kCriteria.size() - failed, kCriteria.size());
    return failed ? epflow::exit_acceptance : 0;
}
