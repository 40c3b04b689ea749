#include "epflow/epflow.h"

#include "epflow/affine.hpp"
#include "epflow/scenario.hpp"

#include <cstdlib>
#include <cstring>
#include <string>

struct epf_trajectory {
    epflow::AffineTrajectory traj;
};

namespace {

thread_local std::string g_last_error;

epf_status fail(epf_status s, const std::string& msg)
{
    g_last_error = msg;
    return s;
}

epf_status status_of(epflow::ErrorCode c)
{
    using epflow::ErrorCode;
    switch (c) {
    case ErrorCode::domain: return EPF_ERR_DOMAIN;
    case ErrorCode::integration: return EPF_ERR_INTEGRATION;
    case ErrorCode::non_contraction: return EPF_ERR_NON_CONTRACTION;
    case ErrorCode::horizon_too_short: return EPF_ERR_HORIZON;
    case ErrorCode::degenerate_map: return EPF_ERR_DEGENERATE_MAP;
    case ErrorCode::vacuum_degeneracy: return EPF_ERR_VACUUM;
    case ErrorCode::apriori_violation: return EPF_ERR_APRIORI;
    case ErrorCode::config: return EPF_ERR_CONFIG;
    case ErrorCode::io: return EPF_ERR_IO;
    case ErrorCode::range: return EPF_ERR_RANGE;
    }
    return EPF_ERR_INTERNAL;
}

template <class F>
epf_status guarded(F&& f)
{
    try {
        g_last_error.clear();
        f();
        return EPF_OK;
    } catch (const epflow::Error& e) {
        return fail(status_of(e.code()), e.what());
    } catch (const std::exception& e) {
        return fail(EPF_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(EPF_ERR_INTERNAL, "unknown exception");
    }
}

char* dup_string(const std::string& s)
{
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (p) std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

epflow::Mat3 mat(const double* m)
{
    epflow::Mat3 A;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) A(i, j) = m[3 * i + j];
    return A;
}

void put(const epflow::Mat3& A, double* m)
{
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m[3 * i + j] = A(i, j);
}

}  // namespace

extern "C" {

const char* epf_version(void) { return "1.0.0"; }

const char* epf_last_error(void) { return g_last_error.c_str(); }

void epf_free_string(char* s) { std::free(s); }

epf_status epf_affine_integrate(double gamma, double delta, const double A0[9], const double A1[9], double t_end,
                                double rtol, double atol, epf_trajectory** out)
{
    if (!A0 || !A1 || !out) return fail(EPF_ERR_ARGUMENT, "epf_affine_integrate: null argument");
    *out = nullptr;
    return guarded([&] {
        epflow::AffineIVP ivp;
        ivp.params = epflow::GasParams::make(gamma, delta);
        ivp.A0 = mat(A0);
        ivp.A1 = mat(A1);
        ivp.t_end = t_end;
        ivp.tol.rtol = rtol;
        ivp.tol.atol = atol;
        *out = new epf_trajectory{epflow::integrate(ivp)};
    });
}

void epf_trajectory_destroy(epf_trajectory* traj) { delete traj; }

epf_status epf_trajectory_t_end(const epf_trajectory* traj, double* t_end)
{
    if (!traj || !t_end) return fail(EPF_ERR_ARGUMENT, "epf_trajectory_t_end: null argument");
    return guarded([&] { *t_end = traj->traj.t_end(); });
}

epf_status epf_trajectory_state(const epf_trajectory* traj, double t, double A[9], double Adot[9])
{
    if (!traj || !A || !Adot) return fail(EPF_ERR_ARGUMENT, "epf_trajectory_state: null argument");
    return guarded([&] {
        epflow::Mat3 a, ad;
        traj->traj.state(t, a, ad);
        put(a, A);
        put(ad, Adot);
    });
}

epf_status epf_trajectory_energy(const epf_trajectory* traj, double t, double* energy)
{
    if (!traj || !energy) return fail(EPF_ERR_ARGUMENT, "epf_trajectory_energy: null argument");
    return guarded([&] { *energy = traj->traj.energy(t); });
}

epf_status epf_trajectory_frame(const epf_trajectory* traj, double t, double* mu, double* tau, double* det_lambda)
{
    if (!traj || !mu || !tau || !det_lambda) return fail(EPF_ERR_ARGUMENT, "epf_trajectory_frame: null argument");
    return guarded([&] {
        epflow::AffineFrame f = epflow::frame_at(traj->traj, t);
        *mu = f.mu;
        *tau = f.tau;
        *det_lambda = f.Lambda.determinant();
    });
}

int epf_run_scenario(const char* config_path, const char* out_dir, int threads, char** run_dir)
{
    if (run_dir) *run_dir = nullptr;
    if (!config_path) {
        fail(EPF_ERR_ARGUMENT, "epf_run_scenario: null config path");
        return epflow::exit_config;
    }
    try {
        g_last_error.clear();
        epflow::RunConfig cfg;
        try {
            cfg = epflow::load_config(config_path);
        } catch (const epflow::Error& e) {
            fail(EPF_ERR_CONFIG, e.what());
            return epflow::exit_config;
        }
        if (out_dir && *out_dir) cfg.out_dir = out_dir;
        if (threads > 0) cfg.threads = threads;
        epflow::RunOutcome r = epflow::run_scenario(cfg);
        if (r.exit_code != epflow::exit_ok) g_last_error = r.message;
        if (run_dir) *run_dir = dup_string(cfg.out_dir);
        return r.exit_code;
    } catch (const std::exception& e) {
        fail(EPF_ERR_INTERNAL, e.what());
        return epflow::exit_numerical;
    }
}

epf_status epf_emit_report(const char* run_dir, char** markdown)
{
    if (!run_dir) return fail(EPF_ERR_ARGUMENT, "epf_emit_report: null run directory");
    if (markdown) *markdown = nullptr;
    return guarded([&] {
        std::string text = epflow::emit_report(run_dir);
        if (markdown) *markdown = dup_string(text);
    });
}

}  // extern "C"
