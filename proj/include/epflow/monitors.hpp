#pragma once

#include "epflow/affine.hpp"
#include "epflow/common.hpp"
#include "epflow/dynamics.hpp"
#include "epflow/geometry.hpp"

#include <string>
#include <vector>

namespace epflow {

// One derivative multi-index: X_r^a followed by tangential fields slash_{j i} (boundary terms),
// or a Cartesian multi-index nu (interior terms).
struct DerivativeIndex {
    int a = 0;
    std::vector<std::pair<int, int>> slash;  // (j, i) with j < i
    std::vector<int> cart;
    bool interior = false;
    std::string label() const;
};

// Boundary indices with a + |beta| <= N and interior indices |nu| <= N (multisets, each counted once).
std::vector<DerivativeIndex> boundary_indices(int N);
std::vector<DerivativeIndex> interior_indices(int N);

// Applies the index to a scalar field.
ScalarField apply_index(const BallGrid& g, const DerivativeIndex& d, const ScalarField& f);

struct NormTerm {
    DerivativeIndex index;
    double V = 0.0;         // delta^(-1) mu^(3 gamma - 3) ||D V||^2 (weighted)
    double theta = 0.0;     // ||D theta||^2
    double grad = 0.0;      // ||grad_eta D theta||^2
    double div = 0.0;       // ||div_eta D theta||^2
    double curl_V = 0.0;    // ||Curl_{Lambda A} D V||^2
    double curl_theta = 0.0;
    double total() const { return V + theta + grad + div; }
};

struct NormReport {
    double tau = 0.0;
    int N = 0;
    std::vector<NormTerm> terms;  // boundary terms first, then interior
    double S = 0.0;               // instantaneous (no supremum)
    double B_V = 0.0;
    double B_theta = 0.0;
    double D = 0.0;
    double V_part = 0.0;          // V contributions of S without the delta^(-1) mu^(3 gamma - 3) factor
    AprioriFlags flags;
};

// Evaluates S^N, B^N[V], B^N[theta] and D^N at one snapshot. Throws Error(domain) when N exceeds the
// grid's differentiation budget or when gamma >= 5/3 (dissipation loses its sign).
NormReport evaluate_norms(const BallGrid& g, const PerturbationState& s, const AffineFrame& frame, const GasParams& p,
                          int N);

double energy_norm(const BallGrid& g, const PerturbationState& s, const AffineFrame& frame, const GasParams& p, int N);
double vorticity_norm(const BallGrid& g, const VectorField& F, const PerturbationState& s, const AffineFrame& frame,
                      const GasParams& p, int N);
double dissipation(const BallGrid& g, const PerturbationState& s, const AffineFrame& frame, const GasParams& p, int N);

// Running suprema over tau' <= tau, per term, as in the definitions of S^N and B^N.
class NormSeries {
public:
    void add(const NormReport& r);
    double S() const { return S_; }
    double B_V() const { return BV_; }
    double B_theta() const { return Bt_; }
    const std::vector<double>& taus() const { return taus_; }
    const std::vector<double>& S_instant() const { return S_inst_; }
    const std::vector<double>& B_V_instant() const { return BV_inst_; }
    const std::vector<double>& S_running() const { return S_run_; }
    const std::vector<double>& B_V_running() const { return BV_run_; }

private:
    std::vector<double> sup_S_, sup_BV_, sup_Bt_;
    double S_ = 0.0, BV_ = 0.0, Bt_ = 0.0;
    std::vector<double> taus_, S_inst_, BV_inst_, S_run_, BV_run_;
};

struct CurlResidual {
    std::vector<double> tau;       // interior snapshot times
    std::vector<double> residual;  // || Curl V_tau + (mu_tau/mu) Curl V + 2 Curl(Gamma* V) ||_{alpha+1,1}
    std::vector<double> scale;     // || Curl_{Lambda A} V_tau ||_{alpha+1,1}
    double max_residual = 0.0;
};

// Needs at least 3 snapshots; V_tau by the three-point (non-uniform) central difference.
CurlResidual curl_residual(const BallGrid& g, const std::vector<PerturbationState>& snaps,
                           const AffineTrajectory& traj, const GasParams& p);

struct DecayFit {
    double exponent = 0.0;
    double stderr_ = 0.0;
    double tau_lo = 0.0, tau_hi = 0.0;
    int samples = 0;
    double efolds = 0.0;
};

// Least-squares slope of log(value) against tau over the trailing `window` fraction of the series.
// Refuses (Error range) with fewer than 10 samples, fewer than 2 e-folds, or non-positive values.
DecayFit decay_fit(const std::vector<double>& tau, const std::vector<double>& value, double window = 0.5);

}  // namespace epflow
