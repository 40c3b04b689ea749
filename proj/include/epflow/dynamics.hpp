#pragma once

#include "epflow/affine.hpp"
#include "epflow/common.hpp"
#include "epflow/field.hpp"
#include "epflow/geometry.hpp"

#include <functional>
#include <string>
#include <vector>

namespace epflow {

enum class StepMode { radial_1d, full_3d };

struct StepperConfig {
    double cfl = 0.5;
    double max_dt = 0.05;
    int order = 4;          // only explicit RK4 is provided
    int cadence = 5;        // 1: force at every RK stage; k > 1: refresh every k steps, extrapolate between
    StepMode mode = StepMode::radial_1d;
    bool field_on = true;
    bool abort_on_apriori = true;
    PolarRule rule;         // force quadrature (full 3-D only)

    void validate() const;
};

struct AprioriFlags {
    double theta_w2inf = 0.0;  // sum over orders 0..2 of sup norms of derivatives of theta
    double J_w1inf = 0.0;      // sup |J - 1| + sup |grad J|
    bool tripped() const { return !(theta_w2inf < 1.0 / 3.0) || !(J_w1inf < 1.0 / 3.0); }
};

struct PerturbationState {
    double tau = 0.0;
    VectorField theta, V;
    FlowMapDerivatives fmd;  // of eta = id + theta
};

// Builds the state and its flow-map cache; throws Error(vacuum_degeneracy) when J <= 0.
PerturbationState make_state(const BallGrid& g, double tau, VectorField theta, VectorField V);

AprioriFlags apriori_flags(const BallGrid& g, const PerturbationState& s);

// theta_tt = -(mu_tau/mu) V - 2 Gamma* V - delta mu^(3-3gamma) [Lambda theta + (1+alpha) w,_k K^k + w K^k,_k]
//            - delta^alpha mu^(-1) Lambda G,   K^k_i = Lambda_ij (A^k_j J^(-1/alpha) - delta^k_j).
// Pass gf = nullptr to suppress the field term.
VectorField perturbation_rhs(const BallGrid& g, const PerturbationState& s, const AffineFrame& frame,
                             const ForceField* gf, const GasParams& p);

// Largest stable step for the pressure operator: cfl h_min / c_max, c_max^2 = (1+alpha) delta mu^(3-3gamma) max w.
double cfl_step(double h_min, const AffineFrame& frame, const GasParams& p, double cfl);

// Spherically symmetric reduction (isotropic A0, A1: Lambda = Identity, Gamma* = 0). Unknowns are
// the radial components theta_r(r), V_r(r) on the positive Gauss-Legendre radii; derivatives use the
// odd extension through the centre.
class RadialModel {
public:
    RadialModel(int n_r, const GasParams& p);

    int size() const { return static_cast<int>(r_.size()); }
    const std::vector<double>& r() const { return r_; }
    const std::vector<double>& weights() const { return wq_; }  // int_0^1 f r^2 dr
    double h_min() const { return h_min_; }
    const GasParams& params() const { return p_; }

    // Derivative of an odd (resp. even) function given on the positive radii.
    Eigen::VectorXd d_odd(const Eigen::VectorXd& f) const { return Dodd_ * f; }
    Eigen::VectorXd d_even(const Eigen::VectorXd& f) const { return Deven_ * f; }
    // Values of the odd extension at s in [-1, 1].
    double eval_odd(const Eigen::VectorXd& f, double s) const;
    double eval_even(const Eigen::VectorXd& f, double s) const;

    // Enclosed background mass 4 pi int_0^r s^2 w^alpha at the nodes.
    const Eigen::VectorXd& enclosed_mass() const { return m_; }
    // c m(r) / R^2 with R = r + theta: the radial force component.
    Eigen::VectorXd force(const Eigen::VectorXd& theta) const;
    Eigen::VectorXd jacobian(const Eigen::VectorXd& theta) const;  // R' (R/r)^2
    Eigen::VectorXd acceleration(const Eigen::VectorXd& theta, const Eigen::VectorXd& V, const AffineFrame& frame,
                                 bool field_on) const;
    AprioriFlags apriori(const Eigen::VectorXd& theta) const;

private:
    GasParams p_;
    std::vector<double> r_, wq_, ext_nodes_, ext_bary_;
    Eigen::MatrixXd Dodd_, Deven_;
    Eigen::VectorXd w_, wr_, m_;
    double h_min_ = 0.0;
};

struct RadialInitialData {
    // theta_0 = t1 r + t3 r^3, V_0 = v1 r + v3 r^3
    double t1 = 0.0, t3 = 0.0, v1 = 0.0, v3 = 0.0;
};

struct RadialSnapshot {
    double tau = 0.0, t = 0.0, mu = 0.0;
    Eigen::VectorXd theta, V;
    double mass = 0.0;             // Eulerian mass
    double boundary_radius = 0.0;  // mu (1 + theta_r(1))
    double center_density = 0.0;
    double max_J_dev = 0.0;
    AprioriFlags flags;
};

struct RadialRun {
    std::vector<RadialSnapshot> snapshots;
    std::vector<std::string> log;
    int steps = 0;
    bool apriori_tripped = false;
};

// Advances to tau_max, snapshotting every `snapshot_every` steps (and at the end).
RadialRun run_radial(const AffineTrajectory& traj, const RadialModel& model, const RadialInitialData& init,
                     double tau_max, const StepperConfig& cfg, int snapshot_every = 10);

// Embeds a radial state theta_r(r) y/|y| on a 3-D grid (barycentric interpolation in r).
PerturbationState embed_radial(const BallGrid& g, const RadialModel& model, double tau, const Eigen::VectorXd& theta,
                               const Eigen::VectorXd& V);

struct EulerianSample {
    Vec3 label = Vec3::Zero();
    Vec3 x = Vec3::Zero();
    double rho = 0.0;
    Vec3 u = Vec3::Zero();
};

// x = A eta(y), rho = delta^alpha w^alpha / (det A J), u = Adot eta + mu^(-1) A V.
std::vector<EulerianSample> eulerian_reconstruct(const BallGrid& g, const PerturbationState& s,
                                                 const AffineFrame& frame, const GasParams& p,
                                                 const std::vector<Vec3>& labels);
// Eulerian mass: integral of rho over A eta(B), pulled back to labels.
double eulerian_mass(const BallGrid& g, const PerturbationState& s, const AffineFrame& frame, const GasParams& p);

// Full 3-D stepper.
class Stepper3D {
public:
    Stepper3D(const BallGrid& g, const AffineTrajectory& traj, const StepperConfig& cfg);

    // One RK4 step of size dt (the caller chooses dt; see stable_dt).
    PerturbationState step(const PerturbationState& s, double dt);
    double stable_dt(const PerturbationState& s) const;
    int force_evaluations() const { return force_evals_; }
    const std::vector<std::string>& log() const { return log_; }

private:
    VectorField accel(const PerturbationState& s, bool refresh_point);
    ForceField compute_force(const PerturbationState& s, const AffineFrame& f);

    const BallGrid& g_;
    const AffineTrajectory& traj_;
    StepperConfig cfg_;
    int steps_ = 0, force_evals_ = 0;
    // last two refreshed forces for extrapolation when cadence > 1
    std::vector<std::pair<double, VectorField>> history_;
    std::vector<std::string> log_;
};

struct Full3DInitialData {
    Mat3 theta_lin = Mat3::Zero();  // theta_0 = theta_lin y + theta_rot e3 x y
    double theta_rot = 0.0;
    Mat3 v_lin = Mat3::Zero();      // V_0 = v_lin y + v_rot (1 - |y|^2) e3 x y
    double v_rot = 0.0;
};

struct Full3DRun {
    std::vector<PerturbationState> snapshots;
    std::vector<std::string> log;
    int steps = 0;
    int force_evaluations = 0;
};

PerturbationState initial_state(const BallGrid& g, const Full3DInitialData& init);

// n_steps steps of size min(dt, stable_dt); snapshots every `snapshot_every` steps including the first.
Full3DRun full3d_short_run(const BallGrid& g, const AffineTrajectory& traj, const Full3DInitialData& init,
                           int n_steps, double dt, const StepperConfig& cfg, int snapshot_every = 1);

}  // namespace epflow
