#include "epflow/dynamics.hpp"
#include "epflow/profiles.hpp"
#include "epflow/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace epflow {

namespace {

constexpr double kPi = std::numbers::pi;

double sup_abs(const ScalarField& f) { return f.abs().maxCoeff(); }

bool is_isotropic(const Mat3& M)
{
    double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double target = i == j ? M(0, 0) : 0.0;
            if (std::abs(M(i, j) - target) > 1e-14 * scale) return false;
        }
    return true;
}

VectorField axpy(const VectorField& x, double a, const VectorField& y)
{
    VectorField out = x;
    for (int i = 0; i < 3; ++i) out[i] += a * y[i];
    return out;
}

}  // namespace

void StepperConfig::validate() const
{
    if (!(cfl > 0.0 && cfl <= 1.0)) throw Error(ErrorCode::config, "stepper: cfl must lie in (0, 1]");
    if (!(max_dt > 0.0)) throw Error(ErrorCode::config, "stepper: max_dt must be positive");
    if (cadence < 1) throw Error(ErrorCode::config, "stepper: cadence must be >= 1");
    if (order != 4) throw Error(ErrorCode::config, "stepper: only order 4 (RK4) is available");
}

PerturbationState make_state(const BallGrid& g, double tau, VectorField theta, VectorField V)
{
    PerturbationState s;
    s.tau = tau;
    try {
        s.fmd = flow_map_from_displacement(g, theta);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::degenerate_map) throw;
        std::ostringstream msg;
        msg << "vacuum degeneracy at tau = " << tau << ": " << e.what();
        throw Error(ErrorCode::vacuum_degeneracy, msg.str());
    }
    s.theta = std::move(theta);
    s.V = std::move(V);
    return s;
}

AprioriFlags apriori_flags(const BallGrid& g, const PerturbationState& s)
{
    AprioriFlags f;
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < 3; ++i) {
        s0 = std::max(s0, sup_abs(s.theta[i]));
        VectorField d1 = g.gradient(s.theta[i]);
        for (int j = 0; j < 3; ++j) {
            s1 = std::max(s1, sup_abs(d1[j]));
            VectorField d2 = g.gradient(d1[j]);
            for (int k = 0; k < 3; ++k) s2 = std::max(s2, sup_abs(d2[k]));
        }
    }
    f.theta_w2inf = s0 + s1 + s2;
    double jd = sup_abs(s.fmd.J - 1.0), jg = 0.0;
    VectorField dJ = g.gradient(s.fmd.J);
    for (int k = 0; k < 3; ++k) jg = std::max(jg, sup_abs(dJ[k]));
    f.J_w1inf = jd + jg;
    return f;
}

VectorField perturbation_rhs(const BallGrid& g, const PerturbationState& s, const AffineFrame& frame,
                             const ForceField* gf, const GasParams& p)
{
    const Eigen::Index M = g.size();
    const Mat3& L = frame.Lambda;
    const double damp = frame.mu_tau / frame.mu;
    const double press = p.delta * std::pow(frame.mu, 3.0 - 3.0 * p.gamma);
    const double field = std::pow(p.delta, p.alpha) / frame.mu;
    const double dw = -(p.gamma - 1.0) / p.gamma;  // w,_k = dw y_k
    ScalarField w = g.enthalpy(p);
    ScalarField Jm = s.fmd.J.pow(-1.0 / p.alpha);

    // K[k][i] = Lambda_ij (A^k_j J^(-1/alpha) - delta^k_j)
    MatrixField K = make_matrix_field(M);
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                if (L(i, j) == 0.0) continue;
                K[k][i] += L(i, j) * (s.fmd.A[k][j] * Jm - (k == j ? 1.0 : 0.0));
            }

    VectorField acc = make_vector_field(M);
    for (int i = 0; i < 3; ++i) {
        ScalarField P = ScalarField::Zero(M);
        for (int l = 0; l < 3; ++l) P += L(i, l) * s.theta[l];
        ScalarField divK = ScalarField::Zero(M);
        for (int k = 0; k < 3; ++k) {
            P += (1.0 + p.alpha) * dw * g.y()[k] * K[k][i];
            divK += g.d(K[k][i], k);
        }
        P += w * divK;
        acc[i] = -damp * s.V[i] - press * P;
        for (int j = 0; j < 3; ++j) {
            acc[i] -= 2.0 * frame.Gamma_star(i, j) * s.V[j];
            if (gf) acc[i] -= field * L(i, j) * gf->G[j];
        }
    }
    return acc;
}

double cfl_step(double h_min, const AffineFrame& frame, const GasParams& p, double cfl)
{
    double wmax = (p.gamma - 1.0) / (2.0 * p.gamma);
    double c2 = (1.0 + p.alpha) * p.delta * std::pow(frame.mu, 3.0 - 3.0 * p.gamma) * wmax;
    if (!(c2 > 0.0)) return std::numeric_limits<double>::infinity();
    return cfl * h_min / std::sqrt(c2);
}

// ---------------------------------------------------------------------------------------------
// Radial model

RadialModel::RadialModel(int n_r, const GasParams& p) : p_(p)
{
    if (n_r < 4) throw Error(ErrorCode::domain, "RadialModel: n_r must be >= 4");
    QuadratureRule gl = gauss_legendre(2 * n_r);
    ext_nodes_ = gl.nodes;
    ext_bary_ = barycentric_weights(ext_nodes_);
    Eigen::MatrixXd D = differentiation_matrix(ext_nodes_);
    Dodd_.resize(n_r, n_r);
    Deven_.resize(n_r, n_r);
    for (int j = 0; j < n_r; ++j)
        for (int i = 0; i < n_r; ++i) {
            Dodd_(j, i) = D(n_r + j, n_r + i) - D(n_r + j, n_r - 1 - i);
            Deven_(j, i) = D(n_r + j, n_r + i) + D(n_r + j, n_r - 1 - i);
        }
    r_.resize(n_r);
    wq_.resize(n_r);
    w_.resize(n_r);
    wr_.resize(n_r);
    m_.resize(n_r);
    for (int j = 0; j < n_r; ++j) {
        double r = gl.nodes[n_r + j];
        r_[j] = r;
        wq_[j] = gl.weights[n_r + j] * r * r;
        w_[j] = enthalpy_r2(r * r, p);
        wr_[j] = enthalpy_dr(r, p);
        m_[j] = epflow::enclosed_mass(p, r);
    }
    h_min_ = 2.0 * r_[0];
    for (int j = 0; j + 1 < n_r; ++j) h_min_ = std::min(h_min_, r_[j + 1] - r_[j]);
}

double RadialModel::eval_odd(const Eigen::VectorXd& f, double s) const
{
    const int n = size();
    std::vector<double> v(2 * n);
    for (int j = 0; j < n; ++j) {
        v[n + j] = f[j];
        v[n - 1 - j] = -f[j];
    }
    return barycentric_interpolate(ext_nodes_, ext_bary_, v, s);
}

double RadialModel::eval_even(const Eigen::VectorXd& f, double s) const
{
    const int n = size();
    std::vector<double> v(2 * n);
    for (int j = 0; j < n; ++j) v[n + j] = v[n - 1 - j] = f[j];
    return barycentric_interpolate(ext_nodes_, ext_bary_, v, s);
}

Eigen::VectorXd RadialModel::force(const Eigen::VectorXd& theta) const
{
    Eigen::VectorXd R = Eigen::Map<const Eigen::VectorXd>(r_.data(), size()) + theta;
    return p_.field_sign * m_.array() / R.array().square();
}

Eigen::VectorXd RadialModel::jacobian(const Eigen::VectorXd& theta) const
{
    Eigen::ArrayXd r = Eigen::Map<const Eigen::ArrayXd>(r_.data(), size());
    Eigen::ArrayXd R = r + theta.array();
    Eigen::ArrayXd Rp = 1.0 + d_odd(theta).array();
    return (Rp * (R / r).square()).matrix();
}

Eigen::VectorXd RadialModel::acceleration(const Eigen::VectorXd& theta, const Eigen::VectorXd& V,
                                          const AffineFrame& frame, bool field_on) const
{
    Eigen::ArrayXd r = Eigen::Map<const Eigen::ArrayXd>(r_.data(), size());
    Eigen::ArrayXd R = r + theta.array();
    Eigen::ArrayXd Rp = 1.0 + d_odd(theta).array();
    Eigen::ArrayXd J = Rp * (R / r).square();
    for (int j = 0; j < size(); ++j)
        if (!(J[j] > 0.0) || !(R[j] > 0.0)) {
            std::ostringstream msg;
            msg << "vacuum degeneracy at tau = " << frame.tau << ": J = " << J[j] << " at radial node " << j
                << " (r = " << r_[j] << ")";
            throw Error(ErrorCode::vacuum_degeneracy, msg.str());
        }
    Eigen::ArrayXd Jm = J.pow(-1.0 / p_.alpha);
    Eigen::ArrayXd a = Jm / Rp - 1.0;      // normal-normal component of K
    Eigen::ArrayXd b = Jm * r / R - 1.0;   // tangential component of K
    Eigen::ArrayXd ap = d_even(a.matrix()).array();
    Eigen::ArrayXd divK = ap + 2.0 * (a - b) / r;
    Eigen::ArrayXd P = theta.array() + (1.0 + p_.alpha) * wr_.array() * a + w_.array() * divK;
    const double press = p_.delta * std::pow(frame.mu, 3.0 - 3.0 * p_.gamma);
    Eigen::ArrayXd acc = -(frame.mu_tau / frame.mu) * V.array() - press * P;
    if (field_on) acc -= std::pow(p_.delta, p_.alpha) / frame.mu * force(theta).array();
    return acc.matrix();
}

AprioriFlags RadialModel::apriori(const Eigen::VectorXd& theta) const
{
    Eigen::ArrayXd r = Eigen::Map<const Eigen::ArrayXd>(r_.data(), size());
    Eigen::VectorXd t1 = d_odd(theta);
    Eigen::VectorXd t2 = d_even(t1);
    Eigen::ArrayXd over_r = theta.array() / r;
    double s0 = theta.cwiseAbs().maxCoeff();
    double s1 = std::max(t1.cwiseAbs().maxCoeff(), over_r.abs().maxCoeff());
    double s2 = std::max(t2.cwiseAbs().maxCoeff(), ((t1.array() - over_r) / r).abs().maxCoeff());
    AprioriFlags f;
    f.theta_w2inf = s0 + s1 + s2;
    Eigen::VectorXd J = jacobian(theta);
    Eigen::VectorXd dJ = d_even(J);
    f.J_w1inf = (J.array() - 1.0).abs().maxCoeff() + dJ.cwiseAbs().maxCoeff();
    return f;
}

namespace {

RadialSnapshot radial_snapshot(const RadialModel& m, const AffineFrame& fr, const Eigen::VectorXd& theta,
                               const Eigen::VectorXd& V)
{
    const GasParams& p = m.params();
    RadialSnapshot s;
    s.tau = fr.tau;
    s.t = fr.t;
    s.mu = fr.mu;
    s.theta = theta;
    s.V = V;
    Eigen::VectorXd J = m.jacobian(theta);
    Eigen::VectorXd Rp = (1.0 + m.d_odd(theta).array()).matrix();
    const double mu3 = fr.mu * fr.mu * fr.mu;
    const double da = std::pow(p.delta, p.alpha);
    // Eulerian mass: int rho 4 pi R_e^2 dR_e with R_e = mu R(r)
    CompensatedSum mass;
    for (int j = 0; j < m.size(); ++j) {
        double r = m.r()[j], R = r + theta[j];
        double rho = da * std::pow(enthalpy_r2(r * r, p), p.alpha) / (mu3 * J[j]);
        mass.add(4.0 * kPi * m.weights()[j] / (r * r) * mu3 * R * R * Rp[j] * rho);
    }
    s.mass = mass.value();
    s.boundary_radius = fr.mu * (1.0 + m.eval_odd(theta, 1.0));
    double dth0 = m.eval_even(m.d_odd(theta), 0.0);
    double J0 = std::pow(1.0 + dth0, 3);
    s.center_density = da * std::pow(enthalpy_r2(0.0, p), p.alpha) / (mu3 * J0);
    s.max_J_dev = (J.array() - 1.0).abs().maxCoeff();
    s.flags = m.apriori(theta);
    return s;
}

}  // namespace

RadialRun run_radial(const AffineTrajectory& traj, const RadialModel& model, const RadialInitialData& init,
                     double tau_max, const StepperConfig& cfg, int snapshot_every)
{
    cfg.validate();
    const GasParams& p = model.params();
    p.validate(true);
    if (!is_isotropic(traj.A0()) || !is_isotropic(traj.A1()))
        throw Error(ErrorCode::domain, "run_radial: A0 and A1 must be multiples of the identity");
    if (tau_max > traj.time_maps().tau_max())
        throw Error(ErrorCode::range, "run_radial: tau_max exceeds the trajectory horizon");
    if (snapshot_every < 1) throw Error(ErrorCode::config, "run_radial: snapshot_every must be >= 1");

    const int n = model.size();
    Eigen::VectorXd theta(n), V(n);
    for (int j = 0; j < n; ++j) {
        double r = model.r()[j];
        theta[j] = init.t1 * r + init.t3 * r * r * r;
        V[j] = init.v1 * r + init.v3 * r * r * r;
    }
    RadialRun run;
    double tau = 0.0;
    AffineFrame fr = frame_at_tau(traj, tau);
    run.snapshots.push_back(radial_snapshot(model, fr, theta, V));
    bool cfl_binding = false;
    while (tau < tau_max) {
        double cfl = cfl_step(model.h_min(), fr, p, cfg.cfl);
        double dt = std::min(cfg.max_dt, cfl);
        if ((cfl < cfg.max_dt) != cfl_binding) {
            cfl_binding = cfl < cfg.max_dt;
            std::ostringstream msg;
            msg << "tau = " << tau << ": dt " << (cfl_binding ? "reduced to CFL bound " : "back to max_dt ") << dt;
            run.log.push_back(msg.str());
        }
        dt = std::min(dt, tau_max - tau);
        if (tau_max - tau - dt < 1e-12 * std::max(1.0, tau_max)) dt = tau_max - tau;
        AffineFrame fh = frame_at_tau(traj, tau + 0.5 * dt), f1 = frame_at_tau(traj, tau + dt);
        Eigen::VectorXd k1x = V, k1v = model.acceleration(theta, V, fr, cfg.field_on);
        Eigen::VectorXd t2 = theta + 0.5 * dt * k1x, v2 = V + 0.5 * dt * k1v;
        Eigen::VectorXd k2x = v2, k2v = model.acceleration(t2, v2, fh, cfg.field_on);
        Eigen::VectorXd t3 = theta + 0.5 * dt * k2x, v3 = V + 0.5 * dt * k2v;
        Eigen::VectorXd k3x = v3, k3v = model.acceleration(t3, v3, fh, cfg.field_on);
        Eigen::VectorXd t4 = theta + dt * k3x, v4 = V + dt * k3v;
        Eigen::VectorXd k4x = v4, k4v = model.acceleration(t4, v4, f1, cfg.field_on);
        theta += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        V += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        tau += dt;
        fr = f1;
        ++run.steps;
        AprioriFlags flags = model.apriori(theta);
        if (flags.tripped()) {
            run.apriori_tripped = true;
            if (cfg.abort_on_apriori) {
                std::ostringstream msg;
                msg << "a priori bound tripped at tau = " << tau << ": |theta|_W2inf = " << flags.theta_w2inf
                    << ", |J - 1|_W1inf = " << flags.J_w1inf;
                throw Error(ErrorCode::apriori_violation, msg.str());
            }
        }
        if (run.steps % snapshot_every == 0 || tau >= tau_max) run.snapshots.push_back(radial_snapshot(model, fr, theta, V));
    }
    return run;
}

PerturbationState embed_radial(const BallGrid& g, const RadialModel& model, double tau, const Eigen::VectorXd& theta,
                               const Eigen::VectorXd& V)
{
    VectorField th = make_vector_field(g.size()), v = make_vector_field(g.size());
    for (Eigen::Index q = 0; q < g.size(); ++q) {
        double r = g.r()[q];
        double a = model.eval_odd(theta, r) / r, b = model.eval_odd(V, r) / r;
        for (int i = 0; i < 3; ++i) {
            th[i][q] = a * g.y()[i][q];
            v[i][q] = b * g.y()[i][q];
        }
    }
    return make_state(g, tau, std::move(th), std::move(v));
}

std::vector<EulerianSample> eulerian_reconstruct(const BallGrid& g, const PerturbationState& s,
                                                 const AffineFrame& frame, const GasParams& p,
                                                 const std::vector<Vec3>& labels)
{
    LocalInterpolator I(g);
    const double detA = frame.A.determinant();
    const double da = std::pow(p.delta, p.alpha);
    std::vector<EulerianSample> out;
    out.reserve(labels.size());
    for (const Vec3& y : labels) {
        auto st = I.stencil(y);
        Vec3 th, v;
        for (int i = 0; i < 3; ++i) {
            th[i] = LocalInterpolator::apply(st, s.theta[i]);
            v[i] = LocalInterpolator::apply(st, s.V[i]);
        }
        double J = LocalInterpolator::apply(st, s.fmd.J);
        EulerianSample e;
        e.label = y;
        Vec3 eta = y + th;
        e.x = frame.A * eta;
        e.rho = da * std::pow(enthalpy(y, p), p.alpha) / (detA * J);
        e.u = frame.Adot * eta + frame.A * v / frame.mu;
        out.push_back(e);
    }
    return out;
}

double eulerian_mass(const BallGrid& g, const PerturbationState& s, const AffineFrame& frame, const GasParams& p)
{
    const double detA = frame.A.determinant();
    ScalarField rho = std::pow(p.delta, p.alpha) * g.enthalpy(p).pow(p.alpha) / (detA * s.fmd.J);
    // dx = det A J dy
    return g.integrate(rho * detA * s.fmd.J);
}

// ---------------------------------------------------------------------------------------------
// Full 3-D stepper

Stepper3D::Stepper3D(const BallGrid& g, const AffineTrajectory& traj, const StepperConfig& cfg)
    : g_(g), traj_(traj), cfg_(cfg)
{
    cfg_.validate();
    traj.params().validate(true);
}

ForceField Stepper3D::compute_force(const PerturbationState& s, const AffineFrame& f)
{
    ++force_evals_;
    ForceField gf = force_field(g_, s.theta, s.fmd, KernelSpec::make(f.Lambda), traj_.params(), cfg_.rule);
    if (!gf.flagged.empty()) {
        std::ostringstream msg;
        msg << "tau = " << s.tau << ": force quadrature non-finite at " << gf.flagged.size() << " nodes";
        throw Error(ErrorCode::vacuum_degeneracy, msg.str());
    }
    return gf;
}

VectorField Stepper3D::accel(const PerturbationState& s, bool refresh_point)
{
    AffineFrame f = frame_at_tau(traj_, s.tau);
    if (!cfg_.field_on) return perturbation_rhs(g_, s, f, nullptr, traj_.params());
    ForceField gf;
    if (cfg_.cadence == 1) {
        gf = compute_force(s, f);
    } else {
        if (refresh_point && steps_ % cfg_.cadence == 0) {
            gf = compute_force(s, f);
            history_.emplace_back(s.tau, gf.G);
            if (history_.size() > 2) history_.erase(history_.begin());
        } else {
            gf.G = history_.back().second;
            if (history_.size() == 2 && history_[1].first > history_[0].first) {
                double x = (s.tau - history_[1].first) / (history_[1].first - history_[0].first);
                for (int i = 0; i < 3; ++i) gf.G[i] += x * (history_[1].second[i] - history_[0].second[i]);
            }
        }
    }
    return perturbation_rhs(g_, s, f, &gf, traj_.params());
}

double Stepper3D::stable_dt(const PerturbationState& s) const
{
    return std::min(cfg_.max_dt, cfl_step(g_.min_spacing(), frame_at_tau(traj_, s.tau), traj_.params(), cfg_.cfl));
}

PerturbationState Stepper3D::step(const PerturbationState& s, double dt)
{
    VectorField k1v = accel(s, true);
    const VectorField& k1x = s.V;
    PerturbationState s2 = make_state(g_, s.tau + 0.5 * dt, axpy(s.theta, 0.5 * dt, k1x), axpy(s.V, 0.5 * dt, k1v));
    VectorField k2v = accel(s2, false);
    const VectorField& k2x = s2.V;
    PerturbationState s3 = make_state(g_, s.tau + 0.5 * dt, axpy(s.theta, 0.5 * dt, k2x), axpy(s.V, 0.5 * dt, k2v));
    VectorField k3v = accel(s3, false);
    const VectorField& k3x = s3.V;
    PerturbationState s4 = make_state(g_, s.tau + dt, axpy(s.theta, dt, k3x), axpy(s.V, dt, k3v));
    VectorField k4v = accel(s4, false);
    const VectorField& k4x = s4.V;
    VectorField th = s.theta, v = s.V;
    for (int i = 0; i < 3; ++i) {
        th[i] += dt / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
        v[i] += dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
    }
    ++steps_;
    return make_state(g_, s.tau + dt, std::move(th), std::move(v));
}

PerturbationState initial_state(const BallGrid& g, const Full3DInitialData& init)
{
    const auto& y = g.y();
    VectorField th = make_vector_field(g.size()), v = make_vector_field(g.size());
    ScalarField bump = 1.0 - g.r().square();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            th[i] += init.theta_lin(i, j) * y[j];
            v[i] += init.v_lin(i, j) * y[j];
        }
    th[0] -= init.theta_rot * y[1];
    th[1] += init.theta_rot * y[0];
    v[0] -= init.v_rot * bump * y[1];
    v[1] += init.v_rot * bump * y[0];
    return make_state(g, 0.0, std::move(th), std::move(v));
}

Full3DRun full3d_short_run(const BallGrid& g, const AffineTrajectory& traj, const Full3DInitialData& init,
                           int n_steps, double dt, const StepperConfig& cfg, int snapshot_every)
{
    if (n_steps < 0 || snapshot_every < 1) throw Error(ErrorCode::config, "full3d_short_run: bad step counts");
    Stepper3D st(g, traj, cfg);
    Full3DRun run;
    PerturbationState s = initial_state(g, init);
    run.snapshots.push_back(s);
    for (int k = 0; k < n_steps; ++k) {
        double h = st.stable_dt(s);
        double use = std::min(dt, h);
        if (use < dt && run.log.empty()) {
            std::ostringstream msg;
            msg << "step " << k << ": dt reduced from " << dt << " to CFL bound " << use;
            run.log.push_back(msg.str());
        }
        if (s.tau + use > traj.time_maps().tau_max())
            throw Error(ErrorCode::range, "full3d_short_run: run exceeds the trajectory horizon");
        s = st.step(s, use);
        ++run.steps;
        AprioriFlags fl = apriori_flags(g, s);
        if (fl.tripped() && cfg.abort_on_apriori) {
            std::ostringstream msg;
            msg << "a priori bound tripped at tau = " << s.tau << ": |theta|_W2inf = " << fl.theta_w2inf
                << ", |J - 1|_W1inf = " << fl.J_w1inf;
            throw Error(ErrorCode::apriori_violation, msg.str());
        }
        if (run.steps % snapshot_every == 0) run.snapshots.push_back(s);
    }
    for (const auto& l : st.log()) run.log.push_back(l);
    run.force_evaluations = st.force_evaluations();
    return run;
}

}  // namespace epflow
