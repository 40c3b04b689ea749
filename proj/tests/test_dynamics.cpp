#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "epflow/dynamics.hpp"
#include "epflow/profiles.hpp"

#include <cmath>
#include <numbers>

using namespace epflow;

namespace {

constexpr double kPi = std::numbers::pi;

double max_abs(const VectorField& F)
{
    double m = 0.0;
    for (int i = 0; i < 3; ++i) m = std::max(m, F[i].abs().maxCoeff());
    return m;
}

AffineTrajectory trajectory(double gamma, double delta, const Mat3& A1, double t_end, int sign = 1)
{
    AffineIVP ivp;
    ivp.params = GasParams::make(gamma, delta, sign);
    ivp.A1 = A1;
    ivp.t_end = t_end;
    return integrate(ivp);
}

Mat3 aniso()
{
    Mat3 A1 = Vec3(1.2, 1.0, 0.8).asDiagonal();
    return A1 / std::cbrt(A1.determinant());
}

PolarRule coarse_rule()
{
    PolarRule r;
    r.n_u = 4;
    r.n_psi = 8;
    r.n_rho = 4;
    return r;
}

}  // namespace

TEST_CASE("pure Euler: zero data is a fixed point")
{
    BallGrid g(8, 6, 12);
    AffineTrajectory tr = trajectory(1.5, 1e-2, aniso(), 50.0);
    StepperConfig cfg;
    cfg.field_on = false;
    cfg.mode = StepMode::full_3d;
    PerturbationState s = initial_state(g, {});
    VectorField acc = perturbation_rhs(g, s, frame_at_tau(tr, 0.3), nullptr, tr.params());
    CHECK(max_abs(acc) == 0.0);
    Full3DRun run = full3d_short_run(g, tr, {}, 100, 0.02, cfg, 100);
    CHECK(run.steps == 100);
    CHECK(max_abs(run.snapshots.back().theta) == 0.0);
    CHECK(max_abs(run.snapshots.back().V) == 0.0);
    CHECK(run.force_evaluations == 0);
}

TEST_CASE("background force drives a radial acceleration")
{
    BallGrid g(8, 8, 16);
    GasParams p = GasParams::make(1.5, 1e-2);
    PerturbationState s = make_state(g, 0.0, make_vector_field(g.size()), make_vector_field(g.size()));
    AffineFrame f = frame_from_state(Mat3::Identity(), Mat3::Identity());
    PolarRule rule;
    rule.n_u = rule.n_rho = 12;
    rule.n_psi = 24;
    ForceField gf = force_field(g, KernelSpec::make(Mat3::Identity()), p, rule);
    VectorField acc = perturbation_rhs(g, s, f, &gf, p);
    double worst = 0.0;
    for (Eigen::Index q = 0; q < g.size(); ++q) {
        double r = g.r()[q];
        double expect = -std::pow(p.delta, p.alpha) * enclosed_mass(p, r) / (r * r);
        for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(acc[i][q] - expect * g.y()[i][q] / r));
    }
    CHECK(worst < 1e-13);
}

TEST_CASE("pressure and Lambda theta share the delta prefactor")
{
    BallGrid g(8, 8, 16);
    VectorField th = make_vector_field(g.size());
    th[0] = 0.01 * g.y()[0] * g.y()[1];
    th[2] = 0.02 * g.y()[2] * g.r().square();
    PerturbationState s = make_state(g, 0.0, th, make_vector_field(g.size()));
    Mat3 A;
    A << 1.1, 0.1, 0.0, 0.0, 0.95, 0.05, 0.0, 0.0, 1.0;
    AffineFrame f = frame_from_state(A, Mat3::Identity());
    VectorField a1 = perturbation_rhs(g, s, f, nullptr, GasParams::make(2.0, 1e-2));
    VectorField a2 = perturbation_rhs(g, s, f, nullptr, GasParams::make(2.0, 2e-2));
    for (int i = 0; i < 3; ++i) CHECK((a2[i] - 2.0 * a1[i]).abs().maxCoeff() <= 1e-15 * a1[i].abs().maxCoeff());
    CHECK(max_abs(a1) > 0.0);
}

TEST_CASE("radial model agrees with the 3-D right-hand side")
{
    GasParams p = GasParams::make(1.5, 5e-2);
    RadialModel m(12, p);
    BallGrid g(12, 8, 16);
    Eigen::VectorXd th(m.size()), v(m.size());
    for (int j = 0; j < m.size(); ++j) {
        double r = m.r()[j];
        th[j] = 0.01 * r + 0.02 * r * r * r;
        v[j] = 0.03 * r;
    }
    AffineFrame f = frame_from_state(1.3 * Mat3::Identity(), 0.9 * Mat3::Identity(), 0.0, 0.0);
    PerturbationState s = embed_radial(g, m, 0.0, th, v);
    PolarRule rule;
    rule.n_u = rule.n_rho = 12;
    rule.n_psi = 24;
    ForceField gf = force_field(g, s.theta, s.fmd, KernelSpec::make(f.Lambda), p, rule);
    VectorField a3 = perturbation_rhs(g, s, f, &gf, p);
    Eigen::VectorXd ar = m.acceleration(th, v, f, true);
    double worst = 0.0, scale = ar.cwiseAbs().maxCoeff();
    for (Eigen::Index q = 0; q < g.size(); ++q) {
        int j = static_cast<int>(q / (g.n_theta() * g.n_phi()));
        for (int i = 0; i < 3; ++i)
            worst = std::max(worst, std::abs(a3[i][q] - ar[j] * g.y()[i][q] / g.r()[q]));
    }
    // theta is interpolated to fourth order inside the 3-D convolution
    CHECK(worst < 1e-4 * scale);

    // without the field both are spectral and agree to round-off
    VectorField b3 = perturbation_rhs(g, s, f, nullptr, p);
    Eigen::VectorXd br = m.acceleration(th, v, f, false);
    double w2 = 0.0;
    for (Eigen::Index q = 0; q < g.size(); ++q) {
        int j = static_cast<int>(q / (g.n_theta() * g.n_phi()));
        for (int i = 0; i < 3; ++i) w2 = std::max(w2, std::abs(b3[i][q] - br[j] * g.y()[i][q] / g.r()[q]));
    }
    CHECK(w2 < 1e-12 * br.cwiseAbs().maxCoeff());

    GasParams pn = p;
    pn.field_sign = -1;
    RadialModel mn(12, pn);
    CHECK((mn.force(th) + m.force(th)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("radial runs conserve mass for both field signs")
{
    for (int sign : {1, -1}) {
        AffineTrajectory tr = trajectory(1.5, 1e-2, Mat3::Identity(), 500.0, sign);
        RadialModel m(16, tr.params());
        StepperConfig cfg;
        cfg.max_dt = 0.05;
        RadialInitialData init;
        init.t1 = 0.005;
        init.v3 = 0.005;
        RadialRun run = run_radial(tr, m, init, 4.0, cfg, 10);
        CHECK_FALSE(run.apriori_tripped);
        double m0 = run.snapshots.front().mass;
        CHECK(m0 == doctest::Approx(mass_closed_form(tr.params())).epsilon(1e-12));
        for (const auto& s : run.snapshots) CHECK(std::abs(s.mass / m0 - 1.0) < 1e-6);
        CHECK(run.snapshots.back().tau == doctest::Approx(4.0).epsilon(1e-14));
    }
}

TEST_CASE("radial run: linear expansion and scattering")
{
    AffineTrajectory tr = trajectory(1.5, 1e-2, Mat3::Identity(), 4000.0);
    RadialModel m(16, tr.params());
    StepperConfig cfg;
    cfg.max_dt = 0.05;
    RadialRun run = run_radial(tr, m, {}, 7.5, cfg, 5);
    const auto& last = run.snapshots.back();
    const auto* mid = &run.snapshots.front();
    for (const auto& s : run.snapshots)
        if (s.t <= last.t / 10.0) mid = &s;
    double drift = std::abs(std::pow(last.t, 3) * last.center_density / (std::pow(mid->t, 3) * mid->center_density) - 1.0);
    CHECK(drift < 0.05);
    CHECK(last.boundary_radius / last.t == doctest::Approx(last.mu / last.t).epsilon(1e-3));
}

TEST_CASE("numerical aborts")
{
    AffineTrajectory tr = trajectory(1.5, 1e-2, Mat3::Identity(), 100.0);
    RadialModel m(12, tr.params());
    StepperConfig cfg;
    RadialInitialData folded;
    folded.t1 = -1.2;
    try {
        run_radial(tr, m, folded, 1.0, cfg);
        FAIL("expected an abort");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::vacuum_degeneracy);
        CHECK(std::string(e.what()).find("radial node") != std::string::npos);
    }
    RadialInitialData big;
    big.t1 = 0.5;
    try {
        run_radial(tr, m, big, 1.0, cfg);
        FAIL("expected an abort");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::apriori_violation);
    }
    cfg.abort_on_apriori = false;
    CHECK(run_radial(tr, m, big, 0.1, cfg).apriori_tripped);

    AffineTrajectory an = trajectory(1.5, 1e-2, aniso(), 100.0);
    CHECK_THROWS_AS(run_radial(an, RadialModel(12, an.params()), {}, 1.0, StepperConfig{}), Error);
    StepperConfig bad;
    bad.cfl = 1.5;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad.cfl = 0.5;
    bad.cadence = 0;
    CHECK_THROWS_AS(bad.validate(), Error);

    BallGrid g(8, 6, 12);
    VectorField th = make_vector_field(g.size());
    th[0] = -2.0 * g.y()[0];
    CHECK_THROWS_AS(make_state(g, 0.0, th, make_vector_field(g.size())), Error);
}

TEST_CASE("CFL reduction is logged")
{
    AffineTrajectory tr = trajectory(1.5, 0.3, Mat3::Identity(), 100.0);
    RadialModel m(16, tr.params());
    StepperConfig cfg;
    cfg.max_dt = 1.0;
    RadialRun run = run_radial(tr, m, {}, 0.2, cfg);
    REQUIRE_FALSE(run.log.empty());
    CHECK(run.log.front().find("CFL") != std::string::npos);
    CHECK(run.steps > 1);
}

TEST_CASE("Eulerian reconstruction")
{
    BallGrid g(8, 8, 16);
    GasParams p = GasParams::make(1.5, 1e-2);
    Mat3 A;
    A << 1.1, 0.1, 0.0, 0.0, 0.95, 0.05, 0.0, 0.0, 1.0;
    Mat3 Ad;
    Ad << 1.0, 0.2, 0.0, 0.1, 0.8, 0.0, 0.0, 0.0, 1.1;
    AffineFrame f = frame_from_state(A, Ad);
    PerturbationState s0 = initial_state(g, {});
    std::vector<Vec3> labels = {Vec3(0.1, 0.2, 0.3), Vec3(-0.5, 0.1, 0.6), Vec3(0, 0, 0.05)};
    auto es = eulerian_reconstruct(g, s0, f, p, labels);
    for (const auto& e : es) {
        AffineFieldSample a = affine_density_velocity(f, e.x, p);
        CHECK(e.rho == doctest::Approx(a.rho).epsilon(1e-13));
        CHECK((e.u - a.u).norm() < 1e-13);
    }
    Full3DInitialData init;
    init.theta_lin(0, 1) = 0.05;
    init.theta_rot = 0.03;
    init.v_rot = 0.1;
    PerturbationState s = initial_state(g, init);
    CHECK(eulerian_mass(g, s, f, p) == doctest::Approx(eulerian_mass(g, s0, f, p)).epsilon(1e-13));
    CHECK(eulerian_mass(g, s0, f, p) == doctest::Approx(mass_closed_form(p)).epsilon(1e-6));
}

TEST_CASE("3-D stepping: RK4 order, cadence and the radial oracle")
{
    BallGrid g(8, 6, 12);
    AffineTrajectory tr = trajectory(1.5, 1e-2, aniso(), 50.0);
    StepperConfig cfg;
    cfg.mode = StepMode::full_3d;
    cfg.cadence = 1;
    cfg.rule = coarse_rule();
    Full3DInitialData init;
    init.theta_lin(0, 1) = 0.02;
    init.v_rot = 0.05;
    init.v_lin(2, 2) = 0.03;
    std::vector<PerturbationState> ends;
    for (int n : {8, 16, 32}) ends.push_back(full3d_short_run(g, tr, init, n, 0.4 / n, cfg, n).snapshots.back());
    auto diff = [&](const PerturbationState& a, const PerturbationState& b) {
        double m = 0.0;
        for (int i = 0; i < 3; ++i) m = std::max({m, (a.theta[i] - b.theta[i]).abs().maxCoeff(), (a.V[i] - b.V[i]).abs().maxCoeff()});
        return m;
    };
    double e1 = diff(ends[0], ends[1]), e2 = diff(ends[1], ends[2]);
    CHECK(std::log2(e1 / e2) > 3.5);

    // cadence 5 stays close to the stage-consistent run
    StepperConfig c5 = cfg;
    c5.cadence = 5;
    Full3DRun r5 = full3d_short_run(g, tr, init, 32, 0.0125, c5, 32);
    CHECK(r5.force_evaluations == 7);
    CHECK(diff(r5.snapshots.back(), ends[2]) < 1e-2 * max_abs(ends[2].V));

    // isotropic radial data against the radial model
    AffineTrajectory iso = trajectory(1.5, 1e-2, Mat3::Identity(), 50.0);
    BallGrid gr(8, 6, 12);
    Full3DInitialData rinit;
    rinit.theta_lin = 0.02 * Mat3::Identity();
    rinit.v_lin = -0.01 * Mat3::Identity();
    Full3DRun r3 = full3d_short_run(gr, iso, rinit, 10, 0.05, cfg, 10);
    RadialModel m(8, iso.params());
    RadialInitialData ri;
    ri.t1 = 0.02;
    ri.v1 = -0.01;
    StepperConfig rc;
    rc.max_dt = 0.05;
    RadialRun rr = run_radial(iso, m, ri, 0.5, rc, 10);
    const PerturbationState& s3 = r3.snapshots.back();
    CHECK(s3.tau == doctest::Approx(0.5).epsilon(1e-12));
    double worst = 0.0, scale = rr.snapshots.back().theta.cwiseAbs().maxCoeff();
    for (Eigen::Index q = 0; q < gr.size(); ++q) {
        int j = static_cast<int>(q / (gr.n_theta() * gr.n_phi()));
        for (int i = 0; i < 3; ++i)
            worst = std::max(worst, std::abs(s3.theta[i][q] - rr.snapshots.back().theta[j] * gr.y()[i][q] / gr.r()[q]));
    }
    CHECK(worst < 1e-3 * scale);
}

TEST_CASE("anisotropic background: non-radial force with gradient structure")
{
    BallGrid g(10, 10, 20);
    AffineTrajectory tr = trajectory(1.5, 1e-2, aniso(), 50.0);
    AffineFrame f = frame_at_tau(tr, 0.5);
    PolarRule rule;
    rule.n_u = rule.n_rho = 12;
    rule.n_psi = 24;
    ForceField gf = force_field(g, KernelSpec::make(f.Lambda), tr.params(), rule);
    // tangential component of G
    double tang = 0.0;
    for (Eigen::Index q = 0; q < g.size(); ++q) {
        Vec3 y(g.y()[0][q], g.y()[1][q], g.y()[2][q]);
        Vec3 G(gf.G[0][q], gf.G[1][q], gf.G[2][q]);
        tang = std::max(tang, (G - G.dot(y) / y.squaredNorm() * y).norm());
    }
    CHECK(tang > 1e-3);
    VectorField LG = make_vector_field(g.size()), LiG = make_vector_field(g.size());
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            LG[i] += f.Lambda(i, j) * gf.G[j];
            LiG[i] += f.Lambda_inv(i, j) * gf.G[j];
        }
    FlowMapDerivatives id = identity_flow_map(g);
    LieOperators good = lie_operators(g, LG, id, f.Lambda);
    LieOperators bad = lie_operators(g, LiG, id, f.Lambda);
    double cg = 0.0, cb = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            cg = std::max(cg, good.curl_lambda[i][j].abs().maxCoeff());
            cb = std::max(cb, bad.curl_lambda[i][j].abs().maxCoeff());
        }
    CHECK(cg < 1e-6);
    CHECK(cb > 1e3 * cg);
}
