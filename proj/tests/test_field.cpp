#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "epflow/affine.hpp"
#include "epflow/field.hpp"
#include "epflow/profiles.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace epflow;

namespace {

constexpr double kPi = std::numbers::pi;

Vec3 node(const BallGrid& g, Eigen::Index q) { return Vec3(g.y()[0][q], g.y()[1][q], g.y()[2][q]); }

// Potential and gradient of a homoeoidal density c^alpha (1 - m^2)^alpha on the ellipsoid with
// semi-axes a, by the classical one-dimensional integral over confocal shells.
struct EllipsoidOracle {
    Vec3 a;
    double c, alpha;

    double psi(double q) const
    {
        q = std::min(q, 1.0);
        return std::pow(c, alpha) * (1.0 - std::pow(1.0 - q, alpha + 1.0)) / (alpha + 1.0);
    }
    double m2(const Vec3& x, double l) const
    {
        double s = 0.0;
        for (int i = 0; i < 3; ++i) s += x[i] * x[i] / (a[i] * a[i] + l);
        return s;
    }
    double delta(double l) const { return std::sqrt((a[0] * a[0] + l) * (a[1] * a[1] + l) * (a[2] * a[2] + l)); }

    double potential(const Vec3& x) const
    {
        auto f = [&](double l) { return (psi(1.0) - psi(m2(x, l))) / delta(l); };
        boost::math::quadrature::exp_sinh<double> es;
        return kPi * a.prod() * es.integrate(f, 1e-14);
    }
    Vec3 gradient(const Vec3& x) const
    {
        Vec3 g;
        for (int i = 0; i < 3; ++i) {
            auto f = [&](double l) {
                double q = m2(x, l);
                double dpsi = q < 1.0 ? std::pow(c, alpha) * std::pow(1.0 - q, alpha) : 0.0;
                return dpsi * 2.0 * x[i] / (a[i] * a[i] + l) / delta(l);
            };
            boost::math::quadrature::exp_sinh<double> es;
            g[i] = -kPi * a.prod() * es.integrate(f, 1e-14);
        }
        return g;
    }
};

}  // namespace

TEST_CASE("green kernel")
{
    KernelSpec id = KernelSpec::make(Mat3::Identity());
    CHECK(green_kernel(id, Vec3(2, 0, 0)) == doctest::Approx(0.5));
    CHECK_THROWS_AS(green_kernel(id, Vec3::Zero()), Error);
    CHECK_THROWS_AS(KernelSpec::make(2.0 * Mat3::Identity()), Error);

    AffineIVP ivp;
    ivp.params = GasParams::make(1.5, 1e-2);
    ivp.A1 << 1.2, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.2, 0.8;
    ivp.t_end = 20.0;
    AffineTrajectory tr = integrate(ivp);
    std::mt19937 rng(3);
    std::normal_distribution<double> n01;
    double worst = 0.0;
    for (double t : {0.0, 5.0, 20.0}) {
        KernelSpec k = KernelSpec::make(frame_at(tr, t).Lambda);
        for (int i = 0; i < 50; ++i) {
            Vec3 y(n01(rng), n01(rng), n01(rng));
            y.normalize();
            CHECK(green_kernel(k, 2.0 * y) == doctest::Approx(green_kernel(k, y) / 2.0).epsilon(1e-14));
            Vec3 gr = green_gradient(k, y);
            worst = std::max(worst, gr.norm() * y.squaredNorm());
            double h = 1e-6;
            for (int c = 0; c < 3; ++c) {
                Vec3 e = Vec3::Zero();
                e[c] = h;
                double fd = (green_kernel(k, y + e) - green_kernel(k, y - e)) / (2 * h);
                CHECK(fd == doctest::Approx(gr[c]).epsilon(1e-7));
            }
        }
    }
    CHECK(worst < 10.0);
}

TEST_CASE("background potential: radial oracles")
{
    GasParams p = GasParams::make(2.0, 1.0);
    KernelSpec id = KernelSpec::make(Mat3::Identity());
    PolarRule rule;
    std::vector<Vec3> t = {Vec3::Zero(), Vec3(0.3, 0.1, -0.2), Vec3(0, 0, 0.95), Vec3(0.7, -0.7, 0.05),
                           Vec3(2, 0, 0), Vec3(0, 1.2, 1.0)};
    double est = 0.0;
    std::vector<double> v0 = background_potential(p, id, t, rule, &est);
    std::vector<double> v = background_potential(p, id, t, rule.refined(2));
    CHECK(v[0] == doctest::Approx(kPi / 4.0).epsilon(1e-12));
    for (std::size_t i = 0; i < t.size(); ++i) {
        double r = t[i].norm();
        // 1-D oracle by adaptive quadrature, independent of the closed forms.
        auto inner = [&](double s) { return 4.0 * kPi * s * s * 0.25 * (1 - s * s); };
        auto outer = [&](double s) { return 4.0 * kPi * s * 0.25 * (1 - s * s); };
        using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
        double orc = r < 1.0 ? GK::integrate(inner, 0.0, r) / std::max(r, 1e-300) + GK::integrate(outer, r, 1.0)
                             : GK::integrate(inner, 0.0, 1.0) / r;
        if (r == 0.0) orc = GK::integrate(outer, 0.0, 1.0);
        CHECK(v0[i] == doctest::Approx(orc).epsilon(1e-6));
        CHECK(v[i] == doctest::Approx(orc).epsilon(1e-11));
        CHECK(radial_background_potential(p, r) == doctest::Approx(orc).epsilon(1e-12));
    }
    CHECK(std::abs(v[4] - total_mass(frame_from_state(Mat3::Identity(), Mat3::Identity()), p).value / 2.0) < 1e-9);
    CHECK(est < 0.05);
    CHECK(est > 1e-7);
}

TEST_CASE("background potential: anisotropic Lambda against the ellipsoid oracle")
{
    for (double gamma : {2.0, 1.5}) {
        GasParams p = GasParams::make(gamma, 1.0);
        Vec3 d(1.4, 1.0, 1.0 / 1.4);
        KernelSpec k = KernelSpec::make(d.asDiagonal());
        EllipsoidOracle orc{d.cwiseInverse().cwiseSqrt(), (gamma - 1) / (2 * gamma), p.alpha};
        std::vector<Vec3> t = {Vec3::Zero(), Vec3(0.3, 0.1, -0.2), Vec3(0.1, 0.85, 0.2), Vec3(1.5, 0.5, 0.0)};
        PolarRule rule;
        rule.n_u = rule.n_rho = 12;
        rule.n_psi = 24;
        std::vector<double> v = background_potential(p, k, t, rule);
        for (std::size_t i = 0; i < t.size(); ++i) {
            Vec3 x = d.cwiseSqrt().cwiseInverse().asDiagonal() * t[i];
            CHECK(v[i] == doctest::Approx(orc.potential(x)).epsilon(1e-7));
        }
    }
}

TEST_CASE("force field at theta = 0")
{
    BallGrid g(8, 8, 16);
    GasParams p = GasParams::make(2.0, 1.0);
    KernelSpec id = KernelSpec::make(Mat3::Identity());
    PolarRule rule;
    rule.n_u = rule.n_rho = 12;
    rule.n_psi = 24;
    ForceField f = force_field(g, id, p, rule);
    CHECK(f.flagged.empty());
    CHECK(f.kernel_constant == -1.0);
    double worst = 0.0;
    for (Eigen::Index q = 0; q < g.size(); ++q) {
        double r = g.r()[q];
        double m = kPi * (r * r * r / 3.0 - std::pow(r, 5) / 5.0);
        for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(f.G[i][q] - m / (r * r * r) * g.y()[i][q]));
        CHECK(f.Psi[q] == doctest::Approx(-radial_background_potential(p, r)).epsilon(1e-6));
    }
    CHECK(worst < 1e-12);

    GasParams pn = p;
    pn.field_sign = -1;
    ForceField fn = force_field(g, id, pn, rule);
    for (int i = 0; i < 3; ++i) CHECK((fn.G[i] + f.G[i]).abs().maxCoeff() == 0.0);

    DivCurlReport dc = divcurl_residual(g, f.G, make_vector_field(g.size()), identity_flow_map(g), Mat3::Identity(), p);
    CHECK(dc.curl_norm < 1e-5);
    CHECK(dc.div_norm < 1e-4 * dc.source_norm);
    CHECK(dc.div_norm == doctest::Approx(dc.div_uncorrected_norm).epsilon(1e-12));

    // anisotropic Lambda against the ellipsoid oracle gradient; G = -c Lambda^{-1/2} grad_x V
    Vec3 d(1.3, 1.0, 1.0 / 1.3);
    KernelSpec k = KernelSpec::make(d.asDiagonal());
    ForceField fa = force_field(g, k, p, rule);
    EllipsoidOracle orc{d.cwiseInverse().cwiseSqrt(), 0.25, 1.0};
    for (Eigen::Index q : {Eigen::Index(5), Eigen::Index(300), Eigen::Index(777), g.size() - 3}) {
        Vec3 x = d.cwiseSqrt().cwiseInverse().asDiagonal() * node(g, q);
        Vec3 expect = -(d.cwiseSqrt().cwiseInverse().asDiagonal() * orc.gradient(x));
        for (int i = 0; i < 3; ++i) CHECK(fa.G[i][q] == doctest::Approx(expect[i]).epsilon(1e-5));
    }
}

TEST_CASE("div identity selects the kernel <Lambda^{-1} y, y>")
{
    BallGrid g(8, 8, 16);
    GasParams p = GasParams::make(2.0, 1.0);
    PolarRule rule;
    rule.n_u = rule.n_rho = 12;
    rule.n_psi = 24;
    Mat3 Lam = Vec3(1.3, 1.0, 1.0 / 1.3).asDiagonal();
    VectorField zero = make_vector_field(g.size());
    FlowMapDerivatives id = identity_flow_map(g);
    ForceField good = force_field(g, KernelSpec::make(Lam), p, rule);
    ForceField swapped = force_field(g, KernelSpec::make(Lam.inverse()), p, rule);
    double rg = divcurl_residual(g, good.G, zero, id, Lam, p).div_norm;
    double rs = divcurl_residual(g, swapped.G, zero, id, Lam, p).div_norm;
    CHECK(rg < 1e-3 * rs);
}

TEST_CASE("div/curl identities for a linear perturbation")
{
    BallGrid g(8, 8, 16);
    GasParams p = GasParams::make(2.0, 1.0);
    PolarRule rule;
    rule.n_u = rule.n_rho = 12;
    rule.n_psi = 24;
    Mat3 Mm;
    Mm << 0.3, 0.5, -0.2, 0.1, -0.4, 0.6, 0.2, 0.3, 0.1;
    Mat3 Lam = Vec3(1.2, 1.0, 1.0 / 1.2).asDiagonal();
    KernelSpec k = KernelSpec::make(Lam);
    std::vector<double> unc, cor, curl;
    for (double eps : {1e-2, 5e-3}) {
        VectorField th = make_vector_field(g.size());
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) th[i] += eps * Mm(i, j) * g.y()[j];
        VectorField eta = th;
        for (int i = 0; i < 3; ++i) eta[i] += g.y()[i];
        FlowMapDerivatives fmd = flow_map_derivatives(g, eta);
        ForceField f = force_field(g, th, fmd, k, p, rule);
        CHECK(f.injectivity.injective);
        DivCurlReport dc = divcurl_residual(g, f.G, th, fmd, Lam, p);
        unc.push_back(dc.div_uncorrected_norm);
        cor.push_back(dc.div_norm);
        curl.push_back(dc.curl_norm);
    }
    double slope = std::log(unc[0] / unc[1]) / std::log(2.0);
    CHECK(slope == doctest::Approx(1.0).epsilon(0.1));
    CHECK(cor[0] < 0.05 * unc[0]);
    CHECK(curl[0] < 0.05 * unc[0]);
}

TEST_CASE("normal reconstruction")
{
    BallGrid g(10, 10, 20);
    Mat3 Lam;
    Lam << 1.2, 0.1, 0.0, 0.1, 0.9, 0.05, 0.0, 0.05, 1.0;
    Lam /= std::cbrt(Lam.determinant());
    for (const Mat3& L : {Mat3(Mat3::Identity()), Lam}) {
        NormalReport lin = normal_reconstruction(g, g.y(), L);
        CHECK(lin.max_error < 1e-10);
        CHECK(lin.min_L > 0.0);
        VectorField P = {g.y()[0] * g.y()[1] * g.y()[2] + g.y()[0].pow(3), g.y()[1] * g.y()[1] - g.y()[2],
                         g.y()[0] * g.y()[2].pow(2) + 0.5};
        NormalReport poly = normal_reconstruction(g, P, L);
        CHECK(poly.max_error < 1e-10);
    }
    // Rotation field: curl is non-zero and the reconstruction still holds.
    VectorField rot = {-g.y()[1], g.y()[0], ScalarField::Zero(g.size())};
    CHECK(normal_reconstruction(g, rot, Lam).max_error < 1e-10);

    // Radial force from quadrature, reconstructed from the Poisson source and zero curl.
    GasParams p = GasParams::make(2.0, 1.0);
    PolarRule rule;
    rule.n_u = rule.n_rho = 12;
    rule.n_psi = 24;
    ForceField f = force_field(g, KernelSpec::make(Mat3::Identity()), p, rule);
    ScalarField div = 4.0 * kPi * g.enthalpy(p);
    MatrixField curl = make_matrix_field(g.size());
    NormalReport rad = normal_reconstruction(g, f.G, Mat3::Identity(), &div, &curl);
    CHECK(rad.max_error < 1e-5);
}
