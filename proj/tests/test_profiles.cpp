#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "epflow/profiles.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>

using namespace epflow;

TEST_CASE("enthalpy closed forms")
{
    GasParams p = GasParams::make(1.5, 1.0);
    CHECK(enthalpy(Vec3::Zero(), p) == doctest::Approx(1.0 / 6.0));
    CHECK(enthalpy(Vec3(1, 0, 0), p) == 0.0);
    CHECK(enthalpy(Vec3(0, 2, 0), p) == 0.0);
    GasParams q = GasParams::make(2.0, 1.0);
    CHECK(enthalpy(Vec3(std::sqrt(0.25), std::sqrt(0.25), 0), q) == doctest::Approx(0.125));
    for (double r : {0.1, 0.5, 0.99, 1.0}) CHECK(enthalpy_dr(r, p) < 0.0);
}

TEST_CASE("affine density and velocity")
{
    GasParams p = GasParams::make(2.0, 1.0);
    AffineFrame f = frame_from_state(Mat3::Identity(), Mat3::Identity());
    CHECK(affine_density_velocity(f, Vec3::Zero(), p).rho == doctest::Approx(0.25));

    Mat3 A;
    A << 2.0, 0.3, 0.0, 0.0, 1.5, 0.1, 0.2, 0.0, 0.7;
    Mat3 b;
    b << 1.0, 0.2, 0.0, -0.1, 0.9, 0.0, 0.0, 0.3, 1.1;
    AffineFrame g = frame_from_state(A, b);
    AffineFieldSample edge = affine_density_velocity(g, A * Vec3(0, 1, 0), p);
    CHECK(edge.rho == 0.0);
    CHECK_FALSE(edge.inside);
    AffineFieldSample s = affine_density_velocity(g, A * Vec3(1, 0, 0), p);
    CHECK((s.u - b.col(0)).norm() < 1e-14);
    AffineFieldSample in = affine_density_velocity(g, A * Vec3(0.2, 0.1, 0.3), p);
    CHECK(in.inside);
    CHECK(in.rho > 0.0);
}

TEST_CASE("total mass: closed form, frame invariance, delta scaling")
{
    GasParams p = GasParams::make(2.0, 1.0);
    AffineFrame id = frame_from_state(Mat3::Identity(), Mat3::Identity());
    MassResult m = total_mass(id, p);
    CHECK(m.converged);
    CHECK(m.value == doctest::Approx(0.25 * 8.0 * std::numbers::pi / 15.0).epsilon(1e-12));
    // Independent radial oracle by adaptive Gauss-Kronrod.
    auto f = [](double r) { return 4.0 * std::numbers::pi * r * r * 0.25 * (1.0 - r * r); };
    double oracle = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, 1.0);
    CHECK(m.value == doctest::Approx(oracle).epsilon(1e-12));

    for (double gamma : {1.5, 4.0 / 3.0, 1.6, 1.2}) {
        GasParams g = GasParams::make(gamma, 0.3);
        double a = g.alpha;
        auto fr = [&](double r) { return 4.0 * std::numbers::pi * r * r * std::pow(0.3 * (gamma - 1) / (2 * gamma) * (1 - r * r), a); };
        double orc = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(fr, 0.0, 1.0, 15, 1e-14);
        CHECK(mass_closed_form(g) == doctest::Approx(orc).epsilon(1e-10));
        Mat3 A;
        A << 3.0, 0.5, 0.0, 0.1, 2.0, 0.0, 0.0, 0.4, 1.2;
        MassResult m1 = total_mass(id, g), m2 = total_mass(frame_from_state(A, Mat3::Identity()), g);
        CHECK(m1.value == doctest::Approx(m2.value).epsilon(1e-10));
        CHECK(m1.value == doctest::Approx(orc).epsilon(1e-6));
    }
    GasParams g1 = GasParams::make(1.5, 0.1), g2 = GasParams::make(1.5, 0.2);
    CHECK(total_mass(id, g2).value / total_mass(id, g1).value == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("admissibility checks")
{
    AdmissibilityReport r = admissibility_checks(GasParams::make(1.5, 0.01), 4);
    CHECK(r.physical_vacuum);
    CHECK(r.collar_max_dr < 0.0);
    CHECK(r.weight_finite);
    CHECK(r.gamma_class == GammaClass::integer_alpha);
    CHECK(r.terms.size() == 5);
    // a > alpha: X_r^a w^alpha is a polynomial with no boundary factor left
    CHECK(r.refinement_ratio == doctest::Approx(1.0).epsilon(1e-3));

    CHECK(classify_gamma(1.6) == GammaClass::not_covered);
    CHECK(classify_gamma(4.0 / 3.0) == GammaClass::integer_alpha);
    CHECK(classify_gamma(1.05) == GammaClass::near_isothermal);
    CHECK(classify_gamma(2.0) == GammaClass::not_covered);
    AdmissibilityReport r16 = admissibility_checks(GasParams::make(1.6, 0.01), 2);
    CHECK_FALSE(r16.warning.empty());
    CHECK(r16.weight_finite);

    // (1-u)^{3 alpha - a} stops being integrable once a >= 3 alpha + 1 = 6 at gamma = 1.6.
    AdmissibilityReport deep = admissibility_checks(GasParams::make(1.6, 0.01), 8);
    CHECK_FALSE(deep.weight_finite);
    CHECK(deep.terms[8].divergent);
    CHECK_FALSE(deep.terms[2].divergent);
}
