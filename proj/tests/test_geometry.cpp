#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "epflow/geometry.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace epflow;

namespace {

constexpr double kPi = std::numbers::pi;

double max_abs(const ScalarField& f) { return f.abs().maxCoeff(); }

// Random cubic polynomial in (y1, y2, y3) with fixed seed.
struct Poly3 {
    std::vector<std::array<int, 3>> powers;
    std::vector<double> coef;

    explicit Poly3(unsigned seed, int degree = 4)
    {
        std::mt19937 rng(seed);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int a = 0; a <= degree; ++a)
            for (int b = 0; a + b <= degree; ++b)
                for (int c = 0; a + b + c <= degree; ++c) {
                    powers.push_back({a, b, c});
                    coef.push_back(u(rng));
                }
    }
    ScalarField eval(const BallGrid& g) const
    {
        ScalarField f = ScalarField::Zero(g.size());
        for (std::size_t t = 0; t < coef.size(); ++t)
            f += coef[t] * g.y()[0].pow(powers[t][0]) * g.y()[1].pow(powers[t][1]) * g.y()[2].pow(powers[t][2]);
        return f;
    }
    double eval(const Vec3& y) const
    {
        double s = 0.0;
        for (std::size_t t = 0; t < coef.size(); ++t)
            s += coef[t] * std::pow(y[0], powers[t][0]) * std::pow(y[1], powers[t][1]) * std::pow(y[2], powers[t][2]);
        return s;
    }
    // exact d_i
    ScalarField deriv(const BallGrid& g, int i) const
    {
        ScalarField f = ScalarField::Zero(g.size());
        for (std::size_t t = 0; t < coef.size(); ++t) {
            auto p = powers[t];
            if (p[i] == 0) continue;
            double c = coef[t] * p[i];
            p[i] -= 1;
            f += c * g.y()[0].pow(p[0]) * g.y()[1].pow(p[1]) * g.y()[2].pow(p[2]);
        }
        return f;
    }
};

}  // namespace

TEST_CASE("grid quadrature")
{
    BallGrid g(32, 16, 32);
    CHECK(std::abs(g.integrate(ScalarField::Ones(g.size())) - 4.0 * kPi / 3.0) < 1e-6);
    CHECK(std::abs(g.integrate(g.r() * g.r()) - 4.0 * kPi / 5.0) < 1e-12);
    CHECK(std::abs(g.integrate(g.y()[0])) < 1e-14);
    CHECK(g.psi().minCoeff() >= 0.0);
    CHECK(g.psi().maxCoeff() <= 1.0);
    for (Eigen::Index q = 0; q < g.size(); ++q) {
        if (g.r()[q] >= 0.75) CHECK(g.psi()[q] == 1.0);
        if (g.r()[q] <= 0.25) CHECK(g.psi()[q] == 0.0);
    }
    CHECK(g.r().minCoeff() > 0.0);
    CHECK_THROWS_AS(BallGrid(3, 8, 8), Error);
    CHECK_THROWS_AS(BallGrid(8, 8, 9), Error);

    // Smooth non-polynomial integrand converges under refinement.
    auto gauss = [](const BallGrid& gr) { return gr.integrate((-(gr.r() * gr.r())).exp() * (1.0 + gr.y()[2] * gr.y()[2])); };
    double e1 = std::abs(gauss(BallGrid(4, 4, 8)) - gauss(BallGrid(24, 16, 32)));
    double e2 = std::abs(gauss(BallGrid(8, 8, 16)) - gauss(BallGrid(24, 16, 32)));
    CHECK(e2 < 1e-3 * e1);
}

TEST_CASE("vector fields on simple polynomials")
{
    BallGrid g(16, 16, 32);
    ScalarField r2 = g.r() * g.r();
    CHECK(max_abs(g.X_r(r2) - 2.0 * r2) < 1e-11);
    ScalarField y1y2 = g.y()[0] * g.y()[1];
    CHECK(max_abs(g.slash(y1y2, 0, 1) - (g.y()[0] * g.y()[0] - g.y()[1] * g.y()[1])) < 1e-11);
    ScalarField y1sq = g.y()[0] * g.y()[0];
    ScalarField comm = g.d(g.X_r(y1sq), 0) - g.X_r(g.d(y1sq, 0));
    CHECK(max_abs(comm - 2.0 * g.y()[0]) < 1e-10);
}

TEST_CASE("commutator identities and the decomposition of d_i on random polynomials")
{
    BallGrid g(16, 16, 32);
    for (unsigned seed : {1u, 2u, 3u}) {
        Poly3 P(seed, 5);
        ScalarField f = P.eval(g);
        double scale = std::max(1.0, max_abs(f));
        for (int i = 0; i < 3; ++i) CHECK(max_abs(g.d(f, i) - P.deriv(g, i)) < 1e-10 * scale);
        for (int j = 0; j < 3; ++j)
            for (int i = 0; i < 3; ++i) {
                if (i == j) continue;
                // [slash_ji, X_r] = 0
                ScalarField c1 = g.slash(g.X_r(f), j, i) - g.X_r(g.slash(f, j, i));
                CHECK(max_abs(c1) < 1e-10 * scale);
                // [slash_ji, slash_ik] = slash_jk
                for (int k = 0; k < 3; ++k) {
                    if (k == i) continue;
                    ScalarField c2 = g.slash(g.slash(f, i, k), j, i) - g.slash(g.slash(f, j, i), i, k);
                    CHECK(max_abs(c2 - g.slash(f, j, k)) < 1e-10 * scale);
                }
                // [d_m, slash_ji] = delta_mj d_i - delta_mi d_j
                for (int m = 0; m < 3; ++m) {
                    ScalarField c4 = g.d(g.slash(f, j, i), m) - g.slash(g.d(f, m), j, i);
                    ScalarField rhs = ScalarField::Zero(g.size());
                    if (m == j) rhs += g.d(f, i);
                    if (m == i) rhs -= g.d(f, j);
                    CHECK(max_abs(c4 - rhs) < 1e-10 * scale);
                }
            }
        // [d_m, X_r] = d_m
        for (int m = 0; m < 3; ++m) {
            ScalarField c3 = g.d(g.X_r(f), m) - g.X_r(g.d(f, m));
            CHECK(max_abs(c3 - g.d(f, m)) < 1e-10 * scale);
        }
        // d_i = (y_j / r^2) slash_ji + (y_i / r^2) X_r
        ScalarField r2 = g.r() * g.r();
        for (int i = 0; i < 3; ++i) {
            ScalarField rec = g.y()[i] / r2 * g.X_r(f);
            for (int j = 0; j < 3; ++j)
                if (j != i) rec += g.y()[j] / r2 * g.slash(f, j, i);
            CHECK(max_abs(rec - P.deriv(g, i)) < 1e-10 * scale);
        }
    }
}

TEST_CASE("flow map derivatives and Lie operators")
{
    BallGrid g(10, 10, 20);
    FlowMapDerivatives id = flow_map_derivatives(g, g.y());
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(max_abs(id.A[i][j] - (i == j ? 1.0 : 0.0)) < 1e-12);
    CHECK(max_abs(id.J - 1.0) < 1e-12);

    VectorField twice = {2.0 * g.y()[0], 2.0 * g.y()[1], 2.0 * g.y()[2]};
    FlowMapDerivatives f2 = flow_map_derivatives(g, twice);
    CHECK(max_abs(f2.J - 8.0) < 1e-11);
    CHECK(max_abs(f2.A[0][0] - 0.5) < 1e-12);
    LieOperators op = lie_operators(g, g.y(), f2, Mat3::Identity());
    CHECK(max_abs(op.div - 1.5) < 1e-11);

    Mat3 M;
    M << 1.1, 0.2, -0.1, 0.05, 0.9, 0.1, 0.0, -0.2, 1.2;
    VectorField lin = make_vector_field(g.size());
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) lin[i] += M(i, j) * g.y()[j];
    FlowMapDerivatives fm = flow_map_derivatives(g, lin);
    CHECK(max_abs(fm.J - M.determinant()) < 1e-11);
    Mat3 Mi = M.inverse();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            CHECK(max_abs(fm.Deta[i][j] - M(i, j)) < 1e-11);
            // A D eta = I node-wise
            ScalarField prod = ScalarField::Zero(g.size());
            for (int s = 0; s < 3; ++s) prod += fm.A[i][s] * fm.Deta[s][j];
            CHECK(max_abs(prod - (i == j ? 1.0 : 0.0)) < 1e-12);
            CHECK(max_abs(fm.A[i][j] - Mi(i, j)) < 1e-11);
        }

    // Gradient fields have vanishing curl; anisotropic Lambda changes Curl_{Lambda A}.
    ScalarField phi = g.y()[0] * g.y()[0] * g.y()[1] + g.y()[2];
    VectorField grad = g.gradient(phi);
    Mat3 Lam = Vec3(1.5, 1.0, 1.0 / 1.5).asDiagonal();
    LieOperators gop = lie_operators(g, grad, id, Mat3::Identity());
    LieOperators aop = lie_operators(g, grad, id, Lam);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            CHECK(max_abs(gop.curl_lambda[i][j]) < 1e-10);
            CHECK(max_abs(gop.curl[i][j]) < 1e-10);
        }
    CHECK(max_abs(aop.curl_lambda[0][1]) > 1e-3);

    VectorField bad = {-g.y()[0], g.y()[1], g.y()[2]};
    CHECK_THROWS_AS(flow_map_derivatives(g, bad), Error);
}

TEST_CASE("weighted norms")
{
    BallGrid g(32, 16, 32);
    ScalarField one = ScalarField::Ones(g.size());
    GasParams p = GasParams::make(2.0, 1.0);
    ScalarField w = g.enthalpy(p);
    CHECK(g.weighted_norm_sq(one, 0, one, w) == doctest::Approx(4.0 * kPi / 3.0).epsilon(1e-12));
    CHECK(g.weighted_norm_sq(one, 1, one, w) == doctest::Approx(2.0 * kPi / 15.0).epsilon(1e-12));
    double v = g.weighted_norm_sq(one, 0, g.psi(), w);
    CHECK(v > 0.0);
    CHECK(v < 4.0 * kPi / 3.0);
}

TEST_CASE("local interpolation converges at fourth order")
{
    Poly3 P(11, 3);
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Vec3> pts;
    while (pts.size() < 200) {
        Vec3 y(u(rng), u(rng), u(rng));
        if (y.norm() < 0.98) pts.push_back(y);
    }
    pts.push_back(Vec3(0, 0, 0.001));
    pts.push_back(Vec3(0.001, 0, 0.9));
    auto err = [&](int nr, int nt, int np) {
        BallGrid g(nr, nt, np);
        LocalInterpolator I(g);
        ScalarField f = P.eval(g);
        double e = 0.0;
        for (const Vec3& y : pts) e = std::max(e, std::abs(LocalInterpolator::apply(I.stencil(y), f) - P.eval(y)));
        return e;
    };
    double e1 = err(12, 12, 24), e2 = err(24, 24, 48);
    CHECK(e1 < 1e-2);
    CHECK(e1 / e2 > 10.0);
}
