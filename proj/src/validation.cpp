#include "epflow/validation.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <random>

namespace epflow {

Check Check::at_most(std::string name, double value, double bound, std::string note)
{
    return {std::move(name), value, bound, true, value <= bound, std::move(note)};
}

Check Check::at_least(std::string name, double value, double bound, std::string note)
{
    return {std::move(name), value, bound, false, value >= bound, std::move(note)};
}

namespace {

double max_abs(const ScalarField& f) { return f.abs().maxCoeff(); }

// Random polynomial of total degree <= `degree` with fixed seed, plus its exact derivatives.
struct Polynomial {
    std::vector<std::array<int, 3>> powers;
    std::vector<double> coef;

    Polynomial(unsigned seed, int degree)
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
    ScalarField eval(const BallGrid& g, int di = -1) const
    {
        ScalarField f = ScalarField::Zero(g.size());
        for (std::size_t t = 0; t < coef.size(); ++t) {
            auto p = powers[t];
            double c = coef[t];
            if (di >= 0) {
                if (p[di] == 0) continue;
                c *= p[di];
                p[di] -= 1;
            }
            f += c * g.y()[0].pow(p[0]) * g.y()[1].pow(p[1]) * g.y()[2].pow(p[2]);
        }
        return f;
    }
};

void commutator_checks(std::vector<Check>& out)
{
    BallGrid g(16, 16, 32);
    double c_rs = 0.0, c_ss = 0.0, c_dr = 0.0, c_ds = 0.0, dec = 0.0, cart = 0.0;
    const ScalarField r2 = g.r() * g.r();
    for (unsigned seed : {1u, 2u, 3u}) {
        Polynomial P(seed, 5);
        ScalarField f = P.eval(g);
        double scale = std::max(1.0, max_abs(f));
        auto rel = [&](const ScalarField& e) { return max_abs(e) / scale; };
        for (int i = 0; i < 3; ++i) cart = std::max(cart, rel(g.d(f, i) - P.eval(g, i)));
        for (int j = 0; j < 3; ++j)
            for (int i = 0; i < 3; ++i) {
                if (i == j) continue;
                c_rs = std::max(c_rs, rel(g.slash(g.X_r(f), j, i) - g.X_r(g.slash(f, j, i))));
                for (int k = 0; k < 3; ++k) {
                    if (k == i) continue;
                    ScalarField c = g.slash(g.slash(f, i, k), j, i) - g.slash(g.slash(f, j, i), i, k);
                    c_ss = std::max(c_ss, rel(c - g.slash(f, j, k)));
                }
                for (int m = 0; m < 3; ++m) {
                    ScalarField c = g.d(g.slash(f, j, i), m) - g.slash(g.d(f, m), j, i);
                    if (m == j) c -= g.d(f, i);
                    if (m == i) c += g.d(f, j);
                    c_ds = std::max(c_ds, rel(c));
                }
            }
        for (int m = 0; m < 3; ++m) c_dr = std::max(c_dr, rel(g.d(g.X_r(f), m) - g.X_r(g.d(f, m)) - g.d(f, m)));
        for (int i = 0; i < 3; ++i) {
            ScalarField rec = g.y()[i] / r2 * g.X_r(f);
            for (int j = 0; j < 3; ++j)
                if (j != i) rec += g.y()[j] / r2 * g.slash(f, j, i);
            dec = std::max(dec, rel(rec - P.eval(g, i)));
        }
    }
    const double tol = 1e-10;
    out.push_back(Check::at_most("commutator [slash_ji, X_r] = 0", c_rs, tol));
    out.push_back(Check::at_most("commutator [slash_ji, slash_ik] = slash_jk", c_ss, tol));
    out.push_back(Check::at_most("commutator [d_m, X_r] = d_m", c_dr, tol));
    out.push_back(Check::at_most("commutator [d_m, slash_ji] = delta_mj d_i - delta_mi d_j", c_ds, tol));
    out.push_back(Check::at_most("decomposition d_i = (y_j slash_ji + y_i X_r) / r^2", dec, tol));
    out.push_back(Check::at_most("cartesian derivative of polynomials", cart, tol));
}

void divcurl_checks(std::vector<Check>& out, int threads)
{
    BallGrid g(8, 8, 16);
    GasParams p = GasParams::make(2.0, 1.0);
    PolarRule rule;
    rule.n_u = rule.n_rho = 16;
    rule.n_psi = 32;
    rule.threads = threads;
    const VectorField zero = make_vector_field(g.size());
    const FlowMapDerivatives id = identity_flow_map(g);
    const Mat3 aniso = Vec3(1.2, 1.0, 1.0 / 1.2).asDiagonal();
    for (const auto& [label, Lam] : {std::pair<const char*, Mat3>{"identity", Mat3::Identity()}, {"anisotropic", aniso}}) {
        ForceField f = force_field(g, KernelSpec::make(Lam), p, rule);
        DivCurlReport dc = divcurl_residual(g, f.G, zero, id, Lam, p);
        std::string tag = std::string(" at theta = 0, Lambda ") + label;
        out.push_back(Check::at_most("div identity" + tag, dc.div_norm / dc.source_norm, 1e-6, "relative to the source"));
        out.push_back(Check::at_most("curl identity" + tag, dc.curl_norm / dc.source_norm, 1e-6, "relative to the source"));
    }

    // theta = eps M y: the uncorrected residual is linear in eps, the full identity removes it.
    rule.n_u = rule.n_rho = 12;
    rule.n_psi = 24;
    Mat3 M;
    M << 0.3, 0.5, -0.2, 0.1, -0.4, 0.6, 0.2, 0.3, 0.1;
    KernelSpec k = KernelSpec::make(aniso);
    std::vector<double> unc, cor, curl;
    for (double eps : {1e-2, 5e-3}) {
        VectorField th = make_vector_field(g.size());
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) th[i] += eps * M(i, j) * g.y()[j];
        FlowMapDerivatives fmd = flow_map_from_displacement(g, th);
        ForceField f = force_field(g, th, fmd, k, p, rule);
        DivCurlReport dc = divcurl_residual(g, f.G, th, fmd, aniso, p);
        unc.push_back(dc.div_uncorrected_norm);
        cor.push_back(dc.div_norm);
        curl.push_back(dc.curl_norm);
    }
    double slope = std::log(unc[0] / unc[1]) / std::log(2.0);
    out.push_back(Check::at_most("uncorrected div residual linear in eps (|slope - 1|)", std::abs(slope - 1.0), 0.1));
    out.push_back(Check::at_most("div identity at theta = eps M y (relative to uncorrected)", cor[0] / unc[0], 0.05));
    out.push_back(Check::at_most("curl identity at theta = eps M y (relative to uncorrected)", curl[0] / unc[0], 0.05));
}

void normal_checks(std::vector<Check>& out)
{
    BallGrid g(10, 10, 20);
    Mat3 Lam;
    Lam << 1.2, 0.1, 0.0, 0.1, 0.9, 0.05, 0.0, 0.05, 1.0;
    Lam /= std::cbrt(Lam.determinant());
    const auto& y = g.y();
    const VectorField poly = {y[0] * y[1] * y[2] + y[0].pow(3), y[1] * y[1] - y[2], y[0] * y[2].pow(2) + 0.5};
    const VectorField rot = {-y[1], y[0], ScalarField::Zero(g.size())};
    double worst = 0.0;
    for (const Mat3& L : {Mat3(Mat3::Identity()), Lam})
        for (const VectorField* F : {&y, &poly, &rot}) worst = std::max(worst, normal_reconstruction(g, *F, L).max_error);
    out.push_back(Check::at_most("normal reconstruction on linear, cubic and rotation fields", worst, 1e-10));
}

}  // namespace

std::vector<Check> identity_suite(int threads)
{
    std::vector<Check> out;
    commutator_checks(out);
    divcurl_checks(out, threads);
    normal_checks(out);
    return out;
}

PoissonStudy poisson_study(const BallGrid& g, const GasParams& p, const Mat3& Lambda, const PolarRule& rule,
                           const PolarRule& base, int levels)
{
    if (levels < 1) throw Error(ErrorCode::config, "poisson_study: need at least one level");
    KernelSpec k = KernelSpec::make(Lambda);
    PoissonStudy st;
    PolarRule r0 = rule;
    r0.estimate_error = true;
    st.center_potential = background_potential(p, k, {Vec3::Zero()}, r0, &st.center_error_estimate).front();
    st.center_oracle = Lambda.isIdentity(1e-14) ? radial_background_potential(p, 0.0)
                                                : std::numeric_limits<double>::quiet_NaN();
    const VectorField zero = make_vector_field(g.size());
    const FlowMapDerivatives id = identity_flow_map(g);
    PolarRule lr = base;
    for (int l = 0; l < levels; ++l, lr = lr.refined(2)) {
        ForceField f = force_field(g, k, p, lr);
        DivCurlReport dc = divcurl_residual(g, f.G, zero, id, Lambda, p);
        st.levels.push_back({lr, dc.div_norm, dc.div_norm / dc.source_norm, dc.curl_norm});
    }
    return st;
}

}  // namespace epflow
