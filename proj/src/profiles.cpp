#include "epflow/profiles.hpp"
#include "epflow/quadrature.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

namespace epflow {

namespace {

double enthalpy_scale(const GasParams& p) { return (p.gamma - 1.0) / (2.0 * p.gamma); }

}  // namespace

double enthalpy_r2(double r2, const GasParams& p) { return r2 >= 1.0 ? 0.0 : enthalpy_scale(p) * (1.0 - r2); }

double enthalpy(const Vec3& y, const GasParams& p) { return enthalpy_r2(y.squaredNorm(), p); }

double enthalpy_dr(double r, const GasParams& p) { return -(p.gamma - 1.0) / p.gamma * r; }

AffineFieldSample affine_density_velocity(const AffineFrame& frame, const Vec3& x, const GasParams& p)
{
    AffineFieldSample s;
    s.t = frame.t;
    s.x = x;
    Mat3 Ainv = frame.A.inverse();
    Vec3 y = Ainv * x;
    double r2 = y.squaredNorm();
    s.inside = r2 < 1.0;
    s.rho = s.inside ? std::pow(p.delta * enthalpy_r2(r2, p), p.alpha) / frame.A.determinant() : 0.0;
    s.u = frame.Adot * y;
    return s;
}

double mass_closed_form(const GasParams& p)
{
    return std::pow(p.delta, p.alpha) * 2.0 * std::numbers::pi * std::beta(1.5, p.alpha + 1.0) *
           std::pow(enthalpy_scale(p), p.alpha);
}

MassResult total_mass(const AffineFrame& frame, const GasParams& p, int n_radial, double rel_tol)
{
    if (n_radial < 4) throw Error(ErrorCode::domain, "total_mass: n_radial must be at least 4");
    const double detA = frame.A.determinant();
    const double pi = std::numbers::pi;
    auto eval = [&](int n) {
        // r = sin(phi) smooths the (1 - r^2)^alpha edge; the angular rule is exact for the
        // integrand after the substitution x = A y, so a small one suffices.
        QuadratureRule qr = gauss_legendre(n, 0.0, 0.5 * pi);
        QuadratureRule qt = fejer_first(8);
        const int nphi = 16;
        CompensatedSum sum;
        for (int i = 0; i < n; ++i) {
            double r = std::sin(qr.nodes[i]);
            double jr = qr.weights[i] * std::cos(qr.nodes[i]) * r * r;
            for (int k = 0; k < 8; ++k) {
                double ct = qt.nodes[k], st = std::sqrt(1.0 - ct * ct);
                for (int l = 0; l < nphi; ++l) {
                    double ph = 2.0 * pi * l / nphi;
                    Vec3 y(r * st * std::cos(ph), r * st * std::sin(ph), r * ct);
                    Vec3 x = frame.A * y;
                    double rho = affine_density_velocity(frame, x, p).rho;
                    sum.add(rho * detA * jr * qt.weights[k] * (2.0 * pi / nphi));
                }
            }
        }
        return sum.value();
    };
    MassResult m;
    double coarse = eval(n_radial);
    m.value = eval(2 * n_radial);
    m.error_estimate = std::abs(m.value - coarse);
    m.converged = m.error_estimate <= rel_tol * std::abs(m.value);
    return m;
}

const char* gamma_class_name(GammaClass c)
{
    switch (c) {
    case GammaClass::integer_alpha: return "gamma = 1 + 1/n, n >= 2";
    case GammaClass::near_isothermal: return "gamma < 14/13";
    case GammaClass::not_covered: return "not covered by the sufficient conditions";
    }
    return "unknown";
}

GammaClass classify_gamma(double gamma)
{
    if (gamma > 1.0 && gamma < 14.0 / 13.0) return GammaClass::near_isothermal;
    double n = 1.0 / (gamma - 1.0);
    double rn = std::round(n);
    if (rn >= 2.0 && std::abs(n - rn) <= 1e-9 * rn) return GammaClass::integer_alpha;
    return GammaClass::not_covered;
}

namespace {

// Sum of coef u^k (1-u)^p with u = r^2, kept symbolic so X_r = 2u d/du applies exactly.
using Poly = std::map<std::pair<int, double>, double>;

Poly apply_xr(const Poly& f)
{
    Poly out;
    for (const auto& [key, c] : f) {
        auto [k, pw] = key;
        if (k != 0) out[{k, pw}] += 2.0 * k * c;
        if (pw != 0.0) out[{k + 1, pw - 1.0}] += -2.0 * pw * c;
    }
    return out;
}

double eval_poly(const Poly& f, double u)
{
    double s = 0.0;
    for (const auto& [key, c] : f) s += c * std::pow(u, key.first) * std::pow(1.0 - u, key.second);
    return s;
}

// sqrt(4 pi int_0^1 r^2 w^k f^2 dr) by the midpoint rule on n cells.
double radial_norm(const Poly& f, double k, const GasParams& p, int n)
{
    CompensatedSum s;
    for (int i = 0; i < n; ++i) {
        double r = (i + 0.5) / n;
        double u = r * r;
        double v = eval_poly(f, u);
        s.add(r * r * std::pow(enthalpy_r2(u, p), k) * v * v / n);
    }
    return std::sqrt(4.0 * std::numbers::pi * s.value());
}

}  // namespace

AdmissibilityReport admissibility_checks(const GasParams& p, int N, int n_radial, double collar)
{
    if (N < 0) throw Error(ErrorCode::domain, "admissibility_checks: N must be non-negative");
    AdmissibilityReport rep;
    rep.order = N;

    // Physical vacuum: dw/dr < 0 on [1 - collar, 1], by the closed form and a centred difference.
    rep.collar_max_dr = -1e300;
    bool ok = true;
    for (int i = 0; i <= 64; ++i) {
        double r = 1.0 - collar + collar * i / 64.0;
        double h = 1e-6;
        double fd = (enthalpy_r2((r + h) * (r + h) < 1.0 ? (r + h) * (r + h) : 1.0, p) -
                     enthalpy_r2((r - h) * (r - h), p)) /
                    (std::min(r + h, 1.0) - (r - h));
        double an = enthalpy_dr(r, p);
        rep.collar_max_dr = std::max(rep.collar_max_dr, an);
        ok = ok && an < 0.0 && fd < 0.0;
    }
    rep.physical_vacuum = ok;

    Poly f;
    f[{0, p.alpha}] = std::pow(enthalpy_scale(p), p.alpha);
    bool finite = true;
    for (int a = 0; a <= N; ++a) {
        WeightTerm t;
        t.a = a;
        t.coarse = radial_norm(f, p.alpha + a, p, n_radial);
        t.fine = radial_norm(f, p.alpha + a, p, 2 * n_radial);
        t.divergent = !std::isfinite(t.fine) || (t.coarse > 0.0 && t.fine / t.coarse > 1.5);
        finite = finite && !t.divergent;
        rep.weight_sum_coarse += t.coarse;
        rep.weight_sum_fine += t.fine;
        rep.terms.push_back(t);
        f = apply_xr(f);
    }
    rep.refinement_ratio = rep.weight_sum_coarse > 0.0 ? rep.weight_sum_fine / rep.weight_sum_coarse : 1.0;
    rep.weight_finite = finite && rep.refinement_ratio <= 1.5;

    rep.gamma_class = classify_gamma(p.gamma);
    if (rep.gamma_class == GammaClass::not_covered) {
        std::ostringstream msg;
        msg << "gamma = " << p.gamma << " is outside the listed sufficient conditions (gamma = 1 + 1/n, n >= 2, or gamma < 14/13); running anyway";
        rep.warning = msg.str();
    }
    return rep;
}

}  // namespace epflow
