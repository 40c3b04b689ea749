#include "epflow/field.hpp"
#include "epflow/profiles.hpp"
#include "epflow/quadrature.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

namespace epflow {

namespace {

constexpr double kPi = std::numbers::pi;

// Runs body(i) for i in [0, n) on up to `threads` threads with a fixed contiguous partition.
template <class F>
void parallel_for(std::size_t n, int threads, F&& body)
{
    int t = std::max(1, std::min<int>(threads, static_cast<int>(n)));
    if (t == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::size_t chunk = (n + t - 1) / t;
    for (int k = 0; k < t; ++k) {
        std::size_t lo = k * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

void orthonormal_frame(const Vec3& e3, Vec3& e1, Vec3& e2)
{
    Vec3 a = std::abs(e3[0]) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
    e1 = (a - a.dot(e3) * e3).normalized();
    e2 = e3.cross(e1);
}

struct ConvOut {
    double pot = 0.0;
    Vec3 grad = Vec3::Zero();
    bool finite = true;
};

class Convolver {
public:
    Convolver(const GasParams& p, const KernelSpec& k, const PolarRule& rule, const BallGrid* g,
              const VectorField* theta)
        : p_(p), k_(k), rule_(rule), theta_(theta)
    {
        if (rule.n_u < 1 || rule.n_psi < 1 || rule.n_rho < 1) throw Error(ErrorCode::domain, "PolarRule: counts must be positive");
        gu_ = gauss_legendre(rule.n_u, 0.0, 1.0);
        grho_ = gauss_legendre(rule.n_rho, 0.0, 1.0);
        if (theta_) interp_.emplace(*g);
    }

    ConvOut eval(const Vec3& label, const Vec3& image) const
    {
        double r = label.norm();
        if (std::abs(r - 1.0) < 1e-12) throw Error(ErrorCode::domain, "convolution target on the boundary sphere");
        return r < 1.0 ? interior(label, image, r) : exterior(label, r);
    }

private:
    struct Acc {
        CompensatedSum pot, g0, g1, g2;
        bool finite = true;
    };

    void add_point(Acc& acc, const Vec3& z, const Vec3& image, double weight) const
    {
        double s = std::pow(enthalpy_r2(z.squaredNorm(), p_), p_.alpha);
        if (s == 0.0) return;
        Vec3 ez = z;
        if (theta_) {
            auto st = interp_->stencil(z);
            for (int i = 0; i < 3; ++i) ez[i] += LocalInterpolator::apply(st, (*theta_)[i]);
        }
        Vec3 d = image - ez;
        double q = d.dot(k_.Lambda_inv * d);
        if (!(q > 0.0)) {
            acc.finite = false;
            return;
        }
        double G = 1.0 / std::sqrt(q);
        Vec3 grad = -(k_.Lambda_inv * d) * (G * G * G);
        double ws = weight * s;
        acc.pot.add(ws * G);
        acc.g0.add(ws * grad[0]);
        acc.g1.add(ws * grad[1]);
        acc.g2.add(ws * grad[2]);
    }

    // Rays from a target inside the ball; the singularity at rho = 0 is absorbed by rho^2.
    ConvOut interior(const Vec3& label, const Vec3& image, double r) const
    {
        Vec3 e3 = r > 1e-3 ? Vec3(label / r) : Vec3(0, 0, 1);
        Vec3 e1, e2;
        orthonormal_frame(e3, e1, e2);
        double eps = std::sqrt(std::max(0.0, 1.0 - r * r));
        // Polar cosines with weights (du included).
        std::vector<double> us, uw;
        if (r <= 1e-3) {
            QuadratureRule gl = gauss_legendre(2 * rule_.n_u, -1.0, 1.0);
            for (int i = 0; i < 2 * rule_.n_u; ++i) {
                double u = gl.nodes[i];
                us.push_back(u);
                uw.push_back(gl.weights[i]);
            }
        } else {
            double T = std::asinh(r / eps);
            for (int sgn : {-1, 1})
                for (int i = 0; i < rule_.n_u; ++i) {
                    double t = T * gu_.nodes[i];
                    double u = sgn * (eps / r) * std::sinh(t);
                    us.push_back(std::clamp(u, -1.0, 1.0));
                    uw.push_back(T * gu_.weights[i] * (eps / r) * std::cosh(t));
                }
        }
        Acc acc;
        const double dpsi = 2.0 * kPi / rule_.n_psi;
        for (std::size_t a = 0; a < us.size(); ++a) {
            double u = us[a], su = std::sqrt(std::max(0.0, 1.0 - u * u));
            for (int b = 0; b < rule_.n_psi; ++b) {
                double ps = (b + 0.5) * dpsi;
                Vec3 om = su * (std::cos(ps) * e1 + std::sin(ps) * e2) + u * e3;
                // exit distance of the ray from the unit sphere
                double b0 = label.dot(om);
                double sq = std::sqrt(b0 * b0 + eps * eps);
                double L = b0 > 0.0 ? eps * eps / (b0 + sq) : sq - b0;
                for (int c = 0; c < rule_.n_rho; ++c) {
                    double rho = L * grho_.nodes[c];
                    double wgt = uw[a] * dpsi * L * grho_.weights[c] * rho * rho;
                    add_point(acc, label + rho * om, image, wgt);
                }
            }
        }
        return finish(acc);
    }

    // Rays from a target outside the ball through the cone that meets it (identity map only).
    ConvOut exterior(const Vec3& label, double r) const
    {
        if (theta_) throw Error(ErrorCode::domain, "exterior targets require the identity map");
        Vec3 e3 = -label / r, e1, e2;
        orthonormal_frame(e3, e1, e2);
        double uc = std::sqrt(1.0 - 1.0 / (r * r));
        double T = std::acosh(1.0 / uc);
        Acc acc;
        const double dpsi = 2.0 * kPi / rule_.n_psi;
        for (int sgn_half = 0; sgn_half < 2; ++sgn_half)
            for (int i = 0; i < rule_.n_u; ++i) {
                // split [0, T] in two halves so the count matches the interior rule
                double t = 0.5 * T * (gu_.nodes[i] + sgn_half);
                double wt = 0.5 * T * gu_.weights[i];
                double u = uc * std::cosh(t), du = uc * std::sinh(t) * wt;
                double su = std::sqrt(std::max(0.0, 1.0 - u * u));
                double half = r * uc * std::sinh(t);
                double lo = r * u - half, hi = r * u + half;
                for (int b = 0; b < rule_.n_psi; ++b) {
                    double ps = (b + 0.5) * dpsi;
                    Vec3 om = su * (std::cos(ps) * e1 + std::sin(ps) * e2) + u * e3;
                    for (int c = 0; c < rule_.n_rho; ++c) {
                        double rho = lo + (hi - lo) * grho_.nodes[c];
                        double wgt = du * dpsi * (hi - lo) * grho_.weights[c] * rho * rho;
                        add_point(acc, label + rho * om, label, wgt);
                    }
                }
            }
        return finish(acc);
    }

    static ConvOut finish(const Acc& acc)
    {
        ConvOut o;
        o.pot = acc.pot.value();
        o.grad = Vec3(acc.g0.value(), acc.g1.value(), acc.g2.value());
        o.finite = acc.finite && std::isfinite(o.pot) && o.grad.allFinite();
        return o;
    }

    GasParams p_;
    KernelSpec k_;
    PolarRule rule_;
    const VectorField* theta_;
    QuadratureRule gu_, grho_;
    std::optional<LocalInterpolator> interp_;
};

PolarRule halved(const PolarRule& r)
{
    PolarRule h = r;
    h.n_u = std::max(1, r.n_u / 2);
    h.n_psi = std::max(1, r.n_psi / 2);
    h.n_rho = std::max(1, r.n_rho / 2);
    return h;
}

}  // namespace

KernelSpec KernelSpec::make(const Mat3& Lambda, double tol)
{
    if ((Lambda - Lambda.transpose()).norm() > tol * Lambda.norm())
        throw Error(ErrorCode::domain, "KernelSpec: Lambda must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat3> es(Lambda);
    if (!(es.eigenvalues().minCoeff() > 0.0)) throw Error(ErrorCode::domain, "KernelSpec: Lambda must be positive definite");
    if (std::abs(Lambda.determinant() - 1.0) > tol) throw Error(ErrorCode::domain, "KernelSpec: det Lambda must be 1");
    KernelSpec k;
    k.Lambda = 0.5 * (Lambda + Lambda.transpose());
    k.Lambda_inv = k.Lambda.inverse();
    return k;
}

double green_kernel(const KernelSpec& k, const Vec3& y)
{
    double q = y.dot(k.Lambda_inv * y);
    if (!(q > 0.0)) throw Error(ErrorCode::domain, "green_kernel: singular evaluation at y = 0");
    return 1.0 / std::sqrt(q);
}

Vec3 green_gradient(const KernelSpec& k, const Vec3& y)
{
    double G = green_kernel(k, y);
    return -(k.Lambda_inv * y) * (G * G * G);
}

double enclosed_mass(const GasParams& p, double r)
{
    double c = (p.gamma - 1.0) / (2.0 * p.gamma);
    double x = std::min(r * r, 1.0);
    if (x <= 0.0) return 0.0;
    return 2.0 * kPi * std::pow(c, p.alpha) * boost::math::beta(1.5, p.alpha + 1.0, x);
}

double radial_background_potential(const GasParams& p, double r)
{
    double c = (p.gamma - 1.0) / (2.0 * p.gamma);
    if (r >= 1.0) return enclosed_mass(p, 1.0) / r;
    double outer = 2.0 * kPi * std::pow(c, p.alpha) * std::pow(1.0 - r * r, p.alpha + 1.0) / (p.alpha + 1.0);
    if (r < 1e-8) return outer + 4.0 * kPi * std::pow(c, p.alpha) * r * r / 3.0;
    return enclosed_mass(p, r) / r + outer;
}

std::vector<double> background_potential(const GasParams& p, const KernelSpec& k, const std::vector<Vec3>& targets,
                                         const PolarRule& rule, double* error_estimate)
{
    Convolver cv(p, k, rule, nullptr, nullptr);
    std::vector<double> out(targets.size());
    parallel_for(targets.size(), rule.threads, [&](std::size_t i) { out[i] = cv.eval(targets[i], targets[i]).pot; });
    if (error_estimate) {
        Convolver coarse(p, k, halved(rule), nullptr, nullptr);
        double e = 0.0;
        for (std::size_t i = 0; i < targets.size(); ++i)
            e = std::max(e, std::abs(coarse.eval(targets[i], targets[i]).pot - out[i]));
        *error_estimate = e;
    }
    return out;
}

ScalarField background_potential(const BallGrid& g, const GasParams& p, const KernelSpec& k, const PolarRule& rule,
                                  double* error_estimate)
{
    std::vector<Vec3> t(g.size());
    for (Eigen::Index q = 0; q < g.size(); ++q) t[q] = Vec3(g.y()[0][q], g.y()[1][q], g.y()[2][q]);
    std::vector<double> v = background_potential(p, k, t, rule, error_estimate);
    return Eigen::Map<ScalarField>(v.data(), g.size());
}

InjectivityReport check_injectivity(const BallGrid& g, const VectorField& theta, const FlowMapDerivatives& fmd)
{
    InjectivityReport rep;
    for (Eigen::Index q = 0; q < g.size(); ++q) {
        double s = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double v = fmd.Deta[i][j][q] - (i == j ? 1.0 : 0.0);
                s += v * v;
            }
        rep.sup_Dtheta = std::max(rep.sup_Dtheta, std::sqrt(s));
    }
    rep.lipschitz_lower = 1.0 - rep.sup_Dtheta;
    rep.lipschitz_upper = 1.0 + rep.sup_Dtheta;
    if (rep.sup_Dtheta < 1.0) {
        // On the convex ball |eta(y) - eta(z)| >= (1 - sup|D theta|) |y - z|.
        rep.injective = true;
        rep.method = "derivative bound";
        rep.min_pair_ratio = rep.lipschitz_lower;
        return rep;
    }
    rep.method = "pairwise";
    double ratio = 1e300;
    for (Eigen::Index a = 0; a < g.size(); ++a)
        for (Eigen::Index b = a + 1; b < g.size(); ++b) {
            Vec3 dy(g.y()[0][a] - g.y()[0][b], g.y()[1][a] - g.y()[1][b], g.y()[2][a] - g.y()[2][b]);
            Vec3 dt(theta[0][a] - theta[0][b], theta[1][a] - theta[1][b], theta[2][a] - theta[2][b]);
            ratio = std::min(ratio, (dy + dt).norm() / dy.norm());
        }
    rep.min_pair_ratio = ratio;
    rep.injective = ratio > 0.0;
    rep.lipschitz_lower = std::max(rep.lipschitz_lower, 0.0);
    return rep;
}

ForceField force_field(const BallGrid& g, const VectorField& theta, const FlowMapDerivatives& fmd,
                       const KernelSpec& k, const GasParams& p, const PolarRule& rule)
{
    ForceField f;
    f.kernel_constant = -static_cast<double>(p.field_sign);
    f.injectivity = check_injectivity(g, theta, fmd);
    if (!f.injectivity.injective) throw Error(ErrorCode::degenerate_map, "force_field: eta is not injective on the grid");
    const Eigen::Index M = g.size();
    bool zero = true;
    for (int i = 0; i < 3; ++i) zero = zero && (theta[i].abs().maxCoeff() == 0.0);
    Convolver cv(p, k, rule, &g, zero ? nullptr : &theta);
    std::vector<ConvOut> out(M);
    auto label = [&](Eigen::Index q) { return Vec3(g.y()[0][q], g.y()[1][q], g.y()[2][q]); };
    auto image = [&](Eigen::Index q) { return Vec3(label(q) + Vec3(theta[0][q], theta[1][q], theta[2][q])); };
    parallel_for(M, rule.threads, [&](std::size_t q) { out[q] = cv.eval(label(q), image(q)); });
    f.G = make_vector_field(M);
    f.Psi.resize(M);
    const double kc = f.kernel_constant;
    for (Eigen::Index q = 0; q < M; ++q) {
        f.Psi[q] = kc * out[q].pot;
        for (int i = 0; i < 3; ++i) f.G[i][q] = kc * out[q].grad[i];
        if (!out[q].finite) f.flagged.push_back(q);
    }
    if (rule.estimate_error) {
        Convolver coarse(p, k, halved(rule), &g, zero ? nullptr : &theta);
        std::vector<double> diff(M);
        parallel_for(M, rule.threads, [&](std::size_t q) {
            ConvOut c = coarse.eval(label(q), image(q));
            diff[q] = std::abs(kc) * (c.grad - out[q].grad).norm();
        });
        f.error_estimate = *std::max_element(diff.begin(), diff.end());
    }
    std::ostringstream prov;
    double sup_theta = 0.0;
    for (int i = 0; i < 3; ++i) sup_theta = std::max(sup_theta, theta[i].abs().maxCoeff());
    prov << "eta = id + theta (sup|theta| = " << sup_theta << "), Lambda eigenvalues "
         << Eigen::SelfAdjointEigenSolver<Mat3>(k.Lambda).eigenvalues().transpose() << ", c = " << p.field_sign
         << ", rule " << rule.n_u << "x" << rule.n_psi << "x" << rule.n_rho;
    f.provenance = prov.str();
    return f;
}

ForceField force_field(const BallGrid& g, const KernelSpec& k, const GasParams& p, const PolarRule& rule)
{
    VectorField zero = make_vector_field(g.size());
    return force_field(g, zero, identity_flow_map(g), k, p, rule);
}

DivCurlReport divcurl_residual(const BallGrid& g, const VectorField& G, const VectorField& theta,
                               const FlowMapDerivatives& fmd, const Mat3& Lambda, const GasParams& p)
{
    const Eigen::Index M = g.size();
    MatrixField DG = jacobian(g, G);         // DG[j][i] = G^j,_i
    MatrixField Dth = jacobian(g, theta);    // Dth[l][i] = theta^l,_i
    ScalarField wa = g.enthalpy(p).pow(p.alpha);
    ScalarField source = 4.0 * kPi * p.field_sign * wa;

    // B[k][i] = A^k_l theta^l,_i
    MatrixField B = make_matrix_field(M);
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 3; ++i)
            for (int l = 0; l < 3; ++l) B[k][i] += fmd.A[k][l] * Dth[l][i];

    DivCurlReport rep;
    ScalarField divL = ScalarField::Zero(M), corr = ScalarField::Zero(M);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            if (Lambda(i, j) == 0.0) continue;
            divL += Lambda(i, j) * DG[j][i];
            for (int k = 0; k < 3; ++k) corr += Lambda(i, j) * B[k][i] * DG[j][k];
        }
    rep.div_uncorrected = divL - source;
    rep.div_residual = divL - (source / fmd.J + corr);
    rep.curl_residual = make_matrix_field(M);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            ScalarField rhs = ScalarField::Zero(M);
            for (int s = 0; s < 3; ++s) rhs += B[s][j] * DG[i][s] - B[s][i] * DG[j][s];
            rep.curl_residual[i][j] = DG[i][j] - DG[j][i] - rhs;
        }
    rep.div_norm = std::sqrt(g.integrate(rep.div_residual.square()));
    rep.div_uncorrected_norm = std::sqrt(g.integrate(rep.div_uncorrected.square()));
    ScalarField c2 = ScalarField::Zero(M);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) c2 += rep.curl_residual[i][j].square();
    rep.curl_norm = std::sqrt(g.integrate(c2));
    rep.source_norm = std::sqrt(g.integrate(source.square()));
    return rep;
}

NormalReport normal_reconstruction(const BallGrid& g, const VectorField& G, const Mat3& Lambda, const ScalarField* div,
                                   const MatrixField* curl)
{
    const Eigen::Index M = g.size();
    MatrixField DG = jacobian(g, G);
    ScalarField divL = ScalarField::Zero(M);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) divL += Lambda(i, j) * DG[j][i];
    MatrixField C = make_matrix_field(M);  // C[i][m] = G^i,_m - G^m,_i
    for (int i = 0; i < 3; ++i)
        for (int m = 0; m < 3; ++m) C[i][m] = DG[i][m] - DG[m][i];
    const ScalarField& dv = div ? *div : divL;
    const MatrixField& cu = curl ? *curl : C;

    // slash[l][m][i] = slash_lm G^i
    std::array<std::array<VectorField, 3>, 3> sl;
    for (int l = 0; l < 3; ++l)
        for (int m = 0; m < 3; ++m)
            for (int i = 0; i < 3; ++i) sl[l][m][i] = g.slash(G[i], l, m);

    const auto& y = g.y();
    ScalarField r2 = g.r() * g.r();
    ScalarField L = ScalarField::Zero(M);
    for (int k = 0; k < 3; ++k)
        for (int m = 0; m < 3; ++m) L += Lambda(k, m) * y[k] * y[m] / r2;

    NormalReport rep;
    rep.reconstructed = make_vector_field(M);
    rep.direct = make_vector_field(M);
    for (int i = 0; i < 3; ++i) {
        ScalarField s = y[i] * dv;
        for (int k = 0; k < 3; ++k)
            for (int m = 0; m < 3; ++m) {
                double lam = Lambda(k, m);
                if (lam == 0.0) continue;
                s += lam * y[k] * cu[i][m];
                s -= lam * sl[i][k][m];
                for (int l = 0; l < 3; ++l) s -= lam * y[k] * y[l] / r2 * sl[l][m][i];
            }
        rep.reconstructed[i] = s / L;
        rep.direct[i] = g.X_r(G[i]);
    }
    CompensatedSum l2;
    rep.min_L = 1e300;
    for (Eigen::Index q = 0; q < M; ++q) {
        if (g.psi()[q] <= 0.0) continue;
        rep.min_L = std::min(rep.min_L, L[q]);
        double e2 = 0.0;
        for (int i = 0; i < 3; ++i) {
            double e = rep.reconstructed[i][q] - rep.direct[i][q];
            rep.max_error = std::max(rep.max_error, std::abs(e));
            e2 += e * e;
        }
        l2.add(g.weights()[q] * g.psi()[q] * e2);
    }
    rep.l2_error = std::sqrt(l2.value());
    return rep;
}

}  // namespace epflow
