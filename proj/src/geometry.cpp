#include "epflow/geometry.hpp"
#include "epflow/profiles.hpp"
#include "epflow/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

namespace epflow {

namespace {

constexpr double kPi = std::numbers::pi;

// Periodic spectral differentiation on N equispaced points over one period 2 pi (N even).
Eigen::MatrixXd fourier_matrix(int N)
{
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            if (i == j) continue;
            int d = i - j;
            double sign = (d % 2 == 0) ? 1.0 : -1.0;
            D(i, j) = 0.5 * sign / std::tan(d * kPi / N);
        }
    return D;
}

std::array<double, 4> lagrange4(const double* x, double t)
{
    std::array<double, 4> w{};
    for (int a = 0; a < 4; ++a) {
        double v = 1.0;
        for (int b = 0; b < 4; ++b)
            if (b != a) v *= (t - x[b]) / (x[a] - x[b]);
        w[a] = v;
    }
    return w;
}

}  // namespace

VectorField make_vector_field(Eigen::Index n, double value)
{
    return {ScalarField::Constant(n, value), ScalarField::Constant(n, value), ScalarField::Constant(n, value)};
}

MatrixField make_matrix_field(Eigen::Index n, double value)
{
    MatrixField m;
    for (auto& row : m)
        for (auto& e : row) e = ScalarField::Constant(n, value);
    return m;
}

double cutoff(double r)
{
    if (r <= 0.25) return 0.0;
    if (r >= 0.75) return 1.0;
    double s = (r - 0.25) / 0.5;
    return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

BallGrid::BallGrid(int n_r, int n_theta, int n_phi) : nr_(n_r), nt_(n_theta), np_(n_phi)
{
    if (n_r < 4 || n_theta < 4 || n_phi < 4)
        throw Error(ErrorCode::domain, "BallGrid: all node counts must be at least 4");
    if (n_phi % 2 != 0) throw Error(ErrorCode::domain, "BallGrid: n_phi must be even");

    QuadratureRule gl = gauss_legendre(2 * nr_);
    for (int j = 0; j < nr_; ++j) {
        r_nodes_.push_back(gl.nodes[nr_ + j]);
        r_weights_.push_back(gl.weights[nr_ + j] * gl.nodes[nr_ + j] * gl.nodes[nr_ + j]);
    }
    QuadratureRule fj = fejer_first(nt_);
    for (int k = 0; k < nt_; ++k) {
        th_nodes_.push_back((k + 0.5) * kPi / nt_);
        th_weights_.push_back(fj.weights[k]);
    }
    for (int l = 0; l < np_; ++l) ph_nodes_.push_back(2.0 * kPi * l / np_);

    Dline_ = differentiation_matrix(gl.nodes);
    Dcircle_ = fourier_matrix(2 * nt_);
    Dphi_ = fourier_matrix(np_);

    const Eigen::Index M = size();
    y_ = make_vector_field(M);
    n_ = make_vector_field(M);
    et_ = make_vector_field(M);
    ep_ = make_vector_field(M);
    r_.resize(M);
    th_.resize(M);
    ph_.resize(M);
    wq_.resize(M);
    psi_.resize(M);
    sin_th_.resize(M);
    for (int j = 0; j < nr_; ++j)
        for (int k = 0; k < nt_; ++k)
            for (int l = 0; l < np_; ++l) {
                Eigen::Index q = index(j, k, l);
                double r = r_nodes_[j], t = th_nodes_[k], p = ph_nodes_[l];
                double st = std::sin(t), ct = std::cos(t), sp = std::sin(p), cp = std::cos(p);
                r_[q] = r;
                th_[q] = t;
                ph_[q] = p;
                sin_th_[q] = st;
                n_[0][q] = st * cp;
                n_[1][q] = st * sp;
                n_[2][q] = ct;
                et_[0][q] = ct * cp;
                et_[1][q] = ct * sp;
                et_[2][q] = -st;
                ep_[0][q] = -sp;
                ep_[1][q] = cp;
                ep_[2][q] = 0.0;
                for (int i = 0; i < 3; ++i) y_[i][q] = r * n_[i][q];
                wq_[q] = r_weights_[j] * th_weights_[k] * 2.0 * kPi / np_;
                psi_[q] = cutoff(r);
            }
    check_exactness();
}

void BallGrid::check_exactness() const
{
    double one = integrate(ScalarField::Ones(size()));
    double r2 = integrate(r_ * r_);
    double y1 = integrate(y_[0]);
    double err = std::max({std::abs(one - 4.0 * kPi / 3.0), std::abs(r2 - 4.0 * kPi / 5.0), std::abs(y1)});
    ScalarField f = y_[0] * y_[0];
    double derr = (d(f, 0) - 2.0 * y_[0]).abs().maxCoeff();
    if (err > 1e-11 || derr > 1e-9) {
        std::ostringstream msg;
        msg << "BallGrid: low-degree exactness check failed (quadrature " << err << ", derivative " << derr << ")";
        throw Error(ErrorCode::domain, msg.str());
    }
}

ScalarField BallGrid::enthalpy(const GasParams& p) const
{
    ScalarField w(size());
    for (Eigen::Index q = 0; q < size(); ++q) w[q] = enthalpy_r2(r_[q] * r_[q], p);
    return w;
}

int BallGrid::polynomial_budget() const { return std::min({nt_ - 1, np_ / 2 - 1, 2 * nr_ - 1}); }

double BallGrid::min_spacing() const
{
    double h = 2.0 * r_nodes_[0];
    for (int j = 0; j + 1 < nr_; ++j) h = std::min(h, r_nodes_[j + 1] - r_nodes_[j]);
    double r0 = r_nodes_[0];
    h = std::min(h, r0 * kPi / nt_);
    h = std::min(h, r0 * std::sin(th_nodes_[0]) * 2.0 * kPi / np_);
    return h;
}

ScalarField BallGrid::d_r(const ScalarField& f) const
{
    const int half = np_ / 2, L = nt_ * half, n2 = 2 * nr_;
    Eigen::MatrixXd V(n2, L);
    for (int k = 0; k < nt_; ++k)
        for (int l = 0; l < half; ++l) {
            int c = k * half + l;
            for (int m = 0; m < nr_; ++m) V(m, c) = f[index(nr_ - 1 - m, nt_ - 1 - k, l + half)];
            for (int j = 0; j < nr_; ++j) V(nr_ + j, c) = f[index(j, k, l)];
        }
    Eigen::MatrixXd R = Dline_ * V;
    ScalarField out(size());
    for (int k = 0; k < nt_; ++k)
        for (int l = 0; l < half; ++l) {
            int c = k * half + l;
            for (int j = 0; j < nr_; ++j) {
                out[index(j, k, l)] = R(nr_ + j, c);
                out[index(j, nt_ - 1 - k, l + half)] = -R(nr_ - 1 - j, c);
            }
        }
    return out;
}

ScalarField BallGrid::d_theta(const ScalarField& f) const
{
    const int half = np_ / 2, L = nr_ * half, n2 = 2 * nt_;
    Eigen::MatrixXd V(n2, L);
    for (int j = 0; j < nr_; ++j)
        for (int l = 0; l < half; ++l) {
            int c = j * half + l;
            for (int m = 0; m < nt_; ++m) V(m, c) = f[index(j, m, l)];
            for (int m = nt_; m < n2; ++m) V(m, c) = f[index(j, n2 - 1 - m, l + half)];
        }
    Eigen::MatrixXd R = Dcircle_ * V;
    ScalarField out(size());
    for (int j = 0; j < nr_; ++j)
        for (int l = 0; l < half; ++l) {
            int c = j * half + l;
            for (int m = 0; m < nt_; ++m) out[index(j, m, l)] = R(m, c);
            for (int m = nt_; m < n2; ++m) out[index(j, n2 - 1 - m, l + half)] = -R(m, c);
        }
    return out;
}

ScalarField BallGrid::d_phi(const ScalarField& f) const
{
    // Rows of the flat index are contiguous in l.
    Eigen::Map<const Eigen::MatrixXd> V(f.data(), np_, nr_ * nt_);
    Eigen::MatrixXd R = Dphi_ * V;
    return Eigen::Map<const ScalarField>(R.data(), size());
}

ScalarField BallGrid::X_r(const ScalarField& f) const { return r_ * d_r(f); }

ScalarField BallGrid::d(const ScalarField& f, int i) const
{
    ScalarField fr = d_r(f), ft = d_theta(f), fp = d_phi(f);
    return n_[i] * fr + et_[i] / r_ * ft + ep_[i] / (r_ * sin_th_) * fp;
}

VectorField BallGrid::gradient(const ScalarField& f) const
{
    ScalarField fr = d_r(f), ft = d_theta(f) / r_, fp = d_phi(f) / (r_ * sin_th_);
    VectorField g;
    for (int i = 0; i < 3; ++i) g[i] = n_[i] * fr + et_[i] * ft + ep_[i] * fp;
    return g;
}

ScalarField BallGrid::slash(const ScalarField& f, int j, int i) const
{
    if (i == j) return ScalarField::Zero(size());
    ScalarField ft = d_theta(f), fp = d_phi(f);
    return (n_[j] * et_[i] - n_[i] * et_[j]) * ft + (n_[j] * ep_[i] - n_[i] * ep_[j]) / sin_th_ * fp;
}

double BallGrid::integrate(const ScalarField& f) const
{
    CompensatedSum s;
    for (Eigen::Index q = 0; q < size(); ++q) s.add(wq_[q] * f[q]);
    return s.value();
}

double BallGrid::weighted_norm_sq(const ScalarField& f, double k, const ScalarField& g, const ScalarField& w) const
{
    if (k < 0.0) throw Error(ErrorCode::domain, "weighted_norm: k must be non-negative");
    if (k == 0.0) return integrate(f * f * g);
    return integrate(w.pow(k) * f * f * g);
}

void BallGrid::write_csv(std::ostream& os, const std::vector<std::string>& names,
                         const std::vector<const ScalarField*>& fields) const
{
    os << "r,theta,phi,y1,y2,y3";
    for (const auto& n : names) os << ',' << n;
    os << '\n' << std::setprecision(17);
    for (Eigen::Index q = 0; q < size(); ++q) {
        os << r_[q] << ',' << th_[q] << ',' << ph_[q] << ',' << y_[0][q] << ',' << y_[1][q] << ',' << y_[2][q];
        for (const ScalarField* f : fields) os << ',' << (*f)[q];
        os << '\n';
    }
}

// ---------------------------------------------------------------- flow map

MatrixField jacobian(const BallGrid& g, const VectorField& F)
{
    MatrixField D;
    for (int i = 0; i < 3; ++i) {
        VectorField gi = g.gradient(F[i]);
        for (int s = 0; s < 3; ++s) D[i][s] = std::move(gi[s]);
    }
    return D;
}

namespace {

FlowMapDerivatives invert_map(MatrixField Deta)
{
    const Eigen::Index M = Deta[0][0].size();
    FlowMapDerivatives f;
    f.A = make_matrix_field(M);
    f.J.resize(M);
    Eigen::Index worst = 0;
    double worst_det = 1e300;
    for (Eigen::Index q = 0; q < M; ++q) {
        Mat3 m;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) m(i, j) = Deta[i][j][q];
        double det = m.determinant();
        f.J[q] = det;
        if (det < worst_det || std::isnan(det)) {
            worst_det = det;
            worst = q;
        }
        Mat3 inv = m.inverse();
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) f.A[i][j][q] = inv(i, j);
    }
    if (!(worst_det > 0.0) || !f.J.allFinite()) {
        std::ostringstream msg;
        msg << "flow map degenerate: det D eta = " << worst_det << " at node " << worst;
        throw Error(ErrorCode::degenerate_map, msg.str());
    }
    f.Deta = std::move(Deta);
    return f;
}

}  // namespace

FlowMapDerivatives flow_map_derivatives(const BallGrid& g, const VectorField& eta)
{
    return invert_map(jacobian(g, eta));
}

FlowMapDerivatives flow_map_from_displacement(const BallGrid& g, const VectorField& theta)
{
    MatrixField D = jacobian(g, theta);
    for (int i = 0; i < 3; ++i) D[i][i] += 1.0;
    return invert_map(std::move(D));
}

FlowMapDerivatives identity_flow_map(const BallGrid& g)
{
    MatrixField D = make_matrix_field(g.size());
    for (int i = 0; i < 3; ++i) D[i][i].setOnes();
    return invert_map(std::move(D));
}

LieOperators lie_operators(const MatrixField& DF, const FlowMapDerivatives& fmd, const Mat3& Lambda)
{
    const Eigen::Index M = DF[0][0].size();
    LieOperators op;
    op.grad = make_matrix_field(M);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int s = 0; s < 3; ++s) op.grad[i][j] += fmd.A[s][j] * DF[i][s];
    op.div = op.grad[0][0] + op.grad[1][1] + op.grad[2][2];
    op.curl = make_matrix_field(M);
    op.curl_lambda = make_matrix_field(M);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            op.curl[i][j] = op.grad[i][j] - op.grad[j][i];
            for (int m = 0; m < 3; ++m)
                op.curl_lambda[i][j] += Lambda(j, m) * op.grad[i][m] - Lambda(i, m) * op.grad[j][m];
        }
    return op;
}

LieOperators lie_operators(const BallGrid& g, const VectorField& F, const FlowMapDerivatives& fmd, const Mat3& Lambda)
{
    return lie_operators(jacobian(g, F), fmd, Lambda);
}

// ---------------------------------------------------------------- interpolation

LocalInterpolator::LocalInterpolator(const BallGrid& g) : g_(g)
{
    QuadratureRule gl = gauss_legendre(2 * g.n_r());
    s_nodes_ = gl.nodes;
}

LocalInterpolator::Stencil LocalInterpolator::stencil(const Vec3& y) const
{
    const int nr = g_.n_r(), nt = g_.n_theta(), np = g_.n_phi();
    double r = y.norm();
    double th = r > 0.0 ? std::acos(std::clamp(y[2] / r, -1.0, 1.0)) : 0.0;
    double ph = std::atan2(y[1], y[0]);
    if (ph < 0.0) ph += 2.0 * kPi;

    const int n2 = 2 * nr;
    int m = static_cast<int>(std::upper_bound(s_nodes_.begin(), s_nodes_.end(), r) - s_nodes_.begin()) - 1;
    int m0 = std::clamp(m - 1, 0, n2 - 4);
    std::array<double, 4> ws = lagrange4(&s_nodes_[m0], r);

    const double dt = kPi / nt;
    double ut = th / dt - 0.5;
    int k0 = static_cast<int>(std::floor(ut)) - 1;
    const double idx4[4] = {0.0, 1.0, 2.0, 3.0};
    std::array<double, 4> wt = lagrange4(idx4, ut - k0);

    const double dp = 2.0 * kPi / np;
    double up = ph / dp;
    int l0 = static_cast<int>(std::floor(up)) - 1;
    std::array<double, 4> wp = lagrange4(idx4, up - l0);

    Stencil s;
    int c = 0;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            for (int e = 0; e < 4; ++e, ++c) {
                int mm = m0 + a, k = k0 + b, l = l0 + e;
                if (k < 0) {
                    k = -1 - k;
                    l += np / 2;
                } else if (k >= nt) {
                    k = 2 * nt - 1 - k;
                    l += np / 2;
                }
                int j;
                if (mm < nr) {
                    j = nr - 1 - mm;
                    k = nt - 1 - k;
                    l += np / 2;
                } else {
                    j = mm - nr;
                }
                l = ((l % np) + np) % np;
                s.idx[c] = g_.index(j, k, l);
                s.w[c] = ws[a] * wt[b] * wp[e];
            }
    return s;
}

}  // namespace epflow
