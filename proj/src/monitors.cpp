#include "epflow/monitors.hpp"
#include "epflow/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace epflow {

namespace {

const std::pair<int, int> kSlash[3] = {{0, 1}, {0, 2}, {1, 2}};

// Non-decreasing sequences of length len over {0, .., k-1}.
void multisets(int k, int len, std::vector<int>& cur, std::vector<std::vector<int>>& out)
{
    if (static_cast<int>(cur.size()) == len) {
        out.push_back(cur);
        return;
    }
    int start = cur.empty() ? 0 : cur.back();
    for (int v = start; v < k; ++v) {
        cur.push_back(v);
        multisets(k, len, cur, out);
        cur.pop_back();
    }
}

double sum_sq(const BallGrid& g, const VectorField& F, double k, const ScalarField& cut, const ScalarField& w)
{
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += g.weighted_norm_sq(F[i], k, cut, w);
    return s;
}

double sum_sq(const BallGrid& g, const MatrixField& F, double k, const ScalarField& cut, const ScalarField& w)
{
    double s = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) s += g.weighted_norm_sq(F[i][j], k, cut, w);
    return s;
}

VectorField apply_vec(const BallGrid& g, const DerivativeIndex& d, const VectorField& F)
{
    return {apply_index(g, d, F[0]), apply_index(g, d, F[1]), apply_index(g, d, F[2])};
}

void check_budget(const BallGrid& g, int N)
{
    if (N < 0) throw Error(ErrorCode::domain, "norms: N must be non-negative");
    if (N + 1 > g.polynomial_budget()) {
        std::ostringstream msg;
        msg << "norms: N = " << N << " needs derivatives of order " << N + 1 << ", grid budget is "
            << g.polynomial_budget();
        throw Error(ErrorCode::domain, msg.str());
    }
}

}  // namespace

std::string DerivativeIndex::label() const
{
    std::ostringstream os;
    if (interior) {
        os << "d";
        if (cart.empty()) os << "0";
        for (int c : cart) os << c + 1;
        return os.str();
    }
    os << "X" << a;
    for (auto [j, i] : slash) os << "_s" << j + 1 << i + 1;
    return os.str();
}

std::vector<DerivativeIndex> boundary_indices(int N)
{
    std::vector<DerivativeIndex> out;
    for (int a = 0; a <= N; ++a)
        for (int b = 0; a + b <= N; ++b) {
            std::vector<std::vector<int>> ms;
            std::vector<int> cur;
            multisets(3, b, cur, ms);
            for (const auto& m : ms) {
                DerivativeIndex d;
                d.a = a;
                for (int v : m) d.slash.push_back(kSlash[v]);
                out.push_back(d);
            }
        }
    return out;
}

std::vector<DerivativeIndex> interior_indices(int N)
{
    std::vector<DerivativeIndex> out;
    for (int b = 0; b <= N; ++b) {
        std::vector<std::vector<int>> ms;
        std::vector<int> cur;
        multisets(3, b, cur, ms);
        for (const auto& m : ms) {
            DerivativeIndex d;
            d.interior = true;
            d.cart = m;
            out.push_back(d);
        }
    }
    return out;
}

ScalarField apply_index(const BallGrid& g, const DerivativeIndex& d, const ScalarField& f)
{
    ScalarField h = f;
    if (d.interior) {
        for (int c : d.cart) h = g.d(h, c);
        return h;
    }
    for (auto [j, i] : d.slash) h = g.slash(h, j, i);
    for (int k = 0; k < d.a; ++k) h = g.X_r(h);
    return h;
}

NormReport evaluate_norms(const BallGrid& g, const PerturbationState& s, const AffineFrame& frame, const GasParams& p,
                          int N)
{
    check_budget(g, N);
    NormReport rep;
    rep.tau = s.tau;
    rep.N = N;
    const ScalarField w = g.enthalpy(p);
    const ScalarField psi = g.psi();
    const ScalarField inner = 1.0 - psi;
    const double vfac = std::pow(frame.mu, 3.0 * p.gamma - 3.0) / p.delta;

    std::vector<DerivativeIndex> idx = boundary_indices(N);
    for (auto& d : interior_indices(N)) idx.push_back(d);
    for (const DerivativeIndex& d : idx) {
        const ScalarField& cut = d.interior ? inner : psi;
        const double k = d.interior ? p.alpha : p.alpha + d.a;
        VectorField Ft = apply_vec(g, d, s.theta);
        VectorField Fv = apply_vec(g, d, s.V);
        LieOperators lt = lie_operators(jacobian(g, Ft), s.fmd, frame.Lambda);
        LieOperators lv = lie_operators(jacobian(g, Fv), s.fmd, frame.Lambda);
        NormTerm t;
        t.index = d;
        double vraw = sum_sq(g, Fv, k, cut, w);
        rep.V_part += vraw;
        t.V = vfac * vraw;
        t.theta = sum_sq(g, Ft, k, cut, w);
        t.grad = sum_sq(g, lt.grad, k + 1.0, cut, w);
        t.div = g.weighted_norm_sq(lt.div, k + 1.0, cut, w);
        t.curl_V = sum_sq(g, lv.curl_lambda, k + 1.0, cut, w);
        t.curl_theta = sum_sq(g, lt.curl_lambda, k + 1.0, cut, w);
        rep.S += t.total();
        rep.B_V += t.curl_V;
        rep.B_theta += t.curl_theta;
        rep.terms.push_back(std::move(t));
    }
    rep.D = p.gamma < 5.0 / 3.0 ? (5.0 - 3.0 * p.gamma) * vfac * rep.V_part : std::numeric_limits<double>::quiet_NaN();
    rep.flags = apriori_flags(g, s);
    return rep;
}

double energy_norm(const BallGrid& g, const PerturbationState& s, const AffineFrame& frame, const GasParams& p, int N)
{
    return evaluate_norms(g, s, frame, p, N).S;
}

double vorticity_norm(const BallGrid& g, const VectorField& F, const PerturbationState& s, const AffineFrame& frame,
                      const GasParams& p, int N)
{
    check_budget(g, N);
    const ScalarField w = g.enthalpy(p);
    const ScalarField psi = g.psi();
    const ScalarField inner = 1.0 - psi;
    std::vector<DerivativeIndex> idx = boundary_indices(N);
    for (auto& d : interior_indices(N)) idx.push_back(d);
    double total = 0.0;
    for (const DerivativeIndex& d : idx) {
        const ScalarField& cut = d.interior ? inner : psi;
        const double k = (d.interior ? p.alpha : p.alpha + d.a) + 1.0;
        LieOperators l = lie_operators(jacobian(g, apply_vec(g, d, F)), s.fmd, frame.Lambda);
        total += sum_sq(g, l.curl_lambda, k, cut, w);
    }
    return total;
}

double dissipation(const BallGrid& g, const PerturbationState& s, const AffineFrame& frame, const GasParams& p, int N)
{
    if (!(p.gamma < 5.0 / 3.0)) throw Error(ErrorCode::domain, "dissipation: requires gamma < 5/3");
    check_budget(g, N);
    const ScalarField w = g.enthalpy(p);
    const ScalarField psi = g.psi();
    const ScalarField inner = 1.0 - psi;
    double raw = 0.0;
    for (const DerivativeIndex& d : boundary_indices(N)) raw += sum_sq(g, apply_vec(g, d, s.V), p.alpha + d.a, psi, w);
    for (const DerivativeIndex& d : interior_indices(N)) raw += sum_sq(g, apply_vec(g, d, s.V), p.alpha, inner, w);
    return (5.0 - 3.0 * p.gamma) / p.delta * std::pow(frame.mu, 3.0 * p.gamma - 3.0) * raw;
}

void NormSeries::add(const NormReport& r)
{
    if (sup_S_.empty()) {
        sup_S_.assign(r.terms.size(), 0.0);
        sup_BV_.assign(r.terms.size(), 0.0);
        sup_Bt_.assign(r.terms.size(), 0.0);
    }
    if (sup_S_.size() != r.terms.size()) throw Error(ErrorCode::domain, "NormSeries: term layout changed");
    S_ = BV_ = Bt_ = 0.0;
    for (std::size_t t = 0; t < r.terms.size(); ++t) {
        sup_S_[t] = std::max(sup_S_[t], r.terms[t].total());
        sup_BV_[t] = std::max(sup_BV_[t], r.terms[t].curl_V);
        sup_Bt_[t] = std::max(sup_Bt_[t], r.terms[t].curl_theta);
        S_ += sup_S_[t];
        BV_ += sup_BV_[t];
        Bt_ += sup_Bt_[t];
    }
    taus_.push_back(r.tau);
    S_inst_.push_back(r.S);
    BV_inst_.push_back(r.B_V);
    S_run_.push_back(S_);
    BV_run_.push_back(BV_);
}

CurlResidual curl_residual(const BallGrid& g, const std::vector<PerturbationState>& snaps,
                           const AffineTrajectory& traj, const GasParams& p)
{
    if (snaps.size() < 3) throw Error(ErrorCode::range, "curl_residual: needs at least 3 snapshots");
    CurlResidual out;
    const ScalarField w = g.enthalpy(p);
    const ScalarField one = ScalarField::Ones(g.size());
    for (std::size_t k = 1; k + 1 < snaps.size(); ++k) {
        const PerturbationState &a = snaps[k - 1], &b = snaps[k], &c = snaps[k + 1];
        double h1 = b.tau - a.tau, h2 = c.tau - b.tau;
        if (!(h1 > 0.0 && h2 > 0.0)) throw Error(ErrorCode::range, "curl_residual: snapshot times must increase");
        double ca = -h2 / (h1 * (h1 + h2)), cb = (h2 - h1) / (h1 * h2), cc = h1 / (h2 * (h1 + h2));
        VectorField Vt, GV;
        AffineFrame f = frame_at_tau(traj, b.tau);
        for (int i = 0; i < 3; ++i) {
            Vt[i] = ca * a.V[i] + cb * b.V[i] + cc * c.V[i];
            GV[i] = ScalarField::Zero(g.size());
            for (int j = 0; j < 3; ++j) GV[i] += f.Gamma_star(i, j) * b.V[j];
        }
        MatrixField C1 = lie_operators(g, Vt, b.fmd, f.Lambda).curl_lambda;
        MatrixField C2 = lie_operators(g, b.V, b.fmd, f.Lambda).curl_lambda;
        MatrixField C3 = lie_operators(g, GV, b.fmd, f.Lambda).curl_lambda;
        MatrixField R = make_matrix_field(g.size());
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) R[i][j] = C1[i][j] + f.mu_tau / f.mu * C2[i][j] + 2.0 * C3[i][j];
        double res = std::sqrt(sum_sq(g, R, p.alpha + 1.0, one, w));
        out.tau.push_back(b.tau);
        out.residual.push_back(res);
        out.scale.push_back(std::sqrt(sum_sq(g, C1, p.alpha + 1.0, one, w)));
        out.max_residual = std::max(out.max_residual, res);
    }
    return out;
}

DecayFit decay_fit(const std::vector<double>& tau, const std::vector<double>& value, double window)
{
    if (tau.size() != value.size()) throw Error(ErrorCode::range, "decay_fit: size mismatch");
    if (tau.empty()) throw Error(ErrorCode::range, "decay_fit: empty series");
    if (!(window > 0.0 && window <= 1.0)) throw Error(ErrorCode::range, "decay_fit: window must lie in (0, 1]");
    double lo = tau.back() - window * (tau.back() - tau.front());
    std::vector<double> x, y;
    for (std::size_t i = 0; i < tau.size(); ++i) {
        if (tau[i] < lo) continue;
        if (!(value[i] > 0.0)) throw Error(ErrorCode::range, "decay_fit: non-positive value in the window");
        x.push_back(tau[i]);
        y.push_back(std::log(value[i]));
    }
    DecayFit f;
    f.samples = static_cast<int>(x.size());
    if (f.samples < 10) throw Error(ErrorCode::range, "decay_fit: fewer than 10 samples in the window");
    f.efolds = *std::max_element(y.begin(), y.end()) - *std::min_element(y.begin(), y.end());
    if (f.efolds < 2.0) {
        std::ostringstream msg;
        msg << "decay_fit: window spans " << f.efolds << " e-folds, need 2";
        throw Error(ErrorCode::range, msg.str());
    }
    LinearFit lf = fit_line(x, y);
    f.exponent = lf.slope;
    f.stderr_ = lf.slope_stderr;
    f.tau_lo = x.front();
    f.tau_hi = x.back();
    return f;
}

}  // namespace epflow
