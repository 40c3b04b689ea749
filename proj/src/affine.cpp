#include "epflow/affine.hpp"
#include "epflow/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace epflow {

GasParams GasParams::make(double gamma, double delta, int field_sign)
{
    GasParams p;
    p.gamma = gamma;
    p.alpha = 1.0 / (gamma - 1.0);
    p.delta = delta;
    p.field_sign = field_sign;
    return p;
}

void GasParams::validate(bool for_dynamics) const
{
    std::ostringstream msg;
    if (!(gamma > 1.0)) msg << "gamma must exceed 1 (got " << gamma << "); ";
    if (for_dynamics && !(gamma < 5.0 / 3.0)) msg << "dynamics needs gamma < 5/3 (got " << gamma << "); ";
    if (gamma > 1.0 && std::abs(alpha * (gamma - 1.0) - 1.0) > 1e-14) msg << "alpha inconsistent with gamma; ";
    if (for_dynamics ? !(delta > 0.0) : !(delta >= 0.0)) msg << "delta out of range (got " << delta << "); ";
    if (field_sign != 1 && field_sign != -1) msg << "field_sign must be +1 or -1; ";
    if (!msg.str().empty()) throw Error(ErrorCode::domain, "GasParams: " + msg.str());
}

void AffineIVP::validate() const
{
    params.validate(false);
    if (!(A0.determinant() > 0.0)) throw Error(ErrorCode::domain, "AffineIVP: det A0 must be positive");
    if (!(A1.determinant() > 0.0)) throw Error(ErrorCode::domain, "AffineIVP: det A1 must be positive");
    if (!(t_end > 0.0)) throw Error(ErrorCode::domain, "AffineIVP: t_end must be positive");
    if (!(tol.rtol > 0.0) || !(tol.atol > 0.0)) throw Error(ErrorCode::domain, "AffineIVP: tolerances must be positive");
}

Mat3 nonlinearity(const Mat3& A, double gamma)
{
    double d = A.determinant();
    if (!(d > 0.0) || !std::isfinite(d))
        throw Error(ErrorCode::domain, "nonlinearity: det A must be positive and finite");
    return std::pow(d, 1.0 - gamma) * A.inverse().transpose();
}

double affine_energy(const Mat3& A, const Mat3& Adot, const GasParams& p)
{
    return 0.5 * Adot.squaredNorm() + p.delta / (p.gamma - 1.0) * std::pow(A.determinant(), 1.0 - p.gamma);
}

// ---------------------------------------------------------------- time maps

namespace {

double gl10(const std::function<double(double)>& f, double a, double b)
{
    static const QuadratureRule q = gauss_legendre(10);
    double half = 0.5 * (b - a), mid = 0.5 * (a + b), s = 0.0;
    for (int i = 0; i < 10; ++i) s += q.weights[i] * f(mid + half * q.nodes[i]);
    return s * half;
}

double adaptive_gl(const std::function<double(double)>& f, double a, double b, double whole, int depth)
{
    double m = 0.5 * (a + b);
    double left = gl10(f, a, m), right = gl10(f, m, b);
    double both = left + right;
    if (depth >= 30 || std::abs(both - whole) <= 1e-14 * std::abs(both) + 1e-300) return both;
    return adaptive_gl(f, a, m, left, depth + 1) + adaptive_gl(f, m, b, right, depth + 1);
}

double integrate_adaptive(const std::function<double(double)>& f, double a, double b)
{
    if (b == a) return 0.0;
    return adaptive_gl(f, a, b, gl10(f, a, b), 0);
}

}  // namespace

TimeMaps::TimeMaps(ScalarFn mu, ScalarFn detA, double gamma, std::vector<double> breakpoints)
    : mu_(std::move(mu)), detA_(std::move(detA)), gamma_(gamma), bp_(std::move(breakpoints))
{
    if (bp_.size() < 2) throw Error(ErrorCode::domain, "TimeMaps: need at least two breakpoints");
    tau_cum_.assign(bp_.size(), 0.0);
    s_cum_.assign(bp_.size(), 0.0);
    for (std::size_t i = 0; i + 1 < bp_.size(); ++i) {
        tau_cum_[i + 1] = tau_cum_[i] + integrate_piece(0, bp_[i], bp_[i + 1]);
        s_cum_[i + 1] = s_cum_[i] + integrate_piece(1, bp_[i], bp_[i + 1]);
    }
}

double TimeMaps::integrate_piece(int which, double a, double b) const
{
    if (which == 0) return integrate_adaptive([this](double t) { return 1.0 / mu_(t); }, a, b);
    const double e = (1.0 - 3.0 * gamma_) / 6.0;
    return integrate_adaptive([this, e](double t) { return std::pow(detA_(t), e); }, a, b);
}

double TimeMaps::tau(double t) const
{
    if (t < bp_.front() || t > bp_.back()) throw Error(ErrorCode::range, "TimeMaps::tau: t outside range");
    auto it = std::upper_bound(bp_.begin(), bp_.end(), t);
    std::size_t i = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - bp_.begin() - 1, 0), bp_.size() - 2);
    return tau_cum_[i] + integrate_piece(0, bp_[i], t);
}

double TimeMaps::s(double t) const
{
    if (t < bp_.front() || t > bp_.back()) throw Error(ErrorCode::range, "TimeMaps::s: t outside range");
    auto it = std::upper_bound(bp_.begin(), bp_.end(), t);
    std::size_t i = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - bp_.begin() - 1, 0), bp_.size() - 2);
    return s_cum_[i] + integrate_piece(1, bp_[i], t);
}

double TimeMaps::invert(int which, double value) const
{
    const std::vector<double>& cum = which == 0 ? tau_cum_ : s_cum_;
    if (value < cum.front() || value > cum.back() * (1.0 + 1e-15) + 1e-300)
        throw Error(ErrorCode::range, "TimeMaps: value outside mapped range");
    auto it = std::upper_bound(cum.begin(), cum.end(), value);
    std::size_t i = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - cum.begin() - 1, 0), cum.size() - 2);
    double lo = bp_[i], hi = bp_[i + 1];
    const double e = (1.0 - 3.0 * gamma_) / 6.0;
    auto rate = [&](double t) { return which == 0 ? 1.0 / mu_(t) : std::pow(detA_(t), e); };
    double t = lo + (hi - lo) * (value - cum[i]) / std::max(cum[i + 1] - cum[i], 1e-300);
    for (int it2 = 0; it2 < 100; ++it2) {
        double f = cum[i] + integrate_piece(which, bp_[i], t) - value;
        if (f > 0.0)
            hi = t;
        else
            lo = t;
        double tn = t - f / rate(t);
        if (!(tn > lo && tn < hi)) tn = 0.5 * (lo + hi);
        if (std::abs(tn - t) <= 1e-15 * std::max(1.0, std::abs(t))) return tn;
        t = tn;
    }
    return t;
}

double TimeMaps::t_of_tau(double tau) const { return invert(0, tau); }
double TimeMaps::t_of_s(double s) const { return invert(1, s); }

// ---------------------------------------------------------------- DOP853

namespace {

constexpr int kDim = 18;
using State = std::array<double, kDim>;

// Coefficients of the Dormand-Prince 8(5,3) pair with the 7th-order continuous extension.
constexpr double c2 = 0.05260015195876773187856, c3 = 0.07890022793815159781784,
                 c4 = 0.11835034190722739672676, c5 = 0.28164965809277260327324,
                 c6 = 0.33333333333333333333333, c7 = 0.25, c8 = 0.30769230769230769230769,
                 c9 = 0.65128205128205128205128, c10 = 0.6, c11 = 0.85714285714285714285714;
constexpr double a21 = 0.05260015195876773187856, a31 = 0.01972505698453789945446,
                 a32 = 0.05917517095361369836338, a41 = 0.02958758547680684918169,
                 a43 = 0.08876275643042054754507, a51 = 0.24136513415926668550237,
                 a53 = -0.88454947932828608534486, a54 = 0.92483400326179200311574,
                 a61 = 0.03703703703703703703704, a64 = 0.17082860872947387127960,
                 a65 = 0.12546768756682242501669, a71 = 0.037109375, a74 = 0.17025221101954403931498,
                 a75 = 0.06021653898045596068502, a76 = -0.017578125, a81 = 0.03709200011850479271088,
                 a84 = 0.17038392571223999381021, a85 = 0.10726203044637328465181,
                 a86 = -0.01531943774862440175279, a87 = 0.00827378916381402288758,
                 a91 = 0.62411095871607571711443, a94 = -3.36089262944694129406857,
                 a95 = -0.86821934684172600681819, a96 = 27.5920996994467083049416,
                 a97 = 20.1540675504778934086187, a98 = -43.4898841810699588477366,
                 a101 = 0.47766253643826436589043, a104 = -2.48811461997166764192642,
                 a105 = -0.59029082683684299637145, a106 = 21.2300514481811942347289,
                 a107 = 15.2792336328824235832597, a108 = -33.2882109689848629194453,
                 a109 = -0.02033120170850862613582, a111 = -0.93714243008598732571704,
                 a114 = 5.18637242884406370830024, a115 = 1.09143734899672957818500,
                 a116 = -8.14978701074692612513997, a117 = -18.5200656599969598641566,
                 a118 = 22.7394870993505042818970, a119 = 2.49360555267965238987089,
                 a1110 = -3.04676447189821950038237, a121 = 2.27331014751653820792360,
                 a124 = -10.5344954667372501984067, a125 = -2.00087205822486249909676,
                 a126 = -17.9589318631187989172766, a127 = 27.9488845294199600508500,
                 a128 = -2.85899827713502369474066, a129 = -8.87285693353062954433549,
                 a1210 = 12.3605671757943030647266, a1211 = 0.64339274601576353035597;
constexpr double b1 = 0.05429373411656876223805, b6 = 4.45031289275240888144114,
                 b7 = 1.89151789931450038304282, b8 = -5.80120396001058478146721,
                 b9 = 0.31116436695781989440892, b10 = -0.15216094966251607855618,
                 b11 = 0.20136540080403034837478, b12 = 0.04471061572777259051769;
constexpr double bhh1 = 0.24409448818897637795276, bhh2 = 0.73384668828161185734136,
                 bhh3 = 0.02205882352941176470588;
constexpr double er1 = 0.01312004499419488073250, er6 = -1.22515644637620444072057,
                 er7 = -0.49575894965725019152141, er8 = 1.66437718245498653696153,
                 er9 = -0.35032884874997368168865, er10 = 0.33417911871301747902973,
                 er11 = 0.08192320648511571246571, er12 = -0.02235530786388629525884;
constexpr double d41 = -5.40685903845352664250302, d46 = 367.268892700041893590281,
                 d47 = 154.609958204083905482676, d48 = -505.920283865412564024766,
                 d49 = 15.5975154819608130688200, d410 = -26.1936204184402805956691,
                 d411 = -0.74003512364122230844721, d412 = 1.11776539319431476294221,
                 d413 = -0.33333333333333333333333, d51 = 6.51987095363079615048119,
                 d56 = -1066.34956011730205278592, d57 = -351.864047514639508625601,
                 d58 = 1363.51955696662884408368, d59 = -112.727669432657582669864,
                 d510 = 159.796191868560289612921, d511 = -2.13865100308788816220259,
                 d512 = -3.75569172113289760348584, d513 = 7.0, d61 = 10.4698004763293477204238,
                 d66 = -1380.01473607038123167155, d67 = -531.219827862514074379012,
                 d68 = 1866.98964341870892451324, d69 = -53.3302605020547902574560,
                 d610 = 82.4147560258671369782481, d611 = 7.38443654502992069572676,
                 d612 = 0.41729908012587751149843, d613 = -3.11111111111111111111111,
                 d71 = -16.6338582677165354330709, d76 = 4516.16568914956011730205,
                 d77 = 1393.85185384057776465219, d78 = -5687.52042419481539670071,
                 d79 = 473.965563750151263163661, d710 = -661.810776942355889724311,
                 d711 = -18.0180473354013232598119;

Mat3 unpack(const double* v)
{
    Mat3 m;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = v[3 * i + j];
    return m;
}

void pack(const Mat3& m, double* v)
{
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) v[3 * i + j] = m(i, j);
}

void affine_rhs(const GasParams& p, double t, const State& x, State& dx)
{
    Mat3 A = unpack(x.data());
    double det = A.determinant();
    if (!(det > 0.0) || !std::isfinite(det)) {
        std::ostringstream msg;
        msg << "integrate: det A reached " << det << " at t = " << t;
        throw Error(ErrorCode::integration, msg.str());
    }
    for (int i = 0; i < 9; ++i) dx[i] = x[9 + i];
    if (p.delta == 0.0) {
        for (int i = 9; i < 18; ++i) dx[i] = 0.0;
        return;
    }
    pack(p.delta * nonlinearity(A, p.gamma), dx.data() + 9);
}

}  // namespace

AffineTrajectory integrate(const AffineIVP& ivp)
{
    ivp.validate();
    const GasParams& p = ivp.params;
    AffineTrajectory traj;
    traj.params_ = p;
    traj.A0_ = ivp.A0;
    traj.A1_ = ivp.A1;
    traj.energy0_ = affine_energy(ivp.A0, ivp.A1, p);

    State x{}, k1{}, k2{}, k3{}, k4{}, k5{}, k6{}, k7{}, k8{}, k9{}, k10{}, k11{}, k12{}, k13{}, xt{};
    pack(ivp.A0, x.data());
    pack(ivp.A1, x.data() + 9);
    double t = 0.0;
    const double T = ivp.t_end;
    affine_rhs(p, t, x, k1);

    auto scale = [&](double a, double b) { return ivp.tol.atol + ivp.tol.rtol * std::max(std::abs(a), std::abs(b)); };

    // Initial step from the first-derivative scale (Hairer's heuristic, first stage only).
    double d0 = 0.0, d1 = 0.0;
    for (int i = 0; i < kDim; ++i) {
        double sk = scale(x[i], x[i]);
        d0 += (x[i] / sk) * (x[i] / sk);
        d1 += (k1[i] / sk) * (k1[i] / sk);
    }
    d0 = std::sqrt(d0 / kDim);
    d1 = std::sqrt(d1 / kDim);
    double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::min(h, T);

    const double fdec = 0.333, finc = 6.0, safe = 0.9;
    const std::size_t max_steps = 10000000;
    std::vector<AffineTrajectory::Step> steps;

    while (t < T) {
        if (steps.size() >= max_steps) throw Error(ErrorCode::integration, "integrate: step budget exhausted");
        bool last = false;
        if (t + h >= T) {
            h = T - t;
            last = true;
        }
        if (!(h > 1e-14 * std::max(1.0, std::abs(t)))) {
            std::ostringstream msg;
            msg << "integrate: step size underflow (h = " << h << ") at t = " << t;
            throw Error(ErrorCode::integration, msg.str());
        }
        auto stage = [&](double c, auto&& combine, State& out) {
            for (int i = 0; i < kDim; ++i) xt[i] = x[i] + h * combine(i);
            affine_rhs(p, t + c * h, xt, out);
        };
        stage(c2, [&](int i) { return a21 * k1[i]; }, k2);
        stage(c3, [&](int i) { return a31 * k1[i] + a32 * k2[i]; }, k3);
        stage(c4, [&](int i) { return a41 * k1[i] + a43 * k3[i]; }, k4);
        stage(c5, [&](int i) { return a51 * k1[i] + a53 * k3[i] + a54 * k4[i]; }, k5);
        stage(c6, [&](int i) { return a61 * k1[i] + a64 * k4[i] + a65 * k5[i]; }, k6);
        stage(c7, [&](int i) { return a71 * k1[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]; }, k7);
        stage(c8, [&](int i) { return a81 * k1[i] + a84 * k4[i] + a85 * k5[i] + a86 * k6[i] + a87 * k7[i]; }, k8);
        stage(c9, [&](int i) { return a91 * k1[i] + a94 * k4[i] + a95 * k5[i] + a96 * k6[i] + a97 * k7[i] + a98 * k8[i]; }, k9);
        stage(c10, [&](int i) {
            return a101 * k1[i] + a104 * k4[i] + a105 * k5[i] + a106 * k6[i] + a107 * k7[i] + a108 * k8[i] + a109 * k9[i];
        }, k10);
        stage(c11, [&](int i) {
            return a111 * k1[i] + a114 * k4[i] + a115 * k5[i] + a116 * k6[i] + a117 * k7[i] + a118 * k8[i] +
                   a119 * k9[i] + a1110 * k10[i];
        }, k11);
        stage(1.0, [&](int i) {
            return a121 * k1[i] + a124 * k4[i] + a125 * k5[i] + a126 * k6[i] + a127 * k7[i] + a128 * k8[i] +
                   a129 * k9[i] + a1210 * k10[i] + a1211 * k11[i];
        }, k12);
        for (int i = 0; i < kDim; ++i) {
            k13[i] = b1 * k1[i] + b6 * k6[i] + b7 * k7[i] + b8 * k8[i] + b9 * k9[i] + b10 * k10[i] + b11 * k11[i] +
                     b12 * k12[i];
            xt[i] = x[i] + h * k13[i];
        }
        double err5 = 0.0, err3 = 0.0;
        for (int i = 0; i < kDim; ++i) {
            double sk = scale(x[i], xt[i]);
            double e3 = (k13[i] - bhh1 * k1[i] - bhh2 * k9[i] - bhh3 * k12[i]) / sk;
            double e5 = (er1 * k1[i] + er6 * k6[i] + er7 * k7[i] + er8 * k8[i] + er9 * k9[i] + er10 * k10[i] +
                         er11 * k11[i] + er12 * k12[i]) / sk;
            err3 += e3 * e3;
            err5 += e5 * e5;
        }
        double den = err5 + 0.01 * err3;
        double err = den <= 0.0 ? 0.0 : std::abs(h) * err5 / std::sqrt(kDim * den);
        if (!std::isfinite(err)) throw Error(ErrorCode::integration, "integrate: non-finite error estimate");
        double fac = std::pow(std::max(err, 1e-30), 0.125);
        if (err > 1.0) {
            h *= std::max(fdec, safe / fac);
            continue;
        }
        affine_rhs(p, t + h, xt, k13);
        AffineTrajectory::Step st;
        st.t0 = t;
        st.h = h;
        for (int i = 0; i < kDim; ++i) {
            double xd = xt[i] - x[i];
            double xc = h * k1[i] - xd;
            st.coef[0][i] = x[i];
            st.coef[1][i] = xd;
            st.coef[2][i] = xc;
            st.coef[3][i] = xd - h * k13[i] - xc;
            // The continuous-extension weights sum to zero; taking differences against k1 keeps
            // the extension exact for constant derivatives.
            double q6 = k6[i] - k1[i], q7 = k7[i] - k1[i], q8 = k8[i] - k1[i], q9 = k9[i] - k1[i],
                   q10 = k10[i] - k1[i], q11 = k11[i] - k1[i], q12 = k12[i] - k1[i], q13 = k13[i] - k1[i];
            st.coef[4][i] = h * (d46 * q6 + d47 * q7 + d48 * q8 + d49 * q9 + d410 * q10 + d411 * q11 + d412 * q12 + d413 * q13);
            st.coef[5][i] = h * (d56 * q6 + d57 * q7 + d58 * q8 + d59 * q9 + d510 * q10 + d511 * q11 + d512 * q12 + d513 * q13);
            st.coef[6][i] = h * (d66 * q6 + d67 * q7 + d68 * q8 + d69 * q9 + d610 * q10 + d611 * q11 + d612 * q12 + d613 * q13);
            st.coef[7][i] = h * (d76 * q6 + d77 * q7 + d78 * q8 + d79 * q9 + d710 * q10 + d711 * q11);
        }
        steps.push_back(st);
        x = xt;
        k1 = k13;
        t = last ? T : t + h;
        h = std::abs(h) * std::min(finc, safe / fac);
    }
    traj.finalize(std::move(steps));
    return traj;
}

void AffineTrajectory::finalize(std::vector<Step> steps)
{
    auto d = std::make_shared<Data>();
    d->steps = std::move(steps);
    d->times.push_back(d->steps.front().t0);
    for (const Step& s : d->steps) d->times.push_back(s.t0 + s.h);
    data_ = d;
    auto det = [d](double t) {
        Mat3 a, ad;
        d->eval(t, a, ad);
        return a.determinant();
    };
    maps_ = TimeMaps([det](double t) { return std::cbrt(det(t)); }, det, params_.gamma, d->times);
}

void AffineTrajectory::Data::eval(double t, Mat3& A, Mat3& Adot) const
{
    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t k = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - times.begin() - 1, 0), steps.size() - 1);
    const Step& s = steps[k];
    double th = (t - s.t0) / s.h, q = 1.0 - th;
    double v[kDim];
    const auto& c = s.coef;
    for (int i = 0; i < kDim; ++i)
        v[i] = c[0][i] + th * (c[1][i] + q * (c[2][i] + th * (c[3][i] + q * (c[4][i] + th * (c[5][i] + q * (c[6][i] + th * c[7][i]))))));
    A = unpack(v);
    Adot = unpack(v + 9);
}

void AffineTrajectory::state(double t, Mat3& A, Mat3& Adot) const
{
    if (t < t_begin() - 1e-12 * std::max(1.0, std::abs(t_begin())) || t > t_end() * (1.0 + 1e-14) + 1e-300) {
        std::ostringstream msg;
        msg << "AffineTrajectory: t = " << t << " outside [" << t_begin() << ", " << t_end() << "]";
        throw Error(ErrorCode::range, msg.str());
    }
    data_->eval(t, A, Adot);
}

Mat3 AffineTrajectory::A(double t) const
{
    Mat3 a, ad;
    state(t, a, ad);
    return a;
}

Mat3 AffineTrajectory::Adot(double t) const
{
    Mat3 a, ad;
    state(t, a, ad);
    return ad;
}

Mat3 AffineTrajectory::Addot(double t) const
{
    if (params_.delta == 0.0) return Mat3::Zero();
    return params_.delta * nonlinearity(A(t), params_.gamma);
}

double AffineTrajectory::energy(double t) const
{
    Mat3 a, ad;
    state(t, a, ad);
    return affine_energy(a, ad, params_);
}

void AffineTrajectory::write_csv(std::ostream& os, int samples_per_step) const
{
    os << "t";
    for (const char* name : {"A", "Adot"})
        for (int i = 1; i <= 3; ++i)
            for (int j = 1; j <= 3; ++j) os << ',' << name << i << j;
    os << ",mu,detLambda,energy\n";
    os << std::setprecision(17);
    auto row = [&](double t) {
        AffineFrame f = frame_at(*this, t);
        os << t;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) os << ',' << f.A(i, j);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) os << ',' << f.Adot(i, j);
        os << ',' << f.mu << ',' << f.Lambda.determinant() << ',' << affine_energy(f.A, f.Adot, params_) << '\n';
    };
    samples_per_step = std::max(1, samples_per_step);
    for (const Step& s : data_->steps)
        for (int k = 0; k < samples_per_step; ++k) row(s.t0 + s.h * k / samples_per_step);
    row(t_end());
}

// ---------------------------------------------------------------- Picard oracle

namespace {

// Cumulative integral of uniformly sampled values with fourth-order interval rules.
template <class T>
std::vector<T> cumulative_integral(const std::vector<T>& f, double h, const T& zero)
{
    const std::size_t n = f.size() - 1;
    std::vector<T> out(f.size(), zero);
    for (std::size_t k = 0; k < n; ++k) {
        T piece;
        if (k == 0)
            piece = (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]) * (h / 24.0);
        else if (k == n - 1)
            piece = (f[n - 3] - 5.0 * f[n - 2] + 19.0 * f[n - 1] + 9.0 * f[n]) * (h / 24.0);
        else
            piece = (-f[k - 1] + 13.0 * f[k] + 13.0 * f[k + 1] - f[k + 2]) * (h / 24.0);
        out[k + 1] = out[k] + piece;
    }
    return out;
}

}  // namespace

PicardResult picard_oracle(const AffineIVP& ivp, double T, int max_iters, int n_intervals)
{
    ivp.validate();
    if (!(T > 0.0)) throw Error(ErrorCode::domain, "picard_oracle: T must be positive");
    if (n_intervals < 4) throw Error(ErrorCode::domain, "picard_oracle: need at least 4 intervals");
    const GasParams& p = ivp.params;
    const double h = T / n_intervals;
    PicardResult res;
    res.t.resize(n_intervals + 1);
    for (int i = 0; i <= n_intervals; ++i) res.t[i] = i * h;
    res.Gamma.assign(n_intervals + 1, Mat3::Zero());
    std::vector<Mat3> f(n_intervals + 1);
    const double expo = 2.0 - 3.0 * p.gamma;
    for (int it = 1; it <= max_iters; ++it) {
        for (int i = 0; i <= n_intervals; ++i) {
            double s = res.t[i];
            Mat3 Ltil = (ivp.A0 + s * ivp.A1) / (1.0 + s);
            Mat3 arg = Ltil + res.Gamma[i] / (1.0 + s);
            double det = arg.determinant();
            if (!(det > 0.0)) throw Error(ErrorCode::non_contraction, "picard_oracle: iterate left GL+(3); delta too large for the oracle");
            f[i] = p.delta == 0.0 ? Mat3::Zero() : Mat3(p.delta * std::pow(1.0 + s, expo) * nonlinearity(arg, p.gamma));
        }
        std::vector<Mat3> inner = cumulative_integral(f, h, Mat3(Mat3::Zero()));
        std::vector<Mat3> next = cumulative_integral(inner, h, Mat3(Mat3::Zero()));
        double dist = 0.0, size = 0.0;
        for (int i = 0; i <= n_intervals; ++i) {
            dist = std::max(dist, (next[i] - res.Gamma[i]).norm());
            size = std::max(size, next[i].norm());
        }
        res.Gamma = std::move(next);
        res.distances.push_back(dist);
        res.iterations = it;
        if (dist <= 1e-13 * (1.0 + size)) break;
        std::size_t m = res.distances.size();
        if (m >= 2 && dist > 0.9 * res.distances[m - 2]) {
            std::ostringstream msg;
            msg << "picard_oracle: successive-iterate distance did not contract (" << res.distances[m - 2] << " -> "
                << dist << "); delta = " << p.delta << " too large for the oracle";
            throw Error(ErrorCode::non_contraction, msg.str());
        }
        if (it == max_iters) throw Error(ErrorCode::non_contraction, "picard_oracle: iteration budget exhausted");
    }
    for (int i = 0; i <= n_intervals; ++i)
        res.sup_scaled = std::max(res.sup_scaled, res.Gamma[i].norm() / (1.0 + res.t[i]));
    return res;
}

// ---------------------------------------------------------------- linear part and frames

ExpansionRates expansion_rates(const Mat3& b, double gamma)
{
    double d = b.determinant();
    if (!(d > 0.0)) throw Error(ErrorCode::domain, "expansion_rates: det b must be positive");
    ExpansionRates r;
    r.b = b;
    r.mu1 = std::cbrt(d);
    r.mu0 = 1.5 * (gamma - 1.0) * r.mu1;
    r.mu2 = 0.5 * (5.0 - 3.0 * gamma) * r.mu1;
    return r;
}

LinearPartReport decompose_linear_part(const AffineTrajectory& traj, double rel_tol, double abs_tol, double fit_lo,
                                       double fit_hi)
{
    LinearPartReport rep;
    const double te = traj.t_end();
    Mat3 b = traj.Adot(te);
    rep.residual = traj.Addot(te).norm() * te;
    rep.b_minus_A1 = (b - traj.A1()).norm();
    double allowed = rel_tol * rep.b_minus_A1 + abs_tol;
    if (rep.residual > allowed) {
        double g = traj.params().gamma;
        double expo = 3.0 * g - 3.0;
        double needed = te * std::pow(rep.residual / allowed, 1.0 / expo);
        std::ostringstream msg;
        msg << "decompose_linear_part: residual |Addot(t_end)| t_end = " << rep.residual << " exceeds " << allowed
            << "; estimated horizon needed t_end >= " << needed;
        throw Error(ErrorCode::horizon_too_short, msg.str());
    }
    rep.rates = expansion_rates(b, traj.params().gamma);
    rep.fit_t_lo = fit_lo;
    rep.fit_t_hi = std::min(fit_hi, te);
    if (traj.params().delta > 0.0 && rep.fit_t_hi > rep.fit_t_lo) {
        std::vector<double> x, y;
        const int n = 61;
        for (int i = 0; i < n; ++i) {
            double t = rep.fit_t_lo * std::pow(rep.fit_t_hi / rep.fit_t_lo, double(i) / (n - 1));
            x.push_back(std::log1p(t));
            y.push_back(std::log(traj.Addot(t).norm()));
        }
        LinearFit fit = fit_line(x, y);
        rep.accel_slope = fit.slope;
        rep.accel_slope_stderr = fit.slope_stderr;
    }
    return rep;
}

AffineFrame frame_from_state(const Mat3& A, const Mat3& Adot, double t, double tau)
{
    AffineFrame f;
    f.t = t;
    f.tau = tau;
    f.A = A;
    f.Adot = Adot;
    double det = A.determinant();
    if (!(det > 0.0)) throw Error(ErrorCode::domain, "frame: det A must be positive");
    Mat3 Ainv = A.inverse();
    f.mu = std::cbrt(det);
    Mat3 M = Ainv * Adot;
    f.mu_dot = f.mu * M.trace() / 3.0;
    f.mu_tau = f.mu * f.mu_dot;
    Mat3 AiAit = Ainv * Ainv.transpose();
    f.Lambda = f.mu * f.mu * AiAit;
    f.Lambda = 0.5 * (f.Lambda + f.Lambda.transpose()).eval();
    f.Lambda_inv = A.transpose() * A / (f.mu * f.mu);
    f.Lambda_inv = 0.5 * (f.Lambda_inv + f.Lambda_inv.transpose()).eval();
    f.O = A / f.mu;
    f.Gamma_star = f.mu * M - f.mu_dot * Mat3::Identity();
    Mat3 Lt = 2.0 * f.mu * f.mu_dot * AiAit - f.mu * f.mu * (M * AiAit + AiAit * M.transpose());
    f.Lambda_tau = f.mu * Lt;
    Eigen::SelfAdjointEigenSolver<Mat3> es(f.Lambda);
    f.eigenvalues = es.eigenvalues();
    return f;
}

AffineFrame frame_at(const AffineTrajectory& traj, double t)
{
    Mat3 A, Ad;
    traj.state(t, A, Ad);
    return frame_from_state(A, Ad, t, traj.time_maps().tau(t));
}

AffineFrame frame_at_tau(const AffineTrajectory& traj, double tau)
{
    double t = traj.time_maps().t_of_tau(tau);
    Mat3 A, Ad;
    traj.state(t, A, Ad);
    return frame_from_state(A, Ad, t, tau);
}

const TimeMaps& time_maps(const AffineTrajectory& traj) { return traj.time_maps(); }

}  // namespace epflow
