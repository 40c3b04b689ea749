#pragma once

#include "epflow/common.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

namespace epflow {

struct Tolerances {
    double rtol = 1e-10;
    double atol = 1e-12;
};

struct AffineIVP {
    GasParams params;
    Mat3 A0 = Mat3::Identity();
    Mat3 A1 = Mat3::Identity();
    double t_end = 1.0;
    Tolerances tol;

    void validate() const;
};

// (det A)^(1-gamma) A^(-T).
Mat3 nonlinearity(const Mat3& A, double gamma);

// 1/2 |Adot|_F^2 + delta/(gamma-1) (det A)^(1-gamma).
double affine_energy(const Mat3& A, const Mat3& Adot, const GasParams& p);

// Cumulative slow time tau and rescaled time s, built by Gauss-Legendre quadrature over the
// breakpoints of a trajectory (or any positive mu(t), det A(t) pair).
class TimeMaps {
public:
    using ScalarFn = std::function<double(double)>;

    TimeMaps() = default;
    TimeMaps(ScalarFn mu, ScalarFn detA, double gamma, std::vector<double> breakpoints);

    double tau(double t) const;
    double s(double t) const;
    double t_of_tau(double tau) const;
    double t_of_s(double s) const;
    double t_min() const { return bp_.front(); }
    double t_max() const { return bp_.back(); }
    double tau_max() const { return tau_cum_.back(); }

private:
    double integrate_piece(int which, double a, double b) const;
    double invert(int which, double value) const;

    ScalarFn mu_, detA_;
    double gamma_ = 1.5;
    std::vector<double> bp_, tau_cum_, s_cum_;
};

class AffineTrajectory {
public:
    struct Step {
        double t0 = 0.0;
        double h = 0.0;
        std::array<std::array<double, 18>, 8> coef{};
    };

    const GasParams& params() const { return params_; }
    double t_begin() const { return data_->steps.front().t0; }
    double t_end() const { return data_->times.back(); }
    double energy0() const { return energy0_; }
    const std::vector<double>& sample_times() const { return data_->times; }
    std::size_t step_count() const { return data_->steps.size(); }
    const Mat3& A1() const { return A1_; }
    const Mat3& A0() const { return A0_; }

    void state(double t, Mat3& A, Mat3& Adot) const;
    Mat3 A(double t) const;
    Mat3 Adot(double t) const;
    Mat3 Addot(double t) const;
    double energy(double t) const;
    const TimeMaps& time_maps() const { return maps_; }

    void write_csv(std::ostream& os, int samples_per_step = 1) const;

private:
    friend AffineTrajectory integrate(const AffineIVP& ivp);

    // Shared so that copies stay valid for the time maps, which capture it.
    struct Data {
        std::vector<Step> steps;
        std::vector<double> times;
        void eval(double t, Mat3& A, Mat3& Adot) const;
    };
    void finalize(std::vector<Step> steps);

    GasParams params_;
    Mat3 A0_, A1_;
    std::shared_ptr<const Data> data_;
    double energy0_ = 0.0;
    TimeMaps maps_;
};

// Adaptive DOP853 integration of Addot = delta N(A) with 7th-order dense output.
AffineTrajectory integrate(const AffineIVP& ivp);

struct PicardResult {
    std::vector<double> t;
    std::vector<Mat3> Gamma;
    std::vector<double> distances;  // successive-iterate sup distances
    int iterations = 0;
    double sup_scaled = 0.0;  // sup |Gamma(t)|/(1+t)

    Mat3 A(std::size_t i, const AffineIVP& ivp) const { return ivp.A0 + t[i] * ivp.A1 + Gamma[i]; }
};

// Fixed-point iteration of the double-integral form for Gamma = A - A0 - t A1 on [0, T].
PicardResult picard_oracle(const AffineIVP& ivp, double T, int max_iters = 200, int n_intervals = 2000);

struct ExpansionRates {
    Mat3 b = Mat3::Identity();
    double mu1 = 1.0;
    double mu0 = 0.75;
    double mu2 = 0.25;
};

ExpansionRates expansion_rates(const Mat3& b, double gamma);

struct LinearPartReport {
    ExpansionRates rates;
    double residual = 0.0;          // |Addot(t_end)| t_end
    double b_minus_A1 = 0.0;        // |b - A1|_F
    double accel_slope = 0.0;       // fitted power of |Addot| against (1 + t)
    double accel_slope_stderr = 0.0;
    double fit_t_lo = 0.0, fit_t_hi = 0.0;
};

// b := Adot(t_end). Refuses (Error horizon_too_short) when the residual exceeds
// rel_tol |b - A1| + abs_tol; the message carries the horizon the decay rate predicts.
LinearPartReport decompose_linear_part(const AffineTrajectory& traj, double rel_tol = 1e-2,
                                       double abs_tol = 1e-12, double fit_lo = 10.0, double fit_hi = 1000.0);

struct AffineFrame {
    double t = 0.0;
    double tau = 0.0;
    Mat3 A, Adot;
    double mu = 1.0;
    double mu_dot = 0.0;  // d mu / dt
    double mu_tau = 0.0;  // d mu / d tau = mu mu_dot
    Mat3 Lambda, Lambda_inv, O, Gamma_star, Lambda_tau;
    Vec3 eigenvalues;  // ascending
};

AffineFrame frame_from_state(const Mat3& A, const Mat3& Adot, double t = 0.0, double tau = 0.0);
AffineFrame frame_at(const AffineTrajectory& traj, double t);
AffineFrame frame_at_tau(const AffineTrajectory& traj, double tau);

const TimeMaps& time_maps(const AffineTrajectory& traj);

}  // namespace epflow
