#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace epflow {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

enum class ErrorCode {
    domain = 1,
    integration,
    non_contraction,
    horizon_too_short,
    degenerate_map,
    vacuum_degeneracy,
    apriori_violation,
    config,
    io,
    range,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

const char* error_code_name(ErrorCode code);

// Polytropic gas parameters. alpha is derived from gamma and never set independently.
struct GasParams {
    double gamma = 1.5;
    double alpha = 2.0;
    double delta = 1e-2;
    int field_sign = 1;

    static GasParams make(double gamma, double delta, int field_sign = 1);

    // Throws Error(domain) when the parameters are unusable. Dynamics runs need 1 < gamma < 5/3,
    // affine-only runs accept any gamma > 1 and delta >= 0.
    void validate(bool for_dynamics) const;
};

// Neumaier compensated accumulator; summation order is the caller's order, so results are
// reproducible whenever the loop order is fixed.
class CompensatedSum {
public:
    void add(double x)
    {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace epflow
