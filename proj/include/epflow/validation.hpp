#pragma once

#include "epflow/common.hpp"
#include "epflow/field.hpp"

#include <string>
#include <vector>

namespace epflow {

// One pass/fail line: value compared against a bound.
struct Check {
    std::string name;
    double value = 0.0;
    double bound = 0.0;
    bool upper = true;  // value <= bound when true, value >= bound otherwise
    bool pass = false;
    std::string note;

    static Check at_most(std::string name, double value, double bound, std::string note = {});
    static Check at_least(std::string name, double value, double bound, std::string note = {});
};

// Commutators of X_r, slash and d, the decomposition of d_i, the div/curl identities of the force at
// theta = 0 and theta = eps M y, and the normal reconstruction formula.
std::vector<Check> identity_suite(int threads = 1);

struct PoissonLevel {
    PolarRule rule;
    double div_residual = 0.0;  // || div_Lambda G - 4 pi c w^alpha ||
    double relative = 0.0;      // divided by || 4 pi c w^alpha ||
    double curl_residual = 0.0;
};

struct PoissonStudy {
    double center_potential = 0.0;  // unsigned w^alpha * G_Lambda at the centre
    double center_oracle = 0.0;     // radial closed form (Lambda = Identity only, NaN otherwise)
    double center_error_estimate = 0.0;
    std::vector<PoissonLevel> levels;
};

// Centre potential with `rule`, then the Poisson residual at theta = 0 for `levels` rules obtained by
// doubling `base` successively.
PoissonStudy poisson_study(const BallGrid& g, const GasParams& p, const Mat3& Lambda, const PolarRule& rule,
                           const PolarRule& base, int levels);

}  // namespace epflow
