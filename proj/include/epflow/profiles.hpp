#pragma once

#include "epflow/affine.hpp"
#include "epflow/common.hpp"

#include <string>
#include <vector>

namespace epflow {

// w(y) = (gamma-1)/(2 gamma) (1 - |y|^2)_+
double enthalpy(const Vec3& y, const GasParams& p);
double enthalpy_r2(double r2, const GasParams& p);
// Radial derivative dw/dr inside the ball.
double enthalpy_dr(double r, const GasParams& p);

struct AffineFieldSample {
    double t = 0.0;
    Vec3 x = Vec3::Zero();
    double rho = 0.0;
    Vec3 u = Vec3::Zero();
    bool inside = false;
};

AffineFieldSample affine_density_velocity(const AffineFrame& frame, const Vec3& x, const GasParams& p);

struct MassResult {
    double value = 0.0;
    double error_estimate = 0.0;  // |I(2n) - I(n)|
    bool converged = false;
};

// Integral of rho_A over the ellipsoid A B, evaluated on Eulerian points x = A y.
MassResult total_mass(const AffineFrame& frame, const GasParams& p, int n_radial = 48, double rel_tol = 1e-10);

// delta^alpha int_B w^alpha = delta^alpha 4 pi c^alpha B(3/2, alpha+1) / 2 with c = (gamma-1)/(2 gamma).
double mass_closed_form(const GasParams& p);

enum class GammaClass { integer_alpha, near_isothermal, not_covered };
const char* gamma_class_name(GammaClass c);
GammaClass classify_gamma(double gamma);

struct WeightTerm {
    int a = 0;              // power of X_r
    double coarse = 0.0;    // || X_r^a w^alpha ||_{alpha+a,1} at n
    double fine = 0.0;      // same at 2n
    bool divergent = false;
};

struct AdmissibilityReport {
    bool physical_vacuum = false;   // dw/dr < 0 on the boundary collar
    double collar_max_dr = 0.0;     // largest dw/dr seen on the collar (negative when satisfied)
    int order = 0;
    std::vector<WeightTerm> terms;  // tangential terms vanish for the radial weight and are omitted
    double weight_sum_coarse = 0.0;
    double weight_sum_fine = 0.0;
    double refinement_ratio = 0.0;
    bool weight_finite = false;
    GammaClass gamma_class = GammaClass::not_covered;
    std::string warning;
};

AdmissibilityReport admissibility_checks(const GasParams& p, int N, int n_radial = 2000, double collar = 0.1);

}  // namespace epflow
