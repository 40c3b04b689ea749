#pragma once

#include "epflow/common.hpp"
#include "epflow/geometry.hpp"

#include <optional>
#include <string>
#include <vector>

namespace epflow {

struct KernelSpec {
    Mat3 Lambda = Mat3::Identity();
    Mat3 Lambda_inv = Mat3::Identity();

    // Validates symmetry, positive definiteness and det = 1 (tolerance tol).
    static KernelSpec make(const Mat3& Lambda, double tol = 1e-8);
};

// G_Lambda(y) = <Lambda^{-1} y, y>^{-1/2}; throws Error(domain) at y = 0.
double green_kernel(const KernelSpec& k, const Vec3& y);
// grad G_Lambda(y) = -Lambda^{-1} y <Lambda^{-1} y, y>^{-3/2}
Vec3 green_gradient(const KernelSpec& k, const Vec3& y);

// Target-centred polar rule: n_u Gauss-Legendre nodes per hemisphere in the (sinh-stretched)
// polar cosine, n_psi uniform azimuths, n_rho Gauss-Legendre nodes along each ray.
struct PolarRule {
    int n_u = 8;
    int n_psi = 16;
    int n_rho = 8;
    int threads = 1;
    bool estimate_error = false;  // repeat with every count halved and report the difference

    PolarRule refined(int factor) const
    {
        PolarRule r = *this;
        r.n_u *= factor;
        r.n_psi *= factor;
        r.n_rho *= factor;
        return r;
    }
    std::size_t points_per_target() const { return std::size_t(2) * n_u * n_psi * n_rho; }
};

// Unsigned background potential w^alpha * G_Lambda at arbitrary targets (inside or outside B).
std::vector<double> background_potential(const GasParams& p, const KernelSpec& k, const std::vector<Vec3>& targets,
                                         const PolarRule& rule, double* error_estimate = nullptr);
ScalarField background_potential(const BallGrid& g, const GasParams& p, const KernelSpec& k, const PolarRule& rule,
                                  double* error_estimate = nullptr);

// Radial closed forms for Lambda = Identity: enclosed mass 4 pi int_0^r s^2 w^alpha ds and the
// potential w^alpha * (1/|.|) at radius r (any r >= 0).
double enclosed_mass(const GasParams& p, double r);
double radial_background_potential(const GasParams& p, double r);

struct InjectivityReport {
    double sup_Dtheta = 0.0;     // sup over nodes of the Frobenius norm of D theta
    double lipschitz_lower = 0.0;
    double lipschitz_upper = 0.0;
    double min_pair_ratio = 0.0; // min |eta(y) - eta(z)| / |y - z| over node pairs (pairwise method only)
    bool injective = false;
    std::string method;
};

InjectivityReport check_injectivity(const BallGrid& g, const VectorField& theta, const FlowMapDerivatives& fmd);

struct ForceField {
    VectorField G;        // G_i = A^k_i Psi,_k
    ScalarField Psi;      // Psi = kernel_constant * (w^alpha * G_Lambda(eta(y) - eta(.)))
    double kernel_constant = -1.0;
    InjectivityReport injectivity;
    std::vector<Eigen::Index> flagged;  // nodes whose quadrature produced non-finite values
    double error_estimate = 0.0;
    std::string provenance;
};

// Force on the grid for eta = id + theta. Throws Error(degenerate_map) when eta is not injective.
ForceField force_field(const BallGrid& g, const VectorField& theta, const FlowMapDerivatives& fmd,
                       const KernelSpec& k, const GasParams& p, const PolarRule& rule);
// theta = 0 shortcut.
ForceField force_field(const BallGrid& g, const KernelSpec& k, const GasParams& p, const PolarRule& rule);

struct DivCurlReport {
    ScalarField div_residual;          // div_Lambda G - right side (full identity)
    ScalarField div_uncorrected;       // div_Lambda G - 4 pi c w^alpha
    MatrixField curl_residual;         // Curl G - right side
    double div_norm = 0.0;             // L2 norms over B
    double div_uncorrected_norm = 0.0;
    double curl_norm = 0.0;
    double source_norm = 0.0;          // || 4 pi c w^alpha ||
};

DivCurlReport divcurl_residual(const BallGrid& g, const VectorField& G, const VectorField& theta,
                               const FlowMapDerivatives& fmd, const Mat3& Lambda, const GasParams& p);

struct NormalReport {
    VectorField reconstructed;
    VectorField direct;
    double max_error = 0.0;    // on supp psi
    double l2_error = 0.0;     // psi-weighted L2
    double min_L = 0.0;        // min of Lambda_km y^k y^m / r^2 on supp psi
};

// X_r G^i from div_Lambda G, Curl G and tangential derivatives. div and curl default to
// grid derivatives of G; pass the values an equation prescribes to reconstruct from them instead.
NormalReport normal_reconstruction(const BallGrid& g, const VectorField& G, const Mat3& Lambda,
                                   const ScalarField* div = nullptr, const MatrixField* curl = nullptr);

}  // namespace epflow
