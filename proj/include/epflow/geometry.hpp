#pragma once

#include "epflow/common.hpp"

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace epflow {

using ScalarField = Eigen::ArrayXd;
using VectorField = std::array<ScalarField, 3>;
using MatrixField = std::array<std::array<ScalarField, 3>, 3>;  // [row][col]

VectorField make_vector_field(Eigen::Index n, double value = 0.0);
MatrixField make_matrix_field(Eigen::Index n, double value = 0.0);

// C^2 quintic smoothstep: 0 for r <= 1/4, 1 for r >= 3/4.
double cutoff(double r);

// Offset spherical product grid on the closed unit ball with spectral derivative operators.
//
// Radial nodes are the positive half of a 2 n_r point Gauss-Legendre rule, so every line
// through the origin carries a full polynomial collocation set. Polar nodes are offset from the
// poles, and each meridian joined with its antipode is an equispaced periodic grid. Azimuthal
// nodes are equispaced (n_phi even).
class BallGrid {
public:
    BallGrid(int n_r, int n_theta, int n_phi);

    int n_r() const { return nr_; }
    int n_theta() const { return nt_; }
    int n_phi() const { return np_; }
    Eigen::Index size() const { return Eigen::Index(nr_) * nt_ * np_; }
    Eigen::Index index(int j, int k, int l) const { return (Eigen::Index(j) * nt_ + k) * np_ + l; }

    const std::vector<double>& radii() const { return r_nodes_; }
    const std::vector<double>& polar() const { return th_nodes_; }
    const std::vector<double>& azimuth() const { return ph_nodes_; }

    // Per-node data.
    const VectorField& y() const { return y_; }
    const ScalarField& r() const { return r_; }
    const ScalarField& theta() const { return th_; }
    const ScalarField& phi() const { return ph_; }
    const ScalarField& weights() const { return wq_; }
    const ScalarField& psi() const { return psi_; }
    ScalarField enthalpy(const GasParams& p) const;

    // Highest Cartesian polynomial degree differentiated exactly.
    int polynomial_budget() const;
    // Smallest physical distance between neighbouring nodes.
    double min_spacing() const;

    ScalarField d_r(const ScalarField& f) const;
    ScalarField d_theta(const ScalarField& f) const;
    ScalarField d_phi(const ScalarField& f) const;
    ScalarField X_r(const ScalarField& f) const;
    // Cartesian derivative d_i, i in {0,1,2}.
    ScalarField d(const ScalarField& f, int i) const;
    // Tangential field y_j d_i - y_i d_j.
    ScalarField slash(const ScalarField& f, int j, int i) const;
    // All three Cartesian derivatives sharing the spherical derivatives.
    VectorField gradient(const ScalarField& f) const;

    double integrate(const ScalarField& f) const;
    // int_B w^k f^2 g
    double weighted_norm_sq(const ScalarField& f, double k, const ScalarField& g, const ScalarField& w) const;

    void write_csv(std::ostream& os, const std::vector<std::string>& names,
                   const std::vector<const ScalarField*>& fields) const;

private:
    void check_exactness() const;

    int nr_, nt_, np_;
    std::vector<double> r_nodes_, th_nodes_, ph_nodes_, r_weights_, th_weights_;
    Eigen::MatrixXd Dline_, Dcircle_, Dphi_;
    VectorField y_;
    ScalarField r_, th_, ph_, wq_, psi_;
    // unit vectors n, e_theta, e_phi per node
    VectorField n_, et_, ep_;
    ScalarField sin_th_;
};

struct FlowMapDerivatives {
    MatrixField Deta;  // Deta[i][j] = d_j eta^i
    MatrixField A;     // inverse of Deta
    ScalarField J;     // det Deta
};

// Throws Error(degenerate_map) naming the worst node when det D eta <= 0.
FlowMapDerivatives flow_map_derivatives(const BallGrid& g, const VectorField& eta);
FlowMapDerivatives identity_flow_map(const BallGrid& g);
// Same for eta = id + theta, built as I + D theta (exact identity at theta = 0).
FlowMapDerivatives flow_map_from_displacement(const BallGrid& g, const VectorField& theta);

// Cartesian gradient of each component: out[i][s] = F^i,_s
MatrixField jacobian(const BallGrid& g, const VectorField& F);

struct LieOperators {
    MatrixField grad;        // [grad_eta F]^i_j = A^s_j F^i,_s
    ScalarField div;         // A^s_l F^l,_s
    MatrixField curl;        // A^s_j F^i,_s - A^s_i F^j,_s
    MatrixField curl_lambda; // Lambda_jm A^s_m F^i,_s - Lambda_im A^s_m F^j,_s
};

LieOperators lie_operators(const BallGrid& g, const VectorField& F, const FlowMapDerivatives& fmd, const Mat3& Lambda);
// Same, from a precomputed Cartesian Jacobian.
LieOperators lie_operators(const MatrixField& DF, const FlowMapDerivatives& fmd, const Mat3& Lambda);

// Fourth-order local interpolation of grid fields at arbitrary points of the closed ball, using
// 4 x 4 x 4 stencils in (signed radius, polar angle, azimuth) with antipodal continuation.
class LocalInterpolator {
public:
    struct Stencil {
        std::array<Eigen::Index, 64> idx{};
        std::array<double, 64> w{};
    };

    explicit LocalInterpolator(const BallGrid& g);
    Stencil stencil(const Vec3& y) const;
    static double apply(const Stencil& s, const ScalarField& f)
    {
        double v = 0.0;
        for (int i = 0; i < 64; ++i) v += s.w[i] * f[s.idx[i]];
        return v;
    }

private:
    const BallGrid& g_;
    std::vector<double> s_nodes_;
};

}  // namespace epflow
