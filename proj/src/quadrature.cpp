#include "epflow/quadrature.hpp"
#include "epflow/common.hpp"

#include <cmath>
#include <numbers>

namespace epflow {

const char* error_code_name(ErrorCode code)
{
    switch (code) {
    case ErrorCode::domain: return "domain";
    case ErrorCode::integration: return "integration";
    case ErrorCode::non_contraction: return "non_contraction";
    case ErrorCode::horizon_too_short: return "horizon_too_short";
    case ErrorCode::degenerate_map: return "degenerate_map";
    case ErrorCode::vacuum_degeneracy: return "vacuum_degeneracy";
    case ErrorCode::apriori_violation: return "apriori_violation";
    case ErrorCode::config: return "config";
    case ErrorCode::io: return "io";
    case ErrorCode::range: return "range";
    }
    return "unknown";
}

QuadratureRule gauss_legendre(int n)
{
    if (n < 1) throw Error(ErrorCode::domain, "gauss_legendre: n must be positive");
    QuadratureRule q;
    q.nodes.assign(n, 0.0);
    q.weights.assign(n, 0.0);
    const double pi = std::numbers::pi;
    for (int i = 0; i < (n + 1) / 2; ++i) {
        // Tricomi initial guess, then Newton on P_n.
        double x = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 1.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            double pn = (n == 1) ? x : p1;
            double pnm1 = (n == 1) ? 1.0 : p0;
            dp = n * (x * pn - pnm1) / (x * x - 1.0);
            double dx = pn / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        double pn = (n == 1) ? x : p1;
        double pnm1 = (n == 1) ? 1.0 : p0;
        dp = n * (x * pn - pnm1) / (x * x - 1.0);
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        q.nodes[i] = -x;
        q.nodes[n - 1 - i] = x;
        q.weights[i] = w;
        q.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) q.nodes[n / 2] = 0.0;
    return q;
}

QuadratureRule gauss_legendre(int n, double a, double b)
{
    QuadratureRule q = gauss_legendre(n);
    double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (int i = 0; i < n; ++i) {
        q.nodes[i] = mid + half * q.nodes[i];
        q.weights[i] *= half;
    }
    return q;
}

QuadratureRule fejer_first(int n)
{
    if (n < 1) throw Error(ErrorCode::domain, "fejer_first: n must be positive");
    QuadratureRule q;
    const double pi = std::numbers::pi;
    for (int k = 0; k < n; ++k) {
        double th = (k + 0.5) * pi / n;
        double s = 0.0;
        for (int m = 1; m <= n / 2; ++m) s += std::cos(2.0 * m * th) / (4.0 * m * m - 1.0);
        q.nodes.push_back(std::cos(th));
        q.weights.push_back(2.0 / n * (1.0 - 2.0 * s));
    }
    return q;
}

std::vector<double> barycentric_weights(const std::vector<double>& nodes)
{
    const std::size_t n = nodes.size();
    std::vector<double> lam(n, 1.0);
    // Scale differences by the node spread so products stay in range for large n.
    double spread = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) spread = std::max(spread, std::abs(nodes[i] - nodes[j]));
    double scale = (n > 1 && spread > 0.0) ? 4.0 / spread : 1.0;
    for (std::size_t j = 0; j < n; ++j) {
        double p = 1.0;
        for (std::size_t k = 0; k < n; ++k)
            if (k != j) p *= scale * (nodes[j] - nodes[k]);
        lam[j] = 1.0 / p;
    }
    return lam;
}

Eigen::MatrixXd differentiation_matrix(const std::vector<double>& x)
{
    const int n = static_cast<int>(x.size());
    std::vector<double> lam = barycentric_weights(x);
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        double diag = 0.0;
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            D(i, j) = (lam[j] / lam[i]) / (x[i] - x[j]);
            diag -= D(i, j);
        }
        D(i, i) = diag;
    }
    return D;
}

double barycentric_interpolate(const std::vector<double>& nodes, const std::vector<double>& bary,
                               const std::vector<double>& values, double x)
{
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < nodes.size(); ++j) {
        double d = x - nodes[j];
        if (d == 0.0) return values[j];
        double t = bary[j] / d;
        num += t * values[j];
        den += t;
    }
    return num / den;
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y)
{
    const std::size_t n = x.size();
    LinearFit f;
    if (n < 2) return f;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double e = y[i] - (f.intercept + f.slope * x[i]);
        sse += e * e;
    }
    f.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
    f.slope_stderr = n > 2 ? std::sqrt(sse / (n - 2) / sxx) : 0.0;
    return f;
}

}  // namespace epflow
