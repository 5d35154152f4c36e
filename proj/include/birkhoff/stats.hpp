#pragma once

#include <Eigen/Dense>

#include "birkhoff/spaces.hpp"

#include <cmath>
#include <stdexcept>

namespace birkhoff::stats {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Inverse standard normal CDF: Acklam's rational approximation polished with
// one Halley step, accurate to ~1e-15 over (0, 1).
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must be in (0,1)");

    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01,  -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                               3.754408661907416e+00};

    const double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
    return x - u / (1.0 + x * u / 2.0);
}

// Upper bound, valid at confidence 1 - alpha under any cross-component
// correlation, on the space norm of a centered Gaussian vector whose
// component scales are tau(j). Reduces to the plain two-sided z-test
// z * tau for scalar values:
//   Real/FiniteDim : z(alpha) * ||tau||_2  (E||G||^2 = sum tau_j^2 exactly),
//   GridFunction   : z(alpha/d) * max tau_j  (union bound over grid points),
//   SampleFunction : z(alpha/d) * mean tau_j (union bound, mean-abs norm).
inline double gaussian_norm_bound(const SpaceDescriptor& space, const Eigen::VectorXd& tau, double alpha) {
    const double d = double(space.dim());
    switch (space.kind()) {
        case SpaceKind::Real:
        case SpaceKind::FiniteDim:
            return normal_quantile(1.0 - alpha / 2.0) * tau.norm();
        case SpaceKind::GridFunction:
            return normal_quantile(1.0 - alpha / (2.0 * d)) * tau.maxCoeff();
        case SpaceKind::SampleFunction:
            return normal_quantile(1.0 - alpha / (2.0 * d)) * tau.mean();
    }
    return 0.0;  // unreachable
}

}  // namespace birkhoff::stats
