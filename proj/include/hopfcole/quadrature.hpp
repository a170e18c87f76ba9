#pragma once

// Convergence of the discrete Hopf-Cole sum to its continuum integral:
// grid supports, a dense trapezoid reference, error and bias curves,
// power-law fitting, and the Feynman-Kac Monte Carlo estimator.
//
// The continuum reference omits the (4 pi eps t)^{-d/2} normalization, as the
// discrete sum does; errors are therefore reported with the best constant
// offset removed, (max D - min D)/2 for D = u_N - u_ref over the grid.

#include "hopfcole/core.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace hopfcole::quadrature {

using core::SupportSet;
using ScalarField = std::function<double(const Vector&)>;

struct Box {
    Vector lo;
    Vector hi;

    static Box cube(Eigen::Index d, double lo, double hi);
    Eigen::Index dim() const { return lo.size(); }
};

/// floor(N^(1/d)) points per axis, endpoints included.
SupportSet grid_support(const ScalarField& g, const Box& domain, Eigen::Index n_target);

/// Largest k with k^d <= n.
Eigen::Index integer_root(Eigen::Index n, Eigen::Index d);

/// -eps log of the trapezoid rule for int_box exp(-(g(y) + |x - y|^2/(4t))/eps) dy,
/// `resolution` nodes per axis. d <= 2.
double continuum_oracle(const ScalarField& g, const Vector& x, double t, double eps, int resolution,
                        const Box& box);

struct OracleCheck {
    double value;
    double refined;       ///< same at twice the resolution
    bool under_resolved;  ///< |value - refined| > 1e-8
};

OracleCheck continuum_oracle_checked(const ScalarField& g, const Vector& x, double t, double eps, int resolution,
                                     const Box& box);

/// Oracle on the tensor grid axes[0] x ... (first axis slowest), d <= 2.
Vector continuum_oracle_grid(const ScalarField& g, const std::vector<std::vector<double>>& axes, double t,
                             double eps, int resolution, const Box& box);

enum class EpsRule { fixed, generalization };

struct QuadratureOptions {
    Box domain = Box::cube(1, -2.0, 2.0);
    double eval_fraction = 0.8;   ///< evaluation grid covers the central part of the domain
    int eval_per_axis = 101;
    double oracle_spacing = 0.1;  ///< oracle node spacing in units of eps
    int min_resolution = 256;
    EpsRule rule = EpsRule::generalization;
    double fixed_eps = 0.1;
};

struct ErrorCurve {
    std::vector<Eigen::Index> n; ///< actual atom counts
    std::vector<double> eps;
    std::vector<double> error;
    std::vector<double> rms_error; ///< root-mean-square of D - mean(D)
    std::vector<int> oracle_resolution;
    Eigen::Index d = 1;
    double t = 1.0;
    EpsRule rule = EpsRule::generalization;
};

/// Offset-free sup error of the grid-support solution against the oracle, per N.
ErrorCurve quadrature_error_curve(const ScalarField& g, Eigen::Index d, double t,
                                  const std::vector<Eigen::Index>& n_targets, const QuadratureOptions& options);

struct ScalingFit {
    double alpha;
    double intercept;
    double r_squared;
    double d_eff;
};

/// Least squares on (log N, log loss); alpha = -slope, d_eff = 1/alpha.
ScalingFit scaling_fit(const std::vector<std::pair<double, double>>& points);

ScalingFit fit_curve(const ErrorCurve& curve);

struct BiasCurve {
    std::vector<double> eps;
    std::vector<double> deviation; ///< sup over the grid of |u_eps - u_0|
    double constant;               ///< geometric mean of deviation/eps (0 if any deviation is 0)
    bool within_factor3;
};

/// eps_list must be strictly decreasing.
BiasCurve viscosity_bias_curve(const SupportSet& support, const Matrix& xs, double t,
                               const std::vector<double>& eps_list);

struct MonteCarlo {
    double estimate;
    double std_error; ///< delta method on -eps log(mean)
};

/// -eps log E[exp(-g(Y)/eps)], Y ~ N(x, 2 eps t I), from n_samples seeded draws.
MonteCarlo feynman_kac_mc(const ScalarField& g, const Vector& x, double t, double eps, int n_samples,
                          std::uint64_t seed);

struct MatchedScale {
    Vector posterior_mean;
    Vector mean_std_error;
    double posterior_variance;  ///< per coordinate
    double variance_std_error;
    Vector expected_mean;       ///< x/2
    double expected_variance;   ///< eps t
};

/// Gibbs posterior over n_atoms prior draws y_j ~ N(0, 2 eps t I) with g = 0.
MatchedScale matched_scale_check(const Vector& x, double t, double eps, int n_atoms, std::uint64_t seed);

} // namespace hopfcole::quadrature
