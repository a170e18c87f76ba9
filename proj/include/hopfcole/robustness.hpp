#pragma once

// Curvature of the LSE layer in its input: closed-form Hessian, the uniform
// bound ||W||_{2,inf}^2 / eps, and the certified radius it implies.

#include "hopfcole/core.hpp"

#include <cstdint>
#include <vector>

namespace hopfcole::robustness {

using core::HJNetwork;
using core::SupportSet;

/// eps^{-1} W^T (diag pi - pi pi^T) W
Matrix input_hessian(const HJNetwork& net, const Vector& x);

/// grad f = W^T pi
Vector input_gradient(const HJNetwork& net, const Vector& x);

struct SpectralNorm {
    double norm;
    double bound; ///< ||W||_{2,inf}^2 / eps
    int iterations;
};

/// Power iteration on input_hessian from a seeded start vector; stops after
/// 100 iterations or when the estimate changes by less than 1e-10 relative.
SpectralNorm hessian_spectral_norm(const HJNetwork& net, const Vector& x, std::uint64_t seed = 0);

struct RobustnessCertificate {
    double eps;
    double tau;
    double w_row_norm_max;
    double hessian_bound;
    double certified_radius; ///< +inf for an all-zero weight matrix
    bool unbounded;
};

/// r* = 2 tau / (||W|| (sqrt(1 + 2 tau/eps) + 1)), the cancellation-free form
/// of (eps/||W||)(sqrt(1 + 2 tau/eps) - 1).
RobustnessCertificate certified_radius(const HJNetwork& net, double tau);

struct PerturbationCheck {
    double max_observed;
    double bound; ///< ||W|| r + ||W||^2 r^2 / (2 eps)
};

/// Largest |f(x + delta) - f(x)| over n_samples random directions at radius r
/// plus both gradient directions.
PerturbationCheck perturbation_check(const HJNetwork& net, const Vector& x, double r, int n_samples,
                                     std::uint64_t seed = 0);

struct ShockSample {
    double s;       ///< signed offset along the unit normal from the crossing
    Vector x;
    double pi_i;
    double pi_j;
    double hessian_norm;
};

struct ShockProbe {
    Vector normal;   ///< (y_i - y_j)/(2t)
    double offset;   ///< g_i - g_j + (|y_i|^2 - |y_j|^2)/(4t)
    Vector crossing; ///< projection of the atom midpoint onto the hyperplane
    double crossing_pi_gap; ///< |pi_i - pi_j| at the crossing
    double leakage;         ///< 1 - pi_i - pi_j at the crossing
    std::vector<ShockSample> path;
};

/// Samples a segment of length 6 |y_i - y_j| centred on the tie hyperplane of
/// atoms i and j and orthogonal to it.
ShockProbe shock_probe(const SupportSet& support, Eigen::Index i, Eigen::Index j, double t, double eps,
                       int n_path_points);

/// Atoms 0, delta/k, ..., delta on a line (d = 1), all g = 0.
SupportSet refined_pair(double delta, int k);

/// max over xs (one per row) of the input-Hessian spectral norm.
double peak_hessian_norm(const HJNetwork& net, const Matrix& xs);

} // namespace hopfcole::robustness
