#pragma once

// Gibbs attribution over support atoms: closed-form influence, gradients,
// the entropy landscape H(x; eps) and its critical points across eps.

#include "hopfcole/core.hpp"

#include <vector>

namespace hopfcole::attribution {

using core::SupportSet;

struct GibbsWeights {
    Vector pi;
    Vector log_pi; ///< finite even where pi underflows
    Vector x;
    double eps;
};

/// pi_j proportional to exp(-(|x - y_j|^2/(4t) + g_j)/eps).
GibbsWeights gibbs_weights(const SupportSet& support, const Vector& x, double t, double eps);

/// sum_j pi_j g_j
double soft_prediction(const GibbsWeights& weights, const SupportSet& support);

/// d(soft_prediction)/d(g_j) = pi_j (1 + (fhat - g_j)/eps).
double label_sensitivity(const SupportSet& support, const Vector& x, double t, double eps, Eigen::Index j);

/// Cov_pi(g, y)/(2 t eps)
Vector prediction_gradient(const SupportSet& support, const Vector& x, double t, double eps);

struct Entropy {
    double value;
    Vector gradient; ///< Cov_pi(y, -log pi)/(2 t eps)
};

Entropy attribution_entropy(const SupportSet& support, const Vector& x, double t, double eps);

enum class MorseType { minimum, saddle, maximum, degenerate };

const char* to_string(MorseType type);

struct CriticalPoint {
    Vector location;
    MorseType type;
    double entropy;
    Vector eigenvalues; ///< ascending, of the finite-difference Hessian of H
    double gradient_norm;

    double min_eigenvalue() const { return eigenvalues[0]; }
    double min_abs_eigenvalue() const { return eigenvalues.cwiseAbs().minCoeff(); }
};

struct CriticalPointOptions {
    double hessian_step_rel = 1e-4; ///< FD step, times the support diameter
    double gradient_tol = 1e-9;
    int max_iterations = 200;
    int max_halvings = 30;
    double dedup_rel = 1e-4;     ///< dedup radius, times the support diameter
    double classify_tol = 1e-8;
};

struct CriticalPointSearch {
    std::vector<CriticalPoint> points; ///< sorted lexicographically by location
    int seeds = 0;
    int non_convergent = 0;
    int outside_box = 0;      ///< converged beyond the seed box (flat far field)
    int degenerate = 0;       ///< converged with an eigenvalue below classify_tol
    bool flat = false;        ///< every converged point degenerate; one representative reported
};

/// Seeds: regular grid over the square around the atom hull (longest side
/// padded by `margin`), plus every atom
/// and every pairwise midpoint. One point per row.
Matrix default_seed_grid(const SupportSet& support, int per_axis = 21, double margin = 0.5);

/// Damped Newton on grad H from every seed; convergence needs both the
/// gradient below gradient_tol and the Newton step below the dedup radius.
/// Points converging outside the seed bounding box, or with a near-zero
/// Hessian eigenvalue, are dropped and counted; if nothing nondegenerate survives but something converged, a
/// single degenerate representative is reported.
CriticalPointSearch find_critical_points(const SupportSet& support, double t, double eps, const Matrix& seeds,
                                         const CriticalPointOptions& options = {});

/// Symmetric FD Hessian of H from central differences of the analytic gradient.
Matrix entropy_hessian_fd(const SupportSet& support, const Vector& x, double t, double eps, double step);

struct FoldEvent {
    std::size_t index;         ///< grid position of the eps after the drop
    int count_before;
    int count_after;
    double eps_lo;             ///< bisection bracket of the drop
    double eps_hi;
    double min_abs_eig_before; ///< fold diagnostic at the preceding grid eps
    bool signature;            ///< that value is minimal over the preceding constant-count run
};

struct BifurcationTrace {
    std::vector<double> eps;
    std::vector<CriticalPointSearch> searches;
    std::vector<FoldEvent> folds;

    int count(std::size_t i) const { return static_cast<int>(searches[i].points.size()); }
    bool counts_nonincreasing() const;
};

/// Fold diagnostic: smallest |eigenvalue| among saddles, or among all points
/// when there is no saddle (d = 1, where folds pair a minimum with a maximum).
/// NaN for an empty or flat search.
double fold_diagnostic(const CriticalPointSearch& search);

BifurcationTrace bifurcation_sweep(const SupportSet& support, double t, const std::vector<double>& eps_grid,
                                   const Matrix& seeds, int bisections = 10,
                                   const CriticalPointOptions& options = {});

struct NtkGram {
    Matrix gram;
    double min_eigenvalue;
    bool cholesky_ok;
};

/// K_ab = eps^2 <pi(x_a), pi(x_b)>, evaluation points one per row.
NtkGram ntk_gram(const SupportSet& support, const Matrix& xs, double t, double eps);

/// eps (diag pi - pi pi^T): Hessian of the layer output in the log-amplitudes
/// theta_j = -g_j/eps (biases b = eps theta + const).
Matrix fixed_support_hessian(const SupportSet& support, const Vector& x, double t, double eps);

} // namespace hopfcole::attribution
