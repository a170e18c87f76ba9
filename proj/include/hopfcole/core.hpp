#pragma once

// Log-sum-exp layers built as exact Hopf-Cole solutions of the viscous
// Hamilton-Jacobi equation  u_t + |grad u|^2 = eps * Laplacian(u).
//
// A support set {(y_j, g_j)} and a diffusion time t define the layer
//   W_j = A^{-1} y_j / (2t),   b_j = -g_j - y_j^T A^{-1} y_j / (4t)
// whose output f(x) = eps * log sum_j exp((W_j.x + b_j)/eps) satisfies
//   f(x) + u(x, t) = x^T A^{-1} x / (4t)
// identically, with u the Hopf-Cole solution under the discrete measure.

#include "hopfcole/common.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace hopfcole::core {

/// Atoms y_j (one per row) and initial values g_j of a discrete measure.
class SupportSet {
public:
    SupportSet(Matrix atoms, Vector values);

    Eigen::Index size() const { return atoms_.rows(); }
    Eigen::Index dim() const { return atoms_.cols(); }
    const Matrix& atoms() const { return atoms_; }
    const Vector& values() const { return values_; }
    Vector atom(Eigen::Index j) const { return atoms_.row(j).transpose(); }

    /// Largest pairwise distance between atoms (0 for a single atom).
    double diameter() const;

    /// Copy with g replaced.
    SupportSet with_values(Vector values) const;

private:
    Matrix atoms_;
    Vector values_;
};

/// Symmetric positive-definite matrix A with its inverse cached.
class Metric {
public:
    explicit Metric(Matrix a);

    static Metric identity(Eigen::Index d) { return Metric(Matrix::Identity(d, d)); }

    Eigen::Index dim() const { return a_.rows(); }
    const Matrix& matrix() const { return a_; }
    const Matrix& inverse() const { return inv_; }
    double min_eigenvalue() const { return lambda_min_; }
    double condition_number() const { return cond_; }

    /// v^T A^{-1} v
    double inverse_quadratic(const Vector& v) const;

    static constexpr double kMaxCondition = 1e12;

private:
    Matrix a_;
    Matrix inv_;
    double lambda_min_ = 0.0;
    double cond_ = 1.0;
};

/// LSE layer f(x) = eps * log sum_j exp((W_j.x + b_j)/eps).
class HJNetwork {
public:
    HJNetwork(Matrix weights, Vector biases, double eps, double t,
              std::optional<Metric> metric = std::nullopt,
              std::shared_ptr<const SupportSet> provenance = nullptr);

    Eigen::Index size() const { return weights_.rows(); }
    Eigen::Index dim() const { return weights_.cols(); }
    const Matrix& weights() const { return weights_; }
    const Vector& biases() const { return biases_; }
    double eps() const { return eps_; }
    double t() const { return t_; }
    const std::optional<Metric>& metric() const { return metric_; }
    const std::shared_ptr<const SupportSet>& provenance() const { return provenance_; }

    /// Pre-activations W x + b.
    Vector logits(const Vector& x) const;

    /// max_j ||W_j||_2
    double weight_row_norm_max() const;

private:
    Matrix weights_;
    Vector biases_;
    double eps_;
    double t_;
    std::optional<Metric> metric_;
    std::shared_ptr<const SupportSet> provenance_;
};

HJNetwork build_network(const SupportSet& support, double t, double eps,
                        const std::optional<Metric>& metric = std::nullopt);

double lse_forward(const HJNetwork& net, const Vector& x);

/// |x|^2/(4t), or x^T A^{-1} x/(4t) under a metric.
double quad(const Vector& x, double t, const std::optional<Metric>& metric = std::nullopt);

/// Transport cost |x - y|^2/(4t) (A^{-1}-quadratic form under a metric).
double transport_cost(const Vector& x, const Vector& y, double t,
                      const std::optional<Metric>& metric = std::nullopt);

/// Per-atom energies g_j + cost(x, y_j).
Vector energies(const SupportSet& support, const Vector& x, double t,
                const std::optional<Metric>& metric = std::nullopt);

/// u(x, t) = -eps * log sum_j exp(-(g_j + cost(x, y_j))/eps).
double hopf_cole_solution(const SupportSet& support, const Vector& x, double t, double eps,
                          const std::optional<Metric>& metric = std::nullopt);

/// |lse_forward + hopf_cole_solution - quad(x)| for the network built from `support`.
double identity_residual(const SupportSet& support, const Vector& x, double t, double eps,
                         const std::optional<Metric>& metric = std::nullopt);

struct HopfLaxValue {
    double value;
    Eigen::Index argmin;
};

/// Inviscid limit min_j {g_j + |x - y_j|^2/(4t)}; lowest index wins ties.
HopfLaxValue hopf_lax(const SupportSet& support, const Vector& x, double t);

struct TropicalGap {
    double gap;   ///< lse_forward - max logit
    double bound; ///< eps * log N
};

TropicalGap tropical_gap(const HJNetwork& net, const Vector& x);

struct MeasureExtension {
    double new_f;
    double shift;
};

/// O(1) update of a cached layer output when one neuron (W_0, b_0) is appended.
MeasureExtension measure_extend(const HJNetwork& net, const Vector& new_weight, double new_bias,
                                const Vector& x, double cached_f);

/// Returns the network with neuron (new_weight, new_bias) appended.
HJNetwork append_neuron(const HJNetwork& net, const Vector& new_weight, double new_bias);

struct HallucinationBound {
    double gap_delta;        ///< energy gap to the runner-up atom
    double bound;            ///< eps * log(1 + (N-1) exp(-gap/eps))
    double actual_deviation; ///< |f(x) - (W_j* x + b_j*)|
    Eigen::Index dominant;   ///< Hopf-Lax minimizer j*
    bool degenerate;         ///< tied minimizer
};

HallucinationBound hallucination_bound(const SupportSet& support, const Vector& x, double t,
                                       double eps);

/// Network computing x -> f(A x + c): weights W A, biases W c + b.
HJNetwork affine_reparam(const HJNetwork& net, const Matrix& a, const Vector& c);

/// Piecewise-linear convex conjugate L = H^* sampled on a velocity grid.
/// Entries where the supremum is unbounded hold kInfinity.
struct LegendreTable {
    std::vector<double> velocities;
    std::vector<double> values;
    double lo = 0.0;
    double hi = 0.0;

    static constexpr double kInfinity = 1e300;

    /// Linear interpolation; kInfinity if either bracketing node is infinite.
    /// Throws Error when v lies outside [lo, hi].
    double operator()(double v) const;
    bool contains(double v) const { return v >= lo && v <= hi; }
    static bool is_infinite(double value) { return value >= kInfinity; }

    /// Discrete second differences >= -tol over the finite part, and the
    /// finite part forms a contiguous block.
    bool is_convex(double tol = 1e-10) const;
};

/// Discrete Legendre-Fenchel transform max_p (p v - H(p)) over the samples.
LegendreTable legendre_transform_1d(std::span<const double> p, std::span<const double> h,
                                    std::span<const double> v_grid);

/// K(x) = -eps * log sum_j exp(-(t L((x - y_j)/t) + g_j)/eps) for d = 1.
double kernel_network_eval(const SupportSet& support, const LegendreTable& lagrangian, double x,
                           double t, double eps);

/// min_j {t L((x - y_j)/t) + g_j}, the eps -> 0 limit of kernel_network_eval.
double kernel_network_min(const SupportSet& support, const LegendreTable& lagrangian, double x,
                          double t);

// Gauge choices for the free time parameter t.

/// t = tr(Sigma_X)/d from samples (one per row).
double gauge_data_scale(const Matrix& samples);

/// t = tr(Sigma)/d from a precomputed covariance trace.
double gauge_data_scale(double covariance_trace, Eigen::Index d);

/// eps* = N^(-1/d).
double gauge_generalization(Eigen::Index n_atoms, Eigen::Index d);

struct InformationGauge {
    double t;
    double mean_entropy;
};

/// argmax_t of the mean attribution entropy over xs (one point per row);
/// golden-section search on log t over [t_lo, t_hi].
InformationGauge gauge_information(const SupportSet& support, double eps, const Matrix& xs,
                                   double t_lo = 1e-3, double t_hi = 1e3, int iterations = 60);

/// Mean attribution entropy over xs at time t (the objective of gauge_information).
double mean_attribution_entropy(const SupportSet& support, double eps, const Matrix& xs, double t);

} // namespace hopfcole::core
