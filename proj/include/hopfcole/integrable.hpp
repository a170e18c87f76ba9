#pragma once

// Exponential sums tau = sum_j a_j exp(k_j x1 + k_j^2 x2 + k_j^3 x3) solve the
// bilinear KP equation (D1^4 + 3 D2^2 - 4 D1 D3) tau.tau = 0, and in d = 1
// the Hopf-Cole solution is x^2/(4t) - eps log tau at suitable flow times.

#include "hopfcole/core.hpp"

namespace hopfcole::integrable {

/// Wavenumbers k_j (distinct) and log-amplitudes log a_j, so that a_j = exp(-g_j/eps)
/// stays representable for any g_j/eps.
class TauFunction {
public:
    TauFunction(Vector wavenumbers, Vector log_amplitudes);
    /// Requires a_j > 0.
    static TauFunction from_amplitudes(Vector wavenumbers, const Vector& amplitudes);

    Eigen::Index size() const { return k_.size(); }
    const Vector& wavenumbers() const { return k_; }
    const Vector& log_amplitudes() const { return log_a_; }

    /// log a_j + k_j x1 + k_j^2 x2 + k_j^3 x3, the only place the exponents are formed.
    Vector exponents(double x1, double x2, double x3) const;

private:
    Vector k_;
    Vector log_a_;
};

/// log tau, max-shifted.
double tau_eval(const TauFunction& tau, double x1, double x2, double x3);

/// P(k_i, k_j) = (k_i - k_j)^4 + 3(k_i^2 - k_j^2)^2 - 4(k_i - k_j)(k_i^3 - k_j^3)
double hirota_polynomial(double ki, double kj);

/// sum_{i,j} a_i a_j P(k_i, k_j) e^(xi_i + xi_j) / tau^2
double hirota_residual_bilinear(const TauFunction& tau, double x1, double x2, double x3);

struct FdResidual {
    double residual;       ///< normalized by tau^2
    double noise_estimate; ///< rounding floor plus a Richardson truncation estimate
    bool cancellation;     ///< rounding floor above 1% of max(1, max|k|)^4
};

/// Bilinear operator through D^m f.f = d^m/ds^m [f(x + s) f(x - s)] at s = 0, with
/// fourth-order central stencils. step <= 0 selects 1e-2 / max(1, max|k|).
FdResidual hirota_residual_fd(const TauFunction& tau, double x1, double x2, double x3, double step = 0.0);

/// Flow times (x/(2 t eps), -1/(4 t eps), 0) with k_j = y_j, a_j = exp(-g_j/eps).
struct FlowTimes {
    double x1;
    double x2;
    double x3;
};

TauFunction tau_from_support(const core::SupportSet& support, double eps);
FlowTimes flow_times(double x, double t, double eps);

/// |hopf_cole_solution - (x^2/(4t) - eps log tau)|. d = 1 only.
double tau_log_identity(const core::SupportSet& support, double x, double t, double eps);

} // namespace hopfcole::integrable
