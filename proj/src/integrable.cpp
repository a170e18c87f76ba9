#include "hopfcole/integrable.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace hopfcole::integrable {

TauFunction::TauFunction(Vector wavenumbers, Vector log_amplitudes)
    : k_(std::move(wavenumbers)), log_a_(std::move(log_amplitudes))
{
    require(k_.size() >= 1, "TauFunction: need at least one component");
    require(k_.size() == log_a_.size(), "TauFunction: wavenumber and amplitude counts differ");
    require(k_.allFinite() && log_a_.allFinite(), "TauFunction: non-finite parameter");
    for (Eigen::Index i = 0; i < k_.size(); ++i)
        for (Eigen::Index j = i + 1; j < k_.size(); ++j)
            require(k_[i] != k_[j], "TauFunction: wavenumbers must be distinct");
}

TauFunction TauFunction::from_amplitudes(Vector wavenumbers, const Vector& amplitudes)
{
    require((amplitudes.array() > 0.0).all(), "TauFunction: amplitudes must be positive");
    return TauFunction(std::move(wavenumbers), amplitudes.array().log().matrix());
}

Vector TauFunction::exponents(double x1, double x2, double x3) const
{
    return (log_a_.array() + k_.array() * x1 + k_.array().square() * x2 + k_.array().cube() * x3).matrix();
}

double tau_eval(const TauFunction& tau, double x1, double x2, double x3)
{
    return log_sum_exp(tau.exponents(x1, x2, x3), 1.0);
}

double hirota_polynomial(double ki, double kj)
{
    const double d = ki - kj;
    const double d2 = ki * ki - kj * kj;
    return d * d * d * d + 3.0 * d2 * d2 - 4.0 * d * (ki * ki * ki - kj * kj * kj);
}

double hirota_residual_bilinear(const TauFunction& tau, double x1, double x2, double x3)
{
    // a_i e^xi_i / tau = softmax of the exponents
    const Vector w = softmax(tau.exponents(x1, x2, x3), 1.0);
    const Vector& k = tau.wavenumbers();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < k.size(); ++i)
        for (Eigen::Index j = 0; j < k.size(); ++j) acc += w[i] * w[j] * hirota_polynomial(k[i], k[j]);
    return acc;
}

namespace {

constexpr std::array<double, 7> kD4 = {-1.0 / 6.0, 2.0, -13.0 / 2.0, 28.0 / 3.0, -13.0 / 2.0, 2.0, -1.0 / 6.0};
constexpr std::array<double, 5> kD2 = {-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0};
constexpr std::array<double, 5> kD1 = {1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0};

struct Terms {
    double d1d1d1d1;
    double d2d2;
    double d1d3;
    double rounding; ///< machine epsilon times the absolute stencil sums
};

// G(s) = tau(x + s) tau(x - s) / tau(x)^2, so each D-monomial is a derivative of G at 0
Terms hirota_terms(const TauFunction& tau, double x1, double x2, double x3, double h)
{
    const double base = 2.0 * tau_eval(tau, x1, x2, x3);
    auto g = [&](double s1, double s2, double s3) {
        return std::exp(tau_eval(tau, x1 + s1, x2 + s2, x3 + s3) + tau_eval(tau, x1 - s1, x2 - s2, x3 - s3) - base);
    };
    constexpr double u = std::numeric_limits<double>::epsilon();
    Terms t{0.0, 0.0, 0.0, 0.0};
    double abs4 = 0.0, abs2 = 0.0, abs13 = 0.0;
    for (int i = 0; i < 7; ++i) {
        const double v = kD4[static_cast<std::size_t>(i)] * g((i - 3) * h, 0.0, 0.0);
        t.d1d1d1d1 += v;
        abs4 += std::abs(v);
    }
    for (int i = 0; i < 5; ++i) {
        const double v = kD2[static_cast<std::size_t>(i)] * g(0.0, (i - 2) * h, 0.0);
        t.d2d2 += v;
        abs2 += std::abs(v);
    }
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            const double c = kD1[static_cast<std::size_t>(i)] * kD1[static_cast<std::size_t>(j)];
            if (c == 0.0) continue;
            const double v = c * g((i - 2) * h, 0.0, (j - 2) * h);
            t.d1d3 += v;
            abs13 += std::abs(v);
        }
    const double h2 = h * h;
    t.d1d1d1d1 /= h2 * h2;
    t.d2d2 /= h2;
    t.d1d3 /= h2;
    t.rounding = 4.0 * u * (abs4 / (h2 * h2) + 3.0 * abs2 / h2 + 4.0 * abs13 / h2);
    return t;
}

double combine(const Terms& t)
{
    return t.d1d1d1d1 + 3.0 * t.d2d2 - 4.0 * t.d1d3;
}

} // namespace

FdResidual hirota_residual_fd(const TauFunction& tau, double x1, double x2, double x3, double step)
{
    if (step <= 0.0) step = 1e-2 / std::max(1.0, tau.wavenumbers().cwiseAbs().maxCoeff());
    const Terms fine = hirota_terms(tau, x1, x2, x3, step);
    const Terms coarse = hirota_terms(tau, x1, x2, x3, 2.0 * step);
    FdResidual r{};
    r.residual = combine(fine);
    // fourth-order: error(2h) = 16 error(h)
    r.noise_estimate = fine.rounding + std::abs(combine(coarse) - r.residual) / 15.0;
    // each D-monomial of G is of order max|k|^4
    const double scale = std::pow(std::max(1.0, tau.wavenumbers().cwiseAbs().maxCoeff()), 4);
    r.cancellation = fine.rounding > 1e-2 * scale;
    return r;
}

TauFunction tau_from_support(const core::SupportSet& support, double eps)
{
    require(support.dim() == 1, "tau_from_support: d = 1 only");
    require(eps > 0.0, "tau_from_support: eps must be positive");
    return TauFunction(support.atoms().col(0), -support.values() / eps);
}

FlowTimes flow_times(double x, double t, double eps)
{
    require(t > 0.0 && eps > 0.0, "flow_times: t and eps must be positive");
    return {x / (2.0 * t * eps), -1.0 / (4.0 * t * eps), 0.0};
}

double tau_log_identity(const core::SupportSet& support, double x, double t, double eps)
{
    const TauFunction tau = tau_from_support(support, eps);
    const FlowTimes f = flow_times(x, t, eps);
    Vector xv(1);
    xv[0] = x;
    const double u = core::hopf_cole_solution(support, xv, t, eps);
    return std::abs(u - (x * x / (4.0 * t) - eps * tau_eval(tau, f.x1, f.x2, f.x3)));
}

} // namespace hopfcole::integrable
