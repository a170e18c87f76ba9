#include "doctest.h"
#include "hopfcole/integrable.hpp"

#include <cmath>

using namespace hopfcole;
using namespace hopfcole::integrable;

namespace {

TauFunction random_tau(CounterRng& rng, Eigen::Index n)
{
    Vector k(n);
    for (Eigen::Index j = 0; j < n; ++j) k[j] = rng.uniform(-3.0, 3.0);
    return TauFunction(k, normal_vector(rng, n));
}

long double log_tau_ld(const TauFunction& tau, double x1, double x2, double x3)
{
    long double s = 0;
    for (Eigen::Index j = 0; j < tau.size(); ++j) {
        const long double k = tau.wavenumbers()[j];
        s += std::exp(static_cast<long double>(tau.log_amplitudes()[j]) + k * x1 + k * k * x2 + k * k * k * x3);
    }
    return std::log(s);
}

} // namespace

TEST_CASE("tau evaluation")
{
    Vector k(1), la(1);
    k << 1.5;
    la << std::log(2.0);
    const TauFunction one(k, la);
    CHECK(tau_eval(one, 0.3, -0.2, 0.1) == std::log(2.0) + 1.5 * 0.3 - 2.25 * 0.2 + 3.375 * 0.1);

    const TauFunction flat = TauFunction::from_amplitudes(Vector::LinSpaced(4, -1.0, 1.0), Vector::Constant(4, 0.7));
    CHECK(tau_eval(flat, 0, 0, 0) == doctest::Approx(std::log(4 * 0.7)).epsilon(1e-15));

    // exponents far past the double range stay finite in log form
    Vector big(3);
    big << -2.0, 1.0, 3.0;
    const TauFunction wide(big, Vector::Zero(3));
    CHECK(std::isfinite(tau_eval(wide, 700.0 / 3.0 * 1.5, 0.0, 0.0)));
    CHECK(tau_eval(wide, -400.0, 0.0, 0.0) == doctest::Approx(800.0).epsilon(1e-15));

    CounterRng rng(41);
    for (int trial = 0; trial < 200; ++trial) {
        const TauFunction tau = random_tau(rng, 1 + trial % 8);
        const double x1 = rng.uniform(-3, 3), x2 = rng.uniform(-1, 1), x3 = rng.uniform(-0.3, 0.3);
        CHECK(tau_eval(tau, x1, x2, x3) == doctest::Approx(static_cast<double>(log_tau_ld(tau, x1, x2, x3))).epsilon(1e-13));
    }

    CHECK_THROWS_AS(TauFunction(Vector::Ones(2), Vector::Zero(2)), Error);
    CHECK_THROWS_AS(TauFunction::from_amplitudes(Vector::LinSpaced(2, 0, 1), Vector::Zero(2)), Error);
}

TEST_CASE("bilinear Hirota residual")
{
    CHECK(hirota_polynomial(1.0, 2.0) == 0.0);
    CounterRng rng(42);
    for (int i = 0; i < 100; ++i) {
        const double k = rng.uniform(-3, 3);
        CHECK(hirota_polynomial(k, k) == 0.0);
    }
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const TauFunction tau = random_tau(rng, 1 + trial % 8);
        worst = std::max(worst, std::abs(hirota_residual_bilinear(tau, rng.uniform(-3, 3), rng.uniform(-1, 1),
                                                                  rng.uniform(-0.3, 0.3))));
    }
    MESSAGE("max bilinear residual " << worst);
    CHECK(worst <= 1e-10);
}

TEST_CASE("finite-difference Hirota residual")
{
    Vector k(1);
    k << 1.0;
    const FdResidual one = hirota_residual_fd(TauFunction(k, Vector::Zero(1)), 0.4, 0.1, -0.2, 1e-2);
    CHECK(std::abs(one.residual) <= 1e-6);
    CHECK(!one.cancellation);

    CounterRng rng(43);
    for (int trial = 0; trial < 100; ++trial) {
        const TauFunction tau = random_tau(rng, 3);
        const double x1 = rng.uniform(-1, 1), x2 = rng.uniform(-0.5, 0.5), x3 = rng.uniform(-0.2, 0.2);
        const FdResidual fd = hirota_residual_fd(tau, x1, x2, x3);
        CHECK(!fd.cancellation);
        CHECK(std::abs(fd.residual - hirota_residual_bilinear(tau, x1, x2, x3)) <= 3 * fd.noise_estimate + 1e-12);
    }

    // halving the step: the residual follows the error budget down, it does not settle on a constant
    const TauFunction tau = random_tau(rng, 4);
    double prev = std::numeric_limits<double>::infinity();
    for (double h : {0.2, 0.1, 0.05}) {
        const double scaled = h / tau.wavenumbers().cwiseAbs().maxCoeff();
        const FdResidual r = hirota_residual_fd(tau, 0.1, 0.2, 0.0, scaled);
        CHECK(std::abs(r.residual) <= 3 * r.noise_estimate + 1e-12);
        CHECK(std::abs(r.residual) < prev);
        prev = std::abs(r.residual);
    }

    CHECK(hirota_residual_fd(tau, 0.1, 0.2, 0.0, 1e-6).cancellation);
}

TEST_CASE("tau-log identity")
{
    const core::SupportSet single(Matrix::Constant(1, 1, 0.8), Vector::Constant(1, 0.3));
    CHECK(tau_log_identity(single, 0.5, 1.0, 0.2) <= 1e-15);

    CounterRng rng(44);
    for (int trial = 0; trial < 200; ++trial) {
        const core::SupportSet s(normal_matrix(rng, 4, 1), normal_vector(rng, 4));
        const double eps = trial % 2 ? 0.1 : 1.0;
        const double t = rng.uniform(0.3, 2.0), x = rng.uniform(-2, 2);
        Vector xv(1);
        xv << x;
        CHECK(tau_log_identity(s, x, t, eps) <= 1e-12);
        CHECK(core::identity_residual(s, xv, t, eps) <= 1e-12);
    }

    // at t = 1/2 the first flow time reduces to x/eps
    const FlowTimes f = flow_times(0.7, 0.5, 0.25);
    CHECK(f.x1 == doctest::Approx(0.7 / 0.25));
    CHECK(f.x2 == doctest::Approx(-1.0 / (4 * 0.5 * 0.25)));
    CHECK(f.x3 == 0.0);

    CHECK_THROWS_AS(tau_log_identity(core::SupportSet(Matrix::Ones(1, 2), Vector::Zero(1)), 0.0, 1.0, 1.0), Error);
}
