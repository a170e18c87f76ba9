#include "doctest.h"
#include "hopfcole/characteristics.hpp"

#include <cmath>

using namespace hopfcole;
using namespace hopfcole::characteristics;

namespace {

using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

// exp(A T) by scaling and squaring a 30-term Taylor series in long double
Matrix expm_oracle(const Matrix& a, double t)
{
    const MatL m = (a * t).cast<long double>();
    int squarings = 0;
    long double norm = m.cwiseAbs().rowwise().sum().maxCoeff();
    while (norm > 0.25L) {
        norm /= 2;
        ++squarings;
    }
    const MatL s = m / std::pow(2.0L, squarings);
    MatL term = MatL::Identity(a.rows(), a.cols());
    MatL sum = term;
    for (int k = 1; k < 30; ++k) {
        term = (term * s / static_cast<long double>(k)).eval();
        sum += term;
    }
    for (int i = 0; i < squarings; ++i) sum = (sum * sum).eval();
    return sum.cast<double>();
}

Drift random_drift(CounterRng& rng, int family, Eigen::Index d)
{
    switch (family) {
    case 0: return Drift::linear(0.5 * normal_matrix(rng, d, d));
    case 1: return Drift::tanh_layer(normal_matrix(rng, d, d + 1), normal_matrix(rng, d + 1, d));
    default: {
        std::vector<Matrix> b;
        for (Eigen::Index i = 0; i < d; ++i) b.push_back(0.2 * normal_matrix(rng, d, d));
        return Drift::quadratic(0.3 * normal_matrix(rng, d, d), b);
    }
    }
}

double terminal_loss(const Drift& f, const Vector& x0, double h, int layers)
{
    return 0.5 * resnet_forward(f, x0, h, layers).states.back().squaredNorm();
}

} // namespace

TEST_CASE("forward Euler")
{
    const Vector x0 = Vector::LinSpaced(3, -1.0, 1.0);
    const Trajectory z = resnet_forward(Drift::zero(3), x0, 0.1, 10);
    CHECK(z.states.size() == 11);
    for (const auto& s : z.states) CHECK(s == x0);
    CHECK(z.total_time == doctest::Approx(1.0));
    CHECK(resnet_forward(Drift::zero(3), x0, 0.1, 0).states.size() == 1);

    // first-order convergence to exp(A T) x0
    CounterRng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix a = normal_matrix(rng, 3, 3);
        const Vector exact = expm_oracle(a, 1.0) * x0;
        const double e1 = (resnet_forward(Drift::linear(a), x0, 1.0 / 200, 200).states.back() - exact).norm();
        const double e2 = (resnet_forward(Drift::linear(a), x0, 1.0 / 400, 400).states.back() - exact).norm();
        CHECK(e1 / e2 >= 1.6);
        CHECK(e1 / e2 <= 2.4);
    }

    Matrix blow(1, 1);
    blow << 1e300;
    CHECK_THROWS_WITH_AS(resnet_forward(Drift::linear(blow), Vector::Ones(1), 10.0, 5), "resnet_forward: non-finite state at layer 2", Error);
    CHECK_THROWS_AS(resnet_forward(Drift::zero(1), Vector::Ones(1), 0.0, 5), Error);
}

TEST_CASE("co-state recurrence is the exact discrete gradient")
{
    const Vector g = Vector::Ones(2);
    const Trajectory t0 = resnet_forward(Drift::zero(2), Vector::Zero(2), 0.1, 0);
    CHECK(costate_backward(t0, g).costates[0] == g);

    CounterRng rng(32);
    const Matrix a = normal_matrix(rng, 3, 3);
    const double h = 0.05;
    const Trajectory lin = resnet_forward(Drift::linear(a), normal_vector(rng, 3), h, 30);
    const CostateTrajectory c = costate_backward(lin, lin.states.back());
    CHECK(c.costates.back() == lin.states.back());
    Matrix prop = Matrix::Identity(3, 3);
    for (int l = 0; l < 30; ++l) prop = (Matrix::Identity(3, 3) + h * a).transpose() * prop;
    CHECK((c.costates[0] - prop * lin.states.back()).norm() <= 1e-12 * c.costates[0].norm());

    for (int family = 0; family < 3; ++family) {
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            const Eigen::Index d = 1 + trial % 4;
            const Drift f = random_drift(rng, family, d);
            const Vector x0 = normal_vector(rng, d);
            const int layers = 5 + trial % 20;
            const double step = 0.5 / layers;
            const Trajectory tr = resnet_forward(f, x0, step, layers);
            const Vector p0 = costate_backward(tr, tr.states.back()).costates[0];
            Vector fd(d);
            for (Eigen::Index k = 0; k < d; ++k) {
                Vector e = Vector::Zero(d);
                e[k] = 1e-6;
                fd[k] = (terminal_loss(f, x0 + e, step, layers) - terminal_loss(f, x0 - e, step, layers)) / 2e-6;
            }
            worst = std::max(worst, (fd - p0).norm() / std::max(p0.norm(), 1e-3));
        }
        MESSAGE("family " << family << " max relative FD gap " << worst);
        CHECK(worst <= 1e-6);
    }
}

TEST_CASE("Hamiltonian along the discrete flow")
{
    const Trajectory z = resnet_forward(Drift::zero(2), Vector::Ones(2), 0.1, 10);
    for (double v : hamiltonian_trace(z, costate_backward(z, Vector::Ones(2)))) CHECK(v == 0.0);

    CounterRng rng(33);
    // linear drift: p_l . A x_l is invariant because A commutes with I + hA
    const Matrix a = normal_matrix(rng, 3, 3);
    const Trajectory lin = resnet_forward(Drift::linear(a), normal_vector(rng, 3), 0.02, 50);
    const auto hl = hamiltonian_trace(lin, costate_backward(lin, lin.states.back()));
    CHECK(hamiltonian_variation(hl) <= 1e-12 * std::max(1.0, std::abs(hl[0])));

    const Trajectory one = resnet_forward(Drift::linear(a), Vector::Ones(3), 0.1, 1);
    CHECK(hamiltonian_trace(one, costate_backward(one, Vector::Ones(3))).size() == 2);

    // nonlinear drift: O(h) variation at fixed T
    int checked = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const Drift f = random_drift(rng, 1, 3);
        const Vector x0 = normal_vector(rng, 3);
        double var[2];
        for (int r = 0; r < 2; ++r) {
            const int layers = 100 << r;
            const Trajectory tr = resnet_forward(f, x0, 1.0 / layers, layers);
            var[r] = hamiltonian_variation(hamiltonian_trace(tr, costate_backward(tr, tr.states.back())));
        }
        if (var[0] < 1e-10) continue;
        ++checked;
        CHECK(var[0] / var[1] >= 1.8);
    }
    CHECK(checked >= 15);
}

TEST_CASE("feedforward adjoint")
{
    const core::SupportSet one(Matrix::Ones(1, 2), Vector::Zero(1));
    CHECK(feedforward_adjoint(core::build_network(one, 1.0, 0.5), Vector::Zero(2), 1.0)[0] == -1.0);

    Matrix y(2, 1);
    y << -1.0, 1.0;
    const Vector pair = feedforward_adjoint(core::build_network(core::SupportSet(y, Vector::Zero(2)), 1.0, 0.3),
                                            Vector::Zero(1), 0.8);
    CHECK(pair[0] == doctest::Approx(-0.4));
    CHECK(pair[1] == doctest::Approx(-0.4));

    CounterRng rng(34);
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index d = 1 + trial % 3, n = 2 + trial % 6;
        const core::SupportSet s(normal_matrix(rng, n, d), normal_vector(rng, n));
        const double t = rng.uniform(0.3, 2.0), eps = rng.uniform(0.05, 2.0);
        const Vector x = normal_vector(rng, d);
        auto loss = [&](const core::SupportSet& ss) {
            const double f = core::lse_forward(core::build_network(ss, t, eps), x);
            return 0.5 * f * f;
        };
        const double f0 = core::lse_forward(core::build_network(s, t, eps), x);
        const Vector adj = feedforward_adjoint(core::build_network(s, t, eps), x, f0);
        CHECK(adj.sum() == doctest::Approx(-f0).epsilon(1e-12));
        Vector fd(n);
        const double step = 1e-5 * eps;
        for (Eigen::Index j = 0; j < n; ++j) {
            Vector gp = s.values(), gm = s.values();
            gp[j] += step;
            gm[j] -= step;
            fd[j] = (loss(s.with_values(gp)) - loss(s.with_values(gm))) / (2 * step);
        }
        CHECK((fd - adj).norm() <= 1e-6 * std::max(adj.norm(), 1e-3));
    }

    const core::HJNetwork bare(Matrix::Ones(2, 1), Vector::Zero(2), 1.0, 1.0);
    CHECK_THROWS_AS(feedforward_adjoint(bare, Vector::Zero(1), 1.0), Error);
}
