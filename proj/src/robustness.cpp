#include "hopfcole/robustness.hpp"

#include <algorithm>
#include <limits>

namespace hopfcole::robustness {

namespace {

Vector gibbs(const HJNetwork& net, const Vector& x)
{
    return softmax(net.logits(x), net.eps());
}

} // namespace

Matrix input_hessian(const HJNetwork& net, const Vector& x)
{
    const Vector pi = gibbs(net, x);
    const Vector mean = net.weights().transpose() * pi;
    // W^T diag(pi) W - mean mean^T, accumulated from centred rows to keep PSD
    Matrix h = Matrix::Zero(net.dim(), net.dim());
    for (Eigen::Index j = 0; j < net.size(); ++j) {
        const Vector c = net.weights().row(j).transpose() - mean;
        h.noalias() += pi[j] * c * c.transpose();
    }
    return h / net.eps();
}

Vector input_gradient(const HJNetwork& net, const Vector& x)
{
    return net.weights().transpose() * gibbs(net, x);
}

SpectralNorm hessian_spectral_norm(const HJNetwork& net, const Vector& x, std::uint64_t seed)
{
    const double w = net.weight_row_norm_max();
    const double bound = w * w / net.eps();
    const Matrix h = input_hessian(net, x);

    CounterRng rng(seed);
    Vector v = random_direction(rng, net.dim());
    double estimate = 0.0;
    int it = 0;
    for (; it < 100; ++it) {
        const Vector hv = h * v;
        const double next = hv.norm();
        if (next == 0.0) {
            estimate = 0.0;
            ++it;
            break;
        }
        v = hv / next;
        const bool done = std::abs(next - estimate) <= 1e-10 * next;
        estimate = next;
        if (done) {
            ++it;
            break;
        }
    }
    return {estimate, bound, it};
}

RobustnessCertificate certified_radius(const HJNetwork& net, double tau)
{
    require(tau > 0.0, "certified_radius: tau must be positive");
    const double w = net.weight_row_norm_max();
    RobustnessCertificate c{};
    c.eps = net.eps();
    c.tau = tau;
    c.w_row_norm_max = w;
    c.hessian_bound = w * w / net.eps();
    if (w == 0.0) {
        c.certified_radius = std::numeric_limits<double>::infinity();
        c.unbounded = true;
        return c;
    }
    c.certified_radius = 2.0 * tau / (w * (std::sqrt(1.0 + 2.0 * tau / net.eps()) + 1.0));
    c.unbounded = false;
    return c;
}

PerturbationCheck perturbation_check(const HJNetwork& net, const Vector& x, double r, int n_samples,
                                     std::uint64_t seed)
{
    require(r >= 0.0, "perturbation_check: radius must be nonnegative");
    require(n_samples >= 0, "perturbation_check: negative sample count");
    const double w = net.weight_row_norm_max();
    const double bound = w * r + w * w * r * r / (2.0 * net.eps());
    const double f0 = core::lse_forward(net, x);

    std::vector<Vector> dirs;
    const Vector grad = input_gradient(net, x);
    if (grad.norm() > 0.0) {
        dirs.push_back(grad / grad.norm());
        dirs.push_back(-grad / grad.norm());
    }
    CounterRng rng(seed);
    for (int s = 0; s < n_samples; ++s) dirs.push_back(random_direction(rng, net.dim()));

    double worst = 0.0;
    for (const auto& u : dirs) worst = std::max(worst, std::abs(core::lse_forward(net, x + r * u) - f0));
    return {worst, bound};
}

ShockProbe shock_probe(const SupportSet& support, Eigen::Index i, Eigen::Index j, double t, double eps,
                       int n_path_points)
{
    require(i >= 0 && i < support.size() && j >= 0 && j < support.size(), "shock_probe: atom index out of range");
    require(i != j, "shock_probe: i and j must differ");
    require(support.dim() <= 3, "shock_probe: d <= 3 required");
    require(n_path_points >= 2, "shock_probe: need at least two path points");
    const Vector yi = support.atom(i);
    const Vector yj = support.atom(j);
    const double sep = (yi - yj).norm();
    require(sep > 0.0, "shock_probe: coincident atoms");

    ShockProbe p;
    p.normal = (yi - yj) / (2.0 * t);
    p.offset = support.values()[i] - support.values()[j] + (yi.squaredNorm() - yj.squaredNorm()) / (4.0 * t);
    const Vector mid = 0.5 * (yi + yj);
    p.crossing = mid + (p.offset - p.normal.dot(mid)) / p.normal.squaredNorm() * p.normal;

    const HJNetwork net = core::build_network(support, t, eps);
    const Vector unit = p.normal / p.normal.norm();
    const double half = 3.0 * sep;
    for (int k = 0; k < n_path_points; ++k) {
        const double s = -half + 2.0 * half * k / (n_path_points - 1);
        const Vector x = p.crossing + s * unit;
        const Vector pi = gibbs(net, x);
        Eigen::SelfAdjointEigenSolver<Matrix> es(input_hessian(net, x), Eigen::EigenvaluesOnly);
        p.path.push_back({s, x, pi[i], pi[j], es.eigenvalues().maxCoeff()});
    }
    const Vector pc = gibbs(net, p.crossing);
    p.crossing_pi_gap = std::abs(pc[i] - pc[j]);
    p.leakage = std::max(0.0, 1.0 - pc[i] - pc[j]);
    return p;
}

SupportSet refined_pair(double delta, int k)
{
    require(k >= 1, "refined_pair: k must be >= 1");
    require(delta > 0.0, "refined_pair: delta must be positive");
    Matrix y(k + 1, 1);
    for (int m = 0; m <= k; ++m) y(m, 0) = delta * m / k;
    return SupportSet(y, Vector::Zero(k + 1));
}

double peak_hessian_norm(const HJNetwork& net, const Matrix& xs)
{
    require(xs.rows() >= 1 && xs.cols() == net.dim(), "peak_hessian_norm: bad evaluation grid");
    double peak = 0.0;
    for (Eigen::Index a = 0; a < xs.rows(); ++a) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(input_hessian(net, xs.row(a).transpose()), Eigen::EigenvaluesOnly);
        peak = std::max(peak, es.eigenvalues().maxCoeff());
    }
    return peak;
}

} // namespace hopfcole::robustness
