#include "hopfcole/core.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace hopfcole::core {

namespace {

bool rows_equal(const Matrix& m, Eigen::Index a, Eigen::Index b)
{
    for (Eigen::Index k = 0; k < m.cols(); ++k)
        if (m(a, k) != m(b, k)) return false;
    return true;
}

double entropy_of(const Vector& p)
{
    double h = 0.0;
    for (Eigen::Index j = 0; j < p.size(); ++j)
        if (p[j] > 0.0) h -= p[j] * std::log(p[j]);
    return h;
}

} // namespace

// --- SupportSet -------------------------------------------------------------

SupportSet::SupportSet(Matrix atoms, Vector values) : atoms_(std::move(atoms)), values_(std::move(values))
{
    require(atoms_.rows() >= 1, "SupportSet: at least one atom required");
    require(atoms_.cols() >= 1, "SupportSet: dimension must be >= 1");
    require(atoms_.rows() == values_.size(), "SupportSet: atoms and values differ in length");
    require(atoms_.allFinite(), "SupportSet: non-finite atom coordinate");
    require(values_.allFinite(), "SupportSet: non-finite initial value");

    // exact duplicates are adjacent after a lexicographic sort
    std::vector<Eigen::Index> order(static_cast<std::size_t>(atoms_.rows()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [this](Eigen::Index a, Eigen::Index b) {
        for (Eigen::Index k = 0; k < atoms_.cols(); ++k) {
            if (atoms_(a, k) < atoms_(b, k)) return true;
            if (atoms_(a, k) > atoms_(b, k)) return false;
        }
        return a < b;
    });
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (rows_equal(atoms_, order[i - 1], order[i])) {
            std::ostringstream msg;
            msg << "SupportSet: duplicate atoms at indices " << std::min(order[i - 1], order[i]) << " and "
                << std::max(order[i - 1], order[i]);
            throw Error(msg.str());
        }
    }
}

double SupportSet::diameter() const
{
    double best = 0.0;
    for (Eigen::Index i = 0; i < size(); ++i)
        for (Eigen::Index j = i + 1; j < size(); ++j)
            best = std::max(best, (atoms_.row(i) - atoms_.row(j)).squaredNorm());
    return std::sqrt(best);
}

SupportSet SupportSet::with_values(Vector values) const
{
    return SupportSet(atoms_, std::move(values));
}

// --- Metric -----------------------------------------------------------------

Metric::Metric(Matrix a) : a_(std::move(a))
{
    require(a_.rows() == a_.cols() && a_.rows() >= 1, "Metric: matrix must be square and non-empty");
    require(a_.allFinite(), "Metric: non-finite entry");
    const double scale = std::max(1.0, a_.cwiseAbs().maxCoeff());
    require((a_ - a_.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale, "Metric: matrix is not symmetric");

    Eigen::SelfAdjointEigenSolver<Matrix> es(a_);
    require(es.info() == Eigen::Success, "Metric: eigen-decomposition failed");
    const Vector& lambda = es.eigenvalues();
    lambda_min_ = lambda.minCoeff();
    if (!(lambda_min_ > 0.0)) {
        std::ostringstream msg;
        msg << "Metric: matrix is not positive definite (min eigenvalue " << lambda_min_ << ")";
        throw Error(msg.str());
    }
    cond_ = lambda.maxCoeff() / lambda_min_;
    if (cond_ > kMaxCondition) {
        std::ostringstream msg;
        msg << "Metric: condition number " << cond_ << " exceeds " << kMaxCondition;
        throw Error(msg.str());
    }
    inv_ = es.eigenvectors() * lambda.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    inv_ = 0.5 * (inv_ + inv_.transpose()).eval();
}

double Metric::inverse_quadratic(const Vector& v) const
{
    return v.dot(inv_ * v);
}

// --- HJNetwork --------------------------------------------------------------

HJNetwork::HJNetwork(Matrix weights, Vector biases, double eps, double t, std::optional<Metric> metric,
                     std::shared_ptr<const SupportSet> provenance)
    : weights_(std::move(weights)), biases_(std::move(biases)), eps_(eps), t_(t), metric_(std::move(metric)),
      provenance_(std::move(provenance))
{
    require(weights_.rows() >= 1 && weights_.cols() >= 1, "HJNetwork: empty weight matrix");
    require(weights_.rows() == biases_.size(), "HJNetwork: weights and biases differ in length");
    require(eps_ > 0.0 && std::isfinite(eps_), "HJNetwork: eps must be positive");
    require(t_ > 0.0 && std::isfinite(t_), "HJNetwork: t must be positive");
    if (metric_) require(metric_->dim() == dim(), "HJNetwork: metric dimension mismatch");
}

Vector HJNetwork::logits(const Vector& x) const
{
    require(x.size() == dim(), "HJNetwork: input dimension mismatch");
    return weights_ * x + biases_;
}

double HJNetwork::weight_row_norm_max() const
{
    return weights_.rowwise().norm().maxCoeff();
}

HJNetwork build_network(const SupportSet& support, double t, double eps, const std::optional<Metric>& metric)
{
    require(t > 0.0, "build_network: t must be positive");
    require(eps > 0.0, "build_network: eps must be positive");
    if (metric) require(metric->dim() == support.dim(), "build_network: metric dimension mismatch");

    const Matrix& y = support.atoms();
    Matrix w;
    Vector b(support.size());
    if (metric) {
        const Matrix ay = y * metric->inverse(); // rows: (A^{-1} y_j)^T
        w = ay / (2.0 * t);
        for (Eigen::Index j = 0; j < support.size(); ++j)
            b[j] = -support.values()[j] - y.row(j).dot(ay.row(j)) / (4.0 * t);
    } else {
        w = y / (2.0 * t);
        for (Eigen::Index j = 0; j < support.size(); ++j)
            b[j] = -support.values()[j] - y.row(j).squaredNorm() / (4.0 * t);
    }
    return HJNetwork(std::move(w), std::move(b), eps, t, metric, std::make_shared<const SupportSet>(support));
}

double lse_forward(const HJNetwork& net, const Vector& x)
{
    return log_sum_exp(net.logits(x), net.eps());
}

double quad(const Vector& x, double t, const std::optional<Metric>& metric)
{
    if (metric) return metric->inverse_quadratic(x) / (4.0 * t);
    return x.squaredNorm() / (4.0 * t);
}

double transport_cost(const Vector& x, const Vector& y, double t, const std::optional<Metric>& metric)
{
    const Vector diff = x - y;
    return quad(diff, t, metric);
}

Vector energies(const SupportSet& support, const Vector& x, double t, const std::optional<Metric>& metric)
{
    require(x.size() == support.dim(), "energies: point dimension mismatch");
    require(t > 0.0, "energies: t must be positive");
    if (metric) require(metric->dim() == support.dim(), "energies: metric dimension mismatch");
    Vector e(support.size());
    for (Eigen::Index j = 0; j < support.size(); ++j) {
        const Vector diff = x - support.atoms().row(j).transpose();
        e[j] = support.values()[j] + quad(diff, t, metric);
    }
    return e;
}

double hopf_cole_solution(const SupportSet& support, const Vector& x, double t, double eps,
                          const std::optional<Metric>& metric)
{
    require(eps > 0.0, "hopf_cole_solution: eps must be positive");
    const Vector e = energies(support, x, t, metric);
    return -log_sum_exp(Vector(-e), eps);
}

double identity_residual(const SupportSet& support, const Vector& x, double t, double eps,
                         const std::optional<Metric>& metric)
{
    const HJNetwork net = build_network(support, t, eps, metric);
    const double f = lse_forward(net, x);
    const double u = hopf_cole_solution(support, x, t, eps, metric);
    return std::abs(f + u - quad(x, t, metric));
}

HopfLaxValue hopf_lax(const SupportSet& support, const Vector& x, double t)
{
    const Vector e = energies(support, x, t);
    const Eigen::Index j = argmin(e);
    return {e[j], j};
}

TropicalGap tropical_gap(const HJNetwork& net, const Vector& x)
{
    const Vector z = net.logits(x);
    const double f = log_sum_exp(z, net.eps());
    const double gap = std::max(0.0, f - z.maxCoeff());
    return {gap, net.eps() * std::log(static_cast<double>(net.size()))};
}

MeasureExtension measure_extend(const HJNetwork& net, const Vector& new_weight, double new_bias, const Vector& x,
                                double cached_f)
{
    require(new_weight.size() == net.dim(), "measure_extend: weight dimension mismatch");
    require(x.size() == net.dim(), "measure_extend: point dimension mismatch");
    const double z0 = new_weight.dot(x) + new_bias;
    const double shift = softplus(z0 - cached_f, net.eps());
    return {cached_f + shift, shift};
}

HJNetwork append_neuron(const HJNetwork& net, const Vector& new_weight, double new_bias)
{
    require(new_weight.size() == net.dim(), "append_neuron: weight dimension mismatch");
    Matrix w(net.size() + 1, net.dim());
    w.topRows(net.size()) = net.weights();
    w.row(net.size()) = new_weight.transpose();
    Vector b(net.size() + 1);
    b.head(net.size()) = net.biases();
    b[net.size()] = new_bias;
    return HJNetwork(std::move(w), std::move(b), net.eps(), net.t(), net.metric());
}

HallucinationBound hallucination_bound(const SupportSet& support, const Vector& x, double t, double eps)
{
    require(support.size() >= 2, "hallucination_bound: at least two atoms required");
    const Vector e = energies(support, x, t);
    const Eigen::Index star = argmin(e);
    double delta = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < e.size(); ++j)
        if (j != star) delta = std::min(delta, e[j] - e[star]);
    delta = std::max(delta, 0.0);

    const auto n = static_cast<double>(support.size());
    const double bound = eps * std::log1p((n - 1.0) * std::exp(-delta / eps));

    const HJNetwork net = build_network(support, t, eps);
    const Vector z = net.logits(x);
    const double f = log_sum_exp(z, eps);
    return {delta, bound, std::abs(f - z[star]), star, delta <= 1e-12};
}

HJNetwork affine_reparam(const HJNetwork& net, const Matrix& a, const Vector& c)
{
    require(a.rows() == net.dim(), "affine_reparam: A must have as many rows as the network input dimension");
    require(c.size() == net.dim(), "affine_reparam: offset dimension mismatch");
    require(a.cols() >= 1, "affine_reparam: A has no columns");
    Matrix w = net.weights() * a;
    Vector b = net.weights() * c + net.biases();
    return HJNetwork(std::move(w), std::move(b), net.eps(), net.t());
}

// --- Legendre / kernel network -------------------------------------------------

double LegendreTable::operator()(double v) const
{
    if (!contains(v)) {
        std::ostringstream msg;
        msg << "LegendreTable: velocity " << v << " outside [" << lo << ", " << hi << "]";
        throw Error(msg.str());
    }
    if (velocities.size() == 1) return values.front();
    auto it = std::upper_bound(velocities.begin(), velocities.end(), v);
    std::size_t hi_idx = static_cast<std::size_t>(it - velocities.begin());
    if (hi_idx >= velocities.size()) hi_idx = velocities.size() - 1;
    const std::size_t lo_idx = hi_idx - 1;
    const double a = values[lo_idx];
    const double b = values[hi_idx];
    if (v == velocities[lo_idx]) return a;
    if (v == velocities[hi_idx]) return b;
    if (is_infinite(a) || is_infinite(b)) return kInfinity;
    const double s = (v - velocities[lo_idx]) / (velocities[hi_idx] - velocities[lo_idx]);
    return a + s * (b - a);
}

bool LegendreTable::is_convex(double tol) const
{
    if (velocities.size() != values.size() || velocities.empty()) return false;
    for (std::size_t i = 1; i < velocities.size(); ++i)
        if (!(velocities[i] > velocities[i - 1])) return false;

    std::size_t first = values.size();
    std::size_t last = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!is_infinite(values[i])) {
            first = std::min(first, i);
            last = i;
        }
    }
    if (first == values.size()) return true;
    for (std::size_t i = first; i <= last; ++i)
        if (is_infinite(values[i])) return false; // effective domain must be an interval

    for (std::size_t i = first + 1; i + 1 <= last; ++i) {
        const double left = (values[i] - values[i - 1]) / (velocities[i] - velocities[i - 1]);
        const double right = (values[i + 1] - values[i]) / (velocities[i + 1] - velocities[i]);
        if (right - left < -tol) return false;
    }
    return true;
}

LegendreTable legendre_transform_1d(std::span<const double> p, std::span<const double> h,
                                    std::span<const double> v_grid)
{
    require(!p.empty(), "legendre_transform_1d: empty sample grid");
    require(p.size() == h.size(), "legendre_transform_1d: p and H(p) differ in length");
    require(!v_grid.empty(), "legendre_transform_1d: empty velocity grid");
    for (std::size_t i = 1; i < p.size(); ++i)
        require(p[i] > p[i - 1], "legendre_transform_1d: sample grid must be strictly increasing");
    for (std::size_t i = 1; i < v_grid.size(); ++i)
        require(v_grid[i] > v_grid[i - 1], "legendre_transform_1d: velocity grid must be strictly increasing");

    const std::size_t n = p.size();
    const double slope_left = n > 1 ? (h[1] - h[0]) / (p[1] - p[0]) : 0.0;
    const double slope_right = n > 1 ? (h[n - 1] - h[n - 2]) / (p[n - 1] - p[n - 2]) : 0.0;

    LegendreTable table;
    table.velocities.assign(v_grid.begin(), v_grid.end());
    table.values.resize(v_grid.size());
    table.lo = v_grid.front();
    table.hi = v_grid.back();
    for (std::size_t k = 0; k < v_grid.size(); ++k) {
        const double v = v_grid[k];
        std::size_t best = 0;
        double best_val = p[0] * v - h[0];
        for (std::size_t i = 1; i < n; ++i) {
            const double val = p[i] * v - h[i];
            if (val > best_val) {
                best_val = val;
                best = i;
            }
        }
        // A maximizer pinned to a grid end with the objective still rising
        // outward means the supremum over the extended line is unbounded.
        bool unbounded = false;
        if (n > 1 && best == 0 && v < slope_left) unbounded = true;
        if (n > 1 && best == n - 1 && v > slope_right) unbounded = true;
        table.values[k] = unbounded ? LegendreTable::kInfinity : best_val;
    }
    return table;
}

namespace {

Vector kernel_energies(const SupportSet& support, const LegendreTable& lagrangian, double x, double t)
{
    require(support.dim() == 1, "kernel network: only d = 1 is supported");
    require(t > 0.0, "kernel network: t must be positive");
    Vector e(support.size());
    for (Eigen::Index j = 0; j < support.size(); ++j) {
        const double v = (x - support.atoms()(j, 0)) / t;
        if (!lagrangian.contains(v)) {
            std::ostringstream msg;
            msg << "kernel network: atom " << j << " (y = " << support.atoms()(j, 0) << ") gives velocity " << v
                << " outside the Lagrangian grid [" << lagrangian.lo << ", " << lagrangian.hi << "]";
            throw Error(msg.str());
        }
        const double l = lagrangian(v);
        e[j] = LegendreTable::is_infinite(l) ? std::numeric_limits<double>::infinity()
                                             : t * l + support.values()[j];
    }
    return e;
}

} // namespace

double kernel_network_eval(const SupportSet& support, const LegendreTable& lagrangian, double x, double t, double eps)
{
    require(eps > 0.0, "kernel_network_eval: eps must be positive");
    const Vector e = kernel_energies(support, lagrangian, x, t);
    if (!std::isfinite(e.minCoeff())) return std::numeric_limits<double>::infinity();
    return -log_sum_exp(Vector(-e), eps);
}

double kernel_network_min(const SupportSet& support, const LegendreTable& lagrangian, double x, double t)
{
    return kernel_energies(support, lagrangian, x, t).minCoeff();
}

// --- gauge fixing -----------------------------------------------------------------

double gauge_data_scale(const Matrix& samples)
{
    require(samples.rows() >= 1, "gauge_data_scale: empty sample set");
    require(samples.cols() >= 1, "gauge_data_scale: samples have no dimensions");
    const Eigen::RowVectorXd mean = samples.colwise().mean();
    const double n = static_cast<double>(samples.rows());
    const double denom = samples.rows() > 1 ? n - 1.0 : 1.0;
    const double trace = (samples.rowwise() - mean).squaredNorm() / denom;
    return gauge_data_scale(trace, samples.cols());
}

double gauge_data_scale(double covariance_trace, Eigen::Index d)
{
    require(d >= 1, "gauge_data_scale: d must be >= 1");
    require(covariance_trace >= 0.0, "gauge_data_scale: negative covariance trace");
    return covariance_trace / static_cast<double>(d);
}

double gauge_generalization(Eigen::Index n_atoms, Eigen::Index d)
{
    require(n_atoms >= 1, "gauge_generalization: N must be >= 1");
    require(d >= 1, "gauge_generalization: d must be >= 1");
    return std::pow(static_cast<double>(n_atoms), -1.0 / static_cast<double>(d));
}

double mean_attribution_entropy(const SupportSet& support, double eps, const Matrix& xs, double t)
{
    require(xs.rows() >= 1, "mean_attribution_entropy: empty evaluation grid");
    require(xs.cols() == support.dim(), "mean_attribution_entropy: grid dimension mismatch");
    double total = 0.0;
    for (Eigen::Index i = 0; i < xs.rows(); ++i) {
        const Vector e = energies(support, xs.row(i).transpose(), t);
        total += entropy_of(softmax(Vector(-e), eps));
    }
    return total / static_cast<double>(xs.rows());
}

InformationGauge gauge_information(const SupportSet& support, double eps, const Matrix& xs, double t_lo,
                                   double t_hi, int iterations)
{
    require(eps > 0.0, "gauge_information: eps must be positive");
    require(t_lo > 0.0 && t_hi > t_lo, "gauge_information: invalid bracket");
    require(xs.rows() >= 1, "gauge_information: empty evaluation grid");

    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = std::log(t_lo);
    double b = std::log(t_hi);
    auto objective = [&](double s) { return mean_attribution_entropy(support, eps, xs, std::exp(s)); };

    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = objective(c);
    double fd = objective(d);
    for (int it = 0; it < iterations; ++it) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = objective(d);
        }
    }
    const double s = fc >= fd ? c : d;
    return {std::exp(s), std::max(fc, fd)};
}

} // namespace hopfcole::core
