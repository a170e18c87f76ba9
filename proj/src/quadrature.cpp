#include "hopfcole/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hopfcole::quadrature {

Box Box::cube(Eigen::Index d, double lo, double hi)
{
    return {Vector::Constant(d, lo), Vector::Constant(d, hi)};
}

namespace {

void check_box(const Box& box)
{
    require(box.lo.size() == box.hi.size() && box.lo.size() >= 1, "Box: bounds differ in dimension");
    require((box.hi.array() > box.lo.array()).all(), "Box: degenerate extent");
}

std::vector<double> linspace(double a, double b, Eigen::Index n)
{
    std::vector<double> v(static_cast<std::size_t>(n));
    if (n == 1) {
        v[0] = 0.5 * (a + b);
        return v;
    }
    for (Eigen::Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

// R_ab = log sum_k exp(P_ak + Q_kb), shifted by row maxima of P and column
// maxima of Q so the product runs through a dense GEMM. Entries whose shifted
// sum underflows are redone term by term.
Matrix log_matmul_exp(const Matrix& p, const Matrix& q)
{
    const Vector r = p.rowwise().maxCoeff();
    const Eigen::RowVectorXd c = q.colwise().maxCoeff();
    const Matrix e1 = (p.colwise() - r).array().exp().matrix();
    const Matrix e2 = (q.rowwise() - c).array().exp().matrix();
    const Matrix m = e1 * e2;
    Matrix out(p.rows(), q.cols());
    for (Eigen::Index b = 0; b < q.cols(); ++b) {
        for (Eigen::Index a = 0; a < p.rows(); ++a) {
            if (m(a, b) > 1e-250) {
                out(a, b) = std::log(m(a, b)) + r[a] + c[b];
                continue;
            }
            const Vector z = p.row(a).transpose() + q.col(b);
            out(a, b) = log_sum_exp(z, 1.0);
        }
    }
    return out;
}

struct Trapezoid {
    std::vector<double> nodes;
    std::vector<double> log_weights;
};

Trapezoid trapezoid(double lo, double hi, int n)
{
    Trapezoid tr;
    tr.nodes = linspace(lo, hi, n);
    const double h = (hi - lo) / (n - 1);
    tr.log_weights.assign(static_cast<std::size_t>(n), std::log(h));
    tr.log_weights.front() = std::log(0.5 * h);
    tr.log_weights.back() = std::log(0.5 * h);
    return tr;
}

} // namespace

Eigen::Index integer_root(Eigen::Index n, Eigen::Index d)
{
    require(n >= 1 && d >= 1, "integer_root: arguments must be positive");
    auto pow_le = [&](Eigen::Index k) {
        Eigen::Index acc = 1;
        for (Eigen::Index i = 0; i < d; ++i) {
            if (acc > n / k) return false;
            acc *= k;
        }
        return acc <= n;
    };
    auto k = static_cast<Eigen::Index>(std::floor(std::pow(static_cast<double>(n), 1.0 / static_cast<double>(d))));
    k = std::max<Eigen::Index>(k, 1);
    while (k > 1 && !pow_le(k)) --k;
    while (pow_le(k + 1)) ++k;
    return k;
}

SupportSet grid_support(const ScalarField& g, const Box& domain, Eigen::Index n_target)
{
    check_box(domain);
    const Eigen::Index d = domain.dim();
    require(n_target >= (Eigen::Index{1} << d), "grid_support: need N >= 2^d");
    const Eigen::Index k = integer_root(n_target, d);
    Eigen::Index total = 1;
    for (Eigen::Index i = 0; i < d; ++i) total *= k;

    std::vector<std::vector<double>> axes;
    for (Eigen::Index a = 0; a < d; ++a) axes.push_back(linspace(domain.lo[a], domain.hi[a], k));
    Matrix y(total, d);
    Vector values(total);
    for (Eigen::Index row = 0; row < total; ++row) {
        Eigen::Index rem = row;
        for (Eigen::Index a = d - 1; a >= 0; --a) {
            y(row, a) = axes[static_cast<std::size_t>(a)][static_cast<std::size_t>(rem % k)];
            rem /= k;
        }
        values[row] = g(y.row(row).transpose());
        require(std::isfinite(values[row]), "grid_support: initial data is not finite at a grid point");
    }
    return SupportSet(std::move(y), std::move(values));
}

Vector continuum_oracle_grid(const ScalarField& g, const std::vector<std::vector<double>>& axes, double t,
                             double eps, int resolution, const Box& box)
{
    check_box(box);
    const Eigen::Index d = box.dim();
    require(d <= 2, "continuum_oracle: d <= 2 only");
    require(static_cast<Eigen::Index>(axes.size()) == d, "continuum_oracle: axis count does not match the box");
    require(resolution >= 256, "continuum_oracle: resolution must be >= 256 per axis");
    require(t > 0.0 && eps > 0.0, "continuum_oracle: t and eps must be positive");
    const double scale = 4.0 * t * eps;

    if (d == 1) {
        const Trapezoid tr = trapezoid(box.lo[0], box.hi[0], resolution);
        const auto n = tr.nodes.size();
        std::vector<double> base(n);
        Vector y1(1);
        for (std::size_t i = 0; i < n; ++i) {
            y1[0] = tr.nodes[i];
            const double gv = g(y1);
            require(std::isfinite(gv), "continuum_oracle: initial data is not finite");
            base[i] = tr.log_weights[i] - gv / eps;
        }
        Vector out(static_cast<Eigen::Index>(axes[0].size()));
        std::vector<double> z(n);
        for (std::size_t k = 0; k < axes[0].size(); ++k) {
            const double x = axes[0][k];
            for (std::size_t i = 0; i < n; ++i) {
                const double dx = x - tr.nodes[i];
                z[i] = base[i] - dx * dx / scale;
            }
            out[static_cast<Eigen::Index>(k)] = -eps * log_sum_exp(z, 1.0);
        }
        return out;
    }

    const Trapezoid t1 = trapezoid(box.lo[0], box.hi[0], resolution);
    const Trapezoid t2 = trapezoid(box.lo[1], box.hi[1], resolution);
    const auto n = static_cast<Eigen::Index>(resolution);
    const auto m1 = static_cast<Eigen::Index>(axes[0].size());
    const auto m2 = static_cast<Eigen::Index>(axes[1].size());

    Matrix b1(m1, n);
    for (Eigen::Index a = 0; a < m1; ++a)
        for (Eigen::Index i = 0; i < n; ++i) {
            const double dx = axes[0][static_cast<std::size_t>(a)] - t1.nodes[static_cast<std::size_t>(i)];
            b1(a, i) = -dx * dx / scale;
        }
    Matrix b2t(n, m2);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index b = 0; b < m2; ++b) {
            const double dx = axes[1][static_cast<std::size_t>(b)] - t2.nodes[static_cast<std::size_t>(i)];
            b2t(i, b) = -dx * dx / scale;
        }

    // L(x1, i2) = log sum_i1 exp(b1(x1, i1) + A(i1, i2)), A built in column blocks
    Matrix l(m1, n);
    const Eigen::Index block = 256;
    Vector y(2);
    for (Eigen::Index start = 0; start < n; start += block) {
        const Eigen::Index width = std::min(block, n - start);
        Matrix a(n, width);
        for (Eigen::Index c = 0; c < width; ++c) {
            const auto i2 = static_cast<std::size_t>(start + c);
            y[1] = t2.nodes[i2];
            for (Eigen::Index i1 = 0; i1 < n; ++i1) {
                y[0] = t1.nodes[static_cast<std::size_t>(i1)];
                const double gv = g(y);
                require(std::isfinite(gv), "continuum_oracle: initial data is not finite");
                a(i1, c) = t1.log_weights[static_cast<std::size_t>(i1)] + t2.log_weights[i2] - gv / eps;
            }
        }
        l.middleCols(start, width) = log_matmul_exp(b1, a);
    }
    const Matrix s = log_matmul_exp(l, b2t);
    Vector out(m1 * m2);
    for (Eigen::Index a = 0; a < m1; ++a)
        for (Eigen::Index b = 0; b < m2; ++b) out[a * m2 + b] = -eps * s(a, b);
    return out;
}

double continuum_oracle(const ScalarField& g, const Vector& x, double t, double eps, int resolution, const Box& box)
{
    require(x.size() == box.dim(), "continuum_oracle: point dimension mismatch");
    std::vector<std::vector<double>> axes;
    for (Eigen::Index a = 0; a < x.size(); ++a) axes.push_back({x[a]});
    return continuum_oracle_grid(g, axes, t, eps, resolution, box)[0];
}

OracleCheck continuum_oracle_checked(const ScalarField& g, const Vector& x, double t, double eps, int resolution,
                                     const Box& box)
{
    OracleCheck c{};
    c.value = continuum_oracle(g, x, t, eps, resolution, box);
    c.refined = continuum_oracle(g, x, t, eps, 2 * resolution - 1, box);
    c.under_resolved = std::abs(c.value - c.refined) > 1e-8;
    return c;
}

ErrorCurve quadrature_error_curve(const ScalarField& g, Eigen::Index d, double t,
                                  const std::vector<Eigen::Index>& n_targets, const QuadratureOptions& options)
{
    require(d == 1 || d == 2, "quadrature_error_curve: d must be 1 or 2");
    require(options.domain.dim() == d, "quadrature_error_curve: domain dimension mismatch");
    require(!n_targets.empty(), "quadrature_error_curve: empty N list");
    for (std::size_t i = 1; i < n_targets.size(); ++i)
        require(n_targets[i] > n_targets[i - 1], "quadrature_error_curve: N list must be increasing");
    require(options.eval_fraction > 0.0 && options.eval_fraction <= 1.0, "quadrature_error_curve: bad eval fraction");

    std::vector<std::vector<double>> axes;
    for (Eigen::Index a = 0; a < d; ++a) {
        const double mid = 0.5 * (options.domain.lo[a] + options.domain.hi[a]);
        const double half = 0.5 * options.eval_fraction * (options.domain.hi[a] - options.domain.lo[a]);
        axes.push_back(linspace(mid - half, mid + half, options.eval_per_axis));
    }
    const auto m = static_cast<Eigen::Index>(axes[0].size());
    Matrix xs(d == 1 ? m : m * m, d);
    for (Eigen::Index r = 0; r < xs.rows(); ++r) {
        if (d == 1) {
            xs(r, 0) = axes[0][static_cast<std::size_t>(r)];
        } else {
            xs(r, 0) = axes[0][static_cast<std::size_t>(r / m)];
            xs(r, 1) = axes[1][static_cast<std::size_t>(r % m)];
        }
    }

    ErrorCurve curve;
    curve.d = d;
    curve.t = t;
    curve.rule = options.rule;
    double width = 0.0;
    for (Eigen::Index a = 0; a < d; ++a) width = std::max(width, options.domain.hi[a] - options.domain.lo[a]);

    for (Eigen::Index target : n_targets) {
        const SupportSet s = grid_support(g, options.domain, target);
        const double eps = options.rule == EpsRule::generalization ? core::gauge_generalization(s.size(), d)
                                                                   : options.fixed_eps;
        const int res = std::max(options.min_resolution,
                                 static_cast<int>(std::ceil(width / (options.oracle_spacing * eps)))) + 1;
        const Vector ref = continuum_oracle_grid(g, axes, t, eps, res, options.domain);
        Vector diff(xs.rows());
        for (Eigen::Index r = 0; r < xs.rows(); ++r)
            diff[r] = core::hopf_cole_solution(s, xs.row(r).transpose(), t, eps) - ref[r];
        const double lo = diff.minCoeff();
        const double hi = diff.maxCoeff();
        curve.rms_error.push_back(std::sqrt((diff.array() - diff.mean()).square().mean()));
        curve.n.push_back(s.size());
        curve.eps.push_back(eps);
        curve.error.push_back(0.5 * (hi - lo));
        curve.oracle_resolution.push_back(res);
    }
    return curve;
}

ScalingFit scaling_fit(const std::vector<std::pair<double, double>>& points)
{
    require(points.size() >= 3, "scaling_fit: need at least 3 points");
    const auto n = static_cast<double>(points.size());
    double sx = 0, sy = 0;
    for (const auto& [N, loss] : points) {
        require(N > 0.0, "scaling_fit: N must be positive");
        require(loss > 0.0, "scaling_fit: loss must be positive");
        sx += std::log(N);
        sy += std::log(loss);
    }
    const double mx = sx / n;
    const double my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& [N, loss] : points) {
        const double dx = std::log(N) - mx;
        const double dy = std::log(loss) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    require(sxx > 0.0, "scaling_fit: N values must not all coincide");
    const double slope = sxy / sxx;
    ScalingFit fit{};
    fit.alpha = -slope;
    fit.intercept = my - slope * mx;
    double ss_res = 0;
    for (const auto& [N, loss] : points) {
        const double e = std::log(loss) - (fit.intercept + slope * std::log(N));
        ss_res += e * e;
    }
    fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
    fit.d_eff = 1.0 / fit.alpha;
    return fit;
}

ScalingFit fit_curve(const ErrorCurve& curve)
{
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < curve.n.size(); ++i) pts.emplace_back(static_cast<double>(curve.n[i]), curve.error[i]);
    return scaling_fit(pts);
}

BiasCurve viscosity_bias_curve(const SupportSet& support, const Matrix& xs, double t,
                               const std::vector<double>& eps_list)
{
    require(!eps_list.empty(), "viscosity_bias_curve: empty eps list");
    for (std::size_t i = 1; i < eps_list.size(); ++i)
        require(eps_list[i] < eps_list[i - 1], "viscosity_bias_curve: eps list must be decreasing");
    require(xs.rows() >= 1 && xs.cols() == support.dim(), "viscosity_bias_curve: bad evaluation grid");

    std::vector<double> u0(static_cast<std::size_t>(xs.rows()));
    for (Eigen::Index r = 0; r < xs.rows(); ++r)
        u0[static_cast<std::size_t>(r)] = core::hopf_lax(support, xs.row(r).transpose(), t).value;

    BiasCurve out;
    out.eps = eps_list;
    double log_sum = 0.0;
    bool any_zero = false;
    for (double eps : eps_list) {
        double dev = 0.0;
        for (Eigen::Index r = 0; r < xs.rows(); ++r)
            dev = std::max(dev, std::abs(core::hopf_cole_solution(support, xs.row(r).transpose(), t, eps) -
                                         u0[static_cast<std::size_t>(r)]));
        out.deviation.push_back(dev);
        if (dev > 0.0)
            log_sum += std::log(dev / eps);
        else
            any_zero = true;
    }
    if (any_zero) {
        out.constant = 0.0;
        out.within_factor3 = std::all_of(out.deviation.begin(), out.deviation.end(), [](double v) { return v == 0.0; });
        return out;
    }
    out.constant = std::exp(log_sum / static_cast<double>(eps_list.size()));
    out.within_factor3 = true;
    for (std::size_t i = 0; i < eps_list.size(); ++i) {
        const double ratio = out.deviation[i] / eps_list[i];
        if (ratio < out.constant / 3.0 || ratio > 3.0 * out.constant) out.within_factor3 = false;
    }
    return out;
}

MonteCarlo feynman_kac_mc(const ScalarField& g, const Vector& x, double t, double eps, int n_samples,
                          std::uint64_t seed)
{
    require(n_samples >= 1000, "feynman_kac_mc: need at least 1000 samples");
    require(t > 0.0 && eps > 0.0, "feynman_kac_mc: t and eps must be positive");
    CounterRng rng(seed);
    const double sd = std::sqrt(2.0 * eps * t);
    std::vector<double> gv(static_cast<std::size_t>(n_samples));
    for (auto& v : gv) {
        const Vector y = x + sd * normal_vector(rng, x.size());
        v = g(y);
    }
    const double gmin = *std::min_element(gv.begin(), gv.end());
    double s1 = 0.0, s2 = 0.0;
    for (double v : gv) {
        const double w = std::exp(-(v - gmin) / eps);
        s1 += w;
        s2 += w * w;
    }
    const double n = n_samples;
    const double mean = s1 / n;
    const double var = std::max(0.0, s2 / n - mean * mean) * n / (n - 1.0);
    return {gmin - eps * std::log(mean), eps * std::sqrt(var / n) / mean};
}

MatchedScale matched_scale_check(const Vector& x, double t, double eps, int n_atoms, std::uint64_t seed)
{
    require(n_atoms >= 2, "matched_scale_check: need at least two atoms");
    const Eigen::Index d = x.size();
    const double q = 2.0 * eps * t;
    CounterRng rng(seed);
    const Matrix y = std::sqrt(q) * normal_matrix(rng, n_atoms, d);
    Vector z(n_atoms);
    for (Eigen::Index j = 0; j < n_atoms; ++j) z[j] = -(x - y.row(j).transpose()).squaredNorm() / (4.0 * t);
    const Vector pi = softmax(z, eps);

    MatchedScale out;
    out.posterior_mean = y.transpose() * pi;
    out.mean_std_error = Vector::Zero(d);
    double var = 0.0;
    Vector dev2(n_atoms);
    for (Eigen::Index j = 0; j < n_atoms; ++j) {
        const Vector c = y.row(j).transpose() - out.posterior_mean;
        out.mean_std_error.array() += pi[j] * pi[j] * c.array().square();
        dev2[j] = c.squaredNorm() / static_cast<double>(d);
        var += pi[j] * dev2[j];
    }
    out.mean_std_error = out.mean_std_error.cwiseSqrt();
    double vse = 0.0;
    for (Eigen::Index j = 0; j < n_atoms; ++j) vse += pi[j] * pi[j] * (dev2[j] - var) * (dev2[j] - var);
    out.posterior_variance = var;
    out.variance_std_error = std::sqrt(vse);
    out.expected_mean = 0.5 * x;
    out.expected_variance = eps * t;
    return out;
}

} // namespace hopfcole::quadrature
