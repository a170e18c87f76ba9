#include "cli.hpp"

#include "hopfcole/attention.hpp"
#include "hopfcole/attribution.hpp"
#include "hopfcole/characteristics.hpp"
#include "hopfcole/integrable.hpp"
#include "hopfcole/quadrature.hpp"
#include "hopfcole/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hopfcole::cli {

namespace {

using io::Cell;
using io::Table;

std::string sci(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

Cell num(double v) { return Cell{v}; }
Cell whole(long long v) { return Cell{v}; }
Cell word(std::string s) { return Cell{std::move(s)}; }

double rel_gap(const Vector& fd, const Vector& analytic, double floor)
{
    return (fd - analytic).norm() / std::max(analytic.norm(), floor);
}

std::vector<Eigen::Index> atom_targets(const Config& cfg, int d)
{
    std::vector<Eigen::Index> out;
    if (cfg.text("Ns") == "auto" && cfg.command() == "scaling") {
        // smooth data reaches the roundoff floor within a few grid refinements
        static const std::vector<Eigen::Index> d1{4, 5, 6, 7, 8, 9, 11, 13, 15, 17};
        static const std::vector<Eigen::Index> d2{9, 16, 25, 36, 49, 64, 81, 100, 121, 144};
        return d == 1 ? d1 : d2;
    }
    if (cfg.text("Ns") == "auto") {
        static const std::vector<Eigen::Index> d1{11, 31, 101, 317, 1001, 3163, 9999};
        static const std::vector<Eigen::Index> d2{25, 81, 225, 625, 1681, 4225, 9801};
        return d == 1 ? d1 : d2;
    }
    for (long long n : cfg.integers("Ns")) out.push_back(static_cast<Eigen::Index>(n));
    return out;
}

std::vector<int> dims(const Config& cfg)
{
    std::vector<int> out;
    for (long long d : cfg.integers("d")) {
        require(d == 1 || d == 2, "parameter 'd' entries must be 1 or 2");
        out.push_back(static_cast<int>(d));
    }
    return out;
}

quadrature::ScalarField initial_data(const std::string& name)
{
    if (name == "abs") return [](const Vector& y) { return y.norm(); };
    if (name == "smooth") return [](const Vector& y) { return 0.5 * y.squaredNorm(); };
    throw Error("parameter 'g' must be abs or smooth, got '" + name + "'");
}

nlohmann::ordered_json fit_json(const quadrature::ScalingFit& f)
{
    return {{"alpha", f.alpha}, {"slope", -f.alpha}, {"intercept", f.intercept}, {"r_squared", f.r_squared},
            {"d_eff", f.d_eff}};
}

struct Instance {
    core::SupportSet support;
    Vector x;
    double t;
    double eps;
};

Instance attribution_instance(CounterRng& rng)
{
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.uniform() * 3);
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.uniform() * 9);
    core::SupportSet s(normal_matrix(rng, n, d), 0.5 * normal_vector(rng, n));
    return {s, normal_vector(rng, d), rng.uniform(0.5, 2.0), rng.uniform(0.2, 2.0)};
}

characteristics::Drift random_drift(CounterRng& rng, int family, Eigen::Index d)
{
    using characteristics::Drift;
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

// exp(A T) by scaling and squaring a Taylor series in long double
Matrix expm(const Matrix& a, double t)
{
    using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
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

} // namespace

// ---------------------------------------------------------------- verify

Report verify_identity(const Config& cfg)
{
    Report r;
    CounterRng rng(cfg.seed());
    const double t = cfg.number("t");
    const auto n = static_cast<Eigen::Index>(cfg.integer("atoms"));
    const auto points = static_cast<Eigen::Index>(cfg.integer("points"));
    require(n >= 1 && points >= 1, "verify: atoms and points must be positive");

    const core::SupportSet s1(normal_matrix(rng, n, 1), 0.5 * normal_vector(rng, n));
    const core::SupportSet s2(normal_matrix(rng, n, 2), 0.5 * normal_vector(rng, n));
    const Matrix b = normal_matrix(rng, 2, 2);
    const core::Metric metric(b * b.transpose() + 0.5 * Matrix::Identity(2, 2));
    const Matrix x2 = 2.0 * normal_matrix(rng, points, 2);

    Table table{"verify_identity", {"eps", "points", "max_residual_d1", "max_residual_d2_metric"}, {}};
    double worst = 0.0;
    for (double eps : cfg.numbers("eps")) {
        double w1 = 0.0, w2 = 0.0;
        for (Eigen::Index i = 0; i < points; ++i) {
            Vector x(1);
            x << -3.0 + 6.0 * static_cast<double>(i) / static_cast<double>(std::max<Eigen::Index>(points - 1, 1));
            w1 = std::max(w1, core::identity_residual(s1, x, t, eps));
            w2 = std::max(w2, core::identity_residual(s2, x2.row(i).transpose(), t, eps, metric));
        }
        table.add_row({num(eps), whole(points), num(w1), num(w2)});
        r.check("identity eps=" + io::format_double(eps), w1 <= 1e-12 && w2 <= 1e-12,
                "d=1 " + sci(w1) + ", d=2 metric " + sci(w2) + " (<= 1e-12)");
        worst = std::max({worst, w1, w2});
    }
    r.results["identity_max_residual"] = worst;
    r.tables.push_back(std::move(table));
    return r;
}

Report verify_attention(const Config& cfg)
{
    Report r;
    CounterRng rng(cfg.seed() + 1);
    const auto trials = cfg.integer("attn_trials");
    const auto nq = static_cast<Eigen::Index>(cfg.integer("attn_queries"));
    const auto nk = static_cast<Eigen::Index>(cfg.integer("attn_keys"));
    Table table{"verify_attention", {"d", "eps", "trials", "max_abs_error"}, {}};
    double worst_all = 0.0;
    for (long long d : cfg.integers("attn_dims")) {
        double worst = 0.0;
        const double eps = std::sqrt(static_cast<double>(d));
        for (long long i = 0; i < trials; ++i) {
            attention::AttentionBatch batch(normal_matrix(rng, nq, d), normal_matrix(rng, nk, d),
                                            normal_matrix(rng, nk, d));
            worst = std::max(worst, (attention::softmax_attention(batch) - attention::lse_grad_attention(batch))
                                        .cwiseAbs()
                                        .maxCoeff());
        }
        table.add_row({whole(d), num(eps), whole(trials), num(worst)});
        r.check("attention d=" + std::to_string(d), worst <= 1e-15, "max |softmax - grad LSE| " + sci(worst) + " (<= 1e-15)");
        worst_all = std::max(worst_all, worst);
    }
    r.results["attention_max_abs_error"] = worst_all;
    r.tables.push_back(std::move(table));

    double l2_worst = 0.0;
    for (long long i = 0; i < cfg.integer("l2_trials"); ++i) {
        const Eigen::Index d = 1 + i % 4;
        const Matrix keys = normal_matrix(rng, 7, d);
        const Matrix qs = normal_matrix(rng, 3, d);
        const double t = rng.uniform(0.2, 2.0), eps = rng.uniform(0.05, 2.0);
        const auto l2 = attention::l2_attention(qs, keys, normal_matrix(rng, 7, 2), t, eps);
        const core::SupportSet support(keys, Vector::Zero(7));
        for (Eigen::Index q = 0; q < 3; ++q) {
            const double expect = -core::hopf_cole_solution(support, qs.row(q).transpose(), t, eps) / eps;
            l2_worst = std::max(l2_worst, std::abs(l2.log_partition[q] - expect) / std::max(1.0, std::abs(expect)));
        }
    }
    r.results["l2_partition_max_error"] = l2_worst;
    r.check("l2 attention log-partition", l2_worst <= 1e-12, "max |log Z + u/eps| " + sci(l2_worst) + " (<= 1e-12)");
    return r;
}

Report verify_transformer(const Config& cfg)
{
    Report r;
    CounterRng rng(cfg.seed() + 2);
    const auto d = static_cast<Eigen::Index>(cfg.integer("block_d"));
    const Matrix x = normal_matrix(rng, cfg.integer("block_tokens"), d);
    Table table{"verify_transformer", {"eps", "attention_error", "ffn_residual_max", "ffn_networks"}, {}};
    for (double eps : cfg.numbers("block_eps")) {
        const auto p = attention::BlockParams::random(d, d, cfg.integer("block_atoms"), eps, eps, cfg.seed());
        const auto rep = attention::transformer_block_check(x, p);
        table.add_row({num(eps), num(rep.attention_error), num(rep.ffn_residual_max), whole(rep.ffn_networks)});
        r.check("transformer eps=" + io::format_double(eps), rep.attention_error <= 1e-15 && rep.ffn_residual_max <= 1e-12,
                "attention " + sci(rep.attention_error) + " (<= 1e-15), FFN " + sci(rep.ffn_residual_max) + " (<= 1e-12)");
    }
    r.tables.push_back(std::move(table));
    return r;
}

// ---------------------------------------------------------------- quadrature

Report quadrature_rate(const Config& cfg, int d)
{
    Report r;
    quadrature::QuadratureOptions opt;
    opt.domain = quadrature::Box::cube(d, -2.0, 2.0);
    opt.eval_per_axis = static_cast<int>(cfg.integer("eval_per_axis"));
    opt.oracle_spacing = cfg.number("oracle_spacing");
    const auto curve =
        quadrature::quadrature_error_curve(initial_data(cfg.text("g")), d, cfg.number("t"), atom_targets(cfg, d), opt);

    const std::string tag = "d" + std::to_string(d);
    Table table{"quadrature_curve_" + tag, {"N", "eps", "error", "rms_error", "oracle_resolution"}, {}};
    for (std::size_t i = 0; i < curve.n.size(); ++i)
        table.add_row({whole(curve.n[i]), num(curve.eps[i]), num(curve.error[i]), num(curve.rms_error[i]),
                       whole(curve.oracle_resolution[i])});
    r.tables.push_back(std::move(table));

    Table fit{"quadrature_fit_" + tag, {"d", "points", "slope", "r_squared", "target"}, {}};
    const double target = -1.0 / d;
    if (curve.n.size() >= 3) {
        const auto f = quadrature::fit_curve(curve);
        fit.add_row({whole(d), whole(static_cast<long long>(curve.n.size())), num(-f.alpha), num(f.r_squared), num(target)});
        r.results["quadrature_" + tag] = fit_json(f);
        const double tol = cfg.number("slope_tol");
        r.check("quadrature slope " + tag, std::abs(-f.alpha - target) <= tol,
                "slope " + io::format_double(-f.alpha) + " vs " + io::format_double(target) + " +- " + io::format_double(tol));
    } else {
        fit.add_row({whole(d), whole(static_cast<long long>(curve.n.size())), Cell{}, Cell{}, num(target)});
        r.results["quadrature_" + tag] = nullptr;
    }
    r.tables.push_back(std::move(fit));
    return r;
}

Report viscosity_bias(const Config& cfg)
{
    Report r;
    CounterRng rng(cfg.seed() + 3);
    const auto eps_list = cfg.numbers("bias_eps");
    require(eps_list.size() >= 2 && eps_list.front() >= 10.0 * eps_list.back() * (1 - 1e-12),
            "bias_eps must span at least a decade");
    const auto atoms = static_cast<Eigen::Index>(cfg.integer("bias_atoms"));
    const auto npts = static_cast<Eigen::Index>(cfg.integer("bias_points"));
    Matrix xs(npts, 1);
    for (Eigen::Index i = 0; i < npts; ++i) xs(i, 0) = -2.5 + 5.0 * static_cast<double>(i) / static_cast<double>(npts - 1);

    Table table{"viscosity_bias", {"support", "eps", "deviation", "ratio", "constant"}, {}};
    long long good = 0;
    const long long supports = cfg.integer("bias_supports");
    double spread = 1.0;
    for (long long s = 0; s < supports; ++s) {
        Matrix y(atoms, 1);
        for (Eigen::Index j = 0; j < atoms; ++j) y(j, 0) = rng.uniform(-2.0, 2.0);
        Vector g(atoms);
        for (Eigen::Index j = 0; j < atoms; ++j) g[j] = rng.uniform(0.0, 1.0);
        const auto c = quadrature::viscosity_bias_curve(core::SupportSet(y, g), xs, cfg.number("t"), eps_list);
        double lo = INFINITY, hi = 0.0;
        for (std::size_t i = 0; i < eps_list.size(); ++i) {
            const double ratio = c.deviation[i] / eps_list[i];
            lo = std::min(lo, ratio);
            hi = std::max(hi, ratio);
            table.add_row({whole(s), num(eps_list[i]), num(c.deviation[i]), num(ratio), num(c.constant)});
        }
        spread = std::max(spread, hi / lo);
        if (c.within_factor3) ++good;
    }
    r.tables.push_back(std::move(table));
    r.results["bias_worst_ratio_spread"] = spread;
    r.check("viscosity bias linear in eps", good == supports,
            std::to_string(good) + "/" + std::to_string(supports) + " supports within [C/3, 3C]; worst max/min ratio " +
                io::format_double(spread));
    return r;
}

// ---------------------------------------------------------------- scaling

Report scaling_sweep(const Config& cfg, int d)
{
    Report r;
    quadrature::QuadratureOptions opt;
    opt.domain = quadrature::Box::cube(d, -2.0, 2.0);
    opt.eval_per_axis = static_cast<int>(cfg.integer("eval_per_axis"));
    const auto curve =
        quadrature::quadrature_error_curve(initial_data("smooth"), d, cfg.number("t"), atom_targets(cfg, d), opt);
    const std::string tag = "d" + std::to_string(d);
    Table table{"scaling_curve_" + tag, {"N", "eps", "rms_error", "sup_error", "fitted"}, {}};
    std::vector<std::pair<double, double>> pts;
    const double floor = cfg.number("floor");
    for (std::size_t i = 0; i < curve.n.size(); ++i) {
        const bool fitted = curve.rms_error[i] > floor;
        table.add_row({whole(curve.n[i]), num(curve.eps[i]), num(curve.rms_error[i]), num(curve.error[i]), whole(fitted)});
        if (fitted) pts.emplace_back(static_cast<double>(curve.n[i]), curve.rms_error[i]);
    }
    r.tables.push_back(std::move(table));
    if (pts.size() >= 3) {
        const auto f = quadrature::scaling_fit(pts);
        r.results["scaling_" + tag] = fit_json(f);
        r.check("smooth data beats the Lipschitz rate " + tag, f.alpha >= 1.0 / d,
                "alpha " + io::format_double(f.alpha) + " >= " + io::format_double(1.0 / d) + " over " +
                    std::to_string(pts.size()) + " points above the floor");
    } else {
        r.results["scaling_" + tag] = nullptr;
    }
    return r;
}

Report scaling_deff(const Config& cfg)
{
    Report r;
    Table table{"scaling_deff", {"alpha", "d_eff", "fitted_alpha", "r_squared"}, {}};
    bool ok = true;
    for (double alpha : cfg.numbers("alphas")) {
        std::vector<std::pair<double, double>> pts;
        for (double n = 1e3; n < 1e9; n *= 10) pts.emplace_back(n, std::pow(n, -alpha));
        const auto f = quadrature::scaling_fit(pts);
        table.add_row({num(alpha), num(f.d_eff), num(f.alpha), num(f.r_squared)});
        ok = ok && std::abs(f.alpha - alpha) <= 1e-12 && std::abs(f.r_squared - 1.0) <= 1e-12 && f.d_eff == 1.0 / f.alpha;
    }
    r.tables.push_back(std::move(table));
    r.check("planted exponents recovered", ok, "alpha to 1e-12, R^2 = 1 to 1e-12, d_eff = 1/alpha");
    return r;
}

// ---------------------------------------------------------------- robustness

Report robustness_bound(const Config& cfg)
{
    Report r;
    CounterRng rng(cfg.seed() + 4);
    const auto atoms = static_cast<Eigen::Index>(cfg.integer("atoms"));
    const double lmin = std::log(cfg.number("eps_min")), lmax = std::log(cfg.number("eps_max"));
    Table table{"robustness_bound", {"trial", "d", "eps", "hessian_norm", "bound", "violated"}, {}};
    long long violated = 0;
    const long long trials = cfg.integer("trials");
    for (long long i = 0; i < trials; ++i) {
        const Eigen::Index d = 1 + i % 3;
        const double eps = std::exp(rng.uniform(lmin, lmax));
        const core::HJNetwork net(normal_matrix(rng, atoms, d), normal_vector(rng, atoms), eps, 1.0);
        const Vector x = 2.0 * normal_vector(rng, d);
        const auto s = robustness::hessian_spectral_norm(net, x, static_cast<std::uint64_t>(i));
        Eigen::SelfAdjointEigenSolver<Matrix> es(robustness::input_hessian(net, x), Eigen::EigenvaluesOnly);
        const double norm = std::max(s.norm, es.eigenvalues().maxCoeff());
        const bool bad = norm > s.bound;
        violated += bad;
        table.add_row({whole(i), whole(d), num(eps), num(norm), num(s.bound), whole(bad)});
    }
    r.tables.push_back(std::move(table));
    r.results["hessian_bound_violations"] = violated;
    r.check("hessian bound", violated == 0,
            std::to_string(violated) + " violations over " + std::to_string(trials) + " triples");

    Table pt{"robustness_perturbation", {"trial", "radius", "max_observed", "bound", "violated"}, {}};
    long long pviol = 0;
    for (long long i = 0; i < cfg.integer("perturb_trials"); ++i) {
        const core::HJNetwork net(normal_matrix(rng, atoms, 3), normal_vector(rng, atoms),
                                  std::exp(rng.uniform(lmin, lmax)), 1.0);
        const double radius = rng.uniform(0.01, 2.0);
        const auto p = robustness::perturbation_check(net, normal_vector(rng, 3), radius, 50, static_cast<std::uint64_t>(i));
        const bool bad = p.max_observed > p.bound;
        pviol += bad;
        pt.add_row({whole(i), num(radius), num(p.max_observed), num(p.bound), whole(bad)});
    }
    r.tables.push_back(std::move(pt));
    r.check("perturbation bound", pviol == 0, std::to_string(pviol) + " violations");

    // two-neuron tie: the Hessian is ||W1 - W2||^2/(4 eps) along W1 - W2
    double tie_worst = 0.0;
    for (int i = 0; i < 50; ++i) {
        const Eigen::Index d = 1 + i % 3;
        const Matrix w = normal_matrix(rng, 2, d);
        const double eps = std::exp(rng.uniform(lmin, lmax));
        Vector b(2);
        b << 0.0, 0.0;
        // x on the tie hyperplane (W1 - W2).x = 0
        Vector x = normal_vector(rng, d);
        const Vector diff = (w.row(0) - w.row(1)).transpose();
        x -= diff * (diff.dot(x) / diff.squaredNorm());
        const core::HJNetwork net(w, b, eps, 1.0);
        Eigen::SelfAdjointEigenSolver<Matrix> es(robustness::input_hessian(net, x), Eigen::EigenvaluesOnly);
        const double closed = diff.squaredNorm() / (4.0 * eps);
        tie_worst = std::max(tie_worst, std::abs(es.eigenvalues().maxCoeff() - closed) / closed);
    }
    r.results["tie_relative_error"] = tie_worst;
    r.check("two-atom tie hessian", tie_worst <= 1e-10, "relative error " + sci(tie_worst) + " (<= 1e-10)");
    return r;
}

Report robustness_radius(const Config& cfg)
{
    Report r;
    CounterRng rng(cfg.seed() + 5);
    const double tau = cfg.number("tau");
    const core::HJNetwork base(normal_matrix(rng, cfg.integer("atoms"), 2), normal_vector(rng, cfg.integer("atoms")), 1.0, 1.0);
    const double limit = tau / base.weight_row_norm_max();
    Table table{"robustness_radius", {"eps", "tau", "w_row_norm_max", "certified_radius", "large_eps_limit"}, {}};
    double prev = 0.0;
    bool monotone = true;
    double last = 0.0;
    for (double eps = 1e-3; eps <= 1e8 * (1 + 1e-9); eps *= 10) {
        const core::HJNetwork net(base.weights(), base.biases(), eps, 1.0);
        const auto c = robustness::certified_radius(net, tau);
        table.add_row({num(eps), num(tau), num(c.w_row_norm_max), num(c.certified_radius), num(limit)});
        monotone = monotone && c.certified_radius >= prev;
        prev = last = c.certified_radius;
    }
    r.tables.push_back(std::move(table));
    r.results["radius_large_eps_gap"] = std::abs(last - limit);
    r.check("certified radius large-eps limit", std::abs(last - limit) <= 1e-4,
            "|r(1e8) - tau/||W||| = " + sci(std::abs(last - limit)) + " (<= 1e-4)");
    r.check("certified radius monotone in eps", monotone, "nondecreasing over eps = 1e-3 .. 1e8");
    return r;
}

Report near_shock(const Config& cfg)
{
    Report r;
    const double delta = cfg.number("shock_delta"), t = cfg.number("shock_t"), eps = cfg.number("shock_eps");
    const auto npts = static_cast<Eigen::Index>(cfg.integer("shock_points"));
    Matrix xs(npts, 1);
    for (Eigen::Index i = 0; i < npts; ++i)
        xs(i, 0) = -1.0 + (delta + 2.0) * static_cast<double>(i) / static_cast<double>(npts - 1);
    Table table{"robustness_shock", {"k", "peak_hessian", "closed_form", "ratio_to_k_minus_2"}, {}};
    double peak1 = 0.0;
    bool ok = true;
    for (long long k : cfg.integers("shock_ks")) {
        const auto s = robustness::refined_pair(delta, static_cast<int>(k));
        const double peak = robustness::peak_hessian_norm(core::build_network(s, t, eps), xs);
        const double spacing = delta / static_cast<double>(k) / (2.0 * t);
        if (peak1 == 0.0) peak1 = peak * static_cast<double>(k * k);
        const double ratio = peak / (peak1 / static_cast<double>(k * k));
        table.add_row({whole(k), num(peak), num(spacing * spacing / (4.0 * eps)), num(ratio)});
        ok = ok && ratio >= 0.5 && ratio <= 2.0;
    }
    r.tables.push_back(std::move(table));
    r.check("near-shock peak ~ k^-2", ok, "peak/(peak_1 k^-2) within [0.5, 2] for k in " + cfg.text("shock_ks"));
    return r;
}

// ---------------------------------------------------------------- bifurcation

Report bifurcation(const Config& cfg)
{
    Report r;
    CounterRng rng(cfg.seed());
    const auto n = static_cast<Eigen::Index>(cfg.integer("atoms"));
    require(n >= 2, "bifurcation: need at least two atoms");
    const double sep = cfg.number("separation"), spread = cfg.number("spread"), g_far = cfg.number("g_far");
    Matrix y(n, 2);
    Vector g(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const bool near = j < n / 2;
        y(j, 0) = (near ? -sep : sep) + spread * rng.normal();
        y(j, 1) = spread * rng.normal();
        g[j] = near ? 0.0 : g_far;
    }
    const core::SupportSet support(y, g);
    const double t = cfg.number("t");
    const auto points = cfg.integer("eps_points");
    const double lo = cfg.number("eps_min"), hi = cfg.number("eps_max");
    require(points >= 10 && hi > lo && lo > 0.0, "bifurcation: need eps_points >= 10 and 0 < eps_min < eps_max");
    std::vector<double> eps;
    for (long long i = 0; i < points; ++i)
        eps.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(points - 1)));

    const auto seeds =
        attribution::default_seed_grid(support, static_cast<int>(cfg.integer("per_axis")), cfg.number("margin"));
    const auto trace = attribution::bifurcation_sweep(support, t, eps, seeds, static_cast<int>(cfg.integer("bisections")));

    Table sup{"bifurcation_support", {"y_0", "y_1", "g"}, {}};
    for (Eigen::Index j = 0; j < n; ++j) sup.add_row({num(y(j, 0)), num(y(j, 1)), num(g[j])});
    r.tables.push_back(std::move(sup));

    Table counts{"bifurcation_counts", {"eps", "count", "minima", "saddles", "maxima", "fold_diagnostic"}, {}};
    Table pts{"bifurcation_points", {"eps", "x_0", "x_1", "type", "entropy", "min_abs_eigenvalue"}, {}};
    for (std::size_t i = 0; i < eps.size(); ++i) {
        long long mins = 0, sads = 0, maxs = 0;
        for (const auto& p : trace.searches[i].points) {
            mins += p.type == attribution::MorseType::minimum;
            sads += p.type == attribution::MorseType::saddle;
            maxs += p.type == attribution::MorseType::maximum;
            pts.add_row({num(eps[i]), num(p.location[0]), num(p.location[1]), word(attribution::to_string(p.type)),
                         num(p.entropy), num(p.min_abs_eigenvalue())});
        }
        const double diag = attribution::fold_diagnostic(trace.searches[i]);
        counts.add_row({num(eps[i]), whole(trace.count(i)), whole(mins), whole(sads), whole(maxs),
                        std::isnan(diag) ? Cell{} : num(diag)});
    }
    Table folds{"bifurcation_folds",
                {"index", "count_before", "count_after", "eps_lo", "eps_hi", "min_abs_eig_before", "signature"},
                {}};
    bool signatures = true;
    for (const auto& f : trace.folds) {
        folds.add_row({whole(static_cast<long long>(f.index)), whole(f.count_before), whole(f.count_after), num(f.eps_lo),
                       num(f.eps_hi), num(f.min_abs_eig_before), whole(f.signature)});
        signatures = signatures && f.signature;
    }
    r.tables.push_back(std::move(counts));
    r.tables.push_back(std::move(pts));
    r.tables.push_back(std::move(folds));

    const double diam = support.diameter();
    const double large = 4.0 * diam * diam / (4.0 * t);
    bool tail_one = false;
    bool tail_ok = true;
    for (std::size_t i = 0; i < eps.size(); ++i)
        if (eps[i] >= large) {
            tail_one = true;
            tail_ok = tail_ok && trace.count(i) == 1;
        }
    std::ostringstream seq;
    for (std::size_t i = 0; i < eps.size(); ++i) seq << (i ? "," : "") << trace.count(i);
    r.results["counts"] = seq.str();
    r.results["diameter_sq_over_4t"] = diam * diam / (4.0 * t);
    r.results["folds"] = static_cast<long long>(trace.folds.size());
    r.check("critical-point count nonincreasing", trace.counts_nonincreasing(), "counts " + seq.str());
    r.check("single critical point for eps >> diam^2/(4t)", tail_one && tail_ok,
            "count 1 at every eps >= 4 diam^2/(4t) = " + io::format_double(large));
    r.check("fold signature at every drop", !trace.folds.empty() && signatures,
            std::to_string(trace.folds.size()) + " drops, min |saddle eigenvalue| minimal before each");
    return r;
}

// ---------------------------------------------------------------- attribution

Report attribution_oracles(const Config& cfg)
{
    Report r;
    CounterRng rng(cfg.seed() + 6);
    const double tol = cfg.number("tol");
    Table table{"attribution_oracles", {"instance", "d", "atoms", "eps", "label_rel_err", "prediction_rel_err", "entropy_rel_err"}, {}};
    double wl = 0, wp = 0, we = 0;
    const long long instances = cfg.integer("instances");
    for (long long i = 0; i < instances; ++i) {
        const Instance in = attribution_instance(rng);
        const Eigen::Index n = in.support.size(), d = in.support.dim();
        Vector analytic(n), fd(n);
        const double hg = 1e-5 * in.eps;
        for (Eigen::Index j = 0; j < n; ++j) {
            analytic[j] = attribution::label_sensitivity(in.support, in.x, in.t, in.eps, j);
            Vector gp = in.support.values(), gm = in.support.values();
            gp[j] += hg;
            gm[j] -= hg;
            const auto sp = in.support.with_values(gp), sm = in.support.with_values(gm);
            fd[j] = (attribution::soft_prediction(attribution::gibbs_weights(sp, in.x, in.t, in.eps), sp) -
                     attribution::soft_prediction(attribution::gibbs_weights(sm, in.x, in.t, in.eps), sm)) /
                    (2 * hg);
        }
        const double el = rel_gap(fd, analytic, 1e-12);

        const Vector gf = attribution::prediction_gradient(in.support, in.x, in.t, in.eps);
        const Vector gh = attribution::attribution_entropy(in.support, in.x, in.t, in.eps).gradient;
        Vector fdf(d), fdh(d);
        const double hx = 1e-5;
        auto f = [&](const Vector& x) {
            return attribution::soft_prediction(attribution::gibbs_weights(in.support, x, in.t, in.eps), in.support);
        };
        auto h = [&](const Vector& x) { return attribution::attribution_entropy(in.support, x, in.t, in.eps).value; };
        for (Eigen::Index k = 0; k < d; ++k) {
            Vector e = Vector::Zero(d);
            e[k] = hx;
            fdf[k] = (f(in.x + e) - f(in.x - e)) / (2 * hx);
            fdh[k] = (h(in.x + e) - h(in.x - e)) / (2 * hx);
        }
        const double ep = rel_gap(fdf, gf, 1e-12), ee = rel_gap(fdh, gh, 1e-12);
        wl = std::max(wl, el);
        wp = std::max(wp, ep);
        we = std::max(we, ee);
        table.add_row({whole(i), whole(d), whole(n), num(in.eps), num(el), num(ep), num(ee)});
    }
    r.tables.push_back(std::move(table));
    r.check("label sensitivity vs FD", wl <= tol, "max relative gap " + sci(wl) + " (<= " + io::format_double(tol) + ")");
    r.check("prediction gradient vs FD", wp <= tol, "max relative gap " + sci(wp) + " (<= " + io::format_double(tol) + ")");
    r.check("entropy gradient vs FD", we <= tol, "max relative gap " + sci(we) + " (<= " + io::format_double(tol) + ")");
    return r;
}

Report ntk_definiteness(const Config& cfg)
{
    Report r;
    CounterRng rng(cfg.seed() + 7);
    Table table{"ntk_gram", {"trial", "points", "atoms", "eps", "min_eigenvalue", "cholesky_ok"}, {}};
    long long positive = 0;
    const long long trials = cfg.integer("ntk_trials");
    for (long long i = 0; i < trials; ++i) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.uniform() * 6);
        const Eigen::Index atoms = n + static_cast<Eigen::Index>(rng.uniform() * 5);
        const core::SupportSet s(normal_matrix(rng, atoms, 2), normal_vector(rng, atoms));
        const double eps = rng.uniform(0.3, 2.0);
        const auto k = attribution::ntk_gram(s, normal_matrix(rng, n, 2), 1.0, eps);
        positive += k.min_eigenvalue > 0.0;
        table.add_row({whole(i), whole(n), whole(atoms), num(eps), num(k.min_eigenvalue), whole(k.cholesky_ok)});
    }
    r.tables.push_back(std::move(table));
    r.check("NTK Gram positive definite", positive == trials, std::to_string(positive) + "/" + std::to_string(trials));
    return r;
}

// ---------------------------------------------------------------- characteristics

Report costate_exactness(const Config& cfg)
{
    using namespace characteristics;
    Report r;
    CounterRng rng(cfg.seed() + 8);
    const double tol = cfg.number("tol"), step = cfg.number("fd_step");
    Table table{"costate_fd", {"family", "instance", "d", "layers", "rel_gap"}, {}};
    for (int family = 0; family < 3; ++family) {
        double worst = 0.0;
        std::string name;
        for (long long i = 0; i < cfg.integer("instances"); ++i) {
            const Eigen::Index d = 1 + i % 4;
            const Drift f = random_drift(rng, family, d);
            name = f.name();
            const Vector x0 = normal_vector(rng, d);
            const int layers = 5 + static_cast<int>(i % 20);
            const double h = 0.5 / layers;
            const auto tr = resnet_forward(f, x0, h, layers);
            const Vector p0 = costate_backward(tr, tr.states.back()).costates[0];
            auto loss = [&](const Vector& x) { return 0.5 * resnet_forward(f, x, h, layers).states.back().squaredNorm(); };
            Vector fd(d);
            for (Eigen::Index k = 0; k < d; ++k) {
                Vector e = Vector::Zero(d);
                e[k] = step;
                fd[k] = (loss(x0 + e) - loss(x0 - e)) / (2 * step);
            }
            const double gap = rel_gap(fd, p0, 1e-3);
            worst = std::max(worst, gap);
            table.add_row({word(name), whole(i), whole(d), whole(layers), num(gap)});
        }
        r.check("co-state vs FD, " + name + " drift", worst <= tol,
                "max relative gap " + sci(worst) + " (<= " + io::format_double(tol) + ")");
    }
    r.tables.push_back(std::move(table));
    return r;
}

Report euler_and_hamiltonian(const Config& cfg)
{
    using namespace characteristics;
    Report r;
    CounterRng rng(cfg.seed() + 9);
    const Vector x0 = Vector::LinSpaced(3, -1.0, 1.0);
    Table euler{"euler_convergence", {"instance", "error_h", "error_h_over_2", "ratio"}, {}};
    bool euler_ok = true;
    for (int i = 0; i < 20; ++i) {
        const Matrix a = normal_matrix(rng, 3, 3);
        const Vector exact = expm(a, 1.0) * x0;
        const double e1 = (resnet_forward(Drift::linear(a), x0, 1.0 / 200, 200).states.back() - exact).norm();
        const double e2 = (resnet_forward(Drift::linear(a), x0, 1.0 / 400, 400).states.back() - exact).norm();
        euler.add_row({whole(i), num(e1), num(e2), num(e1 / e2)});
        euler_ok = euler_ok && e1 / e2 >= 1.6 && e1 / e2 <= 2.4;
    }
    r.tables.push_back(std::move(euler));
    r.check("Euler error halves with h (linear drift)", euler_ok, "ratio within [1.6, 2.4] on 20 instances");

    Table ham{"hamiltonian_drift", {"family", "instance", "variation_h", "variation_h_over_2", "ratio"}, {}};
    bool ham_ok = true;
    double linear_worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        for (int family : {0, 1}) {
            const Drift f = random_drift(rng, family, 3);
            const Vector start = normal_vector(rng, 3);
            double var[2];
            for (int k = 0; k < 2; ++k) {
                const int layers = 100 << k;
                const auto tr = resnet_forward(f, start, 1.0 / layers, layers);
                const auto trace = hamiltonian_trace(tr, costate_backward(tr, tr.states.back()));
                var[k] = hamiltonian_variation(trace);
                if (family == 0) linear_worst = std::max(linear_worst, var[k] / std::max(1.0, std::abs(trace[0])));
            }
            const double ratio = var[1] > 0.0 ? var[0] / var[1] : 0.0;
            ham.add_row({word(f.name()), whole(i), num(var[0]), num(var[1]), var[1] > 0.0 ? num(ratio) : Cell{}});
            if (family == 1 && var[0] > 1e-10) ham_ok = ham_ok && ratio >= 1.8;
        }
    }
    r.tables.push_back(std::move(ham));
    r.check("Hamiltonian drift O(h) (tanh drift)", ham_ok, "variation ratio >= 1.8 when h halves");
    r.check("Hamiltonian conserved (linear drift)", linear_worst <= 1e-12, "max relative variation " + sci(linear_worst));

    // exported example: tanh drift in d = 2
    const int layers = static_cast<int>(cfg.integer("trajectory_layers"));
    const Drift f = random_drift(rng, 1, 2);
    const auto tr = resnet_forward(f, Vector::Ones(2), 1.0 / std::max(layers, 1), layers);
    const auto co = costate_backward(tr, tr.states.back());
    Table traj{"characteristics_trajectory", {"layer", "x0", "x1", "p0", "p1"}, {}};
    for (std::size_t l = 0; l < tr.states.size(); ++l)
        traj.add_row({whole(static_cast<long long>(l)), num(tr.states[l][0]), num(tr.states[l][1]), num(co.costates[l][0]),
                      num(co.costates[l][1])});
    r.tables.push_back(std::move(traj));
    return r;
}

Report feedforward_adjoint_check(const Config& cfg)
{
    Report r;
    CounterRng rng(cfg.seed() + 10);
    const double tol = cfg.number("tol");
    Table table{"feedforward_adjoint", {"instance", "atoms", "eps", "rel_gap", "sum_error"}, {}};
    double worst = 0.0, sum_worst = 0.0;
    for (long long i = 0; i < cfg.integer("instances"); ++i) {
        const Eigen::Index d = 1 + i % 3, n = 2 + i % 6;
        const core::SupportSet s(normal_matrix(rng, n, d), normal_vector(rng, n));
        const double t = rng.uniform(0.3, 2.0), eps = rng.uniform(0.05, 2.0);
        const Vector x = normal_vector(rng, d);
        auto loss = [&](const core::SupportSet& ss) {
            const double f = core::lse_forward(core::build_network(ss, t, eps), x);
            return 0.5 * f * f;
        };
        const double f0 = core::lse_forward(core::build_network(s, t, eps), x);
        const Vector adj = characteristics::feedforward_adjoint(core::build_network(s, t, eps), x, f0);
        Vector fd(n);
        const double step = 1e-5 * eps;
        for (Eigen::Index j = 0; j < n; ++j) {
            Vector gp = s.values(), gm = s.values();
            gp[j] += step;
            gm[j] -= step;
            fd[j] = (loss(s.with_values(gp)) - loss(s.with_values(gm))) / (2 * step);
        }
        const double gap = rel_gap(fd, adj, 1e-3);
        const double se = std::abs(adj.sum() + f0) / std::max(1.0, std::abs(f0));
        worst = std::max(worst, gap);
        sum_worst = std::max(sum_worst, se);
        table.add_row({whole(i), whole(n), num(eps), num(gap), num(se)});
    }
    r.tables.push_back(std::move(table));
    r.check("feedforward adjoint vs FD", worst <= tol, "max relative gap " + sci(worst) + " (<= " + io::format_double(tol) + ")");
    r.check("feedforward adjoint sums to -loss'", sum_worst <= 1e-12, "max relative error " + sci(sum_worst));
    return r;
}

// ---------------------------------------------------------------- integrable

Report integrable_residuals(const Config& cfg)
{
    Report r;
    const double kmax = cfg.number("kmax"), tol = cfg.number("tol");
    const long long maxn = cfg.integer("max_components");
    require(maxn >= 1, "max_components must be positive");
    Table table{"integrable", {"N", "seed", "bilinear_residual", "fd_residual", "fd_noise_estimate"}, {}};
    double worst = 0.0;
    long long fd_bad = 0, flagged = 0;
    const long long instances = cfg.integer("instances");
    for (long long i = 0; i < instances; ++i) {
        const std::uint64_t seed = cfg.seed() + static_cast<std::uint64_t>(i);
        CounterRng rng(seed);
        const Eigen::Index n = 1 + i % maxn;
        Vector k(n);
        for (Eigen::Index j = 0; j < n; ++j) k[j] = rng.uniform(-kmax, kmax);
        const integrable::TauFunction tau(k, normal_vector(rng, n));
        const double x1 = rng.uniform(-1, 1), x2 = rng.uniform(-0.5, 0.5), x3 = rng.uniform(-0.2, 0.2);
        const double bil = integrable::hirota_residual_bilinear(tau, x1, x2, x3);
        const auto fd = integrable::hirota_residual_fd(tau, x1, x2, x3);
        worst = std::max(worst, std::abs(bil));
        fd_bad += std::abs(fd.residual - bil) > 3.0 * fd.noise_estimate + 1e-12;
        flagged += fd.cancellation;
        table.add_row({whole(n), whole(static_cast<long long>(seed)), num(bil), num(fd.residual), num(fd.noise_estimate)});
    }
    r.tables.push_back(std::move(table));
    r.results["bilinear_max_residual"] = worst;
    r.check("bilinear Hirota residual", worst <= tol, "max " + sci(worst) + " (<= " + io::format_double(tol) + ")");
    r.check("FD evaluator within its error budget", fd_bad == 0 && flagged == 0,
            std::to_string(fd_bad) + " outside 3x budget, " + std::to_string(flagged) + " cancellation flags");
    return r;
}

Report tau_identity(const Config& cfg)
{
    Report r;
    CounterRng rng(cfg.seed() + 11);
    Table table{"tau_identity", {"trial", "eps", "t", "x", "tau_log_residual", "identity_residual"}, {}};
    double worst = 0.0;
    for (long long i = 0; i < cfg.integer("identity_trials"); ++i) {
        const core::SupportSet s(normal_matrix(rng, 4, 1), normal_vector(rng, 4));
        const double eps = i % 2 ? 0.1 : 1.0;
        const double t = rng.uniform(0.3, 2.0), x = rng.uniform(-2, 2);
        Vector xv(1);
        xv << x;
        const double res = integrable::tau_log_identity(s, x, t, eps);
        worst = std::max(worst, res);
        table.add_row({whole(i), num(eps), num(t), num(x), num(res), num(core::identity_residual(s, xv, t, eps))});
    }
    r.tables.push_back(std::move(table));
    r.check("tau-log identity", worst <= 1e-12, "max " + sci(worst) + " (<= 1e-12)");
    return r;
}

// ---------------------------------------------------------------- build

Report build_from_support(const Config& cfg)
{
    Report r;
    require(!cfg.text("support").empty(), "build: --support <csv> is required");
    const auto s = io::load_support_csv(cfg.text("support"));
    const double t = cfg.number("t"), eps = cfg.number("eps");
    const auto net = core::build_network(s, t, eps);
    double worst = 0.0;
    for (Eigen::Index j = 0; j < s.size(); ++j) worst = std::max(worst, core::identity_residual(s, s.atom(j), t, eps));
    r.files.emplace_back(cfg.text("network"), io::network_to_json(net).dump(2) + "\n");
    r.results["network_file"] = cfg.text("network");
    r.results["atoms"] = static_cast<long long>(s.size());
    r.results["dim"] = static_cast<long long>(s.dim());
    r.results["max_identity_residual"] = worst;
    r.check("identity at the atoms", worst <= 1e-12, "max residual " + sci(worst) + " (<= 1e-12)");
    return r;
}

Report run_experiments(const Config& cfg)
{
    Report r;
    const std::string& c = cfg.command();
    if (c == "verify") {
        r.absorb(verify_identity(cfg));
        r.absorb(verify_attention(cfg));
        r.absorb(verify_transformer(cfg));
    } else if (c == "quadrature") {
        for (int d : dims(cfg)) r.absorb(quadrature_rate(cfg, d));
        if (cfg.integer("bias_supports") > 0) r.absorb(viscosity_bias(cfg));
    } else if (c == "scaling") {
        for (int d : dims(cfg)) r.absorb(scaling_sweep(cfg, d));
        r.absorb(scaling_deff(cfg));
    } else if (c == "robustness") {
        r.absorb(robustness_bound(cfg));
        r.absorb(robustness_radius(cfg));
        r.absorb(near_shock(cfg));
    } else if (c == "bifurcation") {
        r.absorb(bifurcation(cfg));
    } else if (c == "attribution") {
        r.absorb(attribution_oracles(cfg));
        r.absorb(ntk_definiteness(cfg));
    } else if (c == "characteristics") {
        r.absorb(costate_exactness(cfg));
        r.absorb(euler_and_hamiltonian(cfg));
        r.absorb(feedforward_adjoint_check(cfg));
    } else if (c == "integrable") {
        r.absorb(integrable_residuals(cfg));
        r.absorb(tau_identity(cfg));
    } else if (c == "build") {
        r.absorb(build_from_support(cfg));
    } else {
        throw Error("unknown command '" + c + "'");
    }
    return r;
}

} // namespace hopfcole::cli
