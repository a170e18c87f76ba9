#include "hopfcole/attribution.hpp"

#include <algorithm>
#include <limits>

namespace hopfcole::attribution {

namespace {

Vector log_softmax(const Vector& z, double eps)
{
    const double lse = log_sum_exp(z, eps);
    return ((z.array() - lse) / eps).matrix();
}

// weighted mean of the atoms
Vector atom_mean(const SupportSet& support, const Vector& pi)
{
    return support.atoms().transpose() * pi;
}

} // namespace

GibbsWeights gibbs_weights(const SupportSet& support, const Vector& x, double t, double eps)
{
    require(eps > 0.0, "gibbs_weights: eps must be positive");
    const Vector neg_e = -core::energies(support, x, t);
    GibbsWeights w;
    w.log_pi = log_softmax(neg_e, eps);
    w.pi = softmax(neg_e, eps);
    w.x = x;
    w.eps = eps;
    return w;
}

double soft_prediction(const GibbsWeights& weights, const SupportSet& support)
{
    require(weights.pi.size() == support.size(), "soft_prediction: weights do not match the support");
    return weights.pi.dot(support.values());
}

double label_sensitivity(const SupportSet& support, const Vector& x, double t, double eps, Eigen::Index j)
{
    require(j >= 0 && j < support.size(), "label_sensitivity: atom index out of range");
    const GibbsWeights w = gibbs_weights(support, x, t, eps);
    const double fhat = soft_prediction(w, support);
    return w.pi[j] * (1.0 + (fhat - support.values()[j]) / eps);
}

Vector prediction_gradient(const SupportSet& support, const Vector& x, double t, double eps)
{
    const GibbsWeights w = gibbs_weights(support, x, t, eps);
    const double gbar = soft_prediction(w, support);
    const Vector ybar = atom_mean(support, w.pi);
    Vector cov = Vector::Zero(support.dim());
    for (Eigen::Index j = 0; j < support.size(); ++j)
        cov += w.pi[j] * (support.values()[j] - gbar) * (support.atom(j) - ybar);
    return cov / (2.0 * t * eps);
}

Entropy attribution_entropy(const SupportSet& support, const Vector& x, double t, double eps)
{
    const GibbsWeights w = gibbs_weights(support, x, t, eps);
    const Vector a = -w.log_pi;
    const double abar = w.pi.dot(a);
    const Vector ybar = atom_mean(support, w.pi);
    Vector cov = Vector::Zero(support.dim());
    for (Eigen::Index j = 0; j < support.size(); ++j) cov += w.pi[j] * (a[j] - abar) * (support.atom(j) - ybar);
    const double h = std::clamp(abar, 0.0, std::log(static_cast<double>(support.size())));
    return {h, cov / (2.0 * t * eps)};
}

const char* to_string(MorseType type)
{
    switch (type) {
    case MorseType::minimum: return "minimum";
    case MorseType::saddle: return "saddle";
    case MorseType::maximum: return "maximum";
    case MorseType::degenerate: return "degenerate";
    }
    return "unknown";
}

Matrix entropy_hessian_fd(const SupportSet& support, const Vector& x, double t, double eps, double step)
{
    const Eigen::Index d = support.dim();
    Matrix h(d, d);
    for (Eigen::Index k = 0; k < d; ++k) {
        Vector e = Vector::Zero(d);
        e[k] = step;
        h.col(k) = (attribution_entropy(support, x + e, t, eps).gradient -
                    attribution_entropy(support, x - e, t, eps).gradient) /
                   (2.0 * step);
    }
    return 0.5 * (h + h.transpose());
}

Matrix default_seed_grid(const SupportSet& support, int per_axis, double margin)
{
    require(per_axis >= 2, "default_seed_grid: need at least two points per axis");
    require(support.dim() <= 2, "default_seed_grid: landscape analysis supports d <= 2");
    const Eigen::Index d = support.dim();
    const Eigen::Index n = support.size();
    // square box: a thin hull must not hide critical points off its short axis
    const Vector amin = support.atoms().colwise().minCoeff().transpose();
    const Vector amax = support.atoms().colwise().maxCoeff().transpose();
    const double half = 0.5 * (amax - amin).maxCoeff() + margin;
    const Vector mid = 0.5 * (amin + amax);
    const Vector lo = mid.array() - half;
    const Vector hi = mid.array() + half;

    Eigen::Index grid = per_axis;
    if (d == 2) grid *= per_axis;
    Matrix seeds(grid + n + n * (n - 1) / 2, d);
    Eigen::Index row = 0;
    for (Eigen::Index i = 0; i < grid; ++i) {
        const Eigen::Index i0 = i % per_axis;
        seeds(row, 0) = lo[0] + (hi[0] - lo[0]) * static_cast<double>(i0) / (per_axis - 1);
        if (d == 2) {
            const Eigen::Index i1 = i / per_axis;
            seeds(row, 1) = lo[1] + (hi[1] - lo[1]) * static_cast<double>(i1) / (per_axis - 1);
        }
        ++row;
    }
    for (Eigen::Index j = 0; j < n; ++j) seeds.row(row++) = support.atoms().row(j);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            seeds.row(row++) = 0.5 * (support.atoms().row(i) + support.atoms().row(j));
    return seeds;
}

namespace {

struct NewtonResult {
    Vector x;
    double gradient_norm;
    bool converged;
};

NewtonResult newton(const SupportSet& support, Vector x, double t, double eps, double fd_step, double step_tol,
                    const CriticalPointOptions& opt)
{
    for (int it = 0; it < opt.max_iterations; ++it) {
        const Vector g = attribution_entropy(support, x, t, eps).gradient;
        const double gn = g.norm();

        Eigen::SelfAdjointEigenSolver<Matrix> es(entropy_hessian_fd(support, x, t, eps, fd_step));
        const Vector& lam = es.eigenvalues();
        const double cutoff = 1e-14 * std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
        Vector step = Vector::Zero(x.size());
        for (Eigen::Index k = 0; k < lam.size(); ++k) {
            if (std::abs(lam[k]) <= cutoff) continue;
            const Vector v = es.eigenvectors().col(k);
            step -= (v.dot(g) / lam[k]) * v;
        }
        // A small gradient alone also holds on exponentially flat tails; the
        // Newton correction must vanish too.
        if (gn <= opt.gradient_tol && (!step.allFinite() || step.norm() <= step_tol)) return {x, gn, true};
        if (!step.allFinite() || step.norm() == 0.0) return {x, gn, false};

        double scale = 1.0;
        bool accepted = false;
        Vector trial;
        for (int k = 0; k < opt.max_halvings; ++k) {
            trial = x + scale * step;
            if (attribution_entropy(support, trial, t, eps).gradient.norm() < gn) {
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) {
            if (gn <= opt.gradient_tol) return {x, gn, true}; // at the roundoff floor
            return {x, gn, false};
        }
        x = trial;
    }
    return {x, attribution_entropy(support, x, t, eps).gradient.norm(), false};
}

bool lex_less(const Vector& a, const Vector& b)
{
    for (Eigen::Index k = 0; k < a.size(); ++k) {
        if (a[k] < b[k]) return true;
        if (a[k] > b[k]) return false;
    }
    return false;
}

} // namespace

CriticalPointSearch find_critical_points(const SupportSet& support, double t, double eps, const Matrix& seeds,
                                         const CriticalPointOptions& options)
{
    require(support.dim() <= 2, "find_critical_points: landscape analysis supports d <= 2");
    require(seeds.rows() >= 1 && seeds.cols() == support.dim(), "find_critical_points: bad seed grid");
    require(t > 0.0 && eps > 0.0, "find_critical_points: t and eps must be positive");

    const double diam = support.size() > 1 ? support.diameter() : 1.0;
    const double fd_step = options.hessian_step_rel * diam;
    const double radius = options.dedup_rel * diam;
    const Vector box_lo = seeds.colwise().minCoeff().transpose();
    const Vector box_hi = seeds.colwise().maxCoeff().transpose();

    CriticalPointSearch out;
    out.seeds = static_cast<int>(seeds.rows());
    std::vector<CriticalPoint> accepted;
    std::vector<Vector> degenerate_found;

    for (Eigen::Index s = 0; s < seeds.rows(); ++s) {
        const NewtonResult r = newton(support, seeds.row(s).transpose(), t, eps, fd_step, radius, options);
        if (!r.converged) {
            ++out.non_convergent;
            continue;
        }
        if ((r.x.array() < box_lo.array()).any() || (r.x.array() > box_hi.array()).any()) {
            ++out.outside_box;
            continue;
        }
        bool duplicate = false;
        for (const auto& p : accepted)
            if ((p.location - r.x).norm() < radius) duplicate = true;
        for (const auto& p : degenerate_found)
            if ((p - r.x).norm() < radius) duplicate = true;
        if (duplicate) continue;

        Eigen::SelfAdjointEigenSolver<Matrix> es(entropy_hessian_fd(support, r.x, t, eps, fd_step),
                                                 Eigen::EigenvaluesOnly);
        const Vector lam = es.eigenvalues();
        if (lam.cwiseAbs().minCoeff() <= options.classify_tol) {
            ++out.degenerate;
            degenerate_found.push_back(r.x);
            continue;
        }
        MorseType type = MorseType::saddle;
        if (lam.minCoeff() > 0.0) type = MorseType::minimum;
        if (lam.maxCoeff() < 0.0) type = MorseType::maximum;
        accepted.push_back({r.x, type, attribution_entropy(support, r.x, t, eps).value, lam, r.gradient_norm});
    }

    if (accepted.empty() && !degenerate_found.empty()) {
        out.flat = true;
        const Vector& x = degenerate_found.front();
        Eigen::SelfAdjointEigenSolver<Matrix> es(entropy_hessian_fd(support, x, t, eps, fd_step),
                                                 Eigen::EigenvaluesOnly);
        accepted.push_back({x, MorseType::degenerate, attribution_entropy(support, x, t, eps).value,
                            es.eigenvalues(), attribution_entropy(support, x, t, eps).gradient.norm()});
    }
    std::sort(accepted.begin(), accepted.end(),
              [](const CriticalPoint& a, const CriticalPoint& b) { return lex_less(a.location, b.location); });
    out.points = std::move(accepted);
    return out;
}

double fold_diagnostic(const CriticalPointSearch& search)
{
    double saddle = std::numeric_limits<double>::infinity();
    double any = std::numeric_limits<double>::infinity();
    for (const auto& p : search.points) {
        if (p.type == MorseType::degenerate) continue;
        any = std::min(any, p.min_abs_eigenvalue());
        if (p.type == MorseType::saddle) saddle = std::min(saddle, p.min_abs_eigenvalue());
    }
    if (std::isfinite(saddle)) return saddle;
    if (std::isfinite(any)) return any;
    return std::numeric_limits<double>::quiet_NaN();
}

bool BifurcationTrace::counts_nonincreasing() const
{
    for (std::size_t i = 1; i < searches.size(); ++i)
        if (count(i) > count(i - 1)) return false;
    return true;
}

BifurcationTrace bifurcation_sweep(const SupportSet& support, double t, const std::vector<double>& eps_grid,
                                   const Matrix& seeds, int bisections, const CriticalPointOptions& options)
{
    require(eps_grid.size() >= 10, "bifurcation_sweep: need at least 10 eps values");
    for (std::size_t i = 1; i < eps_grid.size(); ++i)
        require(eps_grid[i] > eps_grid[i - 1], "bifurcation_sweep: eps grid must be strictly increasing");
    require(eps_grid.front() > 0.0, "bifurcation_sweep: eps must be positive");

    BifurcationTrace trace;
    trace.eps = eps_grid;
    for (double eps : eps_grid) trace.searches.push_back(find_critical_points(support, t, eps, seeds, options));

    std::size_t run_start = 0;
    for (std::size_t i = 1; i < eps_grid.size(); ++i) {
        if (trace.count(i) != trace.count(i - 1)) {
            if (trace.count(i) < trace.count(i - 1)) {
                FoldEvent ev{};
                ev.index = i;
                ev.count_before = trace.count(i - 1);
                ev.count_after = trace.count(i);
                ev.min_abs_eig_before = fold_diagnostic(trace.searches[i - 1]);
                ev.signature = std::isfinite(ev.min_abs_eig_before);
                for (std::size_t k = run_start; k < i - 1 && ev.signature; ++k) {
                    const double v = fold_diagnostic(trace.searches[k]);
                    if (std::isfinite(v) && v < ev.min_abs_eig_before) ev.signature = false;
                }
                double lo = std::log(eps_grid[i - 1]);
                double hi = std::log(eps_grid[i]);
                for (int b = 0; b < bisections; ++b) {
                    const double mid = 0.5 * (lo + hi);
                    const auto c = find_critical_points(support, t, std::exp(mid), seeds, options).points.size();
                    if (static_cast<int>(c) >= ev.count_before)
                        lo = mid;
                    else
                        hi = mid;
                }
                ev.eps_lo = std::exp(lo);
                ev.eps_hi = std::exp(hi);
                trace.folds.push_back(ev);
            }
            run_start = i;
        }
    }
    return trace;
}

NtkGram ntk_gram(const SupportSet& support, const Matrix& xs, double t, double eps)
{
    require(xs.rows() >= 1, "ntk_gram: need at least one evaluation point");
    require(xs.cols() == support.dim(), "ntk_gram: evaluation point dimension mismatch");
    Matrix p(xs.rows(), support.size());
    for (Eigen::Index a = 0; a < xs.rows(); ++a) p.row(a) = gibbs_weights(support, xs.row(a).transpose(), t, eps).pi;
    NtkGram out;
    out.gram = eps * eps * p * p.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> es(out.gram, Eigen::EigenvaluesOnly);
    out.min_eigenvalue = es.eigenvalues().minCoeff();
    Eigen::LLT<Matrix> llt(out.gram);
    out.cholesky_ok = llt.info() == Eigen::Success;
    return out;
}

Matrix fixed_support_hessian(const SupportSet& support, const Vector& x, double t, double eps)
{
    const Vector pi = gibbs_weights(support, x, t, eps).pi;
    Matrix h = -pi * pi.transpose();
    h.diagonal() += pi;
    return eps * h;
}

} // namespace hopfcole::attribution
