#include "hopfcole/attention.hpp"

#include <algorithm>
#include <cmath>

namespace hopfcole::attention {

namespace {

void check_shapes(const Matrix& q, const Matrix& k, const Matrix& v)
{
    require(q.cols() == k.cols(), "attention: query and key widths differ");
    require(k.rows() == v.rows(), "attention: key and value counts differ");
    require(q.rows() >= 1 && k.rows() >= 1 && q.cols() >= 1, "attention: empty batch");
}

} // namespace

AttentionBatch::AttentionBatch(Matrix q_, Matrix k_, Matrix v_)
    : AttentionBatch(std::move(q_), std::move(k_), std::move(v_), 0.0)
{
    eps = std::sqrt(static_cast<double>(q.cols()));
}

AttentionBatch::AttentionBatch(Matrix q_, Matrix k_, Matrix v_, double eps_)
    : q(std::move(q_)), k(std::move(k_)), v(std::move(v_)), eps(eps_)
{
    check_shapes(q, k, v);
    if (eps_ != 0.0) require(eps > 0.0, "attention: eps must be positive");
}

Matrix softmax_attention(const AttentionBatch& b)
{
    require(b.eps > 0.0, "attention: eps must be positive");
    Matrix s = (b.q * b.k.transpose()) / b.eps;
    const Vector m = s.rowwise().maxCoeff();
    s = (s.colwise() - m).array().exp().matrix();
    const Vector z = s.rowwise().sum();
    s.array().colwise() /= z.array();
    return s * b.v;
}

Matrix lse_grad_attention(const AttentionBatch& b)
{
    require(b.eps > 0.0, "attention: eps must be positive");
    const Eigen::Index nk = b.k.rows();
    const Eigen::Index d = b.q.cols();
    Matrix out = Matrix::Zero(b.q.rows(), b.v.cols());
    std::vector<double> z(static_cast<std::size_t>(nk));
    std::vector<double> e(static_cast<std::size_t>(nk));
    for (Eigen::Index i = 0; i < b.q.rows(); ++i) {
        // forward: z_j, m = max z, e_j = exp((z_j - m)/eps), s = sum e, f = m + eps log s
        double m = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < nk; ++j) {
            double acc = 0.0;
            for (Eigen::Index a = 0; a < d; ++a) acc += b.q(i, a) * b.k(j, a);
            z[static_cast<std::size_t>(j)] = acc;
            m = std::max(m, acc);
        }
        double s = 0.0;
        for (Eigen::Index j = 0; j < nk; ++j) {
            e[static_cast<std::size_t>(j)] = std::exp((z[static_cast<std::size_t>(j)] - m) / b.eps);
            s += e[static_cast<std::size_t>(j)];
        }
        // reverse: fbar = 1, sbar = eps/s, ebar_j = sbar, zbar_j = ebar_j e_j/eps.
        // The shift m is a stop-gradient constant; its true adjoint is zero.
        const double sbar = b.eps / s;
        for (Eigen::Index j = 0; j < nk; ++j) {
            const double zbar = sbar * e[static_cast<std::size_t>(j)] / b.eps;
            out.row(i) += zbar * b.v.row(j);
        }
    }
    return out;
}

L2Attention l2_attention(const Matrix& q, const Matrix& k, const Matrix& v, double t, double eps)
{
    check_shapes(q, k, v);
    require(t > 0.0 && eps > 0.0, "l2_attention: t and eps must be positive");
    L2Attention r{Matrix(q.rows(), v.cols()), Vector(q.rows())};
    Vector z(k.rows());
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
        for (Eigen::Index j = 0; j < k.rows(); ++j) z[j] = -(q.row(i) - k.row(j)).squaredNorm() / (4.0 * t);
        r.log_partition[i] = log_sum_exp(z, eps) / eps;
        r.output.row(i) = softmax(z, eps).transpose() * v;
    }
    return r;
}

HardAttention hard_attention(const Matrix& q, const Matrix& k, const Matrix& v)
{
    check_shapes(q, k, v);
    HardAttention h{Matrix(q.rows(), v.cols()), {}};
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
        const Eigen::Index j = argmax(k * q.row(i).transpose());
        h.index.push_back(j);
        h.output.row(i) = v.row(j);
    }
    return h;
}

SinkBound sink_bound(const Matrix& q, const Matrix& k, double eps, Eigen::Index query)
{
    require(q.cols() == k.cols(), "sink_bound: query and key widths differ");
    require(k.rows() >= 2, "sink_bound: need at least two keys");
    require(query >= 0 && query < q.rows(), "sink_bound: query index out of range");
    require(eps > 0.0, "sink_bound: eps must be positive");
    const Vector z = k * q.row(query).transpose();
    const Eigen::Index top = argmax(z);
    double second = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < z.size(); ++j)
        if (j != top) second = std::max(second, z[j]);
    const Vector pi = softmax(z, eps);
    double deficit = 0.0;
    for (Eigen::Index j = 0; j < z.size(); ++j)
        if (j != top) deficit += pi[j];
    const double gap = z[top] - second;
    return {gap, deficit, static_cast<double>(z.size() - 1) * std::exp(-gap / eps)};
}

double positional_shift_check(const Matrix& q, const Matrix& k, const Matrix& pe, double eps)
{
    require(q.cols() == k.cols() && pe.cols() == q.cols(), "positional_shift_check: width mismatch");
    require(pe.rows() == std::max(q.rows(), k.rows()), "positional_shift_check: pe needs max(n_q, n_k) rows");
    require(eps > 0.0, "positional_shift_check: eps must be positive");
    double worst = 0.0;
    for (Eigen::Index i = 0; i < q.rows(); ++i)
        for (Eigen::Index j = 0; j < k.rows(); ++j) {
            const double shifted = (q.row(i) + pe.row(i)).dot(k.row(j) + pe.row(j)) / eps;
            const double base = q.row(i).dot(k.row(j)) / eps;
            const double phi = (q.row(i).dot(pe.row(j)) + pe.row(i).dot(k.row(j)) + pe.row(i).dot(pe.row(j))) / eps;
            worst = std::max(worst, std::abs(shifted - base - phi));
        }
    return worst;
}

Matrix rotary_matrix(Eigen::Index d, double position, double base)
{
    require(d >= 1, "rotary_matrix: d must be positive");
    Matrix r = Matrix::Identity(d, d);
    for (Eigen::Index m = 0; 2 * m + 1 < d; ++m) {
        const double theta = position * std::pow(base, -2.0 * static_cast<double>(m) / static_cast<double>(d));
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        r(2 * m, 2 * m) = c;
        r(2 * m, 2 * m + 1) = -s;
        r(2 * m + 1, 2 * m) = s;
        r(2 * m + 1, 2 * m + 1) = c;
    }
    return r;
}

double rotary_norm_check(const Matrix& q, const std::vector<double>& positions)
{
    double worst = 0.0;
    for (double p : positions) {
        const Matrix r = rotary_matrix(q.cols(), p);
        worst = std::max(worst, (r.transpose() * r - Matrix::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff());
        for (Eigen::Index i = 0; i < q.rows(); ++i)
            worst = std::max(worst, std::abs((r * q.row(i).transpose()).norm() - q.row(i).norm()));
    }
    return worst;
}

Matrix layer_norm(const Matrix& x)
{
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double mean = x.row(i).mean();
        const Eigen::RowVectorXd c = x.row(i).array() - mean;
        const double var = c.squaredNorm() / static_cast<double>(x.cols());
        out.row(i) = c / std::sqrt(var + kLayerNormFloor);
    }
    return out;
}

BlockParams BlockParams::random(Eigen::Index d, Eigen::Index hidden_width, Eigen::Index n_atoms, double eps1,
                                double eps2, std::uint64_t seed)
{
    require(d >= 1 && hidden_width >= 1 && n_atoms >= 1, "BlockParams: sizes must be positive");
    CounterRng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    BlockParams p;
    p.w_q = scale * normal_matrix(rng, d, d);
    p.w_k = scale * normal_matrix(rng, d, d);
    p.w_v = scale * normal_matrix(rng, d, d);
    p.attn_eps = std::sqrt(static_cast<double>(d));
    for (Eigen::Index h = 0; h < hidden_width; ++h)
        p.hidden.emplace_back(normal_matrix(rng, n_atoms, d), normal_vector(rng, n_atoms));
    for (Eigen::Index o = 0; o < d; ++o)
        p.output.emplace_back(normal_matrix(rng, n_atoms, hidden_width), normal_vector(rng, n_atoms));
    p.t = 1.0;
    p.eps1 = eps1;
    p.eps2 = eps2;
    return p;
}

BlockReport transformer_block_check(const Matrix& x, const BlockParams& p)
{
    const Eigen::Index d = x.cols();
    require(p.w_q.rows() == d && p.w_k.rows() == d && p.w_v.rows() == d, "transformer_block_check: projection shape");
    require(!p.hidden.empty() && static_cast<Eigen::Index>(p.output.size()) == d,
            "transformer_block_check: need hidden networks and one output network per coordinate");

    const Matrix z1 = layer_norm(x);
    const AttentionBatch batch(z1 * p.w_q, z1 * p.w_k, z1 * p.w_v, p.attn_eps);
    const Matrix attn = softmax_attention(batch);
    BlockReport r{};
    r.attention_error = (attn - lse_grad_attention(batch)).cwiseAbs().maxCoeff();
    const Matrix z2 = x + attn;
    const Matrix ln2 = layer_norm(z2);

    std::vector<core::HJNetwork> hidden;
    for (const auto& s : p.hidden) {
        require(s.dim() == d, "transformer_block_check: hidden support width must equal d");
        hidden.push_back(core::build_network(s, p.t, p.eps1));
    }
    std::vector<core::HJNetwork> output;
    for (const auto& s : p.output) {
        require(s.dim() == static_cast<Eigen::Index>(hidden.size()), "transformer_block_check: output support width");
        output.push_back(core::build_network(s, p.t, p.eps2));
    }
    r.ffn_networks = static_cast<Eigen::Index>(hidden.size() + output.size());

    r.output = z2;
    Vector h(static_cast<Eigen::Index>(hidden.size()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const Vector xi = ln2.row(i).transpose();
        for (std::size_t u = 0; u < hidden.size(); ++u) {
            h[static_cast<Eigen::Index>(u)] = core::lse_forward(hidden[u], xi);
            r.ffn_residual_max = std::max(r.ffn_residual_max, core::identity_residual(p.hidden[u], xi, p.t, p.eps1));
        }
        for (Eigen::Index o = 0; o < d; ++o) {
            const auto uo = static_cast<std::size_t>(o);
            r.output(i, o) += core::lse_forward(output[uo], h);
            r.ffn_residual_max = std::max(r.ffn_residual_max, core::identity_residual(p.output[uo], h, p.t, p.eps2));
        }
    }
    return r;
}

} // namespace hopfcole::attention
