#include "doctest.h"
#include "hopfcole/attention.hpp"

#include <cmath>

using namespace hopfcole;
using namespace hopfcole::attention;

namespace {

using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

// extended-precision reference: plain exp/normalize, no shift needed at these scales
Matrix attention_ld(const Matrix& q, const Matrix& k, const Matrix& v, double eps)
{
    const MatL ql = q.cast<long double>(), kl = k.cast<long double>(), vl = v.cast<long double>();
    MatL out = MatL::Zero(q.rows(), v.cols());
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
        long double s = 0;
        std::vector<long double> w(static_cast<std::size_t>(k.rows()));
        for (Eigen::Index j = 0; j < k.rows(); ++j) {
            w[static_cast<std::size_t>(j)] = std::exp(ql.row(i).dot(kl.row(j)) / eps);
            s += w[static_cast<std::size_t>(j)];
        }
        for (Eigen::Index j = 0; j < k.rows(); ++j) out.row(i) += (w[static_cast<std::size_t>(j)] / s) * vl.row(j);
    }
    return out.cast<double>();
}

} // namespace

TEST_CASE("softmax attention basics")
{
    CounterRng rng(21);
    const Matrix q = normal_matrix(rng, 5, 4);
    const Matrix v1 = normal_matrix(rng, 1, 3);
    const Matrix one = softmax_attention(AttentionBatch(q, normal_matrix(rng, 1, 4), v1));
    for (Eigen::Index i = 0; i < 5; ++i) CHECK(one.row(i) == v1.row(0));
    CHECK(lse_grad_attention(AttentionBatch(q, normal_matrix(rng, 1, 4), v1)).row(2) == v1.row(0));

    // zero keys give equal logits
    const Matrix v = normal_matrix(rng, 6, 3);
    const Matrix eq = softmax_attention(AttentionBatch(q, Matrix::Zero(6, 4), v));
    for (Eigen::Index i = 0; i < 5; ++i)
        CHECK((eq.row(i) - v.colwise().mean()).cwiseAbs().maxCoeff() <= 1e-15);

    AttentionBatch dflt(q, q, q);
    CHECK(dflt.eps == 2.0);
    CHECK_THROWS_AS(AttentionBatch(q, Matrix::Zero(3, 5), Matrix::Zero(3, 1)), Error);
    CHECK_THROWS_AS(AttentionBatch(q, Matrix::Zero(3, 4), Matrix::Zero(2, 1)), Error);
    CHECK_THROWS_AS(AttentionBatch(q, q, q, -1.0), Error);
}

TEST_CASE("gradient form equals softmax attention")
{
    CounterRng rng(22);
    for (Eigen::Index d : {4, 8, 16, 32, 64}) {
        double worst = 0.0, worst_ref = 0.0;
        for (int trial = 0; trial < 500; ++trial) {
            const Eigen::Index nk = 2 + trial % 15;
            AttentionBatch b(normal_matrix(rng, 4, d), normal_matrix(rng, nk, d), normal_matrix(rng, nk, 3));
            const Matrix a = softmax_attention(b);
            const Matrix g = lse_grad_attention(b);
            worst = std::max(worst, (a - g).cwiseAbs().maxCoeff());
            worst_ref = std::max(worst_ref, (a - attention_ld(b.q, b.k, b.v, b.eps)).cwiseAbs().maxCoeff());
            // convex hull of the value rows, per column
            for (Eigen::Index c = 0; c < 3; ++c) {
                CHECK(a.col(c).minCoeff() >= b.v.col(c).minCoeff() - 1e-15);
                CHECK(a.col(c).maxCoeff() <= b.v.col(c).maxCoeff() + 1e-15);
            }
        }
        MESSAGE("d=" << d << " max |softmax - lse_grad| = " << worst);
        CHECK(worst <= 1e-15);
        CHECK(worst_ref <= 1e-14);
    }
}

TEST_CASE("L2 attention partition is the Hopf-Cole solution")
{
    Matrix q(1, 2), k(1, 2), v(1, 2);
    q << 0.5, -1.0;
    k << 1.5, 0.0;
    v << 3.0, 4.0;
    const L2Attention s = l2_attention(q, k, v, 0.7, 0.2);
    CHECK(s.output.row(0) == v.row(0));
    CHECK(s.log_partition[0] == doctest::Approx(-2.0 / (4 * 0.2 * 0.7)).epsilon(1e-15));

    CounterRng rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Index d = 1 + trial % 4;
        const Matrix keys = normal_matrix(rng, 7, d);
        const Matrix qs = normal_matrix(rng, 3, d);
        const double t = rng.uniform(0.2, 2.0), eps = rng.uniform(0.05, 2.0);
        const L2Attention r = l2_attention(qs, keys, normal_matrix(rng, 7, 2), t, eps);
        const core::SupportSet support(keys, Vector::Zero(7));
        for (Eigen::Index i = 0; i < 3; ++i) {
            const double expect = -core::hopf_cole_solution(support, qs.row(i).transpose(), t, eps) / eps;
            CHECK(std::abs(r.log_partition[i] - expect) <= 1e-12 * std::max(1.0, std::abs(expect)));
        }
    }

    // query on a key, others far: the Gibbs weight concentrates
    Matrix keys(3, 2), vals(3, 1);
    keys << 0, 0, 10, 0, 0, 10;
    vals << 1, 2, 3;
    const L2Attention c = l2_attention(keys.topRows(1), keys, vals, 1.0, 0.5);
    CHECK(c.output(0, 0) == doctest::Approx(1.0).epsilon(1e-20));
}

TEST_CASE("hard attention is the small-eps limit")
{
    Matrix q(2, 1), k(3, 1), v(3, 2);
    q << 1.0, -1.0;
    k << -2.0, 2.0, 2.0;
    v << 1, 2, 3, 4, 5, 6;
    const HardAttention h = hard_attention(q, k, v);
    CHECK(h.index == std::vector<Eigen::Index>{1, 0}); // tie between keys 1 and 2 picks 1
    CHECK(hard_attention(q, k.topRows(1), v.topRows(1)).output.row(1) == v.row(0));

    CounterRng rng(24);
    int compared = 0;
    while (compared < 200) {
        const Matrix qs = normal_matrix(rng, 1, 3) * 3.0;
        const Matrix ks = normal_matrix(rng, 6, 3);
        const Vector z = ks * qs.row(0).transpose();
        Vector sorted = z;
        std::sort(sorted.data(), sorted.data() + sorted.size());
        if (sorted[5] - sorted[4] < 1.0) continue;
        const Matrix vs = normal_matrix(rng, 6, 2);
        const Matrix soft = softmax_attention(AttentionBatch(qs, ks, vs, 1e-6));
        CHECK((soft - hard_attention(qs, ks, vs).output).cwiseAbs().maxCoeff() <= 1e-4);
        ++compared;
    }
}

TEST_CASE("attention sink bound")
{
    Matrix q(1, 1), k(2, 1);
    q << 1.0;
    k << 0.5, 0.5;
    const SinkBound tie = sink_bound(q, k, 0.3, 0);
    CHECK(tie.gap == 0.0);
    CHECK(tie.mass_deficit == doctest::Approx(0.5));
    CHECK(tie.bound == 1.0);

    // top logit 20 eps above eleven equal runners-up: deficit = 11 e^-20 / (1 + 11 e^-20)
    Matrix k12 = Matrix::Zero(12, 1);
    k12(3, 0) = 20.0 * 0.1;
    const SinkBound s = sink_bound(q, k12, 0.1, 0);
    CHECK(s.gap == doctest::Approx(2.0));
    CHECK(s.bound == doctest::Approx(11 * std::exp(-20.0)).epsilon(1e-12));
    CHECK(s.mass_deficit == doctest::Approx(11 * std::exp(-20.0) / (1 + 11 * std::exp(-20.0))).epsilon(1e-12));
    CHECK(s.mass_deficit <= s.bound);

    CounterRng rng(25);
    int violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const Eigen::Index nk = 2 + trial % 20;
        const Matrix qs = normal_matrix(rng, 2, 4);
        const SinkBound r = sink_bound(qs, normal_matrix(rng, nk, 4), rng.uniform(0.05, 3.0), trial % 2);
        if (r.mass_deficit > r.bound * (1 + 1e-12)) ++violations;
    }
    CHECK(violations == 0);
    CHECK_THROWS_AS(sink_bound(q, k.topRows(1), 0.1, 0), Error);
}

TEST_CASE("positional shifts")
{
    CounterRng rng(26);
    const Matrix q = normal_matrix(rng, 5, 6);
    const Matrix k = normal_matrix(rng, 7, 6);
    CHECK(positional_shift_check(q, k, Matrix::Zero(7, 6), 0.5) == 0.0);
    // sinusoidal encodings, entries in [-1, 1], default temperature sqrt(d)
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        Matrix pe(7, 6);
        const double base = rng.uniform(100.0, 10000.0);
        for (Eigen::Index i = 0; i < 7; ++i)
            for (Eigen::Index m = 0; m < 3; ++m) {
                const double w = std::pow(base, -2.0 * m / 6.0);
                pe(i, 2 * m) = std::sin(i * w);
                pe(i, 2 * m + 1) = std::cos(i * w);
            }
        worst = std::max(worst, positional_shift_check(normal_matrix(rng, 5, 6), normal_matrix(rng, 7, 6), pe, std::sqrt(6.0)));
    }
    MESSAGE("positional decomposition max deviation " << worst);
    CHECK(worst <= 1e-14);
    CHECK_THROWS_AS(positional_shift_check(q, k, Matrix::Zero(5, 6), 1.0), Error);

    std::vector<double> positions;
    for (int p = 0; p < 64; ++p) positions.push_back(p);
    CHECK(rotary_norm_check(q, positions) <= 1e-14);
    CHECK(rotary_norm_check(normal_matrix(rng, 3, 5), positions) <= 1e-14);
    CHECK(rotary_matrix(4, 0.0).isIdentity(0.0));
}

TEST_CASE("layer norm")
{
    Matrix x(3, 4);
    x << 0, 0, 0, 0, 2, 2, 2, 2, 1, 2, 3, 4;
    const Matrix n = layer_norm(x);
    CHECK(n.row(0).isZero(0.0));
    CHECK(n.row(1).isZero(0.0));
    CHECK(std::abs(n.row(2).mean()) <= 1e-15);
    // var 1.25, floor 1e-5
    CHECK(n(2, 3) == doctest::Approx(1.5 / std::sqrt(1.25 + 1e-5)).epsilon(1e-15));
}

TEST_CASE("LSE transformer block")
{
    CounterRng rng(27);
    const Matrix x = normal_matrix(rng, 16, 8);
    for (double eps : {0.05, 0.1, 0.2, 0.5, 1.0}) {
        const BlockParams p = BlockParams::random(8, 8, 32, eps, eps, 5);
        const BlockReport r = transformer_block_check(x, p);
        CHECK(r.ffn_networks == 16);
        CHECK(r.ffn_residual_max <= 1e-12);
        CHECK(r.attention_error <= 1e-15);
        CHECK(r.output.allFinite());
    }
    const BlockReport z = transformer_block_check(Matrix::Zero(4, 8), BlockParams::random(8, 4, 32, 0.1, 0.1, 6));
    CHECK(z.output.allFinite());

    const BlockParams p16 = BlockParams::random(16, 4, 8, 0.5, 0.5, 7);
    CHECK(transformer_block_check(normal_matrix(rng, 10, 16), p16).attention_error <= 1e-15);
}
