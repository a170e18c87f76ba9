#pragma once

// Attention as a Gibbs average: softmax(q.k/eps) are the gradients of the
// log-sum-exp of the logits, and L2 attention's partition function is the
// exponential of a discrete Hopf-Cole solution with g = 0 on the keys.

#include "hopfcole/core.hpp"

#include <vector>

namespace hopfcole::attention {

struct AttentionBatch {
    Matrix q; ///< n_q x d
    Matrix k; ///< n_k x d
    Matrix v; ///< n_k x d_v
    double eps;

    /// Temperature defaults to sqrt(d).
    AttentionBatch(Matrix q, Matrix k, Matrix v);
    AttentionBatch(Matrix q, Matrix k, Matrix v, double eps);
};

/// Row-wise softmax(Q K^T / eps) V.
Matrix softmax_attention(const AttentionBatch& batch);

/// Same quantity through the reverse-mode adjoint of eps * LSE(z / eps),
/// evaluated query by query. Shares no arithmetic with softmax_attention
/// beyond the exponential.
Matrix lse_grad_attention(const AttentionBatch& batch);

struct L2Attention {
    Matrix output;
    Vector log_partition; ///< log sum_j exp(-|q_i - k_j|^2/(4 eps t))
};

L2Attention l2_attention(const Matrix& q, const Matrix& k, const Matrix& v, double t, double eps);

struct HardAttention {
    Matrix output;
    std::vector<Eigen::Index> index; ///< argmax_j q_i.k_j, lowest index on ties
};

HardAttention hard_attention(const Matrix& q, const Matrix& k, const Matrix& v);

struct SinkBound {
    double gap;          ///< top logit minus runner-up
    double mass_deficit; ///< 1 - pi of the top key, summed from the others
    double bound;        ///< (n_k - 1) exp(-gap/eps)
};

SinkBound sink_bound(const Matrix& q, const Matrix& k, double eps, Eigen::Index query);

/// max over (i, j) of |(q_i + pe_i).(k_j + pe_j)/eps - q_i.k_j/eps - phi(i, j)| with
/// phi(i, j) = (q_i.pe_j + pe_i.k_j + pe_i.pe_j)/eps. pe has max(n_q, n_k) rows.
double positional_shift_check(const Matrix& q, const Matrix& k, const Matrix& pe, double eps);

/// Rotary position map: pairs of coordinates (2m, 2m+1) rotated by pos * base^(-2m/d).
/// An odd trailing coordinate is left alone.
Matrix rotary_matrix(Eigen::Index d, double position, double base = 10000.0);

/// max over positions of ||R_p q|| - ||q|| and of ||R_p^T R_p - I||.
double rotary_norm_check(const Matrix& q, const std::vector<double>& positions);

constexpr double kLayerNormFloor = 1e-5;

/// Per-row (x - mean)/sqrt(var + 1e-5), unit scale, zero offset.
Matrix layer_norm(const Matrix& x);

struct BlockParams {
    Matrix w_q, w_k, w_v; ///< d x d
    double attn_eps;
    /// Hidden LSE layer: one network per hidden unit over R^d, then one per
    /// output coordinate over the hidden activations.
    std::vector<core::SupportSet> hidden;
    std::vector<core::SupportSet> output;
    double t;
    double eps1;
    double eps2;

    /// Gaussian projections scaled by 1/sqrt(d), supports of n_atoms atoms.
    static BlockParams random(Eigen::Index d, Eigen::Index hidden_width, Eigen::Index n_atoms, double eps1,
                              double eps2, std::uint64_t seed);
};

struct BlockReport {
    Matrix output;
    double attention_error;   ///< max |softmax - lse_grad| on the LayerNorm'd inputs
    double ffn_residual_max;  ///< worst identity_residual across every FFN network and token
    Eigen::Index ffn_networks;
};

/// Pre-norm block X + Attn(LN X), then Z2 + LSE-FFN(LN Z2).
BlockReport transformer_block_check(const Matrix& x, const BlockParams& params);

} // namespace hopfcole::attention
