#pragma once

#include "aft/spectral.hpp"
#include "aft/tensor.hpp"

#include <array>
#include <cstddef>
#include <functional>
#include <utility>

namespace aft::attention {

// N x D token matrix with its spatial factorization. Column d is read as one
// ht x wt channel (row-stacked), which is what makes translation of a token
// map meaningful.
struct TokenMap {
    Tensor tokens; // [N x D]
    std::size_t ht = 0;
    std::size_t wt = 0;

    std::size_t count() const { return tokens.extent(0); }
    std::size_t dim() const { return tokens.extent(1); }
};

TokenMap token_map_from_chw(const Tensor& chw);
Tensor token_map_to_chw(const TokenMap& x);

// Fractional translation of the token grid (shift in token units).
TokenMap shift_token_map(const TokenMap& x, spectral::ShiftVector d);
TokenMap roll_token_map(const TokenMap& x, long long ky, long long kx);

struct AttentionParams {
    Tensor w_q;         // [D x D]
    Tensor w_k;         // [D x D]
    Tensor w_v;         // [D x D]
    Tensor w_proj;      // [D x D]
    Tensor proj_bias;   // [D]
    Tensor temperature; // [h], strictly positive
    std::size_t heads = 1;
};

void validate_params(const AttentionParams& p, std::size_t dim);

// Q = X W_q, K = X W_k, V = X W_v
std::array<Tensor, 3> project_qkv(const TokenMap& x, const AttentionParams& p);

using MatrixFn = std::function<Tensor(const Tensor&)>;

// Softmax-free attention Q * f(K^T V), then output projection + bias.
TokenMap sea_apply(const TokenMap& x, const AttentionParams& p, const MatrixFn& f);

// Cross-covariance attention: per head, columns of Q and K are l2-normalized
// over the tokens, A = softmax_rows(K^T Q / tau), head output = V A.
TokenMap xca_apply(const TokenMap& x, const AttentionParams& p);

// Standard multi-head softmax self-attention (the non-equivariant baseline).
TokenMap sa_apply(const TokenMap& x, const AttentionParams& p);

// XCA over the (N+1)-row sequence [X; cls^T]; returns updated patch rows and
// the updated class row separately (both after output projection + bias).
std::pair<TokenMap, Tensor> class_attention_apply(const TokenMap& x, const Tensor& cls,
                                                  const AttentionParams& p);

// Standard class attention: softmax attention with the class row as the only
// query over the (N+1)-row sequence; returns the updated class row.
Tensor standard_class_attention_apply(const TokenMap& x, const Tensor& cls,
                                      const AttentionParams& p);

} // namespace aft::attention
