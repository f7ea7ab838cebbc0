#pragma once

#include "aft/attention.hpp"
#include "aft/tensor.hpp"

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace aft::layers {

enum class ActKind { gelu, poly };

// A pointwise nonlinearity together with the resampling factor that keeps it
// alias-free: upsample by up_factor, apply, downsample back.
struct ActivationSpec {
    ActKind kind = ActKind::gelu;
    std::vector<double> coefficients; // poly only, ascending degree
    std::size_t up_factor = 2;

    static ActivationSpec gelu_default();  // GELU, up_factor 2
    static ActivationSpec poly_gelu_deg2(); // least-squares fit of GELU on [-3,3]
    static ActivationSpec poly_gelu_deg3(); // cubic fit (odd part of GELU is x/2, so c3 = 0)
};

void validate_spec(const ActivationSpec& spec);
std::size_t poly_degree(const ActivationSpec& spec);

struct NormParams {
    Tensor gamma; // [D]
    Tensor beta;  // [D]
    double eps = 1e-6;
};

// Frozen per-channel affine standing in for inference-mode batch norm.
struct AffineNormParams {
    Tensor scale; // [C]
    Tensor bias;  // [C]
};

// LayerNorm with per-token mean but a single variance shared by the whole
// map, which is what keeps it translation-equivariant.
attention::TokenMap af_layernorm(const attention::TokenMap& x, const NormParams& p);

// Conventional per-token LayerNorm (baseline and APS variants).
attention::TokenMap layernorm_per_token(const attention::TokenMap& x, const NormParams& p);

// Row-matrix forms for sequences that carry a class row.
Tensor af_layernorm_rows(const Tensor& rows, const NormParams& p);
Tensor layernorm_per_token_rows(const Tensor& rows, const NormParams& p);

// Exact Gaussian-CDF GELU, x * Phi(x); no tanh approximation.
double gelu_scalar(double v);
Tensor gelu_pointwise(const Tensor& x);
Tensor poly_pointwise(const Tensor& x, const std::vector<double>& coefficients);
Tensor apply_pointwise(const Tensor& x, const ActivationSpec& spec);

// upsample -> pointwise nonlinearity -> downsample on a [C x H x W] map.
Tensor af_activation(const Tensor& x, const ActivationSpec& spec);

Tensor affine_norm(const Tensor& x, const AffineNormParams& p); // per-channel scale/bias

struct MlpParams {
    Tensor w1; // [D x 4D]
    Tensor b1; // [4D]
    Tensor w2; // [4D x D]
    Tensor b2; // [D]
};

// linear -> activation on the ht x wt layout -> linear. alias_free selects
// the resampled activation; otherwise the nonlinearity is applied per token.
attention::TokenMap mlp_apply(const attention::TokenMap& x, const MlpParams& p,
                              const ActivationSpec& spec, bool alias_free = true);

struct LpiParams {
    Tensor conv1_w; // [D x 3 x 3] depthwise
    Tensor conv1_b; // [D]
    AffineNormParams norm;
    Tensor conv2_w; // [D x 3 x 3]
    Tensor conv2_b; // [D]
};

// depthwise circular conv -> affine norm -> activation -> depthwise conv.
attention::TokenMap lpi_apply(const attention::TokenMap& x, const LpiParams& p,
                              const ActivationSpec& spec, bool alias_free = true);

struct PatchEmbedStage {
    Tensor conv_w; // [O x C x k x k]
    Tensor conv_b; // [O]
    AffineNormParams norm;
};

enum class DownsampleKind { alias_free, aps };

// (out_channels, kernel_size) per stage: channels double toward dim, first
// stage uses a 7x7 kernel, later stages 3x3.
std::vector<std::pair<std::size_t, std::size_t>> patch_embed_schedule(std::size_t patch_size,
                                                                      std::size_t dim);

// log2(p) stages of stride-1 conv -> affine norm -> activation -> 2x
// downsampling; the result is reshaped to a token map with ht = H/p.
attention::TokenMap patch_embed(const Tensor& img, const std::vector<PatchEmbedStage>& stages,
                                const ActivationSpec& spec, DownsampleKind down,
                                bool alias_free_act,
                                std::vector<std::pair<std::string, Tensor>>* stage_trace = nullptr);

// Polyphase downsampling: keeps the max-l2-norm component of the s^2 grids;
// ties broken by smallest (row-phase, col-phase).
Tensor aps_downsample(const Tensor& x, std::size_t s = 2);

// Mean over the token rows (the DC bin of every channel).
Tensor avgpool_head(const attention::TokenMap& x);

} // namespace aft::layers
