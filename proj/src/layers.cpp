#include "aft/layers.hpp"

#include "aft/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aft::layers {

using attention::TokenMap;

ActivationSpec ActivationSpec::gelu_default() { return {ActKind::gelu, {}, 2}; }

// Continuous least-squares fits of GELU over [-3,3]; the offline quadrature
// oracle lives in the test suite and pins these digits.
ActivationSpec ActivationSpec::poly_gelu_deg2() {
    return {ActKind::poly, {0.14488563202261564, 0.5, 0.17406569826928219}, 2};
}

// The cubic coefficient of the [-3,3] fit is exactly zero (the odd part of
// GELU is x/2), so the effective degree is 2 and up_factor 2 already keeps
// the activation alias-free. A genuinely cubic coefficient set needs 4.
ActivationSpec ActivationSpec::poly_gelu_deg3() {
    return {ActKind::poly, {0.14488563202261564, 0.5, 0.17406569826928219, 0.0}, 2};
}

std::size_t poly_degree(const ActivationSpec& spec) {
    std::size_t deg = 0;
    for (std::size_t i = 0; i < spec.coefficients.size(); ++i) {
        if (spec.coefficients[i] != 0.0) {
            deg = i;
        }
    }
    return deg;
}

void validate_spec(const ActivationSpec& spec) {
    if (spec.kind == ActKind::poly) {
        if (spec.coefficients.empty() || spec.coefficients.size() > 4) {
            throw std::invalid_argument("activation: polynomial must have degree <= 3, got " +
                                        std::to_string(spec.coefficients.size()) + " coefficients");
        }
        if (spec.up_factor < std::max<std::size_t>(poly_degree(spec), 1)) {
            throw std::invalid_argument("activation: up_factor " + std::to_string(spec.up_factor) +
                                        " below polynomial degree " + std::to_string(poly_degree(spec)));
        }
    } else {
        if (spec.up_factor < 2) {
            throw std::invalid_argument("activation: GELU needs up_factor >= 2, got " +
                                        std::to_string(spec.up_factor));
        }
    }
    if (spec.up_factor > 1 && !spectral::is_power_of_two(spec.up_factor)) {
        throw std::invalid_argument("activation: up_factor must be a power of two, got " +
                                    std::to_string(spec.up_factor));
    }
}

Tensor af_layernorm_rows(const Tensor& rows, const NormParams& p) {
    const std::size_t n = rows.extent(0);
    const std::size_t d = rows.extent(1);
    if (p.gamma.extent(0) != d || p.beta.extent(0) != d) {
        throw std::invalid_argument("af_layernorm: affine shape mismatch vs dim " + std::to_string(d));
    }
    std::vector<double> mu(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            acc += rows(i, j);
        }
        mu[i] = acc / static_cast<double>(d);
    }
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            const double c = rows(i, j) - mu[i];
            var += c * c;
        }
    }
    var /= static_cast<double>(n * d);
    const double inv = 1.0 / std::sqrt(var + p.eps);
    Tensor out({n, d});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            out(i, j) = p.gamma[j] * (rows(i, j) - mu[i]) * inv + p.beta[j];
        }
    }
    return out;
}

Tensor layernorm_per_token_rows(const Tensor& rows, const NormParams& p) {
    const std::size_t n = rows.extent(0);
    const std::size_t d = rows.extent(1);
    if (p.gamma.extent(0) != d || p.beta.extent(0) != d) {
        throw std::invalid_argument("layernorm: affine shape mismatch vs dim " + std::to_string(d));
    }
    Tensor out({n, d});
    for (std::size_t i = 0; i < n; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            mu += rows(i, j);
        }
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double c = rows(i, j) - mu;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + p.eps);
        for (std::size_t j = 0; j < d; ++j) {
            out(i, j) = p.gamma[j] * (rows(i, j) - mu) * inv + p.beta[j];
        }
    }
    return out;
}

TokenMap af_layernorm(const TokenMap& x, const NormParams& p) {
    return TokenMap{af_layernorm_rows(x.tokens, p), x.ht, x.wt};
}

TokenMap layernorm_per_token(const TokenMap& x, const NormParams& p) {
    return TokenMap{layernorm_per_token_rows(x.tokens, p), x.ht, x.wt};
}

double gelu_scalar(double v) {
    return v * 0.5 * (1.0 + std::erf(v / 1.4142135623730951));
}

Tensor gelu_pointwise(const Tensor& x) {
    Tensor out(x.shape());
    const long long n = static_cast<long long>(x.size());
#pragma omp parallel for schedule(static) if (n >= 4096)
    for (long long i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = gelu_scalar(x[static_cast<std::size_t>(i)]);
    }
    return out;
}

Tensor poly_pointwise(const Tensor& x, const std::vector<double>& coefficients) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double acc = 0.0;
        for (std::size_t k = coefficients.size(); k-- > 0;) {
            acc = acc * x[i] + coefficients[k];
        }
        out[i] = acc;
    }
    return out;
}

Tensor apply_pointwise(const Tensor& x, const ActivationSpec& spec) {
    return spec.kind == ActKind::gelu ? gelu_pointwise(x) : poly_pointwise(x, spec.coefficients);
}

Tensor af_activation(const Tensor& x, const ActivationSpec& spec) {
    validate_spec(spec);
    if (spec.up_factor == 1) {
        return apply_pointwise(x, spec); // degree-1 polynomial: no bandwidth expansion
    }
    return spectral::downsample_af(apply_pointwise(spectral::upsample_af(x, spec.up_factor), spec),
                                   spec.up_factor);
}

Tensor affine_norm(const Tensor& x, const AffineNormParams& p) {
    if (x.rank() != 3 || p.scale.extent(0) != x.extent(0) || p.bias.extent(0) != x.extent(0)) {
        throw std::invalid_argument("affine_norm: channel mismatch " + shape_str(x.shape()));
    }
    Tensor out(x.shape());
    const std::size_t hw = x.extent(1) * x.extent(2);
    for (std::size_t c = 0; c < x.extent(0); ++c) {
        for (std::size_t i = 0; i < hw; ++i) {
            out.buffer()[c * hw + i] = x.buffer()[c * hw + i] * p.scale[c] + p.bias[c];
        }
    }
    return out;
}

TokenMap mlp_apply(const TokenMap& x, const MlpParams& p, const ActivationSpec& spec,
                   bool alias_free) {
    Tensor hidden = add_row_bias(matmul(x.tokens, p.w1), p.b1);
    Tensor activated;
    if (alias_free) {
        TokenMap wide{std::move(hidden), x.ht, x.wt};
        activated = attention::token_map_from_chw(
                        af_activation(attention::token_map_to_chw(wide), spec))
                        .tokens;
    } else {
        activated = apply_pointwise(hidden, spec);
    }
    Tensor out = add_row_bias(matmul(activated, p.w2), p.b2);
    return TokenMap{std::move(out), x.ht, x.wt};
}

TokenMap lpi_apply(const TokenMap& x, const LpiParams& p, const ActivationSpec& spec,
                   bool alias_free) {
    Tensor map = attention::token_map_to_chw(x);
    map = conv2d_circular_depthwise(map, p.conv1_w, p.conv1_b);
    map = affine_norm(map, p.norm);
    map = alias_free ? af_activation(map, spec) : apply_pointwise(map, spec);
    map = conv2d_circular_depthwise(map, p.conv2_w, p.conv2_b);
    return attention::token_map_from_chw(map);
}

std::vector<std::pair<std::size_t, std::size_t>> patch_embed_schedule(std::size_t patch_size,
                                                                      std::size_t dim) {
    if (!spectral::is_power_of_two(patch_size) || patch_size < 2) {
        throw std::invalid_argument("patch_embed: patch size must be a power of two >= 2, got " +
                                    std::to_string(patch_size));
    }
    std::size_t stages = 0;
    for (std::size_t p = patch_size; p > 1; p /= 2) {
        ++stages;
    }
    std::vector<std::pair<std::size_t, std::size_t>> plan(stages);
    for (std::size_t i = 0; i < stages; ++i) {
        const std::size_t shift = stages - 1 - i;
        plan[i] = {std::max<std::size_t>(dim >> shift, 1), i == 0 ? 7 : 3};
    }
    return plan;
}

attention::TokenMap patch_embed(const Tensor& img, const std::vector<PatchEmbedStage>& stages,
                                const ActivationSpec& spec, DownsampleKind down,
                                bool alias_free_act,
                                std::vector<std::pair<std::string, Tensor>>* stage_trace) {
    if (img.rank() != 3) {
        throw std::invalid_argument("patch_embed: want [CxHxW], got " + shape_str(img.shape()));
    }
    const std::size_t p = static_cast<std::size_t>(1) << stages.size();
    if (img.extent(1) % p != 0 || img.extent(2) % p != 0) {
        throw std::invalid_argument("patch_embed: patch size " + std::to_string(p) +
                                    " does not divide image " + shape_str(img.shape()));
    }
    Tensor map = img;
    for (std::size_t i = 0; i < stages.size(); ++i) {
        map = conv2d_circular(map, stages[i].conv_w, stages[i].conv_b);
        map = affine_norm(map, stages[i].norm);
        map = alias_free_act ? af_activation(map, spec) : apply_pointwise(map, spec);
        map = down == DownsampleKind::alias_free ? spectral::downsample_af(map, 2)
                                                 : aps_downsample(map, 2);
        if (stage_trace != nullptr) {
            stage_trace->emplace_back("pe.stage" + std::to_string(i), map);
        }
    }
    return attention::token_map_from_chw(map);
}

Tensor aps_downsample(const Tensor& x, std::size_t s) {
    if (x.rank() != 3) {
        throw std::invalid_argument("aps_downsample: want [CxHxW], got " + shape_str(x.shape()));
    }
    if (s < 2 || x.extent(1) % s != 0 || x.extent(2) % s != 0) {
        throw std::invalid_argument("aps_downsample: factor " + std::to_string(s) +
                                    " incompatible with " + shape_str(x.shape()));
    }
    const std::size_t c_extent = x.extent(0);
    const std::size_t nh = x.extent(1) / s;
    const std::size_t nw = x.extent(2) / s;
    std::size_t best_py = 0;
    std::size_t best_px = 0;
    double best_sq = -1.0;
    for (std::size_t py = 0; py < s; ++py) {
        for (std::size_t px = 0; px < s; ++px) {
            double sq = 0.0;
            for (std::size_t c = 0; c < c_extent; ++c) {
                for (std::size_t y = 0; y < nh; ++y) {
                    for (std::size_t xc = 0; xc < nw; ++xc) {
                        const double v = x(c, y * s + py, xc * s + px);
                        sq += v * v;
                    }
                }
            }
            if (sq > best_sq) { // lexicographic scan order breaks ties
                best_sq = sq;
                best_py = py;
                best_px = px;
            }
        }
    }
    Tensor out({c_extent, nh, nw});
    for (std::size_t c = 0; c < c_extent; ++c) {
        for (std::size_t y = 0; y < nh; ++y) {
            for (std::size_t xc = 0; xc < nw; ++xc) {
                out(c, y, xc) = x(c, y * s + best_py, xc * s + best_px);
            }
        }
    }
    return out;
}

Tensor avgpool_head(const TokenMap& x) {
    const std::size_t n = x.count();
    const std::size_t d = x.dim();
    Tensor out({d});
    for (std::size_t j = 0; j < d; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += x.tokens(i, j);
        }
        out[j] = acc / static_cast<double>(n);
    }
    return out;
}

} // namespace aft::layers
