#include "aft/model.hpp"

#include "aft/rng.hpp"
#include "aft/spectral.hpp"

#include <algorithm>
#include <stdexcept>

namespace aft::model {

using attention::TokenMap;

std::string to_string(HeadKind k) { return k == HeadKind::afca ? "afca" : "avgpool"; }

std::string to_string(Variant v) {
    switch (v) {
        case Variant::aft: return "aft";
        case Variant::baseline_vit: return "baseline_vit";
        default: return "aps_vit";
    }
}

HeadKind head_kind_from_string(const std::string& s) {
    if (s == "afca") return HeadKind::afca;
    if (s == "avgpool") return HeadKind::avgpool;
    throw std::invalid_argument("unknown head kind '" + s + "'");
}

Variant variant_from_string(const std::string& s) {
    if (s == "aft") return Variant::aft;
    if (s == "baseline_vit") return Variant::baseline_vit;
    if (s == "aps_vit") return Variant::aps_vit;
    throw std::invalid_argument("unknown variant '" + s + "'");
}

void validate_config(const ModelConfig& c) {
    if (!spectral::is_power_of_two(c.image_size)) {
        throw std::invalid_argument("config: image_size must be a power of two");
    }
    if (!spectral::is_power_of_two(c.patch_size) || c.patch_size < 2 ||
        c.image_size % c.patch_size != 0) {
        throw std::invalid_argument("config: patch_size must be a power of two dividing image_size");
    }
    if (c.heads == 0 || c.dim % c.heads != 0) {
        throw std::invalid_argument("config: heads must divide dim");
    }
    if (c.in_channels == 0 || c.dim == 0 || c.depth == 0 || c.num_classes == 0) {
        throw std::invalid_argument("config: zero-sized field");
    }
    if (c.ca_depth == 0 && (c.head_kind == HeadKind::afca || c.variant == Variant::aps_vit)) {
        throw std::invalid_argument("config: class-attention head needs ca_depth >= 1");
    }
    layers::validate_spec(c.activation);
}

layers::ActivationSpec pe_activation(const ModelConfig& c) {
    if (c.activation.kind == layers::ActKind::poly) {
        return layers::ActivationSpec::poly_gelu_deg3();
    }
    return layers::ActivationSpec::gelu_default();
}

// ---------------------------------------------------------------------------
// parameter manifest
// ---------------------------------------------------------------------------

namespace {

using Init = ParamInfo::Init;

void add_norm(std::map<std::string, ParamInfo>& m, const std::string& prefix, std::size_t d) {
    m[prefix + ".gamma"] = {{d}, Init::ones};
    m[prefix + ".beta"] = {{d}, Init::zeros};
}

void add_attention(std::map<std::string, ParamInfo>& m, const std::string& prefix, std::size_t d,
                   std::size_t heads, bool with_temperature) {
    m[prefix + ".w_q"] = {{d, d}, Init::normal};
    m[prefix + ".w_k"] = {{d, d}, Init::normal};
    m[prefix + ".w_v"] = {{d, d}, Init::normal};
    m[prefix + ".w_proj"] = {{d, d}, Init::normal};
    m[prefix + ".proj_bias"] = {{d}, Init::zeros};
    if (with_temperature) {
        m[prefix + ".temperature"] = {{heads}, Init::ones};
    }
}

void add_mlp(std::map<std::string, ParamInfo>& m, const std::string& prefix, std::size_t d) {
    m[prefix + ".w1"] = {{d, 4 * d}, Init::normal};
    m[prefix + ".b1"] = {{4 * d}, Init::zeros};
    m[prefix + ".w2"] = {{4 * d, d}, Init::normal};
    m[prefix + ".b2"] = {{d}, Init::zeros};
}

void add_lpi(std::map<std::string, ParamInfo>& m, const std::string& prefix, std::size_t d) {
    m[prefix + ".conv1.weight"] = {{d, 3, 3}, Init::normal};
    m[prefix + ".conv1.bias"] = {{d}, Init::zeros};
    m[prefix + ".norm.scale"] = {{d}, Init::ones};
    m[prefix + ".norm.bias"] = {{d}, Init::zeros};
    m[prefix + ".conv2.weight"] = {{d, 3, 3}, Init::normal};
    m[prefix + ".conv2.bias"] = {{d}, Init::zeros};
}

} // namespace

std::map<std::string, ParamInfo> parameter_manifest(const ModelConfig& c) {
    validate_config(c);
    std::map<std::string, ParamInfo> m;
    const std::size_t d = c.dim;

    if (c.variant == Variant::baseline_vit) {
        const std::size_t n_tokens = (c.image_size / c.patch_size) * (c.image_size / c.patch_size);
        m["pe.proj.weight"] = {{c.in_channels * c.patch_size * c.patch_size, d}, Init::normal};
        m["pe.proj.bias"] = {{d}, Init::zeros};
        m["pe.cls_token"] = {{d}, Init::normal};
        m["pe.pos_embed"] = {{n_tokens + 1, d}, Init::normal};
        for (std::size_t l = 0; l < c.depth; ++l) {
            const std::string b = "blocks." + std::to_string(l);
            add_norm(m, b + ".norm1", d);
            add_attention(m, b + ".sa", d, c.heads, false);
            add_norm(m, b + ".norm2", d);
            add_mlp(m, b + ".mlp", d);
        }
        add_norm(m, "norm", d);
        m["head.classifier.weight"] = {{d, c.num_classes}, Init::normal};
        m["head.classifier.bias"] = {{c.num_classes}, Init::zeros};
        return m;
    }

    // staged convolutional patch embedding (aft and aps_vit)
    auto plan = layers::patch_embed_schedule(c.patch_size, d);
    std::size_t in_ch = c.in_channels;
    for (std::size_t i = 0; i < plan.size(); ++i) {
        const std::string s = "pe.stage" + std::to_string(i);
        m[s + ".conv.weight"] = {{plan[i].first, in_ch, plan[i].second, plan[i].second}, Init::normal};
        m[s + ".conv.bias"] = {{plan[i].first}, Init::zeros};
        m[s + ".norm.scale"] = {{plan[i].first}, Init::ones};
        m[s + ".norm.bias"] = {{plan[i].first}, Init::zeros};
        in_ch = plan[i].first;
    }
    for (std::size_t l = 0; l < c.depth; ++l) {
        const std::string b = "blocks." + std::to_string(l);
        add_norm(m, b + ".norm1", d);
        add_attention(m, b + ".xca", d, c.heads, true);
        add_norm(m, b + ".norm2", d);
        add_lpi(m, b + ".lpi", d);
        add_norm(m, b + ".norm3", d);
        add_mlp(m, b + ".mlp", d);
    }
    const bool has_ca_head = c.variant == Variant::aps_vit || c.head_kind == HeadKind::afca;
    if (has_ca_head) {
        m["head.cls_token"] = {{d}, Init::normal};
        for (std::size_t j = 0; j < c.ca_depth; ++j) {
            const std::string b = "head.ca" + std::to_string(j);
            add_norm(m, b + ".norm1", d);
            if (c.variant == Variant::aps_vit) {
                add_attention(m, b + ".sa", d, c.heads, false);
            } else {
                add_attention(m, b + ".xca", d, c.heads, true);
            }
            add_norm(m, b + ".norm2", d);
            add_mlp(m, b + ".mlp", d);
        }
    }
    m["head.classifier.weight"] = {{d, c.num_classes}, Init::normal};
    m["head.classifier.bias"] = {{c.num_classes}, Init::zeros};
    return m;
}

ModelWeights init_weights(const ModelConfig& c, std::uint64_t seed) {
    auto manifest = parameter_manifest(c);
    GaussianStream stream(seed);
    ModelWeights weights;
    for (const auto& [path, info] : manifest) {
        Tensor t(info.shape);
        switch (info.init) {
            case Init::normal:
                for (std::size_t i = 0; i < t.size(); ++i) {
                    t[i] = 0.02 * stream.next();
                }
                break;
            case Init::ones:
                std::fill(t.buffer().begin(), t.buffer().end(), 1.0);
                break;
            case Init::zeros:
                break;
        }
        weights.emplace(path, std::move(t));
    }
    return weights;
}

void validate_weights(const ModelConfig& c, const ModelWeights& w) {
    auto manifest = parameter_manifest(c);
    for (const auto& [path, info] : manifest) {
        auto it = w.find(path);
        if (it == w.end()) {
            throw std::invalid_argument("weights: missing tensor '" + path + "'");
        }
        if (it->second.shape() != info.shape) {
            throw std::invalid_argument("weights: tensor '" + path + "' has shape " +
                                        shape_str(it->second.shape()) + ", config wants " +
                                        shape_str(info.shape));
        }
    }
    for (const auto& [path, t] : w) {
        if (manifest.find(path) == manifest.end()) {
            throw std::invalid_argument("weights: unexpected tensor '" + path + "'");
        }
    }
}

// ---------------------------------------------------------------------------
// forward
// ---------------------------------------------------------------------------

namespace {

const Tensor& param(const ModelWeights& w, const std::string& path) {
    auto it = w.find(path);
    if (it == w.end()) {
        throw std::invalid_argument("weights: missing tensor '" + path + "'");
    }
    return it->second;
}

layers::NormParams norm_params(const ModelWeights& w, const std::string& prefix) {
    return {param(w, prefix + ".gamma"), param(w, prefix + ".beta"), 1e-6};
}

attention::AttentionParams attn_params(const ModelWeights& w, const std::string& prefix,
                                       std::size_t heads, bool with_temperature) {
    attention::AttentionParams p;
    p.w_q = param(w, prefix + ".w_q");
    p.w_k = param(w, prefix + ".w_k");
    p.w_v = param(w, prefix + ".w_v");
    p.w_proj = param(w, prefix + ".w_proj");
    p.proj_bias = param(w, prefix + ".proj_bias");
    p.heads = heads;
    p.temperature = with_temperature ? param(w, prefix + ".temperature") : Tensor::full({heads}, 1.0);
    return p;
}

layers::MlpParams mlp_params(const ModelWeights& w, const std::string& prefix) {
    return {param(w, prefix + ".w1"), param(w, prefix + ".b1"), param(w, prefix + ".w2"),
            param(w, prefix + ".b2")};
}

layers::LpiParams lpi_params(const ModelWeights& w, const std::string& prefix) {
    return {param(w, prefix + ".conv1.weight"),
            param(w, prefix + ".conv1.bias"),
            {param(w, prefix + ".norm.scale"), param(w, prefix + ".norm.bias")},
            param(w, prefix + ".conv2.weight"),
            param(w, prefix + ".conv2.bias")};
}

Tensor classify(const ModelWeights& w, const Tensor& feature) {
    Tensor row({1, feature.extent(0)});
    std::copy(feature.buffer().begin(), feature.buffer().end(), row.buffer().begin());
    Tensor logits = add_row_bias(matmul(row, param(w, "head.classifier.weight")),
                                 param(w, "head.classifier.bias"));
    return Tensor({logits.extent(1)}, std::move(logits.buffer()));
}

Tensor mlp_row(const Tensor& v, const layers::MlpParams& p) {
    Tensor row({1, v.extent(0)});
    std::copy(v.buffer().begin(), v.buffer().end(), row.buffer().begin());
    Tensor hidden = layers::gelu_pointwise(add_row_bias(matmul(row, p.w1), p.b1));
    Tensor out = add_row_bias(matmul(hidden, p.w2), p.b2);
    return Tensor({out.extent(1)}, std::move(out.buffer()));
}

void record(ForwardTrace* trace, const std::string& name, const TokenMap& snapshot) {
    if (trace != nullptr) {
        trace->entries.push_back({name, snapshot});
    }
}

std::vector<layers::PatchEmbedStage> gather_stages(const ModelConfig& c, const ModelWeights& w) {
    auto plan = layers::patch_embed_schedule(c.patch_size, c.dim);
    std::vector<layers::PatchEmbedStage> stages;
    stages.reserve(plan.size());
    for (std::size_t i = 0; i < plan.size(); ++i) {
        const std::string s = "pe.stage" + std::to_string(i);
        stages.push_back({param(w, s + ".conv.weight"),
                          param(w, s + ".conv.bias"),
                          {param(w, s + ".norm.scale"), param(w, s + ".norm.bias")}});
    }
    return stages;
}

Tensor concat_cls(const Tensor& tokens, const Tensor& cls) {
    Tensor seq({tokens.extent(0) + 1, tokens.extent(1)});
    std::copy(tokens.buffer().begin(), tokens.buffer().end(), seq.buffer().begin());
    std::copy(cls.buffer().begin(), cls.buffer().end(),
              seq.buffer().begin() + tokens.size());
    return seq;
}

Tensor forward_tokens_variant(const Tensor& img, const ModelConfig& c, const ModelWeights& w,
                              ForwardTrace* trace) {
    const bool alias_free = c.variant == Variant::aft;
    const layers::ActivationSpec block_act =
        alias_free ? c.activation : layers::ActivationSpec::gelu_default();
    const auto down = alias_free ? layers::DownsampleKind::alias_free : layers::DownsampleKind::aps;

    std::vector<std::pair<std::string, Tensor>> stage_trace;
    TokenMap x = layers::patch_embed(img, gather_stages(c, w), pe_activation(c), down, alias_free,
                                     trace != nullptr ? &stage_trace : nullptr);
    if (trace != nullptr) {
        for (auto& [name, map] : stage_trace) {
            record(trace, name, attention::token_map_from_chw(map));
        }
    }

    auto norm = [&](const TokenMap& t, const std::string& prefix) {
        return alias_free ? layers::af_layernorm(t, norm_params(w, prefix))
                          : layers::layernorm_per_token(t, norm_params(w, prefix));
    };

    for (std::size_t l = 0; l < c.depth; ++l) {
        const std::string b = "blocks." + std::to_string(l);
        x.tokens = add(x.tokens,
                       attention::xca_apply(norm(x, b + ".norm1"),
                                            attn_params(w, b + ".xca", c.heads, true))
                           .tokens);
        record(trace, b + ".xca", x);
        x.tokens = add(x.tokens, layers::lpi_apply(norm(x, b + ".norm2"), lpi_params(w, b + ".lpi"),
                                                   block_act, alias_free)
                                     .tokens);
        record(trace, b + ".lpi", x);
        x.tokens = add(x.tokens, layers::mlp_apply(norm(x, b + ".norm3"), mlp_params(w, b + ".mlp"),
                                                   block_act, alias_free)
                                     .tokens);
        record(trace, b + ".mlp", x);
    }

    if (alias_free && c.head_kind == HeadKind::avgpool) {
        return classify(w, layers::avgpool_head(x));
    }

    // class-attention head: XCA over [patches; cls] for the alias-free model,
    // standard single-query attention for the APS variant
    Tensor cls = param(w, "head.cls_token");
    for (std::size_t j = 0; j < c.ca_depth; ++j) {
        const std::string b = "head.ca" + std::to_string(j);
        Tensor normed = alias_free
                            ? layers::af_layernorm_rows(concat_cls(x.tokens, cls),
                                                        norm_params(w, b + ".norm1"))
                            : layers::layernorm_per_token_rows(concat_cls(x.tokens, cls),
                                                               norm_params(w, b + ".norm1"));
        Tensor normed_patches({x.count(), c.dim});
        std::copy(normed.buffer().begin(), normed.buffer().begin() + x.tokens.size(),
                  normed_patches.buffer().begin());
        Tensor normed_cls({c.dim});
        std::copy(normed.buffer().begin() + x.tokens.size(), normed.buffer().end(),
                  normed_cls.buffer().begin());
        TokenMap normed_map{std::move(normed_patches), x.ht, x.wt};

        if (alias_free) {
            auto [patch_delta, cls_delta] = attention::class_attention_apply(
                normed_map, normed_cls, attn_params(w, b + ".xca", c.heads, true));
            x.tokens = add(x.tokens, patch_delta.tokens);
            cls = add(cls, cls_delta);
            record(trace, b, x);
        } else {
            Tensor cls_delta = attention::standard_class_attention_apply(
                normed_map, normed_cls, attn_params(w, b + ".sa", c.heads, false));
            cls = add(cls, cls_delta);
        }

        Tensor cls_matrix({1, c.dim});
        std::copy(cls.buffer().begin(), cls.buffer().end(), cls_matrix.buffer().begin());
        Tensor cls_normed = alias_free
                                ? layers::af_layernorm_rows(cls_matrix, norm_params(w, b + ".norm2"))
                                : layers::layernorm_per_token_rows(cls_matrix,
                                                                   norm_params(w, b + ".norm2"));
        Tensor cls_vec({c.dim}, std::move(cls_normed.buffer()));
        cls = add(cls, mlp_row(cls_vec, mlp_params(w, b + ".mlp")));
    }
    return classify(w, cls);
}

Tensor forward_baseline(const Tensor& img, const ModelConfig& c, const ModelWeights& w,
                        ForwardTrace* trace) {
    const std::size_t p = c.patch_size;
    const std::size_t grid = c.image_size / p;
    const std::size_t n = grid * grid;
    const std::size_t d = c.dim;

    // stride-p patchify as flatten + linear projection
    Tensor patches({n, c.in_channels * p * p});
    for (std::size_t py = 0; py < grid; ++py) {
        for (std::size_t px = 0; px < grid; ++px) {
            std::size_t col = 0;
            for (std::size_t ch = 0; ch < c.in_channels; ++ch) {
                for (std::size_t y = 0; y < p; ++y) {
                    for (std::size_t x = 0; x < p; ++x) {
                        patches(py * grid + px, col++) = img(ch, py * p + y, px * p + x);
                    }
                }
            }
        }
    }
    Tensor tokens = add_row_bias(matmul(patches, param(w, "pe.proj.weight")), param(w, "pe.proj.bias"));

    Tensor seq({n + 1, d});
    const Tensor& cls = param(w, "pe.cls_token");
    std::copy(cls.buffer().begin(), cls.buffer().end(), seq.buffer().begin());
    std::copy(tokens.buffer().begin(), tokens.buffer().end(), seq.buffer().begin() + d);
    seq = add(seq, param(w, "pe.pos_embed"));

    auto patch_rows = [&](const Tensor& s) {
        Tensor rows({n, d});
        std::copy(s.buffer().begin() + d, s.buffer().end(), rows.buffer().begin());
        return TokenMap{std::move(rows), grid, grid};
    };
    record(trace, "pe", patch_rows(seq));

    for (std::size_t l = 0; l < c.depth; ++l) {
        const std::string b = "blocks." + std::to_string(l);
        TokenMap normed{layers::layernorm_per_token_rows(seq, norm_params(w, b + ".norm1")), n + 1, 1};
        seq = add(seq, attention::sa_apply(normed, attn_params(w, b + ".sa", c.heads, false)).tokens);
        Tensor normed2 = layers::layernorm_per_token_rows(seq, norm_params(w, b + ".norm2"));
        Tensor hidden = layers::gelu_pointwise(
            add_row_bias(matmul(normed2, param(w, b + ".mlp.w1")), param(w, b + ".mlp.b1")));
        seq = add(seq, add_row_bias(matmul(hidden, param(w, b + ".mlp.w2")), param(w, b + ".mlp.b2")));
        record(trace, b, patch_rows(seq));
    }

    Tensor final_norm = layers::layernorm_per_token_rows(seq, norm_params(w, "norm"));
    Tensor cls_out({d});
    std::copy(final_norm.buffer().begin(), final_norm.buffer().begin() + d, cls_out.buffer().begin());
    return classify(w, cls_out);
}

} // namespace

Tensor forward(const Tensor& img, const ModelConfig& c, const ModelWeights& w,
               ForwardTrace* trace) {
    validate_config(c);
    validate_weights(c, w);
    if (img.rank() != 3 || img.extent(0) != c.in_channels || img.extent(1) != c.image_size ||
        img.extent(2) != c.image_size) {
        throw std::invalid_argument("forward: image shape " + shape_str(img.shape()) +
                                    " does not match config");
    }
    Tensor logits = c.variant == Variant::baseline_vit ? forward_baseline(img, c, w, trace)
                                                       : forward_tokens_variant(img, c, w, trace);
    if (trace != nullptr) {
        trace->logits = logits;
    }
    return logits;
}

} // namespace aft::model
