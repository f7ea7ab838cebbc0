#include "aft/attention.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aft::attention {

namespace {

Tensor concat_rows(const Tensor& m, const Tensor& row) {
    const std::size_t n = m.extent(0);
    const std::size_t d = m.extent(1);
    if (row.rank() != 1 || row.extent(0) != d) {
        throw std::invalid_argument("concat_rows: row shape " + shape_str(row.shape()) +
                                    " does not match width " + std::to_string(d));
    }
    Tensor out({n + 1, d});
    std::copy(m.buffer().begin(), m.buffer().end(), out.buffer().begin());
    std::copy(row.buffer().begin(), row.buffer().end(), out.buffer().begin() + n * d);
    return out;
}

Tensor slice_cols(const Tensor& m, std::size_t begin, std::size_t count) {
    Tensor out({m.extent(0), count});
    for (std::size_t i = 0; i < m.extent(0); ++i) {
        for (std::size_t j = 0; j < count; ++j) {
            out(i, j) = m(i, begin + j);
        }
    }
    return out;
}

void paste_cols(Tensor& dst, const Tensor& src, std::size_t begin) {
    for (std::size_t i = 0; i < src.extent(0); ++i) {
        for (std::size_t j = 0; j < src.extent(1); ++j) {
            dst(i, begin + j) = src(i, j);
        }
    }
}

// l2-normalize each column over the rows; guard keeps zero columns at zero
// while staying translation-invariant.
Tensor normalize_cols(const Tensor& m) {
    Tensor out(m.shape());
    for (std::size_t j = 0; j < m.extent(1); ++j) {
        double sq = 0.0;
        for (std::size_t i = 0; i < m.extent(0); ++i) {
            sq += m(i, j) * m(i, j);
        }
        const double inv = 1.0 / std::max(std::sqrt(sq), 1e-12);
        for (std::size_t i = 0; i < m.extent(0); ++i) {
            out(i, j) = m(i, j) * inv;
        }
    }
    return out;
}

// XCA on an arbitrary row count (patch-only or patch+class sequences).
Tensor xca_core(const Tensor& seq, const AttentionParams& p) {
    const std::size_t d = seq.extent(1);
    const std::size_t dh = d / p.heads;
    Tensor q = matmul(seq, p.w_q);
    Tensor k = matmul(seq, p.w_k);
    Tensor v = matmul(seq, p.w_v);
    Tensor mixed({seq.extent(0), d});
    for (std::size_t hidx = 0; hidx < p.heads; ++hidx) {
        const std::size_t off = hidx * dh;
        Tensor qh = normalize_cols(slice_cols(q, off, dh));
        Tensor kh = normalize_cols(slice_cols(k, off, dh));
        Tensor attn = softmax_rows(scale(matmul(transpose(kh), qh), 1.0 / p.temperature[hidx]));
        paste_cols(mixed, matmul(slice_cols(v, off, dh), attn), off);
    }
    return add_row_bias(matmul(mixed, p.w_proj), p.proj_bias);
}

} // namespace

TokenMap token_map_from_chw(const Tensor& chw) {
    if (chw.rank() != 3) {
        throw std::invalid_argument("token_map_from_chw: want [DxHxW], got " + shape_str(chw.shape()));
    }
    const std::size_t d = chw.extent(0);
    const std::size_t ht = chw.extent(1);
    const std::size_t wt = chw.extent(2);
    Tensor tokens({ht * wt, d});
    for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t y = 0; y < ht; ++y) {
            for (std::size_t x = 0; x < wt; ++x) {
                tokens(y * wt + x, c) = chw(c, y, x);
            }
        }
    }
    return TokenMap{std::move(tokens), ht, wt};
}

Tensor token_map_to_chw(const TokenMap& x) {
    if (x.tokens.rank() != 2 || x.ht * x.wt != x.tokens.extent(0)) {
        throw std::invalid_argument("token_map_to_chw: factorization " + std::to_string(x.ht) + "x" +
                                    std::to_string(x.wt) + " does not match " +
                                    std::to_string(x.tokens.extent(0)) + " tokens");
    }
    const std::size_t d = x.tokens.extent(1);
    Tensor chw({d, x.ht, x.wt});
    for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t y = 0; y < x.ht; ++y) {
            for (std::size_t xc = 0; xc < x.wt; ++xc) {
                chw(c, y, xc) = x.tokens(y * x.wt + xc, c);
            }
        }
    }
    return chw;
}

TokenMap shift_token_map(const TokenMap& x, spectral::ShiftVector d) {
    return token_map_from_chw(spectral::cyclic_shift_fractional(token_map_to_chw(x), d));
}

TokenMap roll_token_map(const TokenMap& x, long long ky, long long kx) {
    return token_map_from_chw(spectral::cyclic_roll(token_map_to_chw(x), ky, kx));
}

void validate_params(const AttentionParams& p, std::size_t dim) {
    auto want_square = [&](const Tensor& m, const char* name) {
        if (m.rank() != 2 || m.extent(0) != dim || m.extent(1) != dim) {
            throw std::invalid_argument(std::string("attention: ") + name + " must be [" +
                                        std::to_string(dim) + "x" + std::to_string(dim) + "], got " +
                                        shape_str(m.shape()));
        }
    };
    want_square(p.w_q, "w_q");
    want_square(p.w_k, "w_k");
    want_square(p.w_v, "w_v");
    want_square(p.w_proj, "w_proj");
    if (p.proj_bias.rank() != 1 || p.proj_bias.extent(0) != dim) {
        throw std::invalid_argument("attention: proj_bias shape " + shape_str(p.proj_bias.shape()));
    }
    if (p.heads == 0 || dim % p.heads != 0) {
        throw std::invalid_argument("attention: head count " + std::to_string(p.heads) +
                                    " does not divide dim " + std::to_string(dim));
    }
    if (p.temperature.rank() != 1 || p.temperature.extent(0) != p.heads) {
        throw std::invalid_argument("attention: temperature shape " + shape_str(p.temperature.shape()) +
                                    " vs " + std::to_string(p.heads) + " heads");
    }
    for (std::size_t i = 0; i < p.heads; ++i) {
        if (!(p.temperature[i] > 0.0)) {
            throw std::invalid_argument("attention: temperature must be strictly positive");
        }
    }
}

std::array<Tensor, 3> project_qkv(const TokenMap& x, const AttentionParams& p) {
    validate_params(p, x.dim());
    return {matmul(x.tokens, p.w_q), matmul(x.tokens, p.w_k), matmul(x.tokens, p.w_v)};
}

TokenMap sea_apply(const TokenMap& x, const AttentionParams& p, const MatrixFn& f) {
    auto [q, k, v] = project_qkv(x, p);
    const std::size_t d = x.dim();
    Tensor mixed = f(matmul(transpose(k), v));
    if (mixed.rank() != 2 || mixed.extent(0) != d || mixed.extent(1) != d) {
        throw std::invalid_argument("sea_apply: f returned shape " + shape_str(mixed.shape()) +
                                    ", want [" + std::to_string(d) + "x" + std::to_string(d) + "]");
    }
    Tensor out = add_row_bias(matmul(matmul(q, mixed), p.w_proj), p.proj_bias);
    return TokenMap{std::move(out), x.ht, x.wt};
}

TokenMap xca_apply(const TokenMap& x, const AttentionParams& p) {
    validate_params(p, x.dim());
    return TokenMap{xca_core(x.tokens, p), x.ht, x.wt};
}

TokenMap sa_apply(const TokenMap& x, const AttentionParams& p) {
    validate_params(p, x.dim());
    const std::size_t d = x.dim();
    const std::size_t dh = d / p.heads;
    auto [q, k, v] = project_qkv(x, p);
    Tensor mixed({x.count(), d});
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    for (std::size_t hidx = 0; hidx < p.heads; ++hidx) {
        const std::size_t off = hidx * dh;
        Tensor qh = slice_cols(q, off, dh);
        Tensor kh = slice_cols(k, off, dh);
        Tensor attn = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt_dh));
        paste_cols(mixed, matmul(attn, slice_cols(v, off, dh)), off);
    }
    Tensor out = add_row_bias(matmul(mixed, p.w_proj), p.proj_bias);
    return TokenMap{std::move(out), x.ht, x.wt};
}

std::pair<TokenMap, Tensor> class_attention_apply(const TokenMap& x, const Tensor& cls,
                                                  const AttentionParams& p) {
    validate_params(p, x.dim());
    Tensor seq = concat_rows(x.tokens, cls);
    Tensor out = xca_core(seq, p);
    const std::size_t n = x.count();
    const std::size_t d = x.dim();
    Tensor patches({n, d});
    std::copy(out.buffer().begin(), out.buffer().begin() + n * d, patches.buffer().begin());
    Tensor cls_out({d});
    std::copy(out.buffer().begin() + n * d, out.buffer().end(), cls_out.buffer().begin());
    return {TokenMap{std::move(patches), x.ht, x.wt}, std::move(cls_out)};
}

Tensor standard_class_attention_apply(const TokenMap& x, const Tensor& cls,
                                      const AttentionParams& p) {
    validate_params(p, x.dim());
    const std::size_t d = x.dim();
    const std::size_t dh = d / p.heads;
    Tensor seq = concat_rows(x.tokens, cls);
    Tensor cls_row({1, d});
    std::copy(cls.buffer().begin(), cls.buffer().end(), cls_row.buffer().begin());
    Tensor q = matmul(cls_row, p.w_q);
    Tensor k = matmul(seq, p.w_k);
    Tensor v = matmul(seq, p.w_v);
    Tensor mixed({1, d});
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    for (std::size_t hidx = 0; hidx < p.heads; ++hidx) {
        const std::size_t off = hidx * dh;
        Tensor attn = softmax_rows(
            scale(matmul(slice_cols(q, off, dh), transpose(slice_cols(k, off, dh))), inv_sqrt_dh));
        paste_cols(mixed, matmul(attn, slice_cols(v, off, dh)), off);
    }
    Tensor out = add_row_bias(matmul(mixed, p.w_proj), p.proj_bias);
    Tensor cls_out({d});
    std::copy(out.buffer().begin(), out.buffer().end(), cls_out.buffer().begin());
    return cls_out;
}

} // namespace aft::attention
