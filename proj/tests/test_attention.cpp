#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "aft/attention.hpp"
#include "aft/tensor.hpp"
#include "test_support.hpp"

#include <cmath>
#include <stdexcept>

using namespace aft;
using namespace aft::attention;
using testing::bandlimited_tokens;
using testing::random_attention_params;
using testing::random_fractional_shift;
using testing::random_tensor;

namespace {

// scalar-arithmetic XCA for N=2, D=2, h=1
Tensor xca_oracle_2x2(const Tensor& x, const AttentionParams& p) {
    auto col = [](const Tensor& m, std::size_t j) { return std::array<double, 2>{m(0, j), m(1, j)}; };
    Tensor q = matmul(x, p.w_q);
    Tensor k = matmul(x, p.w_k);
    Tensor v = matmul(x, p.w_v);
    auto normalize = [&](std::array<double, 2> c) {
        const double n = std::max(std::sqrt(c[0] * c[0] + c[1] * c[1]), 1e-12);
        return std::array<double, 2>{c[0] / n, c[1] / n};
    };
    std::array<std::array<double, 2>, 2> qn{normalize(col(q, 0)), normalize(col(q, 1))};
    std::array<std::array<double, 2>, 2> kn{normalize(col(k, 0)), normalize(col(k, 1))};
    // A = softmax_rows(K^T Q / tau): A[i][j] over j
    double a[2][2];
    for (std::size_t i = 0; i < 2; ++i) {
        double raw[2];
        for (std::size_t j = 0; j < 2; ++j) {
            raw[j] = (kn[i][0] * qn[j][0] + kn[i][1] * qn[j][1]) / p.temperature[0];
        }
        const double mx = std::max(raw[0], raw[1]);
        const double e0 = std::exp(raw[0] - mx);
        const double e1 = std::exp(raw[1] - mx);
        a[i][0] = e0 / (e0 + e1);
        a[i][1] = e1 / (e0 + e1);
    }
    Tensor mixed({2, 2});
    for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t j = 0; j < 2; ++j) {
            mixed(r, j) = v(r, 0) * a[0][j] + v(r, 1) * a[1][j];
        }
    }
    return add_row_bias(matmul(mixed, p.w_proj), p.proj_bias);
}

} // namespace

TEST_CASE("project_qkv zero input gives zero projections") {
    TokenMap x{Tensor({4, 4}), 2, 2};
    AttentionParams p = random_attention_params(4, 2, 1);
    auto [q, k, v] = project_qkv(x, p);
    CHECK(max_abs(q) == 0.0);
    CHECK(max_abs(k) == 0.0);
    CHECK(max_abs(v) == 0.0);
}

TEST_CASE("project_qkv identity weight returns the tokens") {
    TokenMap x = bandlimited_tokens(3, 2, 4);
    AttentionParams p = random_attention_params(4, 2, 5);
    Tensor eye({4, 4});
    for (std::size_t i = 0; i < 4; ++i) {
        eye(i, i) = 1.0;
    }
    p.w_q = eye;
    auto [q, k, v] = project_qkv(x, p);
    CHECK(rel_error(q, x.tokens) == 0.0);
}

TEST_CASE("projections are shift-equivariant") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        TokenMap x = bandlimited_tokens(20 + s, 8, 6);
        AttentionParams p = random_attention_params(6, 2, 40 + s);
        const spectral::ShiftVector d = random_fractional_shift(s);
        TokenMap xs = shift_token_map(x, d);
        auto [q, k, v] = project_qkv(x, p);
        auto [qs, ks, vs] = project_qkv(xs, p);
        CHECK(rel_error(qs, shift_token_map(TokenMap{q, 8, 8}, d).tokens) < 1e-9);
        CHECK(rel_error(ks, shift_token_map(TokenMap{k, 8, 8}, d).tokens) < 1e-9);
        CHECK(rel_error(vs, shift_token_map(TokenMap{v, 8, 8}, d).tokens) < 1e-9);
    }
}

TEST_CASE("sea_apply with identity f and zero input is zero") {
    TokenMap x{Tensor({4, 4}), 2, 2};
    AttentionParams p = random_attention_params(4, 1, 7, 0.5, /*zero_bias=*/true);
    TokenMap out = sea_apply(x, p, [](const Tensor& m) { return m; });
    CHECK(max_abs(out.tokens) == 0.0);
}

TEST_CASE("sea_apply with the zero map broadcasts the projection bias") {
    TokenMap x = bandlimited_tokens(9, 2, 4);
    AttentionParams p = random_attention_params(4, 1, 11);
    TokenMap out = sea_apply(x, p, [](const Tensor& m) { return Tensor(m.shape()); });
    for (std::size_t i = 0; i < out.count(); ++i) {
        for (std::size_t j = 0; j < out.dim(); ++j) {
            CHECK(out.tokens(i, j) == doctest::Approx(p.proj_bias[j]).epsilon(1e-14));
        }
    }
}

TEST_CASE("sea_apply matches explicit 2x2 matrix arithmetic") {
    Tensor tokens({2, 2}, {0.3, -1.1, 0.7, 0.2});
    TokenMap x{tokens, 2, 1};
    AttentionParams p = random_attention_params(2, 1, 13);
    TokenMap out = sea_apply(x, p, [](const Tensor& m) { return m; });
    // Q (K^T V) W_proj + b, expanded by hand through matmuls
    Tensor q = matmul(tokens, p.w_q);
    Tensor kv = matmul(transpose(matmul(tokens, p.w_k)), matmul(tokens, p.w_v));
    Tensor want = add_row_bias(matmul(matmul(q, kv), p.w_proj), p.proj_bias);
    CHECK(rel_error(out.tokens, want) < 1e-13);
}

TEST_CASE("sea_apply rejects f with wrong extents") {
    TokenMap x = bandlimited_tokens(15, 2, 4);
    AttentionParams p = random_attention_params(4, 1, 17);
    CHECK_THROWS_AS(sea_apply(x, p, [](const Tensor&) { return Tensor({2, 2}); }),
                    std::invalid_argument);
}

TEST_CASE("xca_apply matches the N=2 D=2 oracle") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        Tensor tokens = random_tensor({2, 2}, 100 + s);
        TokenMap x{tokens, 2, 1};
        AttentionParams p = random_attention_params(2, 1, 200 + s);
        CHECK(rel_error(xca_apply(x, p).tokens, xca_oracle_2x2(tokens, p)) < 1e-12);
    }
}

TEST_CASE("normalized cross-covariance entries stay within [-1, 1]") {
    TokenMap x = bandlimited_tokens(31, 4, 8);
    AttentionParams p = random_attention_params(8, 2, 33);
    auto [q, k, v] = project_qkv(x, p);
    auto normalize = [](Tensor m) {
        for (std::size_t j = 0; j < m.extent(1); ++j) {
            double sq = 0.0;
            for (std::size_t i = 0; i < m.extent(0); ++i) {
                sq += m(i, j) * m(i, j);
            }
            const double inv = 1.0 / std::max(std::sqrt(sq), 1e-12);
            for (std::size_t i = 0; i < m.extent(0); ++i) {
                m(i, j) *= inv;
            }
        }
        return m;
    };
    Tensor cc = matmul(transpose(normalize(k)), normalize(q));
    CHECK(max_abs(cc) <= 1.0 + 1e-12);
}

TEST_CASE("xca_apply is shift-equivariant") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        TokenMap x = bandlimited_tokens(50 + s, 8, 8);
        AttentionParams p = random_attention_params(8, 2, 70 + s);
        const spectral::ShiftVector d = random_fractional_shift(s + 5);
        TokenMap lhs = xca_apply(shift_token_map(x, d), p);
        TokenMap rhs = shift_token_map(xca_apply(x, p), d);
        CHECK(rel_error(lhs.tokens, rhs.tokens) < 1e-9);
    }
}

TEST_CASE("sa_apply with one token projects the value row") {
    Tensor tokens = random_tensor({1, 4}, 41);
    TokenMap x{tokens, 1, 1};
    AttentionParams p = random_attention_params(4, 2, 43);
    Tensor want = add_row_bias(matmul(matmul(tokens, p.w_v), p.w_proj), p.proj_bias);
    CHECK(rel_error(sa_apply(x, p).tokens, want) < 1e-13);
}

TEST_CASE("sa_apply with zero queries averages the values") {
    TokenMap x = bandlimited_tokens(45, 2, 4);
    AttentionParams p = random_attention_params(4, 2, 47);
    p.w_q = Tensor({4, 4});
    Tensor v = matmul(x.tokens, p.w_v);
    Tensor mean({1, 4});
    for (std::size_t j = 0; j < 4; ++j) {
        for (std::size_t i = 0; i < 4; ++i) {
            mean(0, j) += v(i, j) / 4.0;
        }
    }
    Tensor want = add_row_bias(matmul(mean, p.w_proj), p.proj_bias);
    TokenMap out = sa_apply(x, p);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(out.tokens(i, j) == doctest::Approx(want(0, j)).epsilon(1e-12));
        }
    }
}

TEST_CASE("sa_apply matches a brute-force N=2 oracle") {
    Tensor tokens = random_tensor({2, 2}, 49);
    TokenMap x{tokens, 2, 1};
    AttentionParams p = random_attention_params(2, 1, 51);
    Tensor q = matmul(tokens, p.w_q);
    Tensor k = matmul(tokens, p.w_k);
    Tensor v = matmul(tokens, p.w_v);
    Tensor scores = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(2.0));
    Tensor want = add_row_bias(matmul(matmul(softmax_rows(scores), v), p.w_proj), p.proj_bias);
    CHECK(rel_error(sa_apply(x, p).tokens, want) < 1e-13);
}

TEST_CASE("K^T V is invariant under fractional shifts") {
    for (std::uint64_t s = 0; s < 20; ++s) {
        TokenMap x = bandlimited_tokens(80 + s, 8, 6);
        AttentionParams p = random_attention_params(6, 2, 90 + s);
        const spectral::ShiftVector d = random_fractional_shift(s + 9);
        auto [q, k, v] = project_qkv(x, p);
        auto [qs, ks, vs] = project_qkv(shift_token_map(x, d), p);
        CHECK(rel_error(matmul(transpose(ks), vs), matmul(transpose(k), v)) < 1e-9);
    }
}

TEST_CASE("sea_apply is equivariant for identity, row-softmax and square maps") {
    const MatrixFn fns[] = {
        [](const Tensor& m) { return m; },
        [](const Tensor& m) { return softmax_rows(m); },
        [](const Tensor& m) {
            Tensor out(m.shape());
            for (std::size_t i = 0; i < m.size(); ++i) {
                out.buffer()[i] = m[i] * m[i];
            }
            return out;
        },
    };
    for (std::uint64_t s = 0; s < 6; ++s) {
        TokenMap x = bandlimited_tokens(110 + s, 8, 6);
        AttentionParams p = random_attention_params(6, 1, 120 + s);
        const spectral::ShiftVector d = random_fractional_shift(s + 13);
        for (const auto& f : fns) {
            TokenMap lhs = sea_apply(shift_token_map(x, d), p, f);
            TokenMap rhs = shift_token_map(sea_apply(x, p, f), d);
            CHECK(rel_error(lhs.tokens, rhs.tokens) < 1e-9);
        }
    }
}

TEST_CASE("class attention with zero class token and zero queries returns the bias") {
    TokenMap x = bandlimited_tokens(130, 2, 4);
    AttentionParams p = random_attention_params(4, 2, 131);
    p.w_q = Tensor({4, 4});
    auto [patches, cls_out] = class_attention_apply(x, Tensor({4}), p);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(cls_out[j] == doctest::Approx(p.proj_bias[j]).epsilon(1e-12));
    }
}

TEST_CASE("class attention keeps the class row invariant and the patches equivariant") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        TokenMap x = bandlimited_tokens(140 + s, 8, 6);
        AttentionParams p = random_attention_params(6, 2, 150 + s);
        Tensor cls = random_tensor({6}, 160 + s, 0.5);
        const spectral::ShiftVector d = random_fractional_shift(s + 21);
        auto [patch, cls_out] = class_attention_apply(x, cls, p);
        auto [patch_s, cls_out_s] = class_attention_apply(shift_token_map(x, d), cls, p);
        CHECK(rel_error(cls_out_s, cls_out) < 1e-8);
        CHECK(rel_error(patch_s.tokens, shift_token_map(patch, d).tokens) < 1e-8);
    }
}

// Negative control. Softmax self-attention is permutation-equivariant but not
// fractionally equivariant; the violation shows once the scores escape the
// near-linear softmax regime. Conditions frozen after calibration: unit-scale
// weights, token band 0.45, quarter-pixel shifts.
TEST_CASE("sa_apply breaks fractional equivariance on most random shifts") {
    std::size_t violations = 0;
    const std::size_t total = 100;
    for (std::uint64_t s = 0; s < total; ++s) {
        TokenMap x = bandlimited_tokens(700 + s, 8, 16, 0.45);
        AttentionParams p = random_attention_params(16, 2, 900 + s * 7, 1.0, /*zero_bias=*/true);
        const spectral::ShiftVector d = random_fractional_shift(s * 13 + 5);
        TokenMap lhs = sa_apply(shift_token_map(x, d), p);
        TokenMap rhs = shift_token_map(sa_apply(x, p), d);
        if (rel_error(lhs.tokens, rhs.tokens) > 1e-2) {
            ++violations;
        }
    }
    CHECK(violations >= 95);
}

TEST_CASE("attention parameter validation") {
    TokenMap x = bandlimited_tokens(170, 2, 4);
    AttentionParams p = random_attention_params(4, 3, 171); // 3 does not divide 4
    CHECK_THROWS_AS(xca_apply(x, p), std::invalid_argument);
    p = random_attention_params(4, 2, 172);
    p.temperature = Tensor({2}); // zeros
    CHECK_THROWS_AS(xca_apply(x, p), std::invalid_argument);
    p = random_attention_params(6, 2, 173); // extent mismatch vs dim 4
    CHECK_THROWS_AS(project_qkv(x, p), std::invalid_argument);
}
