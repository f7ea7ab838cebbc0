#pragma once

#include "aft/attention.hpp"
#include "aft/rng.hpp"
#include "aft/spectral.hpp"
#include "aft/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace aft::testing {

inline Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed, double sigma = 1.0) {
    GaussianStream stream(seed);
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = sigma * stream.next();
    }
    return t;
}

// Bandlimited [C x H x W] signal, band strictly below `limit` cycles/sample,
// zero-mean gaussian amplitudes (no [0,1] normalization).
inline Tensor bandlimited_signal(std::uint64_t seed, std::size_t channels, std::size_t size,
                                 double limit) {
    GaussianStream stream(seed);
    ComplexTensor spec({channels, size, size});
    auto in_band = [&](std::size_t u) {
        const long long su = u <= size / 2 ? static_cast<long long>(u)
                                           : static_cast<long long>(u) - static_cast<long long>(size);
        return std::abs(static_cast<double>(su)) / static_cast<double>(size) < limit;
    };
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t u = 0; u < size; ++u) {
            for (std::size_t v = 0; v < size; ++v) {
                if (in_band(u) && in_band(v)) {
                    spec.re(c, u, v) = stream.next();
                    spec.im(c, u, v) = stream.next();
                }
            }
        }
    }
    ComplexTensor sym({channels, size, size});
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t u = 0; u < size; ++u) {
            const std::size_t mu = (size - u) % size;
            for (std::size_t v = 0; v < size; ++v) {
                const std::size_t mv = (size - v) % size;
                sym.re(c, u, v) = 0.5 * (spec.re(c, u, v) + spec.re(c, mu, mv));
                sym.im(c, u, v) = 0.5 * (spec.im(c, u, v) - spec.im(c, mu, mv));
            }
        }
    }
    return spectral::ifft2(sym);
}

inline attention::TokenMap bandlimited_tokens(std::uint64_t seed, std::size_t grid, std::size_t dim,
                                              double limit = 0.2) {
    return attention::token_map_from_chw(bandlimited_signal(seed, dim, grid, limit));
}

inline attention::AttentionParams random_attention_params(std::size_t dim, std::size_t heads,
                                                          std::uint64_t seed, double sigma = 0.5,
                                                          bool zero_bias = false) {
    attention::AttentionParams p;
    p.w_q = random_tensor({dim, dim}, seed + 1, sigma);
    p.w_k = random_tensor({dim, dim}, seed + 2, sigma);
    p.w_v = random_tensor({dim, dim}, seed + 3, sigma);
    p.w_proj = random_tensor({dim, dim}, seed + 4, sigma);
    p.proj_bias = zero_bias ? Tensor({dim}) : random_tensor({dim}, seed + 5, sigma);
    p.temperature = Tensor::full({heads}, 1.0);
    p.heads = heads;
    return p;
}

// quarter-pixel-resolution shift drawn from a seed, never a pure-integer
// translation (at least one component keeps a fractional part)
inline spectral::ShiftVector random_fractional_shift(std::uint64_t seed, double max_abs = 1.75) {
    SplitMix64 rng(seed * 0x9E3779B97F4A7C15ULL + 3);
    const long long steps = static_cast<long long>(max_abs * 4.0);
    auto draw = [&]() {
        return static_cast<double>(static_cast<long long>(rng.next_u64() %
                                                          static_cast<std::uint64_t>(2 * steps + 1)) -
                                   steps) /
               4.0;
    };
    spectral::ShiftVector d{draw(), draw()};
    if (d.dy == std::floor(d.dy) && d.dx == std::floor(d.dx)) {
        d.dy += 0.25;
    }
    return d;
}

} // namespace aft::testing
