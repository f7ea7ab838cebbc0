#include "aft/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

// Serial reference kernels. Plain loops in the same per-element order as the
// OpenMP versions; tests assert bitwise agreement and the benchmark compares
// throughput.

namespace aft::ref {

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0)) {
        throw std::invalid_argument("ref::matmul: incompatible shapes " + shape_str(a.shape()) +
                                    " and " + shape_str(b.shape()));
    }
    const std::size_t m = a.extent(0);
    const std::size_t k_extent = a.extent(1);
    const std::size_t p_extent = b.extent(1);
    Tensor out({m, p_extent});
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a.data() + i * k_extent;
        double* orow = out.data() + i * p_extent;
        for (std::size_t k = 0; k < k_extent; ++k) {
            const double av = arow[k];
            const double* brow = b.data() + k * p_extent;
            for (std::size_t p = 0; p < p_extent; ++p) {
                orow[p] += av * brow[p];
            }
        }
    }
    return out;
}

Tensor conv2d_circular(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
    if (x.rank() != 3 || kernel.rank() != 4 || kernel.extent(2) != kernel.extent(3) ||
        kernel.extent(2) % 2 == 0 || kernel.extent(1) != x.extent(0) ||
        bias.extent(0) != kernel.extent(0)) {
        throw std::invalid_argument("ref::conv2d_circular: bad shapes " + shape_str(x.shape()) +
                                    ", " + shape_str(kernel.shape()));
    }
    const std::size_t o_extent = kernel.extent(0);
    const std::size_t c_extent = x.extent(0);
    const std::size_t h = x.extent(1);
    const std::size_t w = x.extent(2);
    const std::size_t k = kernel.extent(2);
    const std::size_t r = k / 2;
    Tensor out({o_extent, h, w});
    for (std::size_t o = 0; o < o_extent; ++o) {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t xcol = 0; xcol < w; ++xcol) {
                double acc = bias[o];
                for (std::size_t c = 0; c < c_extent; ++c) {
                    for (std::size_t dy = 0; dy < k; ++dy) {
                        const std::size_t yy = (y + dy + h - r) % h;
                        for (std::size_t dx = 0; dx < k; ++dx) {
                            const std::size_t xx = (xcol + dx + w - r) % w;
                            acc += x(c, yy, xx) *
                                   kernel.buffer()[((o * c_extent + c) * k + dy) * k + dx];
                        }
                    }
                }
                out(o, y, xcol) = acc;
            }
        }
    }
    return out;
}

Tensor conv2d_circular_depthwise(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
    if (x.rank() != 3 || kernel.rank() != 3 || kernel.extent(1) != kernel.extent(2) ||
        kernel.extent(1) % 2 == 0 || kernel.extent(0) != x.extent(0) ||
        bias.extent(0) != x.extent(0)) {
        throw std::invalid_argument("ref::depthwise conv: bad shapes " + shape_str(x.shape()) +
                                    ", " + shape_str(kernel.shape()));
    }
    const std::size_t c_extent = x.extent(0);
    const std::size_t h = x.extent(1);
    const std::size_t w = x.extent(2);
    const std::size_t k = kernel.extent(1);
    const std::size_t r = k / 2;
    Tensor out({c_extent, h, w});
    for (std::size_t c = 0; c < c_extent; ++c) {
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t xcol = 0; xcol < w; ++xcol) {
                double acc = bias[c];
                for (std::size_t dy = 0; dy < k; ++dy) {
                    const std::size_t yy = (y + dy + h - r) % h;
                    for (std::size_t dx = 0; dx < k; ++dx) {
                        const std::size_t xx = (xcol + dx + w - r) % w;
                        acc += x(c, yy, xx) * kernel.buffer()[(c * k + dy) * k + dx];
                    }
                }
                out(c, y, xcol) = acc;
            }
        }
    }
    return out;
}

Tensor softmax_rows(const Tensor& m) {
    if (m.rank() != 2) {
        throw std::invalid_argument("ref::softmax_rows: input must be rank 2");
    }
    for (double v : m.buffer()) {
        if (std::isnan(v)) {
            throw std::invalid_argument("ref::softmax_rows: NaN in input");
        }
    }
    const std::size_t rows = m.extent(0);
    const std::size_t cols = m.extent(1);
    Tensor out(m.shape());
    for (std::size_t i = 0; i < rows; ++i) {
        const double* src = m.data() + i * cols;
        double* dst = out.data() + i * cols;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < cols; ++j) {
            mx = std::max(mx, src[j]);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            dst[j] = std::exp(src[j] - mx);
            sum += dst[j];
        }
        for (std::size_t j = 0; j < cols; ++j) {
            dst[j] /= sum;
        }
    }
    return out;
}

} // namespace aft::ref
