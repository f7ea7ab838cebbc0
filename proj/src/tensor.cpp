#include "aft/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace aft {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) {
        if (e == 0) {
            throw std::invalid_argument("tensor: zero extent in shape " + shape_str(shape));
        }
        n *= e;
    }
    return n;
}

} // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_product(shape_) != data_.size()) {
        throw std::invalid_argument("tensor: shape " + shape_str(shape_) + " does not match buffer of " +
                                    std::to_string(data_.size()) + " elements");
    }
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
}

ComplexTensor::ComplexTensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), re_(shape_product(shape_), 0.0), im_(re_.size(), 0.0) {}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

namespace {

void check_matmul_shapes(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0)) {
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                                    shape_str(b.shape()));
    }
}

inline void matmul_row(const Tensor& a, const Tensor& b, Tensor& out, std::size_t i) {
    const std::size_t k_extent = a.extent(1);
    const std::size_t p_extent = b.extent(1);
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

} // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_matmul_shapes(a, b);
    const std::size_t m = a.extent(0);
    Tensor out({m, b.extent(1)});
    const long long mll = static_cast<long long>(m);
#pragma omp parallel for schedule(static) if (mll >= 32)
    for (long long i = 0; i < mll; ++i) {
        matmul_row(a, b, out, static_cast<std::size_t>(i));
    }
    return out;
}

// ---------------------------------------------------------------------------
// circular convolution (cross-correlation, stride 1)
// ---------------------------------------------------------------------------

namespace {

void check_conv_shapes(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
    if (x.rank() != 3) {
        throw std::invalid_argument("conv2d_circular: input must be rank 3, got " + shape_str(x.shape()));
    }
    if (kernel.rank() != 4 || kernel.extent(2) != kernel.extent(3)) {
        throw std::invalid_argument("conv2d_circular: kernel must be [OxCxkxk], got " +
                                    shape_str(kernel.shape()));
    }
    if (kernel.extent(2) % 2 == 0) {
        throw std::invalid_argument("conv2d_circular: kernel size must be odd, got " +
                                    std::to_string(kernel.extent(2)));
    }
    if (kernel.extent(1) != x.extent(0)) {
        throw std::invalid_argument("conv2d_circular: channel mismatch, input " + shape_str(x.shape()) +
                                    " vs kernel " + shape_str(kernel.shape()));
    }
    if (bias.rank() != 1 || bias.extent(0) != kernel.extent(0)) {
        throw std::invalid_argument("conv2d_circular: bias shape " + shape_str(bias.shape()) +
                                    " does not match " + std::to_string(kernel.extent(0)) + " output channels");
    }
}

// ring[i] = (i + w - r) % w for i < w + k; hoists the wrap out of the hot loop
// without touching the accumulation order
std::vector<std::size_t> ring_index(std::size_t w, std::size_t k) {
    const std::size_t r = k / 2;
    std::vector<std::size_t> ring(w + k);
    for (std::size_t i = 0; i < ring.size(); ++i) {
        ring[i] = (i + w - r) % w;
    }
    return ring;
}

inline void conv_out_row(const Tensor& x, const Tensor& kernel, const Tensor& bias, Tensor& out,
                         const std::vector<std::size_t>& ring_y,
                         const std::vector<std::size_t>& ring_x, std::size_t o, std::size_t y) {
    const std::size_t c_extent = x.extent(0);
    const std::size_t w = x.extent(2);
    const std::size_t k = kernel.extent(2);
    for (std::size_t xcol = 0; xcol < w; ++xcol) {
        double acc = bias[o];
        for (std::size_t c = 0; c < c_extent; ++c) {
            for (std::size_t dy = 0; dy < k; ++dy) {
                const double* xrow = x.data() + (c * x.extent(1) + ring_y[y + dy]) * w;
                const double* krow = kernel.data() + ((o * c_extent + c) * k + dy) * k;
                for (std::size_t dx = 0; dx < k; ++dx) {
                    acc += xrow[ring_x[xcol + dx]] * krow[dx];
                }
            }
        }
        out(o, y, xcol) = acc;
    }
}

inline void depthwise_out_row(const Tensor& x, const Tensor& kernel, const Tensor& bias, Tensor& out,
                              const std::vector<std::size_t>& ring_y,
                              const std::vector<std::size_t>& ring_x, std::size_t c, std::size_t y) {
    const std::size_t w = x.extent(2);
    const std::size_t k = kernel.extent(1);
    for (std::size_t xcol = 0; xcol < w; ++xcol) {
        double acc = bias[c];
        for (std::size_t dy = 0; dy < k; ++dy) {
            const double* xrow = x.data() + (c * x.extent(1) + ring_y[y + dy]) * w;
            const double* krow = kernel.data() + (c * k + dy) * k;
            for (std::size_t dx = 0; dx < k; ++dx) {
                acc += xrow[ring_x[xcol + dx]] * krow[dx];
            }
        }
        out(c, y, xcol) = acc;
    }
}

} // namespace

Tensor conv2d_circular(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
    check_conv_shapes(x, kernel, bias);
    const std::size_t o_extent = kernel.extent(0);
    const std::size_t h = x.extent(1);
    Tensor out({o_extent, h, x.extent(2)});
    const auto ring_y = ring_index(h, kernel.extent(2));
    const auto ring_x = ring_index(x.extent(2), kernel.extent(2));
    const long long rows = static_cast<long long>(o_extent * h);
#pragma omp parallel for schedule(static) if (rows >= 16)
    for (long long idx = 0; idx < rows; ++idx) {
        const std::size_t o = static_cast<std::size_t>(idx) / h;
        const std::size_t y = static_cast<std::size_t>(idx) % h;
        conv_out_row(x, kernel, bias, out, ring_y, ring_x, o, y);
    }
    return out;
}

Tensor conv2d_circular_depthwise(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
    if (x.rank() != 3 || kernel.rank() != 3 || kernel.extent(1) != kernel.extent(2)) {
        throw std::invalid_argument("depthwise conv: want x [CxHxW], kernel [Cxkxk], got " +
                                    shape_str(x.shape()) + " and " + shape_str(kernel.shape()));
    }
    if (kernel.extent(1) % 2 == 0) {
        throw std::invalid_argument("depthwise conv: kernel size must be odd");
    }
    if (kernel.extent(0) != x.extent(0) || bias.extent(0) != x.extent(0)) {
        throw std::invalid_argument("depthwise conv: channel mismatch, input " + shape_str(x.shape()) +
                                    " vs kernel " + shape_str(kernel.shape()));
    }
    const std::size_t c_extent = x.extent(0);
    const std::size_t h = x.extent(1);
    Tensor out({c_extent, h, x.extent(2)});
    const auto ring_y = ring_index(h, kernel.extent(1));
    const auto ring_x = ring_index(x.extent(2), kernel.extent(1));
    const long long rows = static_cast<long long>(c_extent * h);
#pragma omp parallel for schedule(static) if (rows >= 16)
    for (long long idx = 0; idx < rows; ++idx) {
        const std::size_t c = static_cast<std::size_t>(idx) / h;
        const std::size_t y = static_cast<std::size_t>(idx) % h;
        depthwise_out_row(x, kernel, bias, out, ring_y, ring_x, c, y);
    }
    return out;
}

// ---------------------------------------------------------------------------
// softmax
// ---------------------------------------------------------------------------

namespace {

void check_softmax_input(const Tensor& m) {
    if (m.rank() != 2) {
        throw std::invalid_argument("softmax_rows: input must be rank 2, got " + shape_str(m.shape()));
    }
    for (double v : m.buffer()) {
        if (std::isnan(v)) {
            throw std::invalid_argument("softmax_rows: NaN in input");
        }
    }
}

inline void softmax_row(const Tensor& m, Tensor& out, std::size_t i) {
    const std::size_t cols = m.extent(1);
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

} // namespace

Tensor softmax_rows(const Tensor& m) {
    check_softmax_input(m);
    const long long rows = static_cast<long long>(m.extent(0));
    Tensor out(m.shape());
#pragma omp parallel for schedule(static) if (rows >= 64)
    for (long long i = 0; i < rows; ++i) {
        softmax_row(m, out, static_cast<std::size_t>(i));
    }
    return out;
}

// ---------------------------------------------------------------------------
// pointwise helpers
// ---------------------------------------------------------------------------

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
    }
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] + b[i];
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] - b[i];
    }
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] * s;
    }
    return out;
}

Tensor transpose(const Tensor& m) {
    if (m.rank() != 2) {
        throw std::invalid_argument("transpose: input must be rank 2, got " + shape_str(m.shape()));
    }
    Tensor out({m.extent(1), m.extent(0)});
    for (std::size_t i = 0; i < m.extent(0); ++i) {
        for (std::size_t j = 0; j < m.extent(1); ++j) {
            out(j, i) = m(i, j);
        }
    }
    return out;
}

Tensor add_row_bias(const Tensor& m, const Tensor& bias) {
    if (m.rank() != 2 || bias.rank() != 1 || bias.extent(0) != m.extent(1)) {
        throw std::invalid_argument("add_row_bias: shapes " + shape_str(m.shape()) + " and " +
                                    shape_str(bias.shape()) + " are incompatible");
    }
    Tensor out(m.shape());
    for (std::size_t i = 0; i < m.extent(0); ++i) {
        for (std::size_t j = 0; j < m.extent(1); ++j) {
            out(i, j) = m(i, j) + bias[j];
        }
    }
    return out;
}

double dot_flat(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "dot_flat");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

double norm2(const Tensor& a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * a[i];
    }
    return std::sqrt(acc);
}

double max_abs(const Tensor& a) {
    double mx = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        mx = std::max(mx, std::abs(a[i]));
    }
    return mx;
}

double rel_error(const Tensor& actual, const Tensor& reference, double eps) {
    check_same_shape(actual, reference, "rel_error");
    return norm2(sub(actual, reference)) / std::max(norm2(reference), eps);
}

} // namespace aft
