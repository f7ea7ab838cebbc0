#include "aft/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

namespace aft::spectral {

namespace {

constexpr double kPi = 3.14159265358979323846;

// signed frequency of bin u on an axis of extent n: 0..n/2, then negative
long long signed_freq(std::size_t u, std::size_t n) {
    return (u <= n / 2) ? static_cast<long long>(u)
                        : static_cast<long long>(u) - static_cast<long long>(n);
}

bool is_nyquist(std::size_t u, std::size_t n) { return n > 1 && u * 2 == n; }

void check_rank3(const Tensor& x, const char* op) {
    if (x.rank() != 3) {
        throw std::invalid_argument(std::string(op) + ": input must be [CxHxW], got " +
                                    shape_str(x.shape()));
    }
}

void check_pow2_extents(std::size_t h, std::size_t w, const char* op) {
    if (!is_power_of_two(h) || !is_power_of_two(w)) {
        throw std::invalid_argument(std::string(op) + ": spatial extents must be powers of two, got " +
                                    std::to_string(h) + "x" + std::to_string(w));
    }
}

// Cached twiddle factors exp(-2*pi*i*j/n), j < n/2, evaluated by direct trig
// once per length. Read-only after construction; stage `len` indexes the
// table with stride n/len.
const std::vector<double>& twiddle_table(std::size_t n) {
    static std::mutex mtx;
    static std::unordered_map<std::size_t, std::unique_ptr<std::vector<double>>> cache;
    std::lock_guard<std::mutex> lock(mtx);
    auto& slot = cache[n];
    if (!slot) {
        auto table = std::make_unique<std::vector<double>>(n); // interleaved re, im
        for (std::size_t j = 0; j < n / 2; ++j) {
            const double ang = -2.0 * kPi * static_cast<double>(j) / static_cast<double>(n);
            (*table)[2 * j] = std::cos(ang);
            (*table)[2 * j + 1] = std::sin(ang);
        }
        slot = std::move(table);
    }
    return *slot;
}

// In-place radix-2 transform of one line.
void fft1d_inplace(double* re, double* im, std::size_t n, bool inverse) {
    if (n <= 1) {
        return;
    }
    const std::vector<double>& tw = twiddle_table(n);
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) {
            j ^= bit;
        }
        j |= bit;
        if (i < j) {
            std::swap(re[i], re[j]);
            std::swap(im[i], im[j]);
        }
    }
    const double sign = inverse ? -1.0 : 1.0; // inverse conjugates the twiddles
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        const std::size_t stride = n / len;
        for (std::size_t base = 0; base < n; base += len) {
            for (std::size_t j = 0; j < half; ++j) {
                const double wr = tw[2 * j * stride];
                const double wi = sign * tw[2 * j * stride + 1];
                const std::size_t a = base + j;
                const std::size_t b = a + half;
                const double tr = re[b] * wr - im[b] * wi;
                const double ti = re[b] * wi + im[b] * wr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
            }
        }
    }
}

void transpose_slab(const double* src, double* dst, std::size_t h, std::size_t w) {
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            dst[x * h + y] = src[y * w + x];
        }
    }
}

// rows then columns per channel; the column pass runs on a transposed copy so
// every 1-D transform is contiguous
void fft2_inplace(ComplexTensor& t, bool inverse) {
    const std::size_t c_extent = t.extent(0);
    const std::size_t h = t.extent(1);
    const std::size_t w = t.extent(2);
    const long long row_lines = static_cast<long long>(c_extent * h);
#pragma omp parallel for schedule(static) if (row_lines >= 64)
    for (long long idx = 0; idx < row_lines; ++idx) {
        const std::size_t off = static_cast<std::size_t>(idx) * w;
        fft1d_inplace(t.re().data() + off, t.im().data() + off, w, inverse);
    }
    if (h == 1) {
        return;
    }
    const long long channels = static_cast<long long>(c_extent);
#pragma omp parallel for schedule(static) if (channels >= 2)
    for (long long c = 0; c < channels; ++c) {
        const std::size_t off = static_cast<std::size_t>(c) * h * w;
        std::vector<double> tre(h * w), tim(h * w);
        transpose_slab(t.re().data() + off, tre.data(), h, w);
        transpose_slab(t.im().data() + off, tim.data(), h, w);
        for (std::size_t x = 0; x < w; ++x) {
            fft1d_inplace(tre.data() + x * h, tim.data() + x * h, h, inverse);
        }
        transpose_slab(tre.data(), t.re().data() + off, w, h);
        transpose_slab(tim.data(), t.im().data() + off, w, h);
    }
}

ComplexTensor to_complex(const Tensor& x) {
    ComplexTensor out(x.shape());
    std::copy(x.buffer().begin(), x.buffer().end(), out.re().begin());
    return out;
}

} // namespace

bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

ComplexTensor dft2(const Tensor& x) {
    check_rank3(x, "dft2");
    const std::size_t c_extent = x.extent(0);
    const std::size_t h = x.extent(1);
    const std::size_t w = x.extent(2);
    ComplexTensor out(x.shape());
    for (std::size_t c = 0; c < c_extent; ++c) {
        for (std::size_t u = 0; u < h; ++u) {
            for (std::size_t v = 0; v < w; ++v) {
                double sr = 0.0;
                double si = 0.0;
                for (std::size_t m = 0; m < h; ++m) {
                    for (std::size_t n = 0; n < w; ++n) {
                        const double ang = -2.0 * kPi *
                                           (static_cast<double>(u) * static_cast<double>(m) / static_cast<double>(h) +
                                            static_cast<double>(v) * static_cast<double>(n) / static_cast<double>(w));
                        sr += x(c, m, n) * std::cos(ang);
                        si += x(c, m, n) * std::sin(ang);
                    }
                }
                out.re(c, u, v) = sr;
                out.im(c, u, v) = si;
            }
        }
    }
    return out;
}

ComplexTensor fft2(const Tensor& x) {
    check_rank3(x, "fft2");
    check_pow2_extents(x.extent(1), x.extent(2), "fft2");
    ComplexTensor t = to_complex(x);
    fft2_inplace(t, false);
    return t;
}

ComplexTensor fft2_complex(const ComplexTensor& x) {
    check_pow2_extents(x.extent(1), x.extent(2), "fft2");
    ComplexTensor t = x;
    fft2_inplace(t, false);
    return t;
}

ComplexTensor ifft2_complex(const ComplexTensor& spectrum) {
    check_pow2_extents(spectrum.extent(1), spectrum.extent(2), "ifft2");
    ComplexTensor t = spectrum;
    fft2_inplace(t, true);
    const double inv = 1.0 / static_cast<double>(spectrum.extent(1) * spectrum.extent(2));
    for (double& v : t.re()) {
        v *= inv;
    }
    for (double& v : t.im()) {
        v *= inv;
    }
    return t;
}

Tensor ifft2(const ComplexTensor& spectrum) {
    ComplexTensor t = ifft2_complex(spectrum);
    double max_re = 0.0;
    double max_im = 0.0;
    for (double v : t.re()) {
        max_re = std::max(max_re, std::abs(v));
    }
    for (double v : t.im()) {
        max_im = std::max(max_im, std::abs(v));
    }
    if (max_im > 1e-10 * std::max(max_re, 1.0)) {
        throw std::runtime_error("ifft2: spectrum is not conjugate-symmetric (imaginary residue " +
                                 std::to_string(max_im) + ")");
    }
    return Tensor(t.shape(), std::move(t.re()));
}

Tensor lowpass_ideal(const Tensor& x, double cutoff) {
    check_rank3(x, "lowpass_ideal");
    if (!(cutoff > 0.0) || cutoff > 0.5) {
        throw std::invalid_argument("lowpass_ideal: cutoff must be in (0, 0.5], got " +
                                    std::to_string(cutoff));
    }
    const std::size_t h = x.extent(1);
    const std::size_t w = x.extent(2);
    ComplexTensor spec = fft2(x);
    for (std::size_t c = 0; c < x.extent(0); ++c) {
        for (std::size_t u = 0; u < h; ++u) {
            const double fu = std::abs(static_cast<double>(signed_freq(u, h))) / static_cast<double>(h);
            for (std::size_t v = 0; v < w; ++v) {
                const double fv = std::abs(static_cast<double>(signed_freq(v, w))) / static_cast<double>(w);
                if (std::max(fu, fv) >= cutoff) {
                    spec.re(c, u, v) = 0.0;
                    spec.im(c, u, v) = 0.0;
                }
            }
        }
    }
    return ifft2(spec);
}

Tensor downsample_af(const Tensor& x, std::size_t s) {
    check_rank3(x, "downsample_af");
    if (s < 2) {
        throw std::invalid_argument("downsample_af: factor must be >= 2");
    }
    const std::size_t h = x.extent(1);
    const std::size_t w = x.extent(2);
    if (h % s != 0 || w % s != 0) {
        throw std::invalid_argument("downsample_af: factor " + std::to_string(s) +
                                    " does not divide extents " + std::to_string(h) + "x" +
                                    std::to_string(w));
    }
    const std::size_t nh = h / s;
    const std::size_t nw = w / s;
    check_pow2_extents(nh, nw, "downsample_af");
    ComplexTensor spec = fft2(x);
    ComplexTensor cropped({x.extent(0), nh, nw});
    for (std::size_t c = 0; c < x.extent(0); ++c) {
        for (std::size_t u = 0; u < nh; ++u) {
            if (is_nyquist(u, nh)) {
                continue; // new Nyquist row dropped
            }
            const long long su = signed_freq(u, nh);
            const std::size_t src_u = static_cast<std::size_t>(((su % static_cast<long long>(h)) + static_cast<long long>(h)) % static_cast<long long>(h));
            for (std::size_t v = 0; v < nw; ++v) {
                if (is_nyquist(v, nw)) {
                    continue;
                }
                const long long sv = signed_freq(v, nw);
                const std::size_t src_v = static_cast<std::size_t>(((sv % static_cast<long long>(w)) + static_cast<long long>(w)) % static_cast<long long>(w));
                cropped.re(c, u, v) = spec.re(c, src_u, src_v);
                cropped.im(c, u, v) = spec.im(c, src_u, src_v);
            }
        }
    }
    // 1/s^2 on top of the inverse normalization keeps constants fixed
    return scale(ifft2(cropped), 1.0 / (static_cast<double>(s) * static_cast<double>(s)));
}

Tensor upsample_af(const Tensor& x, std::size_t s) {
    check_rank3(x, "upsample_af");
    if (s < 2) {
        throw std::invalid_argument("upsample_af: factor must be >= 2");
    }
    const std::size_t h = x.extent(1);
    const std::size_t w = x.extent(2);
    const std::size_t nh = h * s;
    const std::size_t nw = w * s;
    ComplexTensor spec = fft2(x);
    ComplexTensor padded({x.extent(0), nh, nw});
    const double gain = static_cast<double>(s) * static_cast<double>(s);
    for (std::size_t c = 0; c < x.extent(0); ++c) {
        for (std::size_t u = 0; u < h; ++u) {
            // Nyquist bins split into two conjugate half-weight bins
            std::pair<std::size_t, double> rows[2];
            std::size_t n_rows = 1;
            if (is_nyquist(u, h)) {
                rows[0] = {h / 2, 0.5};
                rows[1] = {nh - h / 2, 0.5};
                n_rows = 2;
            } else {
                const long long su = signed_freq(u, h);
                rows[0] = {static_cast<std::size_t>((su + static_cast<long long>(nh)) % static_cast<long long>(nh)), 1.0};
            }
            for (std::size_t v = 0; v < w; ++v) {
                std::pair<std::size_t, double> cols[2];
                std::size_t n_cols = 1;
                if (is_nyquist(v, w)) {
                    cols[0] = {w / 2, 0.5};
                    cols[1] = {nw - w / 2, 0.5};
                    n_cols = 2;
                } else {
                    const long long sv = signed_freq(v, w);
                    cols[0] = {static_cast<std::size_t>((sv + static_cast<long long>(nw)) % static_cast<long long>(nw)), 1.0};
                }
                for (std::size_t a = 0; a < n_rows; ++a) {
                    for (std::size_t b = 0; b < n_cols; ++b) {
                        const double wgt = gain * rows[a].second * cols[b].second;
                        padded.re(c, rows[a].first, cols[b].first) += wgt * spec.re(c, u, v);
                        padded.im(c, rows[a].first, cols[b].first) += wgt * spec.im(c, u, v);
                    }
                }
            }
        }
    }
    return ifft2(padded);
}

Tensor cyclic_roll(const Tensor& x, long long ky, long long kx) {
    check_rank3(x, "cyclic_roll");
    const long long h = static_cast<long long>(x.extent(1));
    const long long w = static_cast<long long>(x.extent(2));
    Tensor out(x.shape());
    for (std::size_t c = 0; c < x.extent(0); ++c) {
        for (long long y = 0; y < h; ++y) {
            const std::size_t sy = static_cast<std::size_t>(((y + ky) % h + h) % h);
            for (long long xc = 0; xc < w; ++xc) {
                const std::size_t sx = static_cast<std::size_t>(((xc + kx) % w + w) % w);
                out(c, static_cast<std::size_t>(y), static_cast<std::size_t>(xc)) = x(c, sy, sx);
            }
        }
    }
    return out;
}

Tensor cyclic_shift_fractional(const Tensor& x, ShiftVector d) {
    check_rank3(x, "cyclic_shift_fractional");
    const std::size_t h = x.extent(1);
    const std::size_t w = x.extent(2);
    ComplexTensor spec = fft2(x);
    for (std::size_t u = 0; u < h; ++u) {
        double fy_re;
        double fy_im;
        if (is_nyquist(u, h)) {
            fy_re = std::cos(kPi * d.dy); // real factor: the Nyquist bin carries no phase
            fy_im = 0.0;
        } else {
            const double ang = 2.0 * kPi * static_cast<double>(signed_freq(u, h)) * d.dy /
                               static_cast<double>(h);
            fy_re = std::cos(ang);
            fy_im = std::sin(ang);
        }
        for (std::size_t v = 0; v < w; ++v) {
            double fx_re;
            double fx_im;
            if (is_nyquist(v, w)) {
                fx_re = std::cos(kPi * d.dx);
                fx_im = 0.0;
            } else {
                const double ang = 2.0 * kPi * static_cast<double>(signed_freq(v, w)) * d.dx /
                                   static_cast<double>(w);
                fx_re = std::cos(ang);
                fx_im = std::sin(ang);
            }
            const double fr = fy_re * fx_re - fy_im * fx_im;
            const double fi = fy_re * fx_im + fy_im * fx_re;
            for (std::size_t c = 0; c < x.extent(0); ++c) {
                const double sr = spec.re(c, u, v);
                const double si = spec.im(c, u, v);
                spec.re(c, u, v) = sr * fr - si * fi;
                spec.im(c, u, v) = sr * fi + si * fr;
            }
        }
    }
    return ifft2(spec);
}

Tensor fractional_shift_by_upsampling(const Tensor& x, long long my, long long mx,
                                      std::size_t n) {
    check_rank3(x, "fractional_shift_by_upsampling");
    if (!is_power_of_two(n)) {
        throw std::invalid_argument("fractional_shift_by_upsampling: denominator must be a power of two, got " +
                                    std::to_string(n));
    }
    if (n == 1) {
        return cyclic_roll(x, my, mx);
    }
    return downsample_af(cyclic_roll(upsample_af(x, n), my, mx), n);
}

} // namespace aft::spectral
