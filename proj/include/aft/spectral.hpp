#pragma once

#include "aft/tensor.hpp"

#include <cstddef>

namespace aft::spectral {

// One translation of a [C x H x W] signal, in samples of the grid it acts on.
// Positive components advance the sampling positions: the output at index n
// is the bandlimited interpolant evaluated at n + d, so cyclic_roll with the
// same sign convention is the integer special case.
struct ShiftVector {
    double dy = 0.0;
    double dx = 0.0;
};

bool is_power_of_two(std::size_t n);

// Brute-force O(N^2) forward DFT per channel; the oracle the FFT is tested
// against. X[u,v] = sum_{m,n} x[m,n] exp(-2*pi*i*(u*m/H + v*n/W)), unnormalized.
ComplexTensor dft2(const Tensor& x);

// Radix-2 FFT per channel; extents must be powers of two.
ComplexTensor fft2(const Tensor& x);
ComplexTensor fft2_complex(const ComplexTensor& x);

// Normalized inverse (1/(H*W)). The real-returning form asserts the imaginary
// residue is below 1e-10 relative and discards it.
ComplexTensor ifft2_complex(const ComplexTensor& spectrum);
Tensor ifft2(const ComplexTensor& spectrum);

// Zeroes every bin whose per-axis normalized frequency magnitude reaches the
// cutoff (Nyquist-exclusive passband). cutoff in (0, 0.5], cycles/sample.
Tensor lowpass_ideal(const Tensor& x, double cutoff);

// Fourier-domain resampling. downsample_af crops the spectrum to the new grid
// and drops the new Nyquist row/column; upsample_af zero-pads and splits an
// existing Nyquist bin into two conjugate half-weight bins. Constants map to
// constants in both directions.
Tensor downsample_af(const Tensor& x, std::size_t s);
Tensor upsample_af(const Tensor& x, std::size_t s);

// out[c][y][x] = in[c][(y+ky) mod H][(x+kx) mod W]
Tensor cyclic_roll(const Tensor& x, long long ky, long long kx);

// Fractional cyclic translation via a spectral phase ramp; Nyquist bins pick
// up cos(pi*d) so the output stays exactly real.
Tensor cyclic_shift_fractional(const Tensor& x, ShiftVector d);

// (my/n, mx/n)-fractional translation realized as upsample-by-n, integer roll
// by (my, mx), downsample-by-n. n must be a power of two.
Tensor fractional_shift_by_upsampling(const Tensor& x, long long my, long long mx,
                                      std::size_t n);

} // namespace aft::spectral
