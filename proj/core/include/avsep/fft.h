// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace avsep {

using cplx = std::complex<double>;

/// In-place iterative radix-2 FFT. n must be a power of two.
/// forward: X[k] = sum_n x[n] exp(-i 2 pi k n / n)
/// inverse: unnormalized (caller divides by n where needed).
void fft_inplace(std::vector<cplx>& data, bool inverse);

/// Real-input FFT: returns the n/2+1 nonnegative-frequency bins.
std::vector<cplx> rfft(const std::vector<double>& x);

/// Inverse of rfft for even n: reconstructs the length-n real signal,
/// using the Hermitian extension of the half spectrum. Includes the 1/n scale.
std::vector<double> irfft(const std::vector<cplx>& spec, std::size_t n);

/// Adjoint of rfft as a real-linear map R^n -> R^(2*(n/2+1)):
/// given cotangents on (re, im) of each bin, accumulates the cotangent on x.
std::vector<double> rfft_adjoint(const std::vector<cplx>& grad_bins, std::size_t n);

/// Adjoint of irfft: cotangent on the output signal -> cotangent on the bins.
/// The imaginary parts of bin 0 and the Nyquist bin receive zero (they do not
/// affect the forward output).
std::vector<cplx> irfft_adjoint(const std::vector<double>& grad_x);

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace avsep
