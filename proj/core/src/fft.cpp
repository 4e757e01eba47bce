// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avsep/fft.h"

#include <cmath>

#include "avsep/error.h"

namespace avsep {

void fft_inplace(std::vector<cplx>& data, bool inverse) {
  const std::size_t n = data.size();
  AVSEP_CHECK(is_power_of_two(n), "fft size must be a power of two, got " << n);
  if (n <= 1) return;

  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }

  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * M_PI / static_cast<double>(len);
    const cplx wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cplx w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const cplx u = data[i + k];
        const cplx v = data[i + k + len / 2] * w;
        data[i + k] = u + v;
        data[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

std::vector<cplx> rfft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<cplx> buf(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = cplx(x[i], 0.0);
  fft_inplace(buf, /*inverse=*/false);
  buf.resize(n / 2 + 1);
  return buf;
}

std::vector<double> irfft(const std::vector<cplx>& spec, std::size_t n) {
  AVSEP_CHECK(spec.size() == n / 2 + 1,
              "irfft: expected " << n / 2 + 1 << " bins, got " << spec.size());
  std::vector<cplx> buf(n);
  buf[0] = cplx(spec[0].real(), 0.0);
  for (std::size_t k = 1; k < n / 2; ++k) {
    buf[k] = spec[k];
    buf[n - k] = std::conj(spec[k]);
  }
  buf[n / 2] = cplx(spec[n / 2].real(), 0.0);
  fft_inplace(buf, /*inverse=*/true);
  std::vector<double> out(n);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = buf[i].real() * scale;
  return out;
}

std::vector<double> rfft_adjoint(const std::vector<cplx>& grad_bins, std::size_t n) {
  // Forward map: bins[k] = sum_n x[n] e^{-i 2 pi k n / N}, k = 0..N/2.
  // Adjoint: xgrad[n] = sum_k (gre[k] cos(2 pi k n / N) - gim[k] sin(...)),
  // i.e. Re(unnormalized IDFT of the half spectrum zero-padded to N bins).
  AVSEP_CHECK(grad_bins.size() == n / 2 + 1,
              "rfft_adjoint: expected " << n / 2 + 1 << " bins");
  std::vector<cplx> buf(n, cplx(0.0, 0.0));
  for (std::size_t k = 0; k <= n / 2; ++k) buf[k] = grad_bins[k];
  fft_inplace(buf, /*inverse=*/true);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = buf[i].real();
  return out;
}

std::vector<cplx> irfft_adjoint(const std::vector<double>& grad_x) {
  // Transpose of the real-linear irfft map. For bins 1..N/2-1 the Hermitian
  // mirroring doubles their contribution; bins 0 and N/2 are real-only.
  const std::size_t n = grad_x.size();
  std::vector<cplx> buf(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = cplx(grad_x[i], 0.0);
  fft_inplace(buf, /*inverse=*/false);
  const double scale = 1.0 / static_cast<double>(n);
  std::vector<cplx> out(n / 2 + 1);
  out[0] = cplx(buf[0].real() * scale, 0.0);
  for (std::size_t k = 1; k < n / 2; ++k) out[k] = buf[k] * (2.0 * scale);
  out[n / 2] = cplx(buf[n / 2].real() * scale, 0.0);
  return out;
}

}  // namespace avsep
