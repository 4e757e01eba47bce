// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avsep/fft.h"

#include <cmath>
#include <vector>

#include "avsep/error.h"
#include "avsep/rng.h"
#include "doctest.h"

using avsep::cplx;
using avsep::Rng;

namespace {

// Quadratic-time DFT, the independent oracle for the radix-2 implementation.
std::vector<cplx> naive_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<cplx> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cplx acc(0.0, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const double ang = -2.0 * M_PI * static_cast<double>(k) * static_cast<double>(j) /
                         static_cast<double>(n);
      acc += x[j] * cplx(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

std::vector<double> random_signal(Rng& rng, std::size_t n) {
  std::vector<double> x(n);
  for (double& v : x) v = rng.normal();
  return x;
}

}  // namespace

TEST_CASE("rfft matches the quadratic DFT oracle") {
  Rng rng(42);
  for (std::size_t n : {8u, 64u, 256u}) {
    const std::vector<double> x = random_signal(rng, n);
    const std::vector<cplx> got = avsep::rfft(x);
    const std::vector<cplx> want = naive_dft(x);
    REQUIRE(got.size() == n / 2 + 1);
    for (std::size_t k = 0; k <= n / 2; ++k) {
      CHECK(std::abs(got[k] - want[k]) < 1e-9 * static_cast<double>(n));
    }
  }
}

TEST_CASE("irfft inverts rfft to double precision") {
  Rng rng(7);
  for (std::size_t n : {16u, 128u, 512u}) {
    const std::vector<double> x = random_signal(rng, n);
    const std::vector<double> back = avsep::irfft(avsep::rfft(x), n);
    double max_err = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_err = std::max(max_err, std::fabs(back[i] - x[i]));
    CHECK(max_err < 1e-12);
  }
}

TEST_CASE("fft_inplace rejects non-power-of-two sizes") {
  std::vector<cplx> buf(12);
  CHECK_THROWS_AS(avsep::fft_inplace(buf, false), avsep::ValidationError);
}

TEST_CASE("Parseval energy identity for the half spectrum") {
  Rng rng(3);
  const std::size_t n = 256;
  const std::vector<double> x = random_signal(rng, n);
  const std::vector<cplx> bins = avsep::rfft(x);
  double time_energy = 0.0;
  for (double v : x) time_energy += v * v;
  // One-sided sum: interior bins appear twice in the full spectrum.
  double freq_energy = std::norm(bins[0]) + std::norm(bins[n / 2]);
  for (std::size_t k = 1; k < n / 2; ++k) freq_energy += 2.0 * std::norm(bins[k]);
  freq_energy /= static_cast<double>(n);
  CHECK(std::fabs(time_energy - freq_energy) < 1e-9 * time_energy);
}

TEST_CASE("rfft_adjoint satisfies the dot-product pairing") {
  // <rfft(x), g> under the real pairing sum(re*re + im*im) must equal
  // <x, rfft_adjoint(g)> for arbitrary cotangents g.
  Rng rng(11);
  const std::size_t n = 64;
  const std::vector<double> x = random_signal(rng, n);
  std::vector<cplx> g(n / 2 + 1);
  for (auto& v : g) v = cplx(rng.normal(), rng.normal());

  const std::vector<cplx> fx = avsep::rfft(x);
  double lhs = 0.0;
  for (std::size_t k = 0; k <= n / 2; ++k) {
    lhs += fx[k].real() * g[k].real() + fx[k].imag() * g[k].imag();
  }
  const std::vector<double> adj = avsep::rfft_adjoint(g, n);
  double rhs = 0.0;
  for (std::size_t i = 0; i < n; ++i) rhs += x[i] * adj[i];
  CHECK(std::fabs(lhs - rhs) < 1e-9 * std::max(1.0, std::fabs(lhs)));
}

TEST_CASE("irfft_adjoint satisfies the dot-product pairing") {
  // Valid half spectra have real DC and Nyquist bins; the adjoint mirrors
  // that by zeroing those imaginary components.
  Rng rng(13);
  const std::size_t n = 64;
  std::vector<cplx> s(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) s[k] = cplx(rng.normal(), rng.normal());
  s[0] = cplx(s[0].real(), 0.0);
  s[n / 2] = cplx(s[n / 2].real(), 0.0);
  const std::vector<double> g = random_signal(rng, n);

  const std::vector<double> y = avsep::irfft(s, n);
  double lhs = 0.0;
  for (std::size_t i = 0; i < n; ++i) lhs += y[i] * g[i];

  const std::vector<cplx> adj = avsep::irfft_adjoint(g);
  double rhs = 0.0;
  for (std::size_t k = 0; k <= n / 2; ++k) {
    rhs += s[k].real() * adj[k].real() + s[k].imag() * adj[k].imag();
  }
  CHECK(std::fabs(lhs - rhs) < 1e-9 * std::max(1.0, std::fabs(lhs)));
  CHECK(adj[0].imag() == 0.0);
  CHECK(adj[n / 2].imag() == 0.0);
}
