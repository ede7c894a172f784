#pragma once

// Polynomial helpers on top of a plain DFT: evaluation on a scaled circle of
// roots of unity, and convolution.

#include <cstddef>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "cuefield/core.hpp"

namespace cuefield {

inline bool is_power_of_two(std::size_t m) { return m != 0 && (m & (m - 1)) == 0; }

inline std::size_t next_power_of_two(std::size_t m) {
  std::size_t p = 1;
  while (p < m) p <<= 1;
  return p;
}

/// Values sum_k c_k (r w_j)^k at w_j = e^{2 pi i j / M}, j = 0..M-1.
/// Coefficients beyond M are folded modulo M, which is exact on the grid.
inline std::vector<cplx> eval_on_circle(const std::vector<cplx>& coeffs, double radius,
                                        std::size_t m) {
  std::vector<cplx> folded(m, cplx(0.0, 0.0));
  double rk = 1.0;
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    folded[k % m] += coeffs[k] * rk;
    rk *= radius;
  }
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::Unscaled);
  std::vector<cplx> out;
  fft.inv(out, folded);
  return out;
}

/// Product of two polynomials given by coefficient vectors.
inline std::vector<cplx> poly_multiply(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  if (a.empty() || b.empty()) return {};
  std::size_t n = a.size() + b.size() - 1;
  std::vector<cplx> out(n, cplx(0.0, 0.0));
  if (std::min(a.size(), b.size()) <= 32) {
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
  }
  std::size_t m = next_power_of_two(n);
  std::vector<cplx> fa(a), fb(b);
  fa.resize(m, cplx(0.0, 0.0));
  fb.resize(m, cplx(0.0, 0.0));
  Eigen::FFT<double> fft;
  std::vector<cplx> ta, tb;
  fft.fwd(ta, fa);
  fft.fwd(tb, fb);
  for (std::size_t i = 0; i < m; ++i) ta[i] *= tb[i];
  std::vector<cplx> prod;
  fft.inv(prod, ta);
  std::copy(prod.begin(), prod.begin() + static_cast<std::ptrdiff_t>(n), out.begin());
  return out;
}

}  // namespace cuefield
