#include "darcn/fft.hpp"

#include <cmath>

#include "darcn/errors.hpp"

namespace darcn {

namespace {

std::size_t smallest_factor(std::size_t n) {
  if (n % 2 == 0) return 2;
  for (std::size_t p = 3; p * p <= n; p += 2)
    if (n % p == 0) return p;
  return n;
}

// out[0..n) <- transform of in[0], in[stride], ... in[(n-1)*stride].
// tw is the root-size twiddle table; tw_step = N_root / n.
void fft_rec(const cplx* in, cplx* out, std::size_t n, std::size_t stride,
             const std::vector<cplx>& tw, std::size_t tw_step) {
  if (n == 1) {
    out[0] = in[0];
    return;
  }
  const std::size_t r = smallest_factor(n);
  const std::size_t m = n / r;
  if (m == 1) {
    // Direct transform of a prime factor.
    const std::size_t N = tw.size();
    for (std::size_t k = 0; k < n; ++k) {
      cplx acc(0.0, 0.0);
      for (std::size_t j = 0; j < n; ++j) acc += tw[(j * k * tw_step) % N] * in[j * stride];
      out[k] = acc;
    }
    return;
  }
  for (std::size_t j = 0; j < r; ++j)
    fft_rec(in + j * stride, out + j * m, m, stride * r, tw, tw_step * r);

  const std::size_t N = tw.size();
  std::vector<cplx> mixed(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t q = k % m;
    cplx acc(0.0, 0.0);
    for (std::size_t j = 0; j < r; ++j) acc += tw[(j * k * tw_step) % N] * out[j * m + q];
    mixed[k] = acc;
  }
  for (std::size_t k = 0; k < n; ++k) out[k] = mixed[k];
}

}  // namespace

void fft_inplace(std::vector<cplx>& a) {
  const std::size_t n = a.size();
  if (n == 0) throw ContractError("fft: empty input");
  if (n == 1) return;
  std::vector<cplx> tw(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double ang = -2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n);
    tw[k] = cplx(std::cos(ang), std::sin(ang));
  }
  std::vector<cplx> out(n);
  fft_rec(a.data(), out.data(), n, 1, tw, 1);
  a.swap(out);
}

void ifft_inplace(std::vector<cplx>& a) {
  for (cplx& v : a) v = std::conj(v);
  fft_inplace(a);
  const double inv = 1.0 / static_cast<double>(a.size());
  for (cplx& v : a) v = std::conj(v) * inv;
}

std::vector<cplx> rfft(const std::vector<double>& x) {
  if (x.size() % 2 != 0) throw ContractError("rfft: length must be even");
  std::vector<cplx> full(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) full[i] = cplx(x[i], 0.0);
  fft_inplace(full);
  full.resize(x.size() / 2 + 1);
  return full;
}

std::vector<double> irfft(const std::vector<cplx>& half, std::size_t n) {
  if (half.size() != n / 2 + 1 || n % 2 != 0)
    throw ContractError("irfft: " + std::to_string(half.size()) + " bins do not match length " +
                        std::to_string(n));
  std::vector<cplx> full(n);
  for (std::size_t k = 0; k < half.size(); ++k) full[k] = half[k];
  for (std::size_t k = half.size(); k < n; ++k) full[k] = std::conj(half[n - k]);
  ifft_inplace(full);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = full[i].real();
  return out;
}

std::vector<cplx> fft(std::vector<cplx> a) {
  fft_inplace(a);
  return a;
}

std::vector<cplx> ifft(std::vector<cplx> a) {
  ifft_inplace(a);
  return a;
}

}  // namespace darcn
