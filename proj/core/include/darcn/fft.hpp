#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace darcn {

using cplx = std::complex<double>;

// In-place forward transform, no scaling. Mixed-radix decimation in time:
// composite lengths split on their smallest prime factor, so 320 = 2^6 * 5
// runs as radix-2/5 stages; a prime length degrades to a direct transform of
// that factor.
void fft_inplace(std::vector<cplx>& a);

// Inverse transform, scaled by 1/N.
void ifft_inplace(std::vector<cplx>& a);

std::vector<cplx> fft(std::vector<cplx> a);
std::vector<cplx> ifft(std::vector<cplx> a);

// Real input, bins 0..N/2 (N must be even).
std::vector<cplx> rfft(const std::vector<double>& x);

// Inverse of rfft: expands conjugate symmetry back to length n.
std::vector<double> irfft(const std::vector<cplx>& half, std::size_t n);

}  // namespace darcn
