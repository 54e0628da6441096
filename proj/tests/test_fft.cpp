#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "darcn/fft.hpp"
#include "darcn/rng.hpp"

using namespace darcn;

namespace {

// Independent O(n^2) reference transform; kept deliberately naive.
std::vector<cplx> dft_direct(const std::vector<cplx>& x) {
  const std::size_t n = x.size();
  std::vector<cplx> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cplx acc{0.0, 0.0};
    for (std::size_t j = 0; j < n; ++j) {
      double ang = -2.0 * M_PI * double(j * k % n) / double(n);
      acc += x[j] * cplx{std::cos(ang), std::sin(ang)};
    }
    out[k] = acc;
  }
  return out;
}

double max_abs_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::vector<cplx> random_signal(std::size_t n, Rng& rng) {
  std::vector<cplx> x(n);
  for (auto& v : x) v = cplx{rng.normal(), rng.normal()};
  return x;
}

}  // namespace

TEST_CASE("fft matches the direct transform across mixed sizes") {
  Rng rng(101);
  for (std::size_t n : {1, 2, 3, 4, 5, 8, 10, 16, 20, 25, 40, 64, 100, 160, 320}) {
    std::vector<cplx> x = random_signal(n, rng);
    double err = max_abs_diff(fft(x), dft_direct(x));
    INFO("n = ", n);
    CHECK(err <= 1e-9);
  }
}

TEST_CASE("fft of an impulse is flat") {
  std::vector<cplx> x(320, cplx{0.0, 0.0});
  x[0] = cplx{1.0, 0.0};
  for (const cplx& v : fft(x)) {
    CHECK(v.real() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(v.imag() == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("fft is linear") {
  Rng rng(102);
  std::vector<cplx> a = random_signal(320, rng);
  std::vector<cplx> b = random_signal(320, rng);
  std::vector<cplx> mix(320);
  for (std::size_t i = 0; i < 320; ++i) mix[i] = 2.0 * a[i] - 0.5 * b[i];
  std::vector<cplx> fa = fft(a), fb = fft(b), fm = fft(mix);
  double err = 0.0;
  for (std::size_t i = 0; i < 320; ++i) err = std::max(err, std::abs(fm[i] - (2.0 * fa[i] - 0.5 * fb[i])));
  CHECK(err <= 1e-9);
}

TEST_CASE("ifft inverts fft") {
  Rng rng(103);
  for (std::size_t n : {5, 64, 320}) {
    std::vector<cplx> x = random_signal(n, rng);
    double err = max_abs_diff(ifft(fft(x)), x);
    CHECK(err <= 1e-12);
  }
}

TEST_CASE("rfft matches the full transform on real input") {
  Rng rng(104);
  std::vector<double> x(320);
  for (double& v : x) v = rng.normal();
  std::vector<cplx> full(x.begin(), x.end());
  std::vector<cplx> ref = dft_direct(full);
  std::vector<cplx> half = rfft(x);
  REQUIRE(half.size() == 161);
  for (std::size_t k = 0; k < half.size(); ++k) CHECK(std::abs(half[k] - ref[k]) <= 1e-9);
}

TEST_CASE("irfft inverts rfft") {
  Rng rng(105);
  std::vector<double> x(320);
  for (double& v : x) v = rng.normal();
  std::vector<double> back = irfft(rfft(x), 320);
  REQUIRE(back.size() == x.size());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::fabs(back[i] - x[i]) <= 1e-12);
}

TEST_CASE("single-bin tone lands in its bin") {
  const std::size_t n = 320;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::cos(2.0 * M_PI * 20.0 * double(i) / double(n));
  std::vector<cplx> half = rfft(x);
  std::size_t peak = 0;
  for (std::size_t k = 1; k < half.size(); ++k)
    if (std::abs(half[k]) > std::abs(half[peak])) peak = k;
  CHECK(peak == 20);
  CHECK(std::abs(half[20]) == doctest::Approx(n / 2.0).epsilon(1e-9));
}
