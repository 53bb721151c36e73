#include <cmath>
#include <complex>
#include <numbers>

#include "doctest.h"
#include "fracbem/kernels.hpp"

using namespace fracbem;
using cplx = std::complex<double>;

// Reference values computed with 30-digit arithmetic (mpmath), frozen here.
namespace {
constexpr double J0_1 = 0.76519768655796655;
constexpr double Y0_1 = 0.088256964215676958;
constexpr double J0_50 = 0.055812327669251815;
constexpr double Y0_50 = -0.098064995470077079;
constexpr double J0_9000 = -0.0010271344749786385;
constexpr double Y0_9000 = 0.0083474861439965975;
constexpr double K0_01 = 2.4270690247020166;
constexpr double K0_1 = 0.42102443824070833;
constexpr double K0_5 = 0.0036910983340425943;
constexpr double I0_1 = 1.2660658777520083;
constexpr double I0_37 = 8.7386175241693956;
}  // namespace

TEST_CASE("cylinder functions match high-precision references") {
  CHECK(bessel_j0(1.0) == doctest::Approx(J0_1).epsilon(1e-12));
  CHECK(bessel_y0(1.0) == doctest::Approx(Y0_1).epsilon(1e-12));
  CHECK(std::fabs(bessel_j0(50.0) - J0_50) < 1e-9);
  CHECK(std::fabs(bessel_y0(50.0) - Y0_50) < 1e-9);
  CHECK(std::fabs(bessel_j0(9000.0) - J0_9000) < 1e-9);
  CHECK(std::fabs(bessel_y0(9000.0) - Y0_9000) < 1e-9);
  CHECK(bessel_k0(0.1) == doctest::Approx(K0_01).epsilon(1e-12));
  CHECK(bessel_k0(1.0) == doctest::Approx(K0_1).epsilon(1e-12));
  CHECK(bessel_k0(5.0) == doctest::Approx(K0_5).epsilon(1e-12));
  CHECK(bessel_i0(1.0) == doctest::Approx(I0_1).epsilon(1e-12));
  CHECK(bessel_i0(3.7) == doctest::Approx(I0_37).epsilon(1e-12));

  auto [j, y] = bessel_j0_y0(1.0);
  CHECK(j == doctest::Approx(J0_1).epsilon(1e-13));
  CHECK(y == doctest::Approx(Y0_1).epsilon(1e-13));
}

TEST_CASE("J0 and Y0 satisfy the Wronskian identity") {
  // J0(x) Y0'(x) - J0'(x) Y0(x) = 2/(pi x), derivatives by central differences
  for (double x : {0.4, 1.7, 6.3, 22.0}) {
    double h = 1e-5 * std::max(1.0, x);
    double dj = (bessel_j0(x + h) - bessel_j0(x - h)) / (2 * h);
    double dy = (bessel_y0(x + h) - bessel_y0(x - h)) / (2 * h);
    double w = bessel_j0(x) * dy - dj * bessel_y0(x);
    CHECK(w == doctest::Approx(2.0 / (std::numbers::pi * x)).epsilon(1e-6));
  }
}

TEST_CASE("K0 obeys its small-argument logarithm expansion") {
  // K0(z) = -ln(z/2) - gamma + O(z^2 ln z)
  constexpr double gamma = 0.57721566490153286;
  double z = 1e-5;
  CHECK(bessel_k0(z) == doctest::Approx(-std::log(z / 2) - gamma).epsilon(1e-9));
}

TEST_CASE("kernel values follow the fundamental solutions") {
  double k = 3.0, r = 2.0;
  cplx v3 = eval_kernel(KernelSpec::helmholtz(3, k), r);
  cplx want3 = std::exp(cplx(0.0, k * r)) / (4 * std::numbers::pi * r);
  CHECK(std::abs(v3 - want3) < 1e-14);

  cplx v2 = eval_kernel(KernelSpec::helmholtz(2, 1.0), 1.0);
  cplx want2 = cplx(0.0, 0.25) * cplx(J0_1, Y0_1);
  CHECK(std::abs(v2 - want2) < 1e-12);

  double m3 = eval_kernel(KernelSpec::modified(3, k), r).real();
  CHECK(m3 == doctest::Approx(std::exp(-k * r) / (4 * std::numbers::pi * r)).epsilon(1e-14));
  double m2 = eval_kernel(KernelSpec::modified(2, 5.0), 1.0).real();
  CHECK(m2 == doctest::Approx(K0_5 / (2 * std::numbers::pi)).epsilon(1e-12));
}

TEST_CASE("2D kernel matches its small-argument limit") {
  // (i/4) H0(z) = i/4 + (ln(2/z) - gamma)/(2 pi) + O(z^2 ln z)
  constexpr double gamma = 0.57721566490153286;
  double z = 1e-4;
  cplx v = eval_kernel(KernelSpec::helmholtz(2, 1.0), z);
  CHECK(std::fabs(v.imag() - 0.25) < 1e-6);
  CHECK(v.real() == doctest::Approx((std::log(2.0 / z) - gamma) / (2 * std::numbers::pi)).epsilon(1e-7));
}

TEST_CASE("kernel spec validates its arguments") {
  CHECK_THROWS_AS(KernelSpec::helmholtz(4, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(KernelSpec::helmholtz(2, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(eval_kernel(KernelSpec::helmholtz(2, 1.0), 0.0), std::domain_error);
  CHECK(KernelSpec::helmholtz(2, 4.0).wavelength() ==
        doctest::Approx(std::numbers::pi / 2).epsilon(1e-15));
}
