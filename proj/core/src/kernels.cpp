#include "fracbem/kernels.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fracbem {

namespace {

constexpr double kEulerGamma = 0.57721566490153286060651209008240243;
constexpr double kSeriesSplit = 12.0;  // power series below, asymptotics above

// Hankel expansion coefficients c_t = ((2t-1)!!)^2 / (t! 8^t) for order zero.
// P0 ~ 1 - c2/x^2 + c4/x^4 - ..., Q0 ~ -c1/x + c3/x^3 - ...,
// K0 ~ sqrt(pi/2x) e^{-x} (1 - c1/x + c2/x^2 - ...).
constexpr int kNumHankel = 19;
double hankel_c(int t) {
  static const auto table = [] {
    std::array<double, kNumHankel> c{};
    c[0] = 1.0;
    for (int t = 1; t < kNumHankel; ++t) {
      double odd = 2.0 * t - 1.0;
      c[t] = c[t - 1] * odd * odd / (8.0 * t);
    }
    return c;
  }();
  return table[static_cast<std::size_t>(t)];
}

struct CosSin {
  double c, s;
};

// cos(x - pi/4), sin(x - pi/4) without forming the difference explicitly
CosSin phase(double x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440084436210485;
  double c = std::cos(x), s = std::sin(x);
  return {inv_sqrt2 * (c + s), inv_sqrt2 * (s - c)};
}

// Asymptotic amplitude sums; terms are added until they stop decreasing.
std::pair<double, double> hankel_pq(double x) {
  double x2 = x * x;
  double p = 1.0, q = -hankel_c(1) / x;
  double pow2 = x2;  // x^{2m}
  double prev_p = std::abs(p), prev_q = std::abs(q);
  for (int m = 1; 2 * m + 1 < kNumHankel; ++m) {
    double tp = ((m % 2) ? -1.0 : 1.0) * hankel_c(2 * m) / pow2;
    double tq = ((m % 2) ? 1.0 : -1.0) * hankel_c(2 * m + 1) / (pow2 * x);
    if (std::abs(tp) >= prev_p || std::abs(tq) >= prev_q) break;
    p += tp;
    q += tq;
    prev_p = std::abs(tp);
    prev_q = std::abs(tq);
    pow2 *= x2;
  }
  return {p, q};
}

}  // namespace

KernelSpec KernelSpec::helmholtz(int ambient, double k) {
  if (ambient != 2 && ambient != 3) throw std::invalid_argument("kernel ambient dimension must be 2 or 3");
  if (!(k > 0)) throw std::invalid_argument("wavenumber must be positive");
  return {ambient, KernelMode::helmholtz, k};
}

KernelSpec KernelSpec::modified(int ambient, double kappa) {
  if (ambient != 2 && ambient != 3) throw std::invalid_argument("kernel ambient dimension must be 2 or 3");
  if (!(kappa > 0)) throw std::invalid_argument("decay parameter must be positive");
  return {ambient, KernelMode::modified, kappa};
}

double KernelSpec::wavelength() const { return 2.0 * std::numbers::pi / param; }

double bessel_j0(double x) {
  x = std::abs(x);
  if (x < kSeriesSplit) {
    double q = 0.25 * x * x;
    double term = 1.0, sum = 1.0;
    for (int m = 1; m <= 40; ++m) {
      term *= -q / (static_cast<double>(m) * m);
      sum += term;
      if (std::abs(term) < 1e-19 * (1.0 + std::abs(sum))) break;
    }
    return sum;
  }
  auto [p, q] = hankel_pq(x);
  auto [c, s] = phase(x);
  return std::sqrt(2.0 / (std::numbers::pi * x)) * (p * c - q * s);
}

double bessel_y0(double x) {
  if (!(x > 0)) throw std::domain_error("bessel_y0 requires a positive argument");
  if (x < kSeriesSplit) {
    double q = 0.25 * x * x;
    double term = 1.0, j0 = 1.0;
    double harmonic = 0.0, series = 0.0;
    for (int m = 1; m <= 40; ++m) {
      term *= -q / (static_cast<double>(m) * m);
      j0 += term;
      harmonic += 1.0 / m;
      series += -term * harmonic;  // sum (-1)^{m+1} H_m q^m / (m!)^2
      if (std::abs(term) < 1e-19 * (1.0 + std::abs(j0))) break;
    }
    return (2.0 / std::numbers::pi) * ((std::log(0.5 * x) + kEulerGamma) * j0 + series);
  }
  auto [p, q] = hankel_pq(x);
  auto [c, s] = phase(x);
  return std::sqrt(2.0 / (std::numbers::pi * x)) * (p * s + q * c);
}

std::pair<double, double> bessel_j0_y0(double x) {
  if (!(x > 0)) throw std::domain_error("bessel_j0_y0 requires a positive argument");
  if (x < kSeriesSplit) return {bessel_j0(x), bessel_y0(x)};
  auto [p, q] = hankel_pq(x);
  auto [c, s] = phase(x);
  double amp = std::sqrt(2.0 / (std::numbers::pi * x));
  return {amp * (p * c - q * s), amp * (p * s + q * c)};
}

double bessel_i0(double x) {
  x = std::abs(x);
  double q = 0.25 * x * x;
  double term = 1.0, sum = 1.0;
  for (int m = 1; m <= 120; ++m) {
    term *= q / (static_cast<double>(m) * m);
    sum += term;
    if (term < 1e-19 * sum) break;
  }
  return sum;
}

double bessel_k0(double x) {
  if (!(x > 0)) throw std::domain_error("bessel_k0 requires a positive argument");
  if (x < 8.0) {
    double q = 0.25 * x * x;
    double term = 1.0, i0 = 1.0;
    double harmonic = 0.0, series = 0.0;
    for (int m = 1; m <= 60; ++m) {
      term *= q / (static_cast<double>(m) * m);
      i0 += term;
      harmonic += 1.0 / m;
      series += term * harmonic;
      if (term < 1e-19 * i0) break;
    }
    return -(std::log(0.5 * x) + kEulerGamma) * i0 + series;
  }
  double sum = 1.0, prev = 1.0;
  double pow = 1.0;
  for (int t = 1; t < kNumHankel; ++t) {
    pow *= -x;
    double term = hankel_c(t) / pow;
    if (std::abs(term) >= prev) break;
    sum += term;
    prev = std::abs(term);
  }
  return std::sqrt(0.5 * std::numbers::pi / x) * std::exp(-x) * sum;
}

std::complex<double> eval_kernel(const KernelSpec& spec, double r) {
  if (!(r > 0)) throw std::domain_error("kernel distance must be positive");
  double z = spec.param * r;
  constexpr double inv4pi = 1.0 / (4.0 * std::numbers::pi);
  if (spec.mode == KernelMode::helmholtz) {
    if (spec.ambient == 3) {
      return std::polar(inv4pi / r, z);
    }
    auto [j0, y0] = bessel_j0_y0(z);
    return {-0.25 * y0, 0.25 * j0};
  }
  if (spec.ambient == 3) return {inv4pi * std::exp(-z) / r, 0.0};
  return {bessel_k0(z) / (2.0 * std::numbers::pi), 0.0};
}

}  // namespace fracbem
