#pragma once

#include <complex>
#include <utility>

// Fundamental solutions used throughout: the Helmholtz kernel
//   n=3:  e^{ikr}/(4 pi r)          n=2:  (i/4) H_0^{(1)}(kr)
// and the kernel of the positive-definite "modified" operator (decay kappa)
//   n=3:  e^{-kappa r}/(4 pi r)     n=2:  (1/2 pi) K_0(kappa r).
// The cylinder functions below are evaluated by power series up to the
// series/asymptotic split and by Hankel asymptotic expansions beyond it,
// giving absolute error below 1e-10 over the argument range we use (<= 1e4).

namespace fracbem {

enum class KernelMode { helmholtz, modified };

struct KernelSpec {
  int ambient = 3;  // space dimension n, 2 or 3
  KernelMode mode = KernelMode::helmholtz;
  double param = 1.0;  // wavenumber k, or decay kappa in modified mode

  static KernelSpec helmholtz(int ambient, double k);
  static KernelSpec modified(int ambient, double kappa);

  // wavelength used by the quadrature point policy
  double wavelength() const;
};

double bessel_j0(double x);
double bessel_y0(double x);            // requires x > 0
std::pair<double, double> bessel_j0_y0(double x);
double bessel_i0(double x);
double bessel_k0(double x);            // requires x > 0

// Kernel value at distance r > 0 between evaluation and integration point.
std::complex<double> eval_kernel(const KernelSpec& spec, double r);

}  // namespace fracbem
