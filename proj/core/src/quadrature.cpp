#include "fracbem/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace fracbem {

namespace {

constexpr double pi = 3.14159265358979323846;
constexpr double euler_gamma = 0.57721566490153286061;
using cplx = std::complex<double>;

} // namespace

const QuadratureRule& gauss_legendre(int n) {
  if (n < 1 || n > 64) throw std::invalid_argument("gauss_legendre order must lie in [1, 64]");
  static std::array<QuadratureRule, 65> cache;
  QuadratureRule& rule = cache[static_cast<std::size_t>(n)];
  if (!rule.nodes.empty()) return rule;

  std::vector<double> xs(static_cast<std::size_t>(n)), ws(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= n; ++j) {
        double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    xs[static_cast<std::size_t>(i)] = x;
    ws[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  // enforce symmetry exactly, nodes ascending
  for (int i = 0; i < n / 2; ++i) {
    double a = 0.5 * (xs[static_cast<std::size_t>(i)] - xs[static_cast<std::size_t>(n - 1 - i)]);
    xs[static_cast<std::size_t>(i)] = a;
    xs[static_cast<std::size_t>(n - 1 - i)] = -a;
    double w = 0.5 * (ws[static_cast<std::size_t>(i)] + ws[static_cast<std::size_t>(n - 1 - i)]);
    ws[static_cast<std::size_t>(i)] = w;
    ws[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  if (n % 2 == 1) xs[static_cast<std::size_t>(n / 2)] = 0.0;
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  rule.nodes.reserve(order.size());
  rule.weights.reserve(order.size());
  for (std::size_t i : order) {
    rule.nodes.push_back(Vec2{xs[i], 0.0});
    rule.weights.push_back(ws[i]);
  }
  rule.exact_degree = 2 * n - 1;
  return rule;
}

const QuadratureRule& triangle_rule_7pt() {
  static QuadratureRule rule = [] {
    QuadratureRule r;
    r.nodes = {Vec2{0, 0}, Vec2{1, 0}, Vec2{0, 1},
               Vec2{0.5, 0}, Vec2{0.5, 0.5}, Vec2{0, 0.5},
               Vec2{1.0 / 3.0, 1.0 / 3.0}};
    r.weights = {3.0 / 120.0, 3.0 / 120.0, 3.0 / 120.0,
                 8.0 / 120.0, 8.0 / 120.0, 8.0 / 120.0,
                 27.0 / 120.0};
    r.exact_degree = 3;
    return r;
  }();
  return rule;
}

int points_per_axis(double h, double wavelength) {
  if (h <= 0 || wavelength <= 0) throw std::invalid_argument("points_per_axis needs positive h and wavelength");
  double q = std::ceil(20.0 * h / wavelength - 1e-12);
  // cap at the Gauss table; 64 nodes still resolve k*h well beyond 100
  return std::clamp(static_cast<int>(q), 3, 64);
}

int points_per_element(double h, double wavelength, int ambient) {
  if (ambient != 2 && ambient != 3) throw std::invalid_argument("ambient dimension must be 2 or 3");
  int q = points_per_axis(h, wavelength);
  return ambient == 2 ? q : q * q;
}

double exp_moment(int m, double kappa, double x) {
  if (x < 0 || kappa <= 0) throw std::invalid_argument("exp_moment needs x >= 0, kappa > 0");
  double t = kappa * x;
  switch (m) {
    case 0:
      return -std::expm1(-t) / kappa;
    case 1: {
      if (t >= 0.5) return (1.0 - std::exp(-t) * (1.0 + t)) / (kappa * kappa);
      double sum = 0, term = t * t / 2.0; // j = 2: t^2 (j-1)/j!
      for (int j = 2; j < 30; ++j) {
        sum += (j % 2 == 0 ? term : -term);
        term *= t * (double(j) / ((j + 1.0) * (j - 1.0))); // t^j (j-1)/j! -> t^{j+1} j/(j+1)!
        if (term < 1e-19) break;
      }
      return sum / (kappa * kappa);
    }
    case 2: {
      if (t >= 0.5) return (2.0 - std::exp(-t) * (2.0 + 2.0 * t + t * t)) / (kappa * kappa * kappa);
      double sum = 0, term = t * t * t / 3.0; // j = 3: t^3 (j-1)(j-2)/j!
      for (int j = 3; j < 30; ++j) {
        sum += (j % 2 == 1 ? term : -term);
        term *= t * (double(j) * (j - 1.0)) / ((j + 1.0) * (j - 1.0) * (j - 2.0));
        if (term < 1e-19) break;
      }
      return sum / (kappa * kappa * kappa);
    }
    default:
      throw std::invalid_argument("exp_moment supports m = 0, 1, 2");
  }
}

double exp_moment_interval(int m, double kappa, double a, double b) {
  if (b < a) return -exp_moment_interval(m, kappa, b, a);
  double w = b - a;
  double e = std::exp(-kappa * a);
  switch (m) {
    case 0:
      return e * exp_moment(0, kappa, w);
    case 1:
      return e * (a * exp_moment(0, kappa, w) + exp_moment(1, kappa, w));
    case 2:
      return e * (a * a * exp_moment(0, kappa, w) + 2.0 * a * exp_moment(1, kappa, w) + exp_moment(2, kappa, w));
    default:
      throw std::invalid_argument("exp_moment_interval supports m = 0, 1, 2");
  }
}

namespace {

// Series parts of the kernel antiderivatives on [0, b], valid for modest b.
// J0(z) = sum u_m z^{2m},  u_m = (-1)^m / (4^m (m!)^2)
// Y0(z) = (2/pi)[(ln(z/2)+gamma) J0(z) + sum_{m>=1} v_m z^{2m}],
//         v_m = (-1)^{m+1} H_m / (4^m (m!)^2)
// K0(z) = -(ln(z/2)+gamma) I0(z) + sum_{m>=1} |v_m| z^{2m} with alternation dropped.
cplx hankel_series_integral(double b, int weight) {
  double lb = std::log(0.5 * b) + euler_gamma;
  double um = 1.0, hm = 0.0;
  double zpow = (weight == 0) ? b : b * b;
  double sj = 0, sy_log = 0, sy_h = 0;
  for (int m = 0; m < 80; ++m) {
    double denom = (weight == 0) ? (2.0 * m + 1.0) : (2.0 * m + 2.0);
    double base = um * zpow / denom;
    sj += base;
    sy_log += base * (lb - 1.0 / denom);
    if (m >= 1) sy_h += -um * hm * zpow / denom; // v_m = -(-1)^m H_m/(4^m (m!)^2) = -u_m H_m
    double next = m + 1.0;
    um *= -1.0 / (4.0 * next * next);
    hm += 1.0 / next;
    zpow *= b * b;
    if (std::abs(base) < 1e-18 * (std::abs(sj) + 1e-30) && m > 4) break;
  }
  double int_y = (2.0 / pi) * (sy_log + sy_h);
  return cplx(0.0, 0.25) * sj - 0.25 * int_y;
}

double k0_series_integral(double b, int weight) {
  double lb = std::log(0.5 * b) + euler_gamma;
  double wm = 1.0, hm = 0.0;
  double zpow = (weight == 0) ? b : b * b;
  double acc = 0;
  for (int m = 0; m < 120; ++m) {
    double denom = (weight == 0) ? (2.0 * m + 1.0) : (2.0 * m + 2.0);
    double base = wm * zpow / denom;
    acc += -base * (lb - 1.0 / denom);
    if (m >= 1) acc += wm * hm * zpow / denom;
    double next = m + 1.0;
    wm *= 1.0 / (4.0 * next * next);
    hm += 1.0 / next;
    zpow *= b * b;
    if (base < 1e-18 * (std::abs(acc) + 1e-30) && m > 4) break;
  }
  return acc / (2.0 * pi);
}

constexpr double series_cut = 8.0;

template <typename F>
auto panel_tail(double from, double to, F&& f) -> decltype(f(0.0)) {
  decltype(f(0.0)) acc{};
  const QuadratureRule& g = gauss_legendre(32);
  int panels = std::max(1, static_cast<int>(std::ceil((to - from) / 4.0)));
  double len = (to - from) / panels;
  for (int p = 0; p < panels; ++p) {
    double a = from + p * len, mid = a + 0.5 * len, half = 0.5 * len;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
      acc += (half * g.weights[i]) * f(mid + half * g.nodes[i].x);
  }
  return acc;
}

} // namespace

std::complex<double> hankel_integral_0(double b) {
  if (b < 0) throw std::invalid_argument("hankel_integral_0 needs b >= 0");
  if (b == 0) return {};
  if (b <= series_cut) return hankel_series_integral(b, 0);
  static const cplx at_cut = hankel_series_integral(series_cut, 0);
  return at_cut + panel_tail(series_cut, b, [](double z) {
    auto [j0, y0] = bessel_j0_y0(z);
    return cplx(0.0, 0.25) * cplx(j0, y0);
  });
}

std::complex<double> hankel_integral_1(double b) {
  if (b < 0) throw std::invalid_argument("hankel_integral_1 needs b >= 0");
  if (b == 0) return {};
  if (b <= series_cut) return hankel_series_integral(b, 1);
  static const cplx at_cut = hankel_series_integral(series_cut, 1);
  return at_cut + panel_tail(series_cut, b, [](double z) {
    auto [j0, y0] = bessel_j0_y0(z);
    return z * cplx(0.0, 0.25) * cplx(j0, y0);
  });
}

double k0_integral_0(double b) {
  if (b < 0) throw std::invalid_argument("k0_integral_0 needs b >= 0");
  if (b == 0) return 0.0;
  if (b <= series_cut) return k0_series_integral(b, 0);
  static const double at_cut = k0_series_integral(series_cut, 0);
  double to = std::min(b, 760.0); // K0 underflows beyond
  return at_cut + panel_tail(series_cut, to, [](double z) { return bessel_k0(z) / (2.0 * pi); });
}

double k0_integral_1(double b) {
  if (b < 0) throw std::invalid_argument("k0_integral_1 needs b >= 0");
  if (b == 0) return 0.0;
  if (b <= series_cut) return k0_series_integral(b, 1);
  static const double at_cut = k0_series_integral(series_cut, 1);
  double to = std::min(b, 760.0);
  return at_cut + panel_tail(series_cut, to, [](double z) { return z * bessel_k0(z) / (2.0 * pi); });
}

namespace {

// primitive of (alpha + beta u) Phi(u) on 0 <= p <= q, by kernel mode
cplx weighted_piece(const KernelSpec& spec, double alpha, double beta, double p, double q) {
  double s = spec.param;
  if (spec.mode == KernelMode::helmholtz) {
    cplx i0 = (hankel_integral_0(s * q) - hankel_integral_0(s * p)) / s;
    cplx i1 = (hankel_integral_1(s * q) - hankel_integral_1(s * p)) / (s * s);
    return alpha * i0 + beta * i1;
  }
  double i0 = (k0_integral_0(s * q) - k0_integral_0(s * p)) / s;
  double i1 = (k0_integral_1(s * q) - k0_integral_1(s * p)) / (s * s);
  return cplx(alpha * i0 + beta * i1, 0.0);
}

// integral of m(u) Phi(|u|) over [p, q] where m(u) = alpha + beta u
cplx signed_piece(const KernelSpec& spec, double alpha, double beta, double p, double q) {
  if (q <= p) return {};
  cplx acc{};
  if (p < 0) {
    double hi = std::min(q, 0.0);
    // u in [p, hi] < 0: substitute u = -t
    acc += weighted_piece(spec, alpha, -beta, -hi, -p);
    p = hi;
  }
  if (q > p) acc += weighted_piece(spec, alpha, beta, std::max(p, 0.0), q);
  return acc;
}

} // namespace

std::complex<double> segment_pair_integral(const KernelSpec& spec,
                                           double a1, double b1,
                                           double a2, double b2) {
  if (spec.ambient != 2) throw std::invalid_argument("segment pairs require 2D ambient kernels");
  double len1 = b1 - a1, len2 = b2 - a2;
  if (len1 <= 0 || len2 <= 0) return {};
  double s0 = a1 - b2;
  double s1 = std::min(a1 - a2, b1 - b2);
  double s2 = std::max(a1 - a2, b1 - b2);
  double s3 = b1 - a2;
  cplx acc{};
  // rising leg: m(u) = u - s0
  acc += signed_piece(spec, -s0, 1.0, s0, s1);
  // plateau: m(u) = min(len1, len2)
  acc += signed_piece(spec, std::min(len1, len2), 0.0, s1, s2);
  // falling leg: m(u) = s3 - u
  acc += signed_piece(spec, s3, -1.0, s2, s3);
  return acc;
}

namespace {

double dist_point_segment2(const Vec2& p, const Vec2& a, const Vec2& b) {
  Vec2 ab{b.x - a.x, b.y - a.y};
  Vec2 ap{p.x - a.x, p.y - a.y};
  double t = (ap.x * ab.x + ap.y * ab.y) / (ab.x * ab.x + ab.y * ab.y);
  t = std::clamp(t, 0.0, 1.0);
  double dx = ap.x - t * ab.x, dy = ap.y - t * ab.y;
  return std::sqrt(dx * dx + dy * dy);
}

} // namespace

double cell_distance(const Cell& c, const Vec3& x) {
  if (std::holds_alternative<SegmentCell>(c)) {
    const auto& s = std::get<SegmentCell>(c);
    double dx = std::max({s.x0 - x.x, x.x - s.x1, 0.0});
    return std::sqrt(dx * dx + x.y * x.y + x.z * x.z);
  }
  if (std::holds_alternative<SquareCell>(c)) {
    const auto& s = std::get<SquareCell>(c);
    double dx = std::max({s.ll.x - x.x, x.x - (s.ll.x + s.side), 0.0});
    double dy = std::max({s.ll.y - x.y, x.y - (s.ll.y + s.side), 0.0});
    return std::sqrt(dx * dx + dy * dy + x.z * x.z);
  }
  const auto& t = std::get<TriangleCell>(c);
  Vec2 p{x.x, x.y};
  auto side = [&](const Vec2& a, const Vec2& b) {
    return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
  };
  double planar = 0.0;
  if (!(side(t.v0, t.v1) >= 0 && side(t.v1, t.v2) >= 0 && side(t.v2, t.v0) >= 0)) {
    planar = std::min({dist_point_segment2(p, t.v0, t.v1),
                       dist_point_segment2(p, t.v1, t.v2),
                       dist_point_segment2(p, t.v2, t.v0)});
  }
  return std::sqrt(planar * planar + x.z * x.z);
}

namespace {

cplx plain_cell_rule(const KernelSpec& spec, const Cell& c, const Vec3& x, int q) {
  cplx acc{};
  if (std::holds_alternative<SegmentCell>(c)) {
    const auto& s = std::get<SegmentCell>(c);
    const QuadratureRule& g = gauss_legendre(q);
    double mid = 0.5 * (s.x0 + s.x1), half = 0.5 * (s.x1 - s.x0);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      double y = mid + half * g.nodes[i].x;
      double dx = x.x - y;
      double r = std::sqrt(dx * dx + x.y * x.y + x.z * x.z);
      acc += (half * g.weights[i]) * eval_kernel(spec, r);
    }
    return acc;
  }
  if (std::holds_alternative<SquareCell>(c)) {
    const auto& s = std::get<SquareCell>(c);
    const QuadratureRule& g = gauss_legendre(q);
    double half = 0.5 * s.side;
    double cx = s.ll.x + half, cy = s.ll.y + half;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      double yi = cy + half * g.nodes[i].x;
      double wi = half * g.weights[i];
      for (std::size_t j = 0; j < g.nodes.size(); ++j) {
        double yj = cx + half * g.nodes[j].x;
        double dx = x.x - yj, dy = x.y - yi;
        double r = std::sqrt(dx * dx + dy * dy + x.z * x.z);
        acc += wi * (half * g.weights[j]) * eval_kernel(spec, r);
      }
    }
    return acc;
  }
  const auto& t = std::get<TriangleCell>(c);
  const QuadratureRule& rule = triangle_rule_7pt();
  double jac = (t.v1.x - t.v0.x) * (t.v2.y - t.v0.y) - (t.v1.y - t.v0.y) * (t.v2.x - t.v0.x);
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    double u = rule.nodes[i].x, v = rule.nodes[i].y;
    double yx = t.v0.x + u * (t.v1.x - t.v0.x) + v * (t.v2.x - t.v0.x);
    double yy = t.v0.y + u * (t.v1.y - t.v0.y) + v * (t.v2.y - t.v0.y);
    double dx = x.x - yx, dy = x.y - yy;
    double r = std::sqrt(dx * dx + dy * dy + x.z * x.z);
    acc += (rule.weights[i] * jac) * eval_kernel(spec, r);
  }
  return acc;
}

cplx graded_cell_integral(const KernelSpec& spec, const Cell& c, const Vec3& x, int q, int depth) {
  double diam = cell_diameter(c);
  if (depth >= 30 || cell_distance(c, x) >= diam) return plain_cell_rule(spec, c, x, q);
  cplx acc{};
  if (std::holds_alternative<SegmentCell>(c)) {
    const auto& s = std::get<SegmentCell>(c);
    double mid = 0.5 * (s.x0 + s.x1);
    acc += graded_cell_integral(spec, SegmentCell{s.x0, mid}, x, q, depth + 1);
    acc += graded_cell_integral(spec, SegmentCell{mid, s.x1}, x, q, depth + 1);
    return acc;
  }
  if (std::holds_alternative<SquareCell>(c)) {
    const auto& s = std::get<SquareCell>(c);
    double half = 0.5 * s.side;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        acc += graded_cell_integral(spec, SquareCell{Vec2{s.ll.x + i * half, s.ll.y + j * half}, half},
                                    x, q, depth + 1);
    return acc;
  }
  const auto& t = std::get<TriangleCell>(c);
  Vec2 m01{0.5 * (t.v0.x + t.v1.x), 0.5 * (t.v0.y + t.v1.y)};
  Vec2 m12{0.5 * (t.v1.x + t.v2.x), 0.5 * (t.v1.y + t.v2.y)};
  Vec2 m02{0.5 * (t.v0.x + t.v2.x), 0.5 * (t.v0.y + t.v2.y)};
  acc += graded_cell_integral(spec, TriangleCell{t.v0, m01, m02}, x, q, depth + 1);
  acc += graded_cell_integral(spec, TriangleCell{m01, t.v1, m12}, x, q, depth + 1);
  acc += graded_cell_integral(spec, TriangleCell{m02, m12, t.v2}, x, q, depth + 1);
  acc += graded_cell_integral(spec, TriangleCell{m01, m12, m02}, x, q, depth + 1);
  return acc;
}

} // namespace

std::complex<double> cell_integral(const KernelSpec& spec, const Cell& cell,
                                   const Vec3& target, int q) {
  return graded_cell_integral(spec, cell, target, q, 0);
}

std::complex<double> element_integral(const KernelSpec& spec, const Element& element,
                                      const Vec3& target) {
  int q = points_per_axis(element.diameter, spec.wavelength());
  cplx acc{};
  for (const Cell& c : element.parts) {
    if (cell_distance(c, target) < 1e-13 * std::max(1.0, cell_diameter(c)))
      throw std::invalid_argument("target lies on the element closure; singular case belongs to diagonal_entry");
    acc += graded_cell_integral(spec, c, target, q, 0);
  }
  return acc;
}

namespace {

// int over the polar angle of (e^{ikR(t)} - 1)/(ik) style wedges, split into
// panels so each panel sees a bounded phase change
template <typename F>
cplx theta_panels(double from, double to, double max_phase, F&& f) {
  cplx acc{};
  const QuadratureRule& g = gauss_legendre(32);
  int panels = std::max(1, static_cast<int>(std::ceil(max_phase / 6.0)));
  panels = std::min(panels, 200);
  double len = (to - from) / panels;
  for (int p = 0; p < panels; ++p) {
    double a = from + p * len, mid = a + 0.5 * len, half = 0.5 * len;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
      acc += (half * g.weights[i]) * f(mid + half * g.nodes[i].x);
  }
  return acc;
}

} // namespace

std::complex<double> diagonal_entry(const KernelSpec& spec, ElementKind kind, double size) {
  if (size <= 0) throw std::invalid_argument("diagonal_entry needs a positive cell size");
  const double s = spec.param;
  const bool helm = spec.mode == KernelMode::helmholtz;
  switch (kind) {
    case ElementKind::segment: {
      if (spec.ambient != 2) throw std::invalid_argument("segment cells live in 2D ambient space");
      double b = 0.5 * s * size;
      if (helm) return 2.0 / s * hankel_integral_0(b);
      return cplx(2.0 / s * k0_integral_0(b), 0.0);
    }
    case ElementKind::square: {
      if (spec.ambient != 3) throw std::invalid_argument("square cells live in 3D ambient space");
      double rho = 0.5 * size;
      auto val = theta_panels(0.0, 0.25 * pi, s * rho, [&](double t) -> cplx {
        double R = rho / std::cos(t);
        if (helm) return std::exp(cplx(0.0, s * R)) - 1.0;
        return cplx(1.0 - std::exp(-s * R), 0.0);
      });
      if (helm) return 2.0 / (pi * cplx(0.0, s)) * val;
      return 2.0 / (pi * s) * val;
    }
    case ElementKind::triangle: {
      if (spec.ambient != 3) throw std::invalid_argument("triangle cells live in 3D ambient space");
      double rho = size / (2.0 * std::sqrt(3.0)); // inradius of an equilateral triangle
      auto val = theta_panels(0.0, pi / 3.0, 2.0 * s * rho, [&](double t) -> cplx {
        double R = rho / std::cos(t);
        if (helm) return std::exp(cplx(0.0, s * R)) - 1.0;
        return cplx(1.0 - std::exp(-s * R), 0.0);
      });
      if (helm) return 3.0 / (2.0 * pi * cplx(0.0, s)) * val;
      return 3.0 / (2.0 * pi * s) * val;
    }
    case ElementKind::cell_group:
      throw std::invalid_argument("diagonal_entry applies to primitive cells; split the group first");
  }
  throw std::logic_error("unreachable");
}

} // namespace fracbem
