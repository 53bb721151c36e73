#include "fracbem/norms.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <variant>
#include <vector>

#include "fracbem/quadrature.hpp"

// The modified-kernel Galerkin entries B_lm = int_Tl int_Tm Phi_mod are
// computed exactly (up to angular Gauss error ~1e-12) by writing the double
// integral as int k(|w|) g(w) dw, where g is the cross-correlation of the two
// cells: a piecewise quadratic with closed-form pieces for same-size lattice
// cells (segments use the existing interval covariogram in quadrature.cpp).
// Each piece is integrated in polar coordinates about the singular point with
// exact radial moments of e^{-kappa r}.  Well-separated pairs switch to
// smooth tensor Gauss quadrature.  Quadratic forms are streamed by exact
// lattice offset, so large meshes never materialise the Gram matrix.

namespace fracbem {

namespace {

constexpr double pi = 3.14159265358979323846;
using cplx = std::complex<double>;

double cross2(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

// ---------------------------------------------------------------------------
// polar integration of e^{-kap r}/(4 pi r) q(v) over a convex CCW polygon;
// q must be a global quadratic (evaluated along rays by a 3-point refit).

template <class QF>
double polar_polygon(const Vec2* v, int n, Vec2 c, double kap, QF&& qf) {
  const QuadratureRule& g = gauss_legendre(24);
  const double qc = qf(c);
  double tot = 0;
  for (int e = 0; e < n; ++e) {
    Vec2 P = v[e], Q = v[(e + 1) % n];
    double ex = Q.x - P.x, ey = Q.y - P.y;
    double el = std::hypot(ex, ey);
    if (el < 1e-300) continue;
    double nx = ey / el, ny = -ex / el;
    double d0 = (P.x - c.x) * nx + (P.y - c.y) * ny;
    double rp = std::hypot(P.x - c.x, P.y - c.y);
    double rq = std::hypot(Q.x - c.x, Q.y - c.y);
    if (std::fabs(d0) < 1e-13 * std::max(rp, rq)) continue;  // edge line through c
    double thp = std::atan2(P.y - c.y, P.x - c.x);
    double thq = std::atan2(Q.y - c.y, Q.x - c.x);
    double dth = std::remainder(thq - thp, 2.0 * pi);
    if (std::fabs(dth) < 1e-15) continue;
    int panels = static_cast<int>(std::ceil(std::fabs(dth) / 0.9));
    for (int pn = 0; pn < panels; ++pn) {
      double t0 = thp + dth * pn / panels;
      double t1 = thp + dth * (pn + 1) / panels;
      double half = 0.5 * (t1 - t0), mid = 0.5 * (t0 + t1);  // signed width
      for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        double th = mid + half * g.nodes[i].x;
        double ct = std::cos(th), st = std::sin(th);
        double den = ct * nx + st * ny;
        double R = d0 / den;
        if (!(R > 0)) continue;
        double q1 = qf(Vec2{c.x + R * ct, c.y + R * st});
        double qh = qf(Vec2{c.x + 0.5 * R * ct, c.y + 0.5 * R * st});
        double lin = (4.0 * qh - q1 - 3.0 * qc) / R;
        double quad = (2.0 * q1 + 2.0 * qc - 4.0 * qh) / (R * R);
        tot += (half * g.weights[i]) *
               (qc * exp_moment(0, kap, R) + lin * exp_moment(1, kap, R) +
                quad * exp_moment(2, kap, R));
      }
    }
  }
  return tot / (4.0 * pi);
}

// ---------------------------------------------------------------------------
// same-size lattice cell pair engines

struct TriBasis {
  Vec2 a{}, b{};                 // cross(a, b) > 0
  double i00 = 0, i01 = 0, i10 = 0, i11 = 0;  // lattice coords = I * v
  double jac = 0;
};

TriBasis make_tri_basis(Vec2 a, Vec2 b) {
  double cr = cross2(a, b);
  if (cr < 0) {
    std::swap(a, b);
    cr = -cr;
  }
  if (cr < 1e-300) throw std::invalid_argument("degenerate triangle basis");
  TriBasis t;
  t.a = a;
  t.b = b;
  t.jac = cr;
  t.i00 = b.y / cr;
  t.i01 = -b.x / cr;
  t.i10 = -a.y / cr;
  t.i11 = a.x / cr;
  return t;
}

// cross-correlation of a lattice up-triangle with itself: six triangular
// pieces around the origin, value (alpha + beta x + gamma y)^2 / 2
struct SamePiece {
  double vx[3], vy[3];  // lattice vertices, CCW
  double al, be, ga;
};
const SamePiece same_pieces[6] = {
    {{0, 1, 0}, {0, 0, 1}, 1, -1, -1},
    {{0, -1, 0}, {0, 0, -1}, 1, 1, 1},
    {{0, 1, 1}, {0, -1, 0}, 1, -1, 0},
    {{0, 0, 1}, {0, -1, -1}, 1, 0, 1},
    {{0, 0, -1}, {0, 1, 1}, 1, 0, -1},
    {{0, -1, -1}, {0, 1, 0}, 1, 1, 0},
};

// self-convolution of the up triangle (up against reflected cell): four
// pieces on the doubled triangle, value 1/2 + sum s (al+be x+ga y)^2/2
struct MixedPiece {
  double vx[3], vy[3];
  int terms;
  double s[3], al[3], be[3], ga[3];
};
const MixedPiece mixed_pieces[4] = {
    {{0, 1, 0}, {0, 0, 1}, 3, {-1, -1, 1}, {1, 1, 1}, {-1, 0, -1}, {0, -1, -1}},
    {{1, 1, 0}, {0, 1, 1}, 3, {-1, -1, -1}, {1, 1, -1}, {-1, 0, 1}, {0, -1, 1}},
    {{1, 2, 1}, {0, 0, 1}, 3, {-1, -1, 1}, {1, -1, -1}, {0, 1, 1}, {-1, 1, 0}},
    {{0, 1, 0}, {1, 1, 2}, 3, {-1, -1, 1}, {1, -1, -1}, {-1, 1, 0}, {0, 1, 1}},
};

double tri_same_pair(const TriBasis& tb, double oa, double ob, double kap) {
  Vec2 c{oa * tb.a.x + ob * tb.b.x, oa * tb.a.y + ob * tb.b.y};
  double tot = 0;
  for (const SamePiece& p : same_pieces) {
    Vec2 vv[3];
    for (int i = 0; i < 3; ++i)
      vv[i] = Vec2{p.vx[i] * tb.a.x + p.vy[i] * tb.b.x, p.vx[i] * tb.a.y + p.vy[i] * tb.b.y};
    auto qf = [&](Vec2 w) {
      double lx = tb.i00 * w.x + tb.i01 * w.y;
      double ly = tb.i10 * w.x + tb.i11 * w.y;
      double t = p.al + p.be * lx + p.ga * ly;
      return 0.5 * t * t * tb.jac;
    };
    tot += polar_polygon(vv, 3, c, kap, qf);
  }
  return tot;
}

// pair (up cell anchored at alpha, reflected cell anchored at beta);
// (oa, ob) = beta - alpha in basis units
double tri_mixed_pair(const TriBasis& tb, double oa, double ob, double kap) {
  Vec2 c{oa * tb.a.x + ob * tb.b.x, oa * tb.a.y + ob * tb.b.y};
  double tot = 0;
  for (const MixedPiece& p : mixed_pieces) {
    Vec2 vv[3];
    for (int i = 0; i < 3; ++i)
      vv[i] = Vec2{p.vx[i] * tb.a.x + p.vy[i] * tb.b.x, p.vx[i] * tb.a.y + p.vy[i] * tb.b.y};
    auto qf = [&](Vec2 w) {
      double lx = tb.i00 * w.x + tb.i01 * w.y;
      double ly = tb.i10 * w.x + tb.i11 * w.y;
      double acc = 0.5;
      for (int t = 0; t < p.terms; ++t) {
        double u = p.al[t] + p.be[t] * lx + p.ga[t] * ly;
        acc += 0.5 * p.s[t] * u * u;
      }
      return acc * tb.jac;
    };
    tot += polar_polygon(vv, 3, c, kap, qf);
  }
  return tot;
}

// axis-aligned squares of side L at offset (ox, oy): separable trapezoid
// covariogram, four bilinear pieces
double rect_pair(double L, double ox, double oy, double kap) {
  const double bx[3] = {-ox - L, -ox, -ox + L};
  const double by[3] = {-oy - L, -oy, -oy + L};
  double tot = 0;
  for (int i = 0; i < 2; ++i) {
    double ax = (i == 0) ? ox + L : L - ox;
    double sx = (i == 0) ? 1.0 : -1.0;
    for (int j = 0; j < 2; ++j) {
      double ay = (j == 0) ? oy + L : L - oy;
      double sy = (j == 0) ? 1.0 : -1.0;
      Vec2 vv[4] = {{bx[i], by[j]}, {bx[i + 1], by[j]}, {bx[i + 1], by[j + 1]}, {bx[i], by[j + 1]}};
      auto qf = [&](Vec2 w) { return (ax + sx * w.x) * (ay + sy * w.y); };
      tot += polar_polygon(vv, 4, Vec2{0, 0}, kap, qf);
    }
  }
  return tot;
}

// smooth tensor-Gauss path for well-separated pairs (error ~ (sep)^{-2q})
double tri_gauss_pair(const TriBasis& tb, Vec2 t1a, int o1, Vec2 t2a, int o2, double kap, int q) {
  const QuadratureRule& g = gauss_legendre(q);
  auto nodes = [&](Vec2 anchor, int orient, std::vector<Vec2>& pts, std::vector<double>& ws) {
    double sgn = orient == 0 ? 1.0 : -1.0;
    Vec2 e1{sgn * tb.a.x, sgn * tb.a.y}, e2{sgn * tb.b.x, sgn * tb.b.y};
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      double s = 0.5 * (g.nodes[i].x + 1.0), ws1 = 0.5 * g.weights[i];
      for (std::size_t j = 0; j < g.nodes.size(); ++j) {
        double t = 0.5 * (g.nodes[j].x + 1.0), ws2 = 0.5 * g.weights[j];
        // collapsed map x = anchor + s e1 + s t (e2 - e1), area element s|J|
        double ux = s * (1.0 - t), uy = s * t;
        pts.push_back(Vec2{anchor.x + ux * e1.x + uy * e2.x, anchor.y + ux * e1.y + uy * e2.y});
        ws.push_back(ws1 * ws2 * s * tb.jac);
      }
    }
  };
  std::vector<Vec2> p1, p2;
  std::vector<double> w1, w2;
  nodes(t1a, o1, p1, w1);
  nodes(t2a, o2, p2, w2);
  double tot = 0;
  for (std::size_t i = 0; i < p1.size(); ++i)
    for (std::size_t j = 0; j < p2.size(); ++j) {
      double r = std::hypot(p1[i].x - p2[j].x, p1[i].y - p2[j].y);
      tot += w1[i] * w2[j] * std::exp(-kap * r) / (4.0 * pi * r);
    }
  return tot;
}

double rect_gauss_pair(double L, double ox, double oy, double kap, int q) {
  const QuadratureRule& g = gauss_legendre(q);
  std::vector<double> xs(g.nodes.size()), ws(g.nodes.size());
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    xs[i] = 0.5 * L * (g.nodes[i].x + 1.0);
    ws[i] = 0.5 * L * g.weights[i];
  }
  double tot = 0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = 0; j < xs.size(); ++j)
      for (std::size_t k = 0; k < xs.size(); ++k)
        for (std::size_t l = 0; l < xs.size(); ++l) {
          double dx = xs[i] - (ox + xs[k]);
          double dy = xs[j] - (oy + xs[l]);
          double r = std::hypot(dx, dy);
          tot += ws[i] * ws[j] * ws[k] * ws[l] * std::exp(-kap * r) / (4.0 * pi * r);
        }
  return tot;
}

// ---------------------------------------------------------------------------
// strips: scalar same-size cells with complex weights, exact lattice coords

struct RatStrip {
  Rational u, v;  // anchor in basis units
  int orient = 0;
  cplx c{};
  int elem = -1;
};

struct PlanarSystem {
  int kind = 0;  // 1 squares, 2 triangles
  TriBasis tb;
  double side = 0;          // squares
  long long den = 1;        // integer coords are u*den
  std::vector<long long> iu, iv;
  std::vector<int> orient;
  std::vector<cplx> coef;
  std::vector<int> elem;
};

struct TriFrame {
  EisPoint e1, e2;  // reference edge vectors
  Rational det;
};

TriFrame make_tri_frame(const EisTriangle& t) {
  TriFrame f;
  f.e1 = eis_sub(t.v[1], t.v[0]);
  f.e2 = eis_sub(t.v[2], t.v[0]);
  f.det = f.e1.a * f.e2.b - f.e1.b * f.e2.a;
  if (f.det == 0) throw std::invalid_argument("degenerate reference triangle");
  return f;
}

std::pair<Rational, Rational> frame_coords(const TriFrame& f, const EisPoint& p) {
  return {(p.a * f.e2.b - p.b * f.e2.a) / f.det, (f.e1.a * p.b - f.e1.b * p.a) / f.det};
}

// classify a lattice triangle as a translate of the frame cell (orient 0) or
// of its point reflection (orient 1); returns the anchor vertex
bool classify_triangle(const TriFrame& f, const EisTriangle& t, int& orient, EisPoint& anchor) {
  for (int r = 0; r < 3; ++r) {
    EisPoint d1 = eis_sub(t.v[(r + 1) % 3], t.v[r]);
    EisPoint d2 = eis_sub(t.v[(r + 2) % 3], t.v[r]);
    if (d1 == f.e1 && d2 == f.e2) {
      orient = 0;
      anchor = t.v[r];
      return true;
    }
    EisPoint n1{-f.e1.a, -f.e1.b}, n2{-f.e2.a, -f.e2.b};
    if (d1 == n1 && d2 == n2) {
      orient = 1;
      anchor = t.v[r];
      return true;
    }
    if (d1 == f.e2 && d2 == f.e1) {
      orient = 0;
      anchor = t.v[r];
      return true;
    }
    if (d1 == n2 && d2 == n1) {
      orient = 1;
      anchor = t.v[r];
      return true;
    }
  }
  return false;
}

long long to_int64(const Rational& r) {
  using boost::multiprecision::cpp_int;
  if (boost::multiprecision::denominator(r) != 1)
    throw std::invalid_argument("lattice coordinate is not integral after scaling");
  cpp_int n = boost::multiprecision::numerator(r);
  if (n > cpp_int(int64_t(1) << 60) || n < -cpp_int(int64_t(1) << 60))
    throw std::invalid_argument("lattice coordinate overflows");
  return static_cast<long long>(n);
}

PlanarSystem finalize_planar(std::vector<RatStrip>&& rs, int kind, Vec2 ba, Vec2 bb, double side) {
  using boost::multiprecision::cpp_int;
  PlanarSystem s;
  s.kind = kind;
  s.tb = make_tri_basis(ba, bb);
  s.side = side;
  cpp_int den = 1;
  for (const RatStrip& r : rs) {
    den = boost::multiprecision::lcm(den, boost::multiprecision::denominator(r.u));
    den = boost::multiprecision::lcm(den, boost::multiprecision::denominator(r.v));
    if (den > 10'000'000)
      throw std::invalid_argument("meshes do not share a moderate common lattice");
  }
  s.den = static_cast<long long>(den);
  Rational rden(den);
  s.iu.reserve(rs.size());
  for (const RatStrip& r : rs) {
    s.iu.push_back(to_int64(Rational(r.u * rden)));
    s.iv.push_back(to_int64(Rational(r.v * rden)));
    s.orient.push_back(r.orient);
    s.coef.push_back(r.c);
    s.elem.push_back(r.elem);
  }
  return s;
}

// pair value by canonical key; the mixed table holds (beta - alpha) of
// (orient 0, orient 1) ordered pairs
double planar_pair_value(const PlanarSystem& s, int type, long long du, long long dv, double kap) {
  double oa = double(du) / double(s.den);
  double ob = double(dv) / double(s.den);
  bool far = std::max(std::llabs(du), std::llabs(dv)) > 32 * s.den;
  if (s.kind == 1) {
    if (far) return rect_gauss_pair(s.side, oa * s.side, ob * s.side, kap, 5);
    return rect_pair(s.side, oa * s.side, ob * s.side, kap);
  }
  if (type == 0) {
    if (far) return tri_gauss_pair(s.tb, Vec2{0, 0}, 0,
                                   Vec2{oa * s.tb.a.x + ob * s.tb.b.x, oa * s.tb.a.y + ob * s.tb.b.y},
                                   0, kap, 5);
    return tri_same_pair(s.tb, oa, ob, kap);
  }
  if (far) return tri_gauss_pair(s.tb, Vec2{0, 0}, 0,
                                 Vec2{oa * s.tb.a.x + ob * s.tb.b.x, oa * s.tb.a.y + ob * s.tb.b.y},
                                 1, kap, 5);
  return tri_mixed_pair(s.tb, oa, ob, kap);
}

// streamed quadratic form Re(c^H B c); gross accumulates |w||B| for the
// cancellation guard
double planar_form(const PlanarSystem& s, double kap, double& gross) {
  const std::size_t n = s.iu.size();
  if (n == 0) {
    gross = 0;
    return 0;
  }
  long long minu = s.iu[0], maxu = s.iu[0], minv = s.iv[0], maxv = s.iv[0];
  bool mixed_present = false;
  for (std::size_t i = 0; i < n; ++i) {
    minu = std::min(minu, s.iu[i]);
    maxu = std::max(maxu, s.iu[i]);
    minv = std::min(minv, s.iv[i]);
    maxv = std::max(maxv, s.iv[i]);
    if (s.orient[i] == 1) mixed_present = true;
  }
  long long su = maxu - minu, sv = maxv - minv;
  long long dimu = 2 * su + 1, dimv = 2 * sv + 1;
  double tot = 0;
  gross = 0;
  if (dimu * dimv <= 6'000'000) {
    std::vector<double> wsame(static_cast<std::size_t>(dimu * dimv), 0.0);
    std::vector<double> wmix;
    if (mixed_present) wmix.assign(static_cast<std::size_t>(dimu * dimv), 0.0);
    auto idx = [&](long long du, long long dv) {
      return static_cast<std::size_t>((du + su) * dimv + (dv + sv));
    };
    for (std::size_t i = 0; i < n; ++i) {
      wsame[idx(0, 0)] += std::norm(s.coef[i]);
      for (std::size_t j = i + 1; j < n; ++j) {
        double w = 2.0 * (s.coef[i].real() * s.coef[j].real() + s.coef[i].imag() * s.coef[j].imag());
        long long du = s.iu[j] - s.iu[i], dv = s.iv[j] - s.iv[i];
        if (s.orient[i] == s.orient[j]) {
          wsame[idx(du, dv)] += w;
        } else if (s.orient[i] == 0) {
          wmix[idx(du, dv)] += w;
        } else {
          wmix[idx(-du, -dv)] += w;
        }
      }
    }
    for (long long du = -su; du <= su; ++du)
      for (long long dv = -sv; dv <= sv; ++dv) {
        std::size_t id = idx(du, dv);
        if (wsame[id] != 0.0) {
          double bv = planar_pair_value(s, 0, du, dv, kap);
          tot += wsame[id] * bv;
          gross += std::fabs(wsame[id] * bv);
        }
        if (mixed_present && wmix[id] != 0.0) {
          double bv = planar_pair_value(s, 1, du, dv, kap);
          tot += wmix[id] * bv;
          gross += std::fabs(wmix[id] * bv);
        }
      }
  } else {
    auto key = [](long long du, long long dv) {
      return (static_cast<unsigned long long>(du + (1LL << 30)) << 31) |
             static_cast<unsigned long long>(dv + (1LL << 30));
    };
    if (std::max(su, sv) >= (1LL << 30))
      throw std::invalid_argument("lattice offsets out of range");
    std::unordered_map<unsigned long long, double> wsame, wmix;
    wsame.reserve(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      wsame[key(0, 0)] += std::norm(s.coef[i]);
      for (std::size_t j = i + 1; j < n; ++j) {
        double w = 2.0 * (s.coef[i].real() * s.coef[j].real() + s.coef[i].imag() * s.coef[j].imag());
        long long du = s.iu[j] - s.iu[i], dv = s.iv[j] - s.iv[i];
        if (s.orient[i] == s.orient[j]) {
          wsame[key(du, dv)] += w;
        } else if (s.orient[i] == 0) {
          wmix[key(du, dv)] += w;
        } else {
          wmix[key(-du, -dv)] += w;
        }
      }
    }
    auto unkey = [](unsigned long long k, long long& du, long long& dv) {
      du = static_cast<long long>(k >> 31) - (1LL << 30);
      dv = static_cast<long long>(k & ((1ULL << 31) - 1)) - (1LL << 30);
    };
    for (const auto& [k, w] : wsame) {
      long long du, dv;
      unkey(k, du, dv);
      double bv = planar_pair_value(s, 0, du, dv, kap);
      tot += w * bv;
      gross += std::fabs(w * bv);
    }
    for (const auto& [k, w] : wmix) {
      long long du, dv;
      unkey(k, du, dv);
      double bv = planar_pair_value(s, 1, du, dv, kap);
      tot += w * bv;
      gross += std::fabs(w * bv);
    }
  }
  return tot;
}

// ---------------------------------------------------------------------------
// strip construction from meshes

ElementKind mesh_cell_kind(const Mesh& m) {
  if (m.elements.empty()) throw std::invalid_argument("empty mesh");
  const Cell& c = m.elements.front().parts.front();
  if (std::holds_alternative<SegmentCell>(c)) return ElementKind::segment;
  if (std::holds_alternative<SquareCell>(c)) return ElementKind::square;
  return ElementKind::triangle;
}

struct SegStrip {
  double a = 0, b = 0;
  cplx c{};
  int elem = -1;
};

void add_segment_strips(std::vector<SegStrip>& out, const Mesh& m, const Eigen::VectorXcd& co,
                        cplx scale) {
  for (std::size_t e = 0; e < m.size(); ++e)
    for (const ExactCell& xc : m.elements[e].parts_exact) {
      const ExactSegment* sg = std::get_if<ExactSegment>(&xc);
      if (!sg) throw std::invalid_argument("mesh mixes cell kinds");
      out.push_back({to_double(sg->x0), to_double(sg->x1),
                     scale * co(static_cast<Eigen::Index>(e)), static_cast<int>(e)});
    }
}

double segment_form(const std::vector<SegStrip>& s, double kap, double& gross) {
  KernelSpec spec = KernelSpec::modified(2, kap);
  double tot = 0;
  gross = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i; j < s.size(); ++j) {
      double bv = segment_pair_integral(spec, s[i].a, s[i].b, s[j].a, s[j].b).real();
      double w = (i == j) ? std::norm(s[i].c)
                          : 2.0 * (s[i].c.real() * s[j].c.real() + s[i].c.imag() * s[j].c.imag());
      tot += w * bv;
      gross += std::fabs(w * bv);
    }
  return tot;
}

// exact side length squared of a cell
Rational exact_side2(const ExactCell& xc) {
  if (const ExactSquare* sq = std::get_if<ExactSquare>(&xc)) return sq->side * sq->side;
  if (const EisTriangle* tr = std::get_if<EisTriangle>(&xc)) return eis_dist2(tr->v[0], tr->v[1]);
  const ExactSegment& sg = std::get<ExactSegment>(xc);
  return (sg.x1 - sg.x0) * (sg.x1 - sg.x0);
}

void add_square_strips(std::vector<RatStrip>& out, const Mesh& m, const Eigen::VectorXcd& co,
                       cplx scale, const Rational& fine_side, int sub) {
  for (std::size_t e = 0; e < m.size(); ++e)
    for (const ExactCell& xc : m.elements[e].parts_exact) {
      const ExactSquare* sq = std::get_if<ExactSquare>(&xc);
      if (!sq) throw std::invalid_argument("mesh mixes cell kinds");
      if (sq->side != fine_side * sub)
        throw std::invalid_argument("meshes do not embed in a common lattice");
      cplx c = scale * co(static_cast<Eigen::Index>(e));
      for (int i = 0; i < sub; ++i)
        for (int j = 0; j < sub; ++j)
          out.push_back({(sq->x + i * fine_side) / fine_side, (sq->y + j * fine_side) / fine_side,
                         0, c, static_cast<int>(e)});
    }
}

void add_triangle_strips(std::vector<RatStrip>& out, const Mesh& m, const Eigen::VectorXcd& co,
                         cplx scale, const TriFrame& fr, int sub) {
  for (std::size_t e = 0; e < m.size(); ++e)
    for (const ExactCell& xc : m.elements[e].parts_exact) {
      const EisTriangle* tr = std::get_if<EisTriangle>(&xc);
      if (!tr) throw std::invalid_argument("mesh mixes cell kinds");
      cplx c = scale * co(static_cast<Eigen::Index>(e));
      std::vector<EisTriangle> kids;
      if (sub == 1) {
        kids.push_back(*tr);
      } else {
        subdivide_triangle(*tr, sub, kids);
      }
      for (const EisTriangle& kid : kids) {
        int orient;
        EisPoint anchor;
        if (!classify_triangle(fr, kid, orient, anchor))
          throw std::invalid_argument("meshes do not embed in a common lattice");
        auto [u, v] = frame_coords(fr, anchor);
        out.push_back({u, v, orient, c, static_cast<int>(e)});
      }
    }
}

// builds the streaming system for one or two meshes of matching cell kind;
// sub1/sub2 are the per-axis refinements bringing both to a common cell size
PlanarSystem build_planar(const Mesh& m1, const Eigen::VectorXcd& c1, cplx s1, int sub1,
                          const Mesh* m2, const Eigen::VectorXcd* c2, cplx s2, int sub2) {
  std::vector<RatStrip> rs;
  const ExactCell& ref = m1.elements.front().parts_exact.front();
  if (std::holds_alternative<ExactSquare>(ref)) {
    Rational fine = std::get<ExactSquare>(ref).side / sub1;
    add_square_strips(rs, m1, c1, s1, fine, sub1);
    if (m2) add_square_strips(rs, *m2, *c2, s2, fine, sub2);
    double L = to_double(fine);
    return finalize_planar(std::move(rs), 1, Vec2{L, 0}, Vec2{0, L}, L);
  }
  const EisTriangle& rt = std::get<EisTriangle>(ref);
  std::vector<EisTriangle> refkids;
  if (sub1 == 1) {
    refkids.push_back(rt);
  } else {
    subdivide_triangle(rt, sub1, refkids);
  }
  TriFrame fr = make_tri_frame(refkids.front());
  add_triangle_strips(rs, m1, c1, s1, fr, sub1);
  if (m2) add_triangle_strips(rs, *m2, *c2, s2, fr, sub2);
  Vec2 ba = to_vec2(fr.e1), bb = to_vec2(fr.e2);
  return finalize_planar(std::move(rs), 2, ba, bb, std::hypot(ba.x, ba.y));
}

double clamp_form(double q, double gross, const char* what) {
  if (q < 0) {
    if (-q > 1e-8 * std::max(gross, 1e-300))
      throw std::runtime_error(std::string(what) +
                               " produced a negative value; quadrature accuracy insufficient");
    return 0;
  }
  return q;
}

double mesh_form(const Mesh& m, const Eigen::VectorXcd& c, double kap) {
  double gross = 0, q = 0;
  if (mesh_cell_kind(m) == ElementKind::segment) {
    std::vector<SegStrip> s;
    add_segment_strips(s, m, c, 1.0);
    q = segment_form(s, kap, gross);
  } else {
    PlanarSystem sys = build_planar(m, c, 1.0, 1, nullptr, nullptr, 0.0, 1);
    q = planar_form(sys, kap, gross);
  }
  return clamp_form(q, gross, "energy form");
}

// ---------------------------------------------------------------------------
// snowflake inner/outer mapping

// power-of-three exponent of 1/r, or -1
int neg_pow3_exponent(const Rational& r) {
  using boost::multiprecision::cpp_int;
  if (boost::multiprecision::numerator(r) != 1) return -1;
  cpp_int d = boost::multiprecision::denominator(r);
  int e = 0;
  while (d > 1) {
    if (d % 3 != 0) return -1;
    d /= 3;
    ++e;
  }
  return e;
}

struct OuterKeyMap {
  std::map<std::tuple<int, long long, long long>, cplx> val;  // (up?, p, q)
  cplx get(int up, long long p, long long q) const {
    auto it = val.find({up, p, q});
    return it == val.end() ? cplx{} : it->second;
  }
};

double snowflake_difference(const Density& din, const Density& dout) {
  const Mesh& mi = *din.mesh;
  const Mesh& mo = *dout.mesh;

  // inner lattice spacing h = 3^-L
  Rational side2 = exact_side2(mi.elements.front().parts_exact.front());
  int twoL = neg_pow3_exponent(side2);
  if (twoL < 0 || twoL % 2 != 0)
    throw std::invalid_argument("inner snowflake mesh must sit on the standard lattice");
  int L = twoL / 2;
  Rational h(1);
  for (int i = 0; i < L; ++i) h /= 3;
  TriFrame fr;
  fr.e1 = EisPoint{h, 0};
  fr.e2 = EisPoint{0, h};
  fr.det = h * h;

  // outer cell side^2 must be 3^-(2P+1) with P = L - 1
  Rational oside2 = exact_side2(mo.elements.front().parts_exact.front());
  int op = neg_pow3_exponent(oside2);
  if (op != 2 * L - 1)
    throw std::invalid_argument(
        "outer snowflake mesh does not match the inner lattice (subdivide the outer mesh one "
        "level less)");
  long long p3 = 1;
  for (int i = 0; i < L - 1; ++i) p3 *= 3;

  // outer coefficients keyed by rotated-lattice cell
  OuterKeyMap outer;
  for (std::size_t e = 0; e < mo.size(); ++e)
    for (const ExactCell& xc : mo.elements[e].parts_exact) {
      const EisTriangle* tr = std::get_if<EisTriangle>(&xc);
      if (!tr) throw std::invalid_argument("outer snowflake mesh must be triangular");
      long long X[3], Y[3];
      for (int i = 0; i < 3; ++i) {
        X[i] = to_int64(Rational((tr->v[i].a - tr->v[i].b) * p3));
        Y[i] = to_int64(Rational((tr->v[i].a + 2 * tr->v[i].b) * p3));
      }
      long long p = std::min({X[0], X[1], X[2]});
      long long q = std::min({Y[0], Y[1], Y[2]});
      bool up = false;
      for (int i = 0; i < 3; ++i)
        if (X[i] == p && Y[i] == q) up = true;
      outer.val[{up ? 1 : 0, p, q}] = dout.coefficients(static_cast<Eigen::Index>(e));
    }

  // combined coefficients on the fine lattice, keyed by (orient, anchor)
  std::map<std::tuple<int, long long, long long>, cplx> comb;
  for (std::size_t e = 0; e < mi.size(); ++e)
    for (const ExactCell& xc : mi.elements[e].parts_exact) {
      const EisTriangle* tr = std::get_if<EisTriangle>(&xc);
      if (!tr) throw std::invalid_argument("inner snowflake mesh must be triangular");
      int orient;
      EisPoint anchor;
      if (!classify_triangle(fr, *tr, orient, anchor))
        throw std::invalid_argument("inner snowflake mesh must sit on the standard lattice");
      long long a = to_int64(Rational(anchor.a / h));
      long long b = to_int64(Rational(anchor.b / h));
      comb[{orient, a, b}] += din.coefficients(static_cast<Eigen::Index>(e));
    }

  // fine-lattice bounding box of the outer screen
  long long amin = 0, amax = 0, bmin = 0, bmax = 0;
  bool first = true;
  for (const auto& [k, v] : outer.val) {
    (void)v;
    long long p = std::get<1>(k), q = std::get<2>(k);
    for (long long dx = 0; dx <= 1; ++dx)
      for (long long dy = 0; dy <= 1; ++dy) {
        long long fa = 2 * (p + dx) + (q + dy);
        long long fb = (q + dy) - (p + dx);
        if (first || fa < amin) amin = fa;
        if (first || fa > amax) amax = fa;
        if (first || fb < bmin) bmin = fb;
        if (first || fb > bmax) bmax = fb;
        first = false;
      }
  }
  auto mod3 = [](long long x) { return ((x % 3) + 3) % 3; };
  for (long long a = amin - 2; a <= amax + 2; ++a)
    for (long long b = bmin - 2; b <= bmax + 2; ++b) {
      long long x3 = a - b;
      // up cell of rhombus (a, b): centroid at ((a-b)/3, (a+2b+1)/3) in
      // rotated-lattice units, always on an edge line;  average across it
      {
        long long y3 = a + 2 * b + 1;
        cplx v;
        long long r = mod3(x3);
        if (r == 0) {
          v = 0.5 * (outer.get(1, x3 / 3, (y3 - 1) / 3) + outer.get(0, x3 / 3 - 1, (y3 - 1) / 3));
        } else if (r == 1) {
          v = 0.5 * (outer.get(1, (x3 - 1) / 3, (y3 - 2) / 3) + outer.get(0, (x3 - 1) / 3, (y3 - 2) / 3));
        } else {
          v = 0.5 * (outer.get(1, (x3 - 2) / 3, y3 / 3) + outer.get(0, (x3 - 2) / 3, y3 / 3 - 1));
        }
        if (v != cplx{}) comb[{0, a, b}] -= v;
      }
      // down cell of rhombus (a, b), anchored at (a+1, b+1)
      {
        long long y3 = a + 2 * b + 2;
        cplx v;
        long long r = mod3(x3);
        if (r == 0) {
          v = 0.5 * (outer.get(1, x3 / 3, (y3 - 2) / 3) + outer.get(0, x3 / 3 - 1, (y3 - 2) / 3));
        } else if (r == 1) {
          v = 0.5 * (outer.get(1, (x3 - 1) / 3, y3 / 3) + outer.get(0, (x3 - 1) / 3, y3 / 3 - 1));
        } else {
          v = 0.5 * (outer.get(1, (x3 - 2) / 3, (y3 - 1) / 3) + outer.get(0, (x3 - 2) / 3, (y3 - 1) / 3));
        }
        if (v != cplx{}) comb[{1, a + 1, b + 1}] -= v;
      }
    }

  PlanarSystem sys;
  sys.kind = 2;
  Vec2 ba = to_vec2(fr.e1), bb = to_vec2(fr.e2);
  sys.tb = make_tri_basis(ba, bb);
  sys.side = std::hypot(ba.x, ba.y);
  sys.den = 1;
  for (const auto& [k, c] : comb) {
    if (c == cplx{}) continue;
    sys.orient.push_back(std::get<0>(k));
    sys.iu.push_back(std::get<1>(k));
    sys.iv.push_back(std::get<2>(k));
    sys.coef.push_back(c);
    sys.elem.push_back(-1);
  }
  double gross = 0;
  double q = planar_form(sys, 1.0, gross);
  return std::sqrt(2.0 * clamp_form(q, gross, "difference form"));
}

void check_density(const Density& d) {
  if (!d.mesh || d.coefficients.size() != static_cast<Eigen::Index>(d.mesh->size()))
    throw std::invalid_argument("density does not match its mesh");
}

} // namespace

// ---------------------------------------------------------------------------

EnergyForm build_energy_form(std::shared_ptr<const Mesh> mesh, double kappa) {
  if (!mesh || mesh->elements.empty()) throw std::invalid_argument("empty mesh");
  if (!(kappa > 0)) throw std::invalid_argument("kappa must be positive");
  const std::size_t n = mesh->size();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  if (mesh_cell_kind(*mesh) == ElementKind::segment) {
    std::vector<SegStrip> s;
    Eigen::VectorXcd ones = Eigen::VectorXcd::Ones(static_cast<Eigen::Index>(n));
    add_segment_strips(s, *mesh, ones, 1.0);
    KernelSpec spec = KernelSpec::modified(2, kappa);
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t j = i; j < s.size(); ++j) {
        double bv = segment_pair_integral(spec, s[i].a, s[i].b, s[j].a, s[j].b).real();
        g(s[i].elem, s[j].elem) += bv;
        if (i != j) g(s[j].elem, s[i].elem) += bv;
      }
  } else {
    Eigen::VectorXcd ones = Eigen::VectorXcd::Ones(static_cast<Eigen::Index>(n));
    PlanarSystem sys = build_planar(*mesh, ones, 1.0, 1, nullptr, nullptr, 0.0, 1);
    std::map<std::tuple<int, long long, long long>, double> memo;
    for (std::size_t i = 0; i < sys.iu.size(); ++i)
      for (std::size_t j = i; j < sys.iu.size(); ++j) {
        long long du = sys.iu[j] - sys.iu[i], dv = sys.iv[j] - sys.iv[i];
        int type;
        if (sys.orient[i] == sys.orient[j]) {
          type = 0;
          if (du < 0 || (du == 0 && dv < 0)) {
            du = -du;
            dv = -dv;
          }
        } else {
          type = 1;
          if (sys.orient[i] == 1) {
            du = -du;
            dv = -dv;
          }
        }
        auto it = memo.find({type, du, dv});
        double bv;
        if (it != memo.end()) {
          bv = it->second;
        } else {
          bv = planar_pair_value(sys, type, du, dv, kappa);
          memo[{type, du, dv}] = bv;
        }
        g(sys.elem[i], sys.elem[j]) += bv;
        if (i != j) g(sys.elem[j], sys.elem[i]) += bv;
      }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(g);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("energy form failed its Cholesky check; quadrature accuracy insufficient");
  EnergyForm f;
  f.mesh = std::move(mesh);
  f.kappa = kappa;
  f.gram = std::move(g);
  return f;
}

double energy_norm(const EnergyForm& form, const Eigen::VectorXcd& c) {
  if (c.size() != form.gram.rows()) throw std::invalid_argument("coefficient size mismatch");
  Eigen::VectorXd cr = c.real(), ci = c.imag();
  double q = cr.dot(form.gram * cr) + ci.dot(form.gram * ci);
  return std::sqrt(2.0 * std::max(q, 0.0));
}

double energy_norm(const Density& d, double kappa) {
  check_density(d);
  if (!(kappa > 0)) throw std::invalid_argument("kappa must be positive");
  return std::sqrt(2.0 * mesh_form(*d.mesh, d.coefficients, kappa));
}

EquivalenceReport norm_equivalence_check(const Density& d) {
  check_density(d);
  if (!(d.k > 0)) throw std::invalid_argument("density carries no positive wavenumber");
  EquivalenceReport r;
  r.norm_standard = energy_norm(d, 1.0);
  r.norm_wavenumber = energy_norm(d, d.k);
  double f = 1.0 / std::sqrt(d.k);
  r.lower = std::min(1.0, f) * r.norm_standard;
  r.upper = std::max(1.0, f) * r.norm_standard;
  double slack = 1e-6 * std::max(1.0, r.norm_standard);
  r.pass = (r.norm_wavenumber >= r.lower - slack) && (r.norm_wavenumber <= r.upper + slack);
  return r;
}

double near_field_norm(const FieldGrid& grid) {
  if (grid.values.size() != grid.points.size())
    throw std::invalid_argument("grid has no evaluated values");
  double s = 0;
  for (std::size_t i = 0; i < grid.values.size(); ++i) s += grid.weights[i] * std::norm(grid.values[i]);
  return std::sqrt(s);
}

double farfield_norm(const DirectionSet& dirs, const std::vector<std::complex<double>>& values) {
  if (values.size() != dirs.directions.size())
    throw std::invalid_argument("far-field values do not match the direction set");
  double s = 0;
  for (std::size_t i = 0; i < values.size(); ++i) s += dirs.weights[i] * std::norm(values[i]);
  return std::sqrt(s);
}

double density_difference_norm(const Density& d1, const Density& d2) {
  check_density(d1);
  check_density(d2);
  const Mesh& m1 = *d1.mesh;
  const Mesh& m2 = *d2.mesh;
  if (m1.ambient != m2.ambient)
    throw std::invalid_argument("densities live in different ambient dimensions");

  if (m1.screen && m2.screen && m1.screen->family == Family::koch_snowflake &&
      m2.screen->family == Family::koch_snowflake && m1.screen->side != m2.screen->side) {
    const bool first_inner = m1.screen->side == SnowflakeSide::inner;
    return snowflake_difference(first_inner ? d1 : d2, first_inner ? d2 : d1);
  }

  ElementKind k1 = mesh_cell_kind(m1), k2 = mesh_cell_kind(m2);
  if (k1 != k2) throw std::invalid_argument("meshes do not share a cell family");

  double gross = 0, q = 0;
  if (k1 == ElementKind::segment) {
    std::vector<SegStrip> s;
    add_segment_strips(s, m1, d1.coefficients, 1.0);
    add_segment_strips(s, m2, d2.coefficients, -1.0);
    q = segment_form(s, 1.0, gross);
  } else {
    Rational s1 = exact_side2(m1.elements.front().parts_exact.front());
    Rational s2 = exact_side2(m2.elements.front().parts_exact.front());
    // per-axis refinement factors to the common fine size
    int sub1 = 1, sub2 = 1;
    if (s1 != s2) {
      Rational big = std::max(s1, s2), small = std::min(s1, s2);
      Rational ratio2 = big / small;
      using boost::multiprecision::cpp_int;
      if (boost::multiprecision::denominator(ratio2) != 1)
        throw std::invalid_argument("meshes do not embed in a common lattice");
      cpp_int r2 = boost::multiprecision::numerator(ratio2);
      cpp_int r = boost::multiprecision::sqrt(r2);
      if (r * r != r2 || r > 1024)
        throw std::invalid_argument("meshes do not embed in a common lattice");
      if (s1 > s2) {
        sub1 = static_cast<int>(r);
      } else {
        sub2 = static_cast<int>(r);
      }
    }
    const Mesh& fine = (sub1 == 1) ? m1 : m2;
    const Mesh& coarse = (sub1 == 1) ? m2 : m1;
    const Eigen::VectorXcd& cf = (sub1 == 1) ? d1.coefficients : d2.coefficients;
    const Eigen::VectorXcd& cc = (sub1 == 1) ? d2.coefficients : d1.coefficients;
    cplx sf = (sub1 == 1) ? 1.0 : -1.0;
    PlanarSystem sys = build_planar(fine, cf, sf, 1, &coarse, &cc, -sf, std::max(sub1, sub2));
    q = planar_form(sys, 1.0, gross);
  }
  return std::sqrt(2.0 * clamp_form(q, gross, "difference form"));
}

} // namespace fracbem
