#include "fracbem/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

#include "json.hpp"

namespace fracbem {

namespace {

Rational rat(long num, long den = 1) { return Rational(num, den); }

void check_level(int level, double cells_per_level, int max_level) {
  if (level < 0) throw std::invalid_argument("prefractal level must be nonnegative");
  if (level > max_level) throw std::invalid_argument("prefractal level too large for in-memory cell list");
  (void)cells_per_level;
}

std::string rat_str(const Rational& r) {
  std::string s = numerator(r).str();
  if (denominator(r) != 1) s += "/" + denominator(r).str();
  return s;
}

// canonical comparison key for an (unordered) triangle
using TriKey = std::array<Rational, 6>;
TriKey tri_key(const EisTriangle& t) {
  std::array<EisPoint, 3> v = t.v;
  std::sort(v.begin(), v.end());
  return {v[0].a, v[0].b, v[1].a, v[1].b, v[2].a, v[2].b};
}

EisTriangle oriented(EisPoint p, EisPoint q, EisPoint r) {
  EisTriangle t{{p, q, r}};
  if (tri_cross(t) < 0) std::swap(t.v[1], t.v[2]);
  return t;
}

}  // namespace

Rational tri_cross(const EisTriangle& t) {
  // twice the signed area in units of sqrt(3)/2
  EisPoint u = eis_sub(t.v[1], t.v[0]);
  EisPoint w = eis_sub(t.v[2], t.v[0]);
  return u.a * w.b - w.a * u.b;
}

// subdivision of a triangle into m^2 congruent copies
void subdivide_triangle(const EisTriangle& t, int m, std::vector<EisTriangle>& out) {
  EisPoint e1 = eis_sub(t.v[1], t.v[0]);
  EisPoint e2 = eis_sub(t.v[2], t.v[0]);
  Rational inv = Rational(1, m);
  e1 = {e1.a * inv, e1.b * inv};
  e2 = {e2.a * inv, e2.b * inv};
  auto at = [&](int i, int j) {
    return EisPoint{t.v[0].a + i * e1.a + j * e2.a, t.v[0].b + i * e1.b + j * e2.b};
  };
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i + j < m; ++i) {
      out.push_back({{at(i, j), at(i + 1, j), at(i, j + 1)}});
      if (i + j < m - 1) out.push_back({{at(i + 1, j + 1), at(i, j + 1), at(i + 1, j)}});
    }
  }
}


double to_double(const Rational& r) { return r.convert_to<double>(); }

Vec2 to_vec2(const RatPoint& p) { return {to_double(p.x), to_double(p.y)}; }

Vec2 to_vec2(const EisPoint& p) {
  double a = to_double(p.a), b = to_double(p.b);
  return {a + 0.5 * b, 0.5 * std::numbers::sqrt3 * b};
}

EisPoint eis_add(const EisPoint& p, const EisPoint& q) { return {p.a + q.a, p.b + q.b}; }
EisPoint eis_sub(const EisPoint& p, const EisPoint& q) { return {p.a - q.a, p.b - q.b}; }

EisPoint eis_mul(const EisPoint& p, const Rational& a, const Rational& b) {
  // (p.a + p.b w)(a + b w) with w^2 = w - 1
  return {p.a * a - p.b * b, p.a * b + p.b * a + p.b * b};
}

Rational eis_dist2(const EisPoint& p, const EisPoint& q) {
  Rational da = p.a - q.a, db = p.b - q.b;
  return da * da + da * db + db * db;
}

RatPoint Similarity::apply(const RatPoint& p) const {
  if (eis_translation) throw std::logic_error("map with lattice-basis translation has no rational cartesian form");
  if (dim == 1) return {linear[0][0] * p.x + translation.x, 0};
  return {linear[0][0] * p.x + linear[0][1] * p.y + translation.x,
          linear[1][0] * p.x + linear[1][1] * p.y + translation.y};
}

Vec2 Similarity::apply(Vec2 p) const {
  double m00 = to_double(linear[0][0]);
  if (dim == 1) return {m00 * p.x + to_double(translation.x), 0.0};
  Vec2 t = eis_translation ? to_vec2(translation_eis) : to_vec2(translation);
  return {m00 * p.x + to_double(linear[0][1]) * p.y + t.x,
          to_double(linear[1][0]) * p.x + to_double(linear[1][1]) * p.y + t.y};
}

double attractor_dimension(const IteratedFunctionSystem& ifs) {
  if (ifs.maps.empty()) throw std::invalid_argument("empty iterated function system");
  const Rational& r = ifs.maps.front().ratio;
  for (const auto& s : ifs.maps) {
    if (s.ratio != r) throw std::invalid_argument("attractor dimension needs equal contraction ratios");
  }
  if (!(r > 0 && r < 1)) throw std::invalid_argument("contraction ratio must lie in (0,1)");
  return std::log(static_cast<double>(ifs.maps.size())) / std::log(1.0 / to_double(r));
}

bool open_set_condition(const IteratedFunctionSystem& ifs) {
  const auto& O = ifs.open_set;
  if (O.shape == OpenSetSpec::Shape::interval) {
    std::vector<std::pair<Rational, Rational>> images;
    for (const auto& s : ifs.maps) {
      Rational a = s.apply(RatPoint{O.origin.x, 0}).x;
      Rational b = s.apply(RatPoint{O.origin.x + O.size, 0}).x;
      if (a > b) std::swap(a, b);
      if (a < O.origin.x || b > O.origin.x + O.size) return false;
      images.emplace_back(a, b);
    }
    std::sort(images.begin(), images.end());
    for (std::size_t i = 1; i < images.size(); ++i) {
      if (images[i].first < images[i - 1].second) return false;
    }
    return true;
  }
  if (O.shape == OpenSetSpec::Shape::square) {
    std::vector<std::array<Rational, 4>> boxes;
    for (const auto& s : ifs.maps) {
      RatPoint p = s.apply(O.origin);
      RatPoint q = s.apply(RatPoint{O.origin.x + O.size, O.origin.y + O.size});
      Rational x0 = min(p.x, q.x), x1 = max(p.x, q.x);
      Rational y0 = min(p.y, q.y), y1 = max(p.y, q.y);
      if (x0 < O.origin.x || x1 > O.origin.x + O.size) return false;
      if (y0 < O.origin.y || y1 > O.origin.y + O.size) return false;
      boxes.push_back({x0, x1, y0, y1});
    }
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      for (std::size_t j = i + 1; j < boxes.size(); ++j) {
        bool sep = boxes[i][1] <= boxes[j][0] || boxes[j][1] <= boxes[i][0] ||
                   boxes[i][3] <= boxes[j][2] || boxes[j][3] <= boxes[i][2];
        if (!sep) return false;
      }
    }
    return true;
  }
  // Triangle open set, described in the lattice basis: T(o, s) is the set
  // {o.a <= a, o.b <= b, (a - o.a) + (b - o.b) <= s} (open).  Image of T(o, s)
  // under z -> r z + t is T(r o + t, r s).
  struct Tri {
    Rational a, b, s;
  };
  std::vector<Tri> kids;
  Rational Oa = O.origin.x, Ob = O.origin.y;
  for (const auto& s : ifs.maps) {
    if (!s.eis_translation) return false;
    Tri k{s.ratio * Oa + s.translation_eis.a, s.ratio * Ob + s.translation_eis.b, s.ratio * O.size};
    if (k.a < Oa || k.b < Ob || k.a + k.b + k.s > Oa + Ob + O.size) return false;
    kids.push_back(k);
  }
  for (std::size_t i = 0; i < kids.size(); ++i) {
    for (std::size_t j = i + 1; j < kids.size(); ++j) {
      Rational A = max(kids[i].a, kids[j].a), B = max(kids[i].b, kids[j].b);
      Rational C = min(kids[i].a + kids[i].b + kids[i].s, kids[j].a + kids[j].b + kids[j].s);
      if (A + B < C) return false;  // open overlap
    }
  }
  return true;
}

IteratedFunctionSystem make_ifs(Family family, const Rational& alpha) {
  IteratedFunctionSystem ifs;
  auto similarity = [](int dim, const Rational& r, const Rational& tx, const Rational& ty) {
    Similarity s;
    s.dim = dim;
    s.ratio = r;
    s.linear = {{{r, 0}, {0, r}}};
    s.translation = {tx, ty};
    return s;
  };
  switch (family) {
    case Family::cantor_set: {
      if (!(alpha > 0 && alpha < rat(1, 2))) throw std::invalid_argument("cantor set needs alpha in (0,1/2)");
      ifs.dim = 1;
      ifs.maps = {similarity(1, alpha, 0, 0), similarity(1, alpha, 1 - alpha, 0)};
      ifs.open_set = {OpenSetSpec::Shape::interval, {0, 0}, 1};
      return ifs;
    }
    case Family::cantor_dust: {
      if (!(alpha > 0 && alpha < rat(1, 2))) throw std::invalid_argument("cantor dust needs alpha in (0,1/2)");
      ifs.dim = 2;
      Rational t = 1 - alpha;
      ifs.maps = {similarity(2, alpha, 0, 0), similarity(2, alpha, t, 0),
                  similarity(2, alpha, 0, t), similarity(2, alpha, t, t)};
      ifs.open_set = {OpenSetSpec::Shape::square, {0, 0}, 1};
      return ifs;
    }
    case Family::sierpinski: {
      ifs.dim = 2;
      Rational h = rat(1, 2);
      Similarity s1 = similarity(2, h, 0, 0);
      Similarity s2 = similarity(2, h, h, 0);
      Similarity s3 = similarity(2, h, 0, 0);
      // translations (0,0), (1/2,0), (1/4, sqrt3/4) = lattice points (0,0), (1/2,0), (0,1/2)
      s1.eis_translation = s2.eis_translation = s3.eis_translation = true;
      s1.translation_eis = {0, 0};
      s2.translation_eis = {h, 0};
      s3.translation_eis = {0, h};
      ifs.maps = {s1, s2, s3};
      ifs.open_set = {OpenSetSpec::Shape::triangle, {0, 0}, 1};
      return ifs;
    }
    default:
      throw std::invalid_argument("make_ifs expects an iterated-function-system family");
  }
}

int Prefractal::ambient() const { return family == Family::cantor_set ? 2 : 3; }

double Prefractal::measure() const {
  double m = 0.0;
  for (const auto& c : intervals) m += to_double(c.x1 - c.x0);
  for (const auto& c : squares) {
    double s = to_double(c.side);
    m += s * s;
  }
  for (const auto& t : triangles) m += 0.25 * std::numbers::sqrt3 * std::abs(to_double(tri_cross(t)));
  return m;
}

double Prefractal::cell_diameter() const {
  if (!intervals.empty()) return to_double(intervals.front().x1 - intervals.front().x0);
  if (!squares.empty()) return to_double(squares.front().side) * std::numbers::sqrt2;
  if (!triangles.empty()) {
    const auto& t = triangles.front();
    Rational d2 = max(eis_dist2(t.v[0], t.v[1]), max(eis_dist2(t.v[1], t.v[2]), eis_dist2(t.v[0], t.v[2])));
    return std::sqrt(to_double(d2));
  }
  return 0.0;
}

namespace {

Prefractal generate_cantor(Family family, const Rational& alpha, const Rational& delta, int level) {
  if (!(alpha > 0 && alpha < rat(1, 2))) throw std::invalid_argument("alpha must lie in (0,1/2)");
  Rational bound = Rational(1) / (2 * alpha) - 1;
  if (delta < 0 || (delta > 0 && !(delta < bound)))
    throw std::invalid_argument("thickening delta must lie in [0, 1/(2 alpha) - 1)");

  Prefractal p;
  p.family = family;
  p.level = level;
  p.alpha = alpha;
  p.delta = delta;

  int nu = family == Family::cantor_set ? 2 : 4;

  // word offsets c_w; cell = A_w(Gamma_0) with A_w(x) = scale x + c_w
  std::vector<RatPoint> offsets{{0, 0}};
  Rational scale = 1, t = 1 - alpha;
  std::array<RatPoint, 4> steps = {RatPoint{0, 0}, {t, 0}, {0, t}, {t, t}};
  std::array<int, 4> set_steps = {0, 1, 0, 0};  // cantor_set uses x-offsets 0 and t
  for (int j = 0; j < level; ++j) {
    std::vector<RatPoint> next;
    next.reserve(offsets.size() * nu);
    for (const auto& c : offsets) {
      for (int m = 0; m < nu; ++m) {
        const RatPoint& e = family == Family::cantor_set ? steps[set_steps[m]] : steps[m];
        next.push_back({c.x + scale * e.x, c.y + scale * e.y});
      }
    }
    offsets = std::move(next);
    scale *= alpha;
  }

  if (family == Family::cantor_set) {
    p.intervals.reserve(offsets.size());
    for (const auto& c : offsets) p.intervals.push_back({c.x - scale * delta, c.x + scale * (1 + delta)});
  } else {
    p.squares.reserve(offsets.size());
    for (const auto& c : offsets)
      p.squares.push_back({c.x - scale * delta, c.y - scale * delta, scale * (1 + 2 * delta)});
  }
  return p;
}

Prefractal generate_sierpinski(const Rational& delta, int level) {
  if (delta < 0) throw std::invalid_argument("thickening delta must be nonnegative");
  Prefractal p;
  p.family = Family::sierpinski;
  p.level = level;
  p.alpha = rat(1, 2);
  p.delta = delta;

  // lattice-basis translations of the three maps
  std::array<EisPoint, 3> steps = {EisPoint{0, 0}, {rat(1, 2), 0}, {0, rat(1, 2)}};
  std::vector<EisPoint> offsets{{0, 0}};
  Rational scale = 1;
  for (int j = 0; j < level; ++j) {
    std::vector<EisPoint> next;
    next.reserve(offsets.size() * 3);
    for (const auto& c : offsets) {
      for (const auto& e : steps) next.push_back({c.a + scale * e.a, c.b + scale * e.b});
    }
    offsets = std::move(next);
    scale /= 2;
  }

  Rational grow = 1 + 2 * delta;
  std::array<EisPoint, 3> unit = {EisPoint{0, 0}, {1, 0}, {0, 1}};
  EisPoint centroid{rat(1, 3), rat(1, 3)};
  p.triangles.reserve(offsets.size());
  for (const auto& c : offsets) {
    EisTriangle t;
    for (int i = 0; i < 3; ++i) {
      // scale the standard cell about its centroid by (1 + 2 delta)
      Rational a = c.a + scale * (centroid.a + grow * (unit[i].a - centroid.a));
      Rational b = c.b + scale * (centroid.b + grow * (unit[i].b - centroid.b));
      t.v[i] = {a, b};
    }
    p.triangles.push_back(t);
  }
  return p;
}

constexpr double kBetaLatticeTol = 1e-13;

bool is_koch_beta(double beta) { return std::abs(beta - std::numbers::pi / 6) < kBetaLatticeTol; }

// One polygon-rewriting step at xi = 1/3 in exact lattice coordinates.
// `inward` selects the outer-prefractal variant (triangles removed rather than
// added); `bumps` collects the added/removed triangles.
std::vector<EisPoint> snowflake_step_exact(const std::vector<EisPoint>& poly, bool inward,
                                           std::vector<EisTriangle>* bumps) {
  std::vector<EisPoint> out;
  out.reserve(poly.size() * 4);
  std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const EisPoint& P = poly[i];
    const EisPoint& Q = poly[(i + 1) % n];
    EisPoint d = eis_sub(Q, P);
    EisPoint A{(2 * P.a + Q.a) / 3, (2 * P.b + Q.b) / 3};
    EisPoint B{(P.a + 2 * Q.a) / 3, (P.b + 2 * Q.b) / 3};
    // apex at midpoint + height * unit normal; the normal scaling is
    // -i/(2 sqrt3) = (1 - 2w)/6 outward, +i/(2 sqrt3) = (2w - 1)/6 inward
    EisPoint nrm = inward ? eis_mul(d, rat(-1, 6), rat(1, 3)) : eis_mul(d, rat(1, 6), rat(-1, 3));
    EisPoint M{(P.a + Q.a) / 2, (P.b + Q.b) / 2};
    EisPoint T = eis_add(M, nrm);
    out.push_back(P);
    out.push_back(A);
    out.push_back(T);
    out.push_back(B);
    if (bumps) bumps->push_back(oriented(A, T, B));
  }
  return out;
}

std::vector<Vec2> snowflake_step_float(const std::vector<Vec2>& poly, double xi, bool inward) {
  std::vector<Vec2> out;
  out.reserve(poly.size() * 4);
  double half_base = 0.5 * (1.0 - 2.0 * xi);
  double height = std::sqrt(xi - 0.25);
  std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    Vec2 P = poly[i], Q = poly[(i + 1) % n];
    Vec2 d = Q - P;
    Vec2 M = 0.5 * (P + Q);
    Vec2 A = M - half_base * d;
    Vec2 B = M + half_base * d;
    Vec2 nrm = inward ? Vec2{-d.y, d.x} : Vec2{d.y, -d.x};
    Vec2 T = M + height * nrm;
    out.push_back(P);
    out.push_back(A);
    out.push_back(T);
    out.push_back(B);
  }
  return out;
}

std::vector<EisPoint> hexagon_exact() {
  // unit triangle plus an apex on each side at outward distance sqrt(1/12)
  std::vector<EisPoint> tri = {{0, 0}, {1, 0}, {0, 1}};
  std::vector<EisPoint> out;
  for (std::size_t i = 0; i < 3; ++i) {
    const EisPoint& P = tri[i];
    const EisPoint& Q = tri[(i + 1) % 3];
    EisPoint d = eis_sub(Q, P);
    EisPoint M{(P.a + Q.a) / 2, (P.b + Q.b) / 2};
    out.push_back(P);
    out.push_back(eis_add(M, eis_mul(d, rat(1, 6), rat(-1, 3))));
  }
  return out;
}

std::vector<Vec2> hexagon_float(double xi) {
  std::vector<Vec2> tri = {{0, 0}, {1, 0}, {0.5, 0.5 * std::numbers::sqrt3}};
  double height = std::sqrt(xi - 0.25);
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < 3; ++i) {
    Vec2 P = tri[i], Q = tri[(i + 1) % 3];
    Vec2 d = Q - P;
    Vec2 M = 0.5 * (P + Q);
    out.push_back(P);
    out.push_back(M + height * Vec2{d.y, -d.x});
  }
  return out;
}

}  // namespace

Prefractal generate_prefractal(Family family, const Rational& alpha, const Rational& delta, int level) {
  switch (family) {
    case Family::cantor_set:
      check_level(level, 2, 22);
      return generate_cantor(family, alpha, delta, level);
    case Family::cantor_dust:
      check_level(level, 4, 11);
      return generate_cantor(family, alpha, delta, level);
    case Family::sierpinski:
      check_level(level, 3, 14);
      return generate_sierpinski(delta, level);
    default:
      throw std::invalid_argument("generate_prefractal handles iterated-function-system families only");
  }
}

Prefractal generate_snowflake(double beta, SnowflakeSide side, int level) {
  check_level(level, 9, 7);
  if (!(beta > 0.0 && beta < 0.5 * std::numbers::pi))
    throw std::invalid_argument("snowflake parameter beta must lie in (0, pi/2)");
  double xi = 1.0 / (2.0 * (1.0 + std::sin(beta)));

  Prefractal p;
  p.family = Family::koch_snowflake;
  p.level = level;
  p.beta = beta;
  p.side = side;
  p.exact_lattice = is_koch_beta(beta);

  if (p.exact_lattice) {
    if (side == SnowflakeSide::inner) {
      p.polygon_eis = {{0, 0}, {1, 0}, {0, 1}};
      p.triangles = {{{EisPoint{0, 0}, {1, 0}, {0, 1}}}};
      for (int j = 1; j <= level; ++j) {
        std::vector<EisTriangle> refined;
        refined.reserve(p.triangles.size() * 9 + p.polygon_eis.size());
        for (const auto& t : p.triangles) subdivide_triangle(t, 3, refined);
        std::vector<EisTriangle> bumps;
        p.polygon_eis = snowflake_step_exact(p.polygon_eis, false, &bumps);
        refined.insert(refined.end(), bumps.begin(), bumps.end());
        p.triangles = std::move(refined);
      }
    } else {
      p.polygon_eis = hexagon_exact();
      // six lattice triangles around the hexagon centre (1/3-lattice coordinates)
      auto pt = [](long a, long b) { return EisPoint{rat(a, 3), rat(b, 3)}; };
      EisPoint c = pt(1, 1);
      std::array<EisPoint, 6> ring = {pt(0, 0), pt(2, -1), pt(3, 0), pt(2, 2), pt(0, 3), pt(-1, 2)};
      p.triangles.clear();
      for (int i = 0; i < 6; ++i) p.triangles.push_back(oriented(c, ring[i], ring[(i + 1) % 6]));
      for (int j = 1; j <= level; ++j) {
        std::vector<EisTriangle> refined;
        refined.reserve(p.triangles.size() * 9);
        for (const auto& t : p.triangles) subdivide_triangle(t, 3, refined);
        std::vector<EisTriangle> removed;
        p.polygon_eis = snowflake_step_exact(p.polygon_eis, true, &removed);
        std::map<TriKey, std::size_t> index;
        for (std::size_t i = 0; i < refined.size(); ++i) index.emplace(tri_key(refined[i]), i);
        std::vector<bool> drop(refined.size(), false);
        for (const auto& t : removed) {
          auto it = index.find(tri_key(t));
          if (it == index.end()) throw std::logic_error("outer snowflake removal does not align with the lattice");
          drop[it->second] = true;
        }
        std::vector<EisTriangle> kept;
        kept.reserve(refined.size() - removed.size());
        for (std::size_t i = 0; i < refined.size(); ++i)
          if (!drop[i]) kept.push_back(refined[i]);
        p.triangles = std::move(kept);
      }
    }
    p.polygon_f.reserve(p.polygon_eis.size());
    for (const auto& q : p.polygon_eis) p.polygon_f.push_back(to_vec2(q));
  } else {
    if (side == SnowflakeSide::inner) {
      p.polygon_f = {{0, 0}, {1, 0}, {0.5, 0.5 * std::numbers::sqrt3}};
    } else {
      p.polygon_f = hexagon_float(xi);
    }
    for (int j = 1; j <= level; ++j)
      p.polygon_f = snowflake_step_float(p.polygon_f, xi, side == SnowflakeSide::outer);
  }
  return p;
}

Prefractal generate_square_snowflake(int level) {
  check_level(level, 16, 5);

  Prefractal p;
  p.family = Family::square_snowflake;
  p.level = level;

  // integer polygon at scale 4^{-level}
  struct IPt {
    long long x, y;
  };
  std::vector<IPt> poly = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  long long scale = 1;
  for (int j = 1; j <= level; ++j) {
    for (auto& q : poly) {
      q.x *= 4;
      q.y *= 4;
    }
    scale *= 4;
    std::vector<IPt> next;
    next.reserve(poly.size() * 8);
    std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
      IPt P = poly[i], Q = poly[(i + 1) % n];
      next.push_back(P);
      // the rewrite pattern is fixed in absolute orientation; traversal
      // direction only reverses the emitted waypoints
      if (Q.y == P.y) {
        long long y = P.y, x = std::min(P.x, Q.x);
        if (Q.x > P.x) {
          next.insert(next.end(), {{x + 1, y}, {x + 1, y + 1}, {x + 2, y + 1}, {x + 2, y},
                                   {x + 2, y - 1}, {x + 3, y - 1}, {x + 3, y}});
        } else {
          next.insert(next.end(), {{x + 3, y}, {x + 3, y - 1}, {x + 2, y - 1}, {x + 2, y},
                                   {x + 2, y + 1}, {x + 1, y + 1}, {x + 1, y}});
        }
      } else {
        long long x = P.x, y = std::min(P.y, Q.y);
        if (Q.y > P.y) {
          next.insert(next.end(), {{x, y + 1}, {x - 1, y + 1}, {x - 1, y + 2}, {x, y + 2},
                                   {x + 1, y + 2}, {x + 1, y + 3}, {x, y + 3}});
        } else {
          next.insert(next.end(), {{x, y + 3}, {x + 1, y + 3}, {x + 1, y + 2}, {x, y + 2},
                                   {x - 1, y + 2}, {x - 1, y + 1}, {x, y + 1}});
        }
      }
    }
    poly = std::move(next);
  }

  Rational inv = Rational(1, scale);
  p.polygon.reserve(poly.size());
  for (const auto& q : poly) p.polygon.push_back({q.x * inv, q.y * inv});

  // interior lattice cells by scanline parity fill over vertical edges
  struct VEdge {
    long long x, y0, y1;
  };
  std::vector<VEdge> vedges;
  std::size_t n = poly.size();
  long long ymin = 0, ymax = 0;
  for (std::size_t i = 0; i < n; ++i) {
    IPt P = poly[i], Q = poly[(i + 1) % n];
    if (P.x == Q.x) vedges.push_back({P.x, std::min(P.y, Q.y), std::max(P.y, Q.y)});
    ymin = std::min(ymin, P.y);
    ymax = std::max(ymax, P.y);
  }
  for (long long row = ymin; row < ymax; ++row) {
    std::vector<long long> crossings;
    for (const auto& e : vedges)
      if (e.y0 <= row && row < e.y1) crossings.push_back(e.x);
    std::sort(crossings.begin(), crossings.end());
    for (std::size_t i = 0; i + 1 < crossings.size(); i += 2) {
      for (long long x = crossings[i]; x < crossings[i + 1]; ++x)
        p.squares.push_back({x * inv, row * inv, inv});
    }
  }
  return p;
}

std::string to_json(const Prefractal& p) {
  nlohmann::json j;
  switch (p.family) {
    case Family::cantor_set: j["family"] = "cantor_set"; break;
    case Family::cantor_dust: j["family"] = "cantor_dust"; break;
    case Family::sierpinski: j["family"] = "sierpinski"; break;
    case Family::koch_snowflake: j["family"] = "koch_snowflake"; break;
    case Family::square_snowflake: j["family"] = "square_snowflake"; break;
  }
  j["level"] = p.level;
  j["ambient"] = p.ambient();
  if (p.family == Family::cantor_set || p.family == Family::cantor_dust || p.family == Family::sierpinski) {
    j["alpha"] = rat_str(p.alpha);
    j["delta"] = rat_str(p.delta);
    j["dimension"] = attractor_dimension(make_ifs(p.family, p.alpha));
  }
  if (p.family == Family::koch_snowflake) {
    j["beta"] = p.beta;
    j["side"] = p.side == SnowflakeSide::inner ? "inner" : "outer";
    j["exact_lattice"] = p.exact_lattice;
  }
  if (!p.intervals.empty()) {
    auto arr = nlohmann::json::array();
    for (const auto& c : p.intervals) arr.push_back({rat_str(c.x0), rat_str(c.x1)});
    j["intervals"] = std::move(arr);
  }
  if (!p.squares.empty()) {
    auto arr = nlohmann::json::array();
    for (const auto& c : p.squares) arr.push_back({rat_str(c.x), rat_str(c.y), rat_str(c.side)});
    j["squares"] = std::move(arr);
  }
  if (!p.triangles.empty()) {
    auto arr = nlohmann::json::array();
    for (const auto& t : p.triangles) {
      arr.push_back({rat_str(t.v[0].a), rat_str(t.v[0].b), rat_str(t.v[1].a), rat_str(t.v[1].b),
                     rat_str(t.v[2].a), rat_str(t.v[2].b)});
    }
    j["triangles_lattice_basis"] = std::move(arr);
  }
  if (!p.polygon.empty()) {
    auto arr = nlohmann::json::array();
    for (const auto& q : p.polygon) arr.push_back({rat_str(q.x), rat_str(q.y)});
    j["polygon"] = std::move(arr);
  }
  if (!p.polygon_eis.empty()) {
    auto arr = nlohmann::json::array();
    for (const auto& q : p.polygon_eis) arr.push_back({rat_str(q.a), rat_str(q.b)});
    j["polygon_lattice_basis"] = std::move(arr);
  } else if (!p.polygon_f.empty()) {
    auto arr = nlohmann::json::array();
    for (const auto& q : p.polygon_f) arr.push_back({q.x, q.y});
    j["polygon_float"] = std::move(arr);
  }
  return j.dump(2);
}

}  // namespace fracbem
