#include "fracbem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fracbem/quadrature.hpp"
#include "json.hpp"

namespace fracbem {

double cell_measure(const Cell& c) {
  if (std::holds_alternative<SegmentCell>(c)) {
    const auto& s = std::get<SegmentCell>(c);
    return s.x1 - s.x0;
  }
  if (std::holds_alternative<SquareCell>(c)) {
    const auto& s = std::get<SquareCell>(c);
    return s.side * s.side;
  }
  const auto& t = std::get<TriangleCell>(c);
  double cr = (t.v1.x - t.v0.x) * (t.v2.y - t.v0.y) - (t.v1.y - t.v0.y) * (t.v2.x - t.v0.x);
  return 0.5 * std::fabs(cr);
}

double cell_diameter(const Cell& c) {
  if (std::holds_alternative<SegmentCell>(c)) {
    const auto& s = std::get<SegmentCell>(c);
    return s.x1 - s.x0;
  }
  if (std::holds_alternative<SquareCell>(c)) {
    const auto& s = std::get<SquareCell>(c);
    return s.side * std::sqrt(2.0);
  }
  const auto& t = std::get<TriangleCell>(c);
  return std::max({dist(t.v0, t.v1), dist(t.v1, t.v2), dist(t.v2, t.v0)});
}

Vec2 cell_centroid(const Cell& c) {
  if (std::holds_alternative<SegmentCell>(c)) {
    const auto& s = std::get<SegmentCell>(c);
    return {0.5 * (s.x0 + s.x1), 0.0};
  }
  if (std::holds_alternative<SquareCell>(c)) {
    const auto& s = std::get<SquareCell>(c);
    return {s.ll.x + 0.5 * s.side, s.ll.y + 0.5 * s.side};
  }
  const auto& t = std::get<TriangleCell>(c);
  return {(t.v0.x + t.v1.x + t.v2.x) / 3.0, (t.v0.y + t.v1.y + t.v2.y) / 3.0};
}

namespace {

Cell to_float_cell(const ExactCell& e) {
  if (std::holds_alternative<ExactSegment>(e)) {
    const auto& s = std::get<ExactSegment>(e);
    return SegmentCell{to_double(s.x0), to_double(s.x1)};
  }
  if (std::holds_alternative<ExactSquare>(e)) {
    const auto& s = std::get<ExactSquare>(e);
    return SquareCell{Vec2{to_double(s.x), to_double(s.y)}, to_double(s.side)};
  }
  const auto& t = std::get<EisTriangle>(e);
  return TriangleCell{to_vec2(t.v[0]), to_vec2(t.v[1]), to_vec2(t.v[2])};
}

Element single_cell_element(ElementKind kind, ExactCell ex) {
  Element el;
  el.kind = kind;
  el.parts_exact.push_back(std::move(ex));
  el.parts.push_back(to_float_cell(el.parts_exact.back()));
  el.center = cell_centroid(el.parts.front());
  el.diameter = cell_diameter(el.parts.front());
  el.measure = cell_measure(el.parts.front());
  return el;
}

bool is_ifs_family(Family f) {
  return f == Family::cantor_set || f == Family::cantor_dust || f == Family::sierpinski;
}

int exact_square_root(int n) {
  int m = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  while (m * m > n) --m;
  while ((m + 1) * (m + 1) <= n) ++m;
  return m * m == n ? m : -1;
}

Mesh finish(Mesh&& m, const Prefractal& p) {
  m.ambient = p.ambient();
  double h = 0;
  for (const Element& e : m.elements) h = std::max(h, e.diameter);
  m.h = h;
  m.screen = std::make_shared<Prefractal>(p);
  return std::move(m);
}

} // namespace

Mesh mesh_per_component(const Prefractal& p, int n0) {
  if (!is_ifs_family(p.family))
    throw std::invalid_argument("per-component meshing applies to iterated-function-system screens");
  if (n0 < 1) throw std::invalid_argument("per-component meshing needs n0 >= 1");
  Mesh m;
  if (p.family == Family::cantor_set) {
    for (const RatInterval& c : p.intervals) {
      Rational step = (c.x1 - c.x0) / n0;
      for (int i = 0; i < n0; ++i)
        m.elements.push_back(single_cell_element(
            ElementKind::segment, ExactSegment{c.x0 + i * step, c.x0 + (i + 1) * step}));
    }
    return finish(std::move(m), p);
  }
  int sub = exact_square_root(n0);
  if (sub < 1)
    throw std::invalid_argument("congruent subdivision of 2D cells needs n0 to be a perfect square");
  if (p.family == Family::cantor_dust) {
    for (const RatSquare& c : p.squares) {
      Rational step = c.side / sub;
      for (int j = 0; j < sub; ++j)
        for (int i = 0; i < sub; ++i)
          m.elements.push_back(single_cell_element(
              ElementKind::square, ExactSquare{c.x + i * step, c.y + j * step, step}));
    }
    return finish(std::move(m), p);
  }
  std::vector<EisTriangle> children;
  for (const EisTriangle& t : p.triangles) {
    children.clear();
    subdivide_triangle(t, sub, children);
    for (const EisTriangle& c : children)
      m.elements.push_back(single_cell_element(ElementKind::triangle, c));
  }
  return finish(std::move(m), p);
}

Mesh mesh_grouped(const Prefractal& p, int ancestor_level) {
  if (!is_ifs_family(p.family))
    throw std::invalid_argument("grouped meshing applies to iterated-function-system screens");
  if (ancestor_level < 0 || ancestor_level > p.level)
    throw std::invalid_argument("ancestor level must lie in [0, level]");
  if (ancestor_level == p.level) return mesh_per_component(p, 1);

  Prefractal coarse = generate_prefractal(p.family, p.alpha, p.delta, ancestor_level);
  std::size_t nu = p.family == Family::cantor_set ? 2 : (p.family == Family::cantor_dust ? 4 : 3);
  std::size_t run = 1;
  for (int l = ancestor_level; l < p.level; ++l) run *= nu;

  auto cells_of = [](const Prefractal& q) {
    std::vector<ExactCell> cells;
    for (const RatInterval& c : q.intervals) cells.push_back(ExactSegment{c.x0, c.x1});
    for (const RatSquare& c : q.squares) cells.push_back(ExactSquare{c.x, c.y, c.side});
    for (const EisTriangle& c : q.triangles) cells.push_back(c);
    return cells;
  };
  std::vector<ExactCell> fine = cells_of(p), anc = cells_of(coarse);
  if (fine.size() != anc.size() * run)
    throw std::logic_error("cell counts out of step between levels");

  Mesh m;
  for (std::size_t a = 0; a < anc.size(); ++a) {
    Element el;
    el.kind = ElementKind::cell_group;
    for (std::size_t r = 0; r < run; ++r) {
      el.parts_exact.push_back(fine[a * run + r]);
      el.parts.push_back(to_float_cell(el.parts_exact.back()));
      el.measure += cell_measure(el.parts.back());
    }
    Cell anc_cell = to_float_cell(anc[a]);
    el.center = cell_centroid(anc_cell);
    el.diameter = cell_diameter(anc_cell);
    m.elements.push_back(std::move(el));
  }
  return finish(std::move(m), p);
}

Mesh uniform_lattice_mesh_subdivided(const Prefractal& p, int sub) {
  if (sub < 1) throw std::invalid_argument("subdivision factor must be positive");
  Mesh m;
  if (p.family == Family::koch_snowflake) {
    if (!p.exact_lattice)
      throw std::invalid_argument("lattice meshing needs the exact-lattice snowflake (beta = pi/6)");
    std::vector<EisTriangle> children;
    for (const EisTriangle& t : p.triangles) {
      children.clear();
      subdivide_triangle(t, sub, children);
      for (const EisTriangle& c : children)
        m.elements.push_back(single_cell_element(ElementKind::triangle, c));
    }
    return finish(std::move(m), p);
  }
  if (p.family == Family::sierpinski) {
    if (p.delta != 0)
      throw std::invalid_argument("lattice meshing needs the standard (unthickened) Sierpinski screen");
    std::vector<EisTriangle> children;
    for (const EisTriangle& t : p.triangles) {
      children.clear();
      subdivide_triangle(t, sub, children);
      for (const EisTriangle& c : children)
        m.elements.push_back(single_cell_element(ElementKind::triangle, c));
    }
    return finish(std::move(m), p);
  }
  if (p.family == Family::square_snowflake) {
    for (const RatSquare& c : p.squares) {
      Rational step = c.side / sub;
      for (int j = 0; j < sub; ++j)
        for (int i = 0; i < sub; ++i)
          m.elements.push_back(single_cell_element(
              ElementKind::square, ExactSquare{c.x + i * step, c.y + j * step, step}));
    }
    return finish(std::move(m), p);
  }
  throw std::invalid_argument("uniform lattice meshes apply to snowflake interiors and the standard Sierpinski screen");
}

Mesh uniform_lattice_mesh(const Prefractal& p, const Rational& h) {
  if (h <= 0) throw std::invalid_argument("lattice spacing must be positive");
  int sub = 0;
  if (p.family == Family::square_snowflake) {
    if (p.squares.empty()) throw std::invalid_argument("empty screen");
    Rational ratio = p.squares.front().side / h;
    if (denominator(ratio) != 1)
      throw std::invalid_argument("lattice spacing must divide the native cell spacing");
    sub = static_cast<int>(numerator(ratio).convert_to<long long>());
  } else if (p.family == Family::koch_snowflake || p.family == Family::sierpinski) {
    if (p.triangles.empty()) throw std::invalid_argument("screen carries no lattice triangles");
    const EisTriangle& t = p.triangles.front();
    Rational side2 = eis_dist2(t.v[0], t.v[1]);
    Rational msq = side2 / (h * h);
    if (denominator(msq) != 1)
      throw std::invalid_argument("lattice spacing must divide the native cell spacing");
    boost::multiprecision::cpp_int n = numerator(msq);
    boost::multiprecision::cpp_int r = boost::multiprecision::sqrt(n);
    if (r * r != n)
      throw std::invalid_argument("lattice spacing must divide the native cell spacing");
    sub = static_cast<int>(r.convert_to<long long>());
  } else {
    throw std::invalid_argument("uniform lattice meshes apply to snowflake interiors and the standard Sierpinski screen");
  }
  if (sub < 1) throw std::invalid_argument("lattice spacing exceeds the native cell spacing");
  return uniform_lattice_mesh_subdivided(p, sub);
}

namespace {

struct RatPt2 { Rational x, y; };

Rational cross3(const RatPt2& o, const RatPt2& a, const RatPt2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

std::vector<RatPt2> convex_hull(std::vector<RatPt2> pts) {
  std::sort(pts.begin(), pts.end(), [](const RatPt2& a, const RatPt2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(), [](const RatPt2& a, const RatPt2& b) {
    return a.x == b.x && a.y == b.y;
  }), pts.end());
  std::size_t n = pts.size();
  if (n < 3) return pts;
  std::vector<RatPt2> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross3(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = n - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross3(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

// open convex hulls disjoint (touching allowed): some edge normal separates
bool hulls_open_disjoint(const std::vector<RatPt2>& A, const std::vector<RatPt2>& B) {
  auto separated_by_edges_of = [](const std::vector<RatPt2>& P, const std::vector<RatPt2>& Q) {
    std::size_t n = P.size();
    for (std::size_t i = 0; i < n; ++i) {
      const RatPt2& a = P[i];
      const RatPt2& b = P[(i + 1) % n];
      Rational nx = a.y - b.y, ny = b.x - a.x;
      Rational minP, maxP, minQ, maxQ;
      bool first = true;
      for (const RatPt2& p : P) {
        Rational v = nx * p.x + ny * p.y;
        if (first) { minP = maxP = v; first = false; }
        else { minP = std::min(minP, v); maxP = std::max(maxP, v); }
      }
      first = true;
      for (const RatPt2& q : Q) {
        Rational v = nx * q.x + ny * q.y;
        if (first) { minQ = maxQ = v; first = false; }
        else { minQ = std::min(minQ, v); maxQ = std::max(maxQ, v); }
      }
      if (minQ >= maxP || minP >= maxQ) return true;
    }
    return false;
  };
  if (A.size() < 3 || B.size() < 3) return true;
  return separated_by_edges_of(A, B) || separated_by_edges_of(B, A);
}

} // namespace

PreconvexReport validate_preconvex(const Mesh& m) {
  PreconvexReport rep;
  if (!m.screen) throw std::invalid_argument("mesh has no screen attached");
  rep.screen_measure = m.screen->measure();
  for (const Element& e : m.elements) rep.measure_sum += e.measure;
  rep.measure_match = std::fabs(rep.measure_sum - rep.screen_measure) <=
                      1e-9 * std::max(1.0, rep.screen_measure);

  if (m.ambient == 2) {
    std::vector<std::pair<Rational, Rational>> spans;
    spans.reserve(m.elements.size());
    for (const Element& e : m.elements) {
      Rational lo, hi;
      bool first = true;
      for (const ExactCell& c : e.parts_exact) {
        const auto& s = std::get<ExactSegment>(c);
        if (first) { lo = s.x0; hi = s.x1; first = false; }
        else { lo = std::min(lo, s.x0); hi = std::max(hi, s.x1); }
      }
      spans.emplace_back(lo, hi);
    }
    std::sort(spans.begin(), spans.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    rep.hulls_disjoint = true;
    for (std::size_t i = 0; i + 1 < spans.size(); ++i) {
      if (spans[i + 1].first < spans[i].second) {
        rep.hulls_disjoint = false;
        rep.detail = "element hull intervals overlap";
        break;
      }
    }
  } else {
    // hull points in one exact planar chart: cartesian rationals for squares,
    // lattice-basis rationals for triangles (affine, so disjointness carries over)
    std::vector<std::vector<RatPt2>> hulls;
    hulls.reserve(m.elements.size());
    bool squares = false, triangles = false;
    for (const Element& e : m.elements) {
      std::vector<RatPt2> pts;
      for (const ExactCell& c : e.parts_exact) {
        if (std::holds_alternative<ExactSquare>(c)) {
          squares = true;
          const auto& s = std::get<ExactSquare>(c);
          pts.push_back({s.x, s.y});
          pts.push_back({s.x + s.side, s.y});
          pts.push_back({s.x, s.y + s.side});
          pts.push_back({s.x + s.side, s.y + s.side});
        } else if (std::holds_alternative<EisTriangle>(c)) {
          triangles = true;
          const auto& t = std::get<EisTriangle>(c);
          for (const EisPoint& v : t.v) pts.push_back({v.a, v.b});
        } else {
          throw std::invalid_argument("segment cells cannot appear in a 3D-ambient mesh");
        }
      }
      hulls.push_back(convex_hull(std::move(pts)));
    }
    if (squares && triangles) throw std::invalid_argument("mixed square/triangle meshes are not supported");

    struct Box { double x0, x1, y0, y1; std::size_t idx; };
    std::vector<Box> boxes;
    boxes.reserve(hulls.size());
    for (std::size_t i = 0; i < hulls.size(); ++i) {
      Box b{1e300, -1e300, 1e300, -1e300, i};
      for (const RatPt2& p : hulls[i]) {
        double x = to_double(p.x), y = to_double(p.y);
        b.x0 = std::min(b.x0, x); b.x1 = std::max(b.x1, x);
        b.y0 = std::min(b.y0, y); b.y1 = std::max(b.y1, y);
      }
      boxes.push_back(b);
    }
    std::sort(boxes.begin(), boxes.end(), [](const Box& a, const Box& b) { return a.x0 < b.x0; });
    rep.hulls_disjoint = true;
    const double tol = 1e-12;
    for (std::size_t i = 0; i < boxes.size() && rep.hulls_disjoint; ++i) {
      for (std::size_t j = i + 1; j < boxes.size(); ++j) {
        if (boxes[j].x0 >= boxes[i].x1 - tol) break;
        if (boxes[j].y0 >= boxes[i].y1 - tol || boxes[i].y0 >= boxes[j].y1 - tol) continue;
        if (!hulls_open_disjoint(hulls[boxes[i].idx], hulls[boxes[j].idx])) {
          rep.hulls_disjoint = false;
          rep.detail = "element hulls overlap";
          break;
        }
      }
    }
  }
  rep.pass = rep.hulls_disjoint && rep.measure_match;
  if (!rep.measure_match && rep.detail.empty()) rep.detail = "element measures do not sum to the screen measure";
  return rep;
}

namespace {

std::complex<double> integrate_cell(const Cell& c, const std::function<std::complex<double>(Vec2)>& f) {
  std::complex<double> acc{};
  if (std::holds_alternative<SegmentCell>(c)) {
    const auto& s = std::get<SegmentCell>(c);
    const QuadratureRule& g = gauss_legendre(16);
    double mid = 0.5 * (s.x0 + s.x1), half = 0.5 * (s.x1 - s.x0);
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
      acc += (half * g.weights[i]) * f(Vec2{mid + half * g.nodes[i].x, 0.0});
    return acc;
  }
  if (std::holds_alternative<SquareCell>(c)) {
    const auto& s = std::get<SquareCell>(c);
    const QuadratureRule& g = gauss_legendre(12);
    double half = 0.5 * s.side;
    Vec2 ctr{s.ll.x + half, s.ll.y + half};
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
      for (std::size_t j = 0; j < g.nodes.size(); ++j)
        acc += (half * g.weights[i]) * (half * g.weights[j]) *
               f(Vec2{ctr.x + half * g.nodes[j].x, ctr.y + half * g.nodes[i].x});
    return acc;
  }
  const auto& t = std::get<TriangleCell>(c);
  const QuadratureRule& rule = triangle_rule_7pt();
  double jac = (t.v1.x - t.v0.x) * (t.v2.y - t.v0.y) - (t.v1.y - t.v0.y) * (t.v2.x - t.v0.x);
  // composite over a 4x4 congruent refinement for smooth-integrand accuracy
  const int sub = 4;
  Vec2 e1 = t.v1 - t.v0, e2 = t.v2 - t.v0;
  for (int bj = 0; bj < sub; ++bj) {
    for (int bi = 0; bi + bj < sub; ++bi) {
      auto corner = [&](double u, double v) {
        return Vec2{t.v0.x + u * e1.x + v * e2.x, t.v0.y + u * e1.y + v * e2.y};
      };
      double s = 1.0 / sub;
      Vec2 a = corner(bi * s, bj * s);
      Vec2 b = corner((bi + 1) * s, bj * s);
      Vec2 cc = corner(bi * s, (bj + 1) * s);
      auto small = [&](Vec2 p0, Vec2 p1, Vec2 p2) {
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
          double u = rule.nodes[i].x, v = rule.nodes[i].y;
          Vec2 q{p0.x + u * (p1.x - p0.x) + v * (p2.x - p0.x),
                 p0.y + u * (p1.y - p0.y) + v * (p2.y - p0.y)};
          acc += (rule.weights[i] * jac / (sub * sub)) * f(q);
        }
      };
      small(a, b, cc);
      if (bi + bj < sub - 1) {
        Vec2 d = corner((bi + 1) * s, (bj + 1) * s);
        small(d, cc, b);
      }
    }
  }
  return acc;
}

} // namespace

std::vector<std::complex<double>> l2_project(const Mesh& m,
                                             const std::function<std::complex<double>(Vec2)>& f) {
  std::vector<std::complex<double>> coeff;
  coeff.reserve(m.elements.size());
  for (const Element& e : m.elements) {
    std::complex<double> acc{};
    for (const Cell& c : e.parts) acc += integrate_cell(c, f);
    coeff.push_back(acc / e.measure);
  }
  return coeff;
}

std::string to_json(const Mesh& m) {
  nlohmann::json j;
  j["ambient"] = m.ambient;
  j["h"] = m.h;
  j["element_count"] = m.elements.size();
  nlohmann::json els = nlohmann::json::array();
  for (const Element& e : m.elements) {
    nlohmann::json je;
    switch (e.kind) {
      case ElementKind::segment: je["kind"] = "segment"; break;
      case ElementKind::square: je["kind"] = "square"; break;
      case ElementKind::triangle: je["kind"] = "triangle"; break;
      case ElementKind::cell_group: je["kind"] = "cell_group"; break;
    }
    je["center"] = {e.center.x, e.center.y};
    je["diameter"] = e.diameter;
    je["measure"] = e.measure;
    nlohmann::json parts = nlohmann::json::array();
    for (const Cell& c : e.parts) {
      if (std::holds_alternative<SegmentCell>(c)) {
        const auto& s = std::get<SegmentCell>(c);
        parts.push_back({{"type", "segment"}, {"x", {s.x0, s.x1}}});
      } else if (std::holds_alternative<SquareCell>(c)) {
        const auto& s = std::get<SquareCell>(c);
        parts.push_back({{"type", "square"}, {"ll", {s.ll.x, s.ll.y}}, {"side", s.side}});
      } else {
        const auto& t = std::get<TriangleCell>(c);
        parts.push_back({{"type", "triangle"},
                         {"v", {{t.v0.x, t.v0.y}, {t.v1.x, t.v1.y}, {t.v2.x, t.v2.y}}}});
      }
    }
    je["parts"] = std::move(parts);
    els.push_back(std::move(je));
  }
  j["elements"] = std::move(els);
  return j.dump();
}

} // namespace fracbem
