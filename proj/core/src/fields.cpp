#include "fracbem/fields.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "fracbem/quadrature.hpp"

namespace fracbem {

namespace {

constexpr double pi = 3.14159265358979323846;
using cplx = std::complex<double>;

} // namespace

FieldGrid near_field_box_2d(int n) {
  if (n < 2) throw std::invalid_argument("grid resolution too small");
  FieldGrid g;
  g.ambient = 2;
  const double x0 = -1.0, x1 = 2.0, y0 = -1.5, y1 = 1.5;
  const double dx = (x1 - x0) / n, dy = (y1 - y0) / n;
  g.faces.push_back({0, n, n, "box"});
  g.points.reserve(static_cast<std::size_t>(n) * n);
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) {
      g.points.push_back(Vec3{x0 + (ix + 0.5) * dx, y0 + (iy + 0.5) * dy, 0.0});
      g.weights.push_back(dx * dy);
    }
  return g;
}

FieldGrid near_field_faces_3d(int n) {
  if (n < 2) throw std::invalid_argument("grid resolution too small");
  FieldGrid g;
  g.ambient = 3;
  auto face = [&](const char* label, Vec3 origin, Vec3 ea, Vec3 eb, double la, double lb) {
    FieldGrid::Face f{g.points.size(), n, n, label};
    double da = la / n, db = lb / n;
    for (int ib = 0; ib < n; ++ib)
      for (int ia = 0; ia < n; ++ia) {
        Vec3 p = origin + (ia + 0.5) * da * ea + (ib + 0.5) * db * eb;
        g.points.push_back(p);
        g.weights.push_back(da * db);
      }
    g.faces.push_back(f);
  };
  // box (-1,2) x (-1,2) x (-1,1)
  face("x=-1", Vec3{-1, -1, -1}, Vec3{0, 1, 0}, Vec3{0, 0, 1}, 3.0, 2.0);
  face("y=2", Vec3{-1, 2, -1}, Vec3{1, 0, 0}, Vec3{0, 0, 1}, 3.0, 2.0);
  face("z=-1", Vec3{-1, -1, -1}, Vec3{1, 0, 0}, Vec3{0, 1, 0}, 3.0, 3.0);
  return g;
}

DirectionSet circle_directions(int n) {
  if (n < 4) throw std::invalid_argument("need at least 4 directions");
  DirectionSet d;
  d.ambient = 2;
  for (int i = 0; i < n; ++i) {
    double t = 2.0 * pi * i / n;
    d.directions.push_back(Vec3{std::cos(t), std::sin(t), 0.0});
    d.weights.push_back(2.0 * pi / n);
    d.theta.push_back(t);
  }
  return d;
}

DirectionSet sphere_directions(int n_theta, int n_phi) {
  if (n_theta < 2 || n_phi < 4) throw std::invalid_argument("direction grid too small");
  DirectionSet d;
  d.ambient = 3;
  const QuadratureRule& g = gauss_legendre(n_theta);
  for (int i = 0; i < n_theta; ++i) {
    double ct = g.nodes[static_cast<std::size_t>(i)].x; // cos(theta)
    double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
    double th = std::acos(ct);
    for (int j = 0; j < n_phi; ++j) {
      double ph = 2.0 * pi * j / n_phi;
      d.directions.push_back(Vec3{st * std::cos(ph), st * std::sin(ph), ct});
      d.weights.push_back(g.weights[static_cast<std::size_t>(i)] * 2.0 * pi / n_phi);
      d.theta.push_back(th);
      d.phi.push_back(ph);
    }
  }
  return d;
}

namespace {

void check_density(const Density& d) {
  if (!d.mesh || d.coefficients.size() != static_cast<Eigen::Index>(d.mesh->size()))
    throw std::invalid_argument("density does not match its mesh");
}

} // namespace

std::vector<std::complex<double>> eval_scattered(const Density& d, const std::vector<Vec3>& points) {
  check_density(d);
  const Mesh& m = *d.mesh;
  KernelSpec spec = KernelSpec::helmholtz(m.ambient, d.k);
  std::vector<int> qs(m.size());
  for (std::size_t e = 0; e < m.size(); ++e)
    qs[e] = points_per_axis(m.elements[e].diameter, spec.wavelength());

  std::vector<cplx> out;
  out.reserve(points.size());
  for (const Vec3& x : points) {
    cplx acc{};
    for (std::size_t e = 0; e < m.size(); ++e) {
      for (const Cell& part : m.elements[e].parts) {
        if (cell_distance(part, x) < 1e-13 * std::max(1.0, cell_diameter(part)))
          throw std::invalid_argument("field point lies on the screen closure");
        acc += d.coefficients(static_cast<Eigen::Index>(e)) * cell_integral(spec, part, x, qs[e]);
      }
    }
    out.push_back(-acc);
  }
  return out;
}

std::vector<std::complex<double>> eval_total(const Density& d, const IncidentWave& wave,
                                             const std::vector<Vec3>& points) {
  validate_wave(wave);
  std::vector<cplx> out = eval_scattered(d, points);
  for (std::size_t i = 0; i < points.size(); ++i)
    out[i] += std::exp(cplx(0.0, wave.k * dot(wave.direction, points[i])));
  return out;
}

void eval_scattered(const Density& d, FieldGrid& grid) {
  grid.values = eval_scattered(d, grid.points);
}

std::vector<std::complex<double>> far_field(const Density& d, const DirectionSet& dirs) {
  check_density(d);
  const Mesh& m = *d.mesh;
  if (dirs.ambient != m.ambient)
    throw std::invalid_argument("direction set dimension does not match the mesh");
  const double k = d.k;
  cplx pref;
  if (m.ambient == 3) {
    pref = -1.0 / (4.0 * pi);
  } else {
    pref = std::exp(cplx(0.0, -0.75 * pi)) / std::sqrt(8.0 * pi * k);
  }

  std::vector<int> qs(m.size());
  for (std::size_t e = 0; e < m.size(); ++e)
    qs[e] = points_per_axis(m.elements[e].diameter, 2.0 * pi / k);

  std::vector<cplx> out;
  out.reserve(dirs.directions.size());
  const QuadratureRule& tri = triangle_rule_7pt();
  for (const Vec3& xhat : dirs.directions) {
    cplx acc{};
    for (std::size_t e = 0; e < m.size(); ++e) {
      cplx mom{};
      for (const Cell& part : m.elements[e].parts) {
        if (std::holds_alternative<SegmentCell>(part)) {
          const auto& s = std::get<SegmentCell>(part);
          double kd = -k * xhat.x;
          double len = s.x1 - s.x0;
          if (std::fabs(kd) * len < 1e-8) {
            mom += len * std::exp(cplx(0.0, kd * 0.5 * (s.x0 + s.x1)));
          } else {
            mom += (std::exp(cplx(0.0, kd * s.x1)) - std::exp(cplx(0.0, kd * s.x0))) / cplx(0.0, kd);
          }
        } else if (std::holds_alternative<SquareCell>(part)) {
          const auto& s = std::get<SquareCell>(part);
          const QuadratureRule& g = gauss_legendre(qs[e]);
          double half = 0.5 * s.side;
          double cx = s.ll.x + half, cy = s.ll.y + half;
          cplx sum{};
          for (std::size_t i = 0; i < g.nodes.size(); ++i) {
            double wy = half * g.weights[i];
            double y2 = cy + half * g.nodes[i].x;
            for (std::size_t j = 0; j < g.nodes.size(); ++j) {
              double y1 = cx + half * g.nodes[j].x;
              sum += wy * (half * g.weights[j]) *
                     std::exp(cplx(0.0, -k * (xhat.x * y1 + xhat.y * y2)));
            }
          }
          mom += sum;
        } else {
          const auto& t = std::get<TriangleCell>(part);
          double jac = (t.v1.x - t.v0.x) * (t.v2.y - t.v0.y) - (t.v1.y - t.v0.y) * (t.v2.x - t.v0.x);
          cplx sum{};
          for (std::size_t i = 0; i < tri.nodes.size(); ++i) {
            double u = tri.nodes[i].x, v = tri.nodes[i].y;
            double y1 = t.v0.x + u * (t.v1.x - t.v0.x) + v * (t.v2.x - t.v0.x);
            double y2 = t.v0.y + u * (t.v1.y - t.v0.y) + v * (t.v2.y - t.v0.y);
            sum += (tri.weights[i] * jac) * std::exp(cplx(0.0, -k * (xhat.x * y1 + xhat.y * y2)));
          }
          mom += sum;
        }
      }
      acc += d.coefficients(static_cast<Eigen::Index>(e)) * mom;
    }
    out.push_back(pref * acc);
  }
  return out;
}

void write_field_csv(const std::string& path, const FieldGrid& grid) {
  if (grid.values.size() != grid.points.size())
    throw std::invalid_argument("grid has no evaluated values");
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  std::fprintf(f, "x,y,z,re,im\n");
  for (std::size_t i = 0; i < grid.points.size(); ++i) {
    const Vec3& p = grid.points[i];
    std::fprintf(f, "%.12g,%.12g,%.12g,%.12g,%.12g\n", p.x, p.y, p.z,
                 grid.values[i].real(), grid.values[i].imag());
  }
  std::fclose(f);
}

void write_field_pgm(const std::string& path_prefix, const FieldGrid& grid) {
  if (grid.values.size() != grid.points.size())
    throw std::invalid_argument("grid has no evaluated values");
  for (const FieldGrid::Face& face : grid.faces) {
    double vmax = 0;
    for (int i = 0; i < face.nx * face.ny; ++i)
      vmax = std::max(vmax, std::abs(grid.values[face.offset + static_cast<std::size_t>(i)]));
    std::string path = path_prefix;
    if (grid.faces.size() > 1) path += "_" + face.label;
    path += ".pgm";
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    std::fprintf(f, "P2\n# |u| linear, max %.12g\n%d %d\n255\n", vmax, face.nx, face.ny);
    for (int iy = face.ny - 1; iy >= 0; --iy) {
      for (int ix = 0; ix < face.nx; ++ix) {
        double v = std::abs(grid.values[face.offset + static_cast<std::size_t>(iy * face.nx + ix)]);
        int g = vmax > 0 ? static_cast<int>(std::lround(255.0 * v / vmax)) : 0;
        std::fprintf(f, "%d%c", g, ix + 1 == face.nx ? '\n' : ' ');
      }
    }
    std::fclose(f);
  }
}

void write_far_csv(const std::string& path, const DirectionSet& dirs,
                   const std::vector<std::complex<double>>& values) {
  if (values.size() != dirs.directions.size())
    throw std::invalid_argument("far-field values do not match the direction set");
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  if (dirs.ambient == 2) {
    std::fprintf(f, "theta,re,im,abs\n");
    for (std::size_t i = 0; i < values.size(); ++i)
      std::fprintf(f, "%.12g,%.12g,%.12g,%.12g\n", dirs.theta[i], values[i].real(),
                   values[i].imag(), std::abs(values[i]));
  } else {
    std::fprintf(f, "theta,phi,re,im,abs\n");
    for (std::size_t i = 0; i < values.size(); ++i)
      std::fprintf(f, "%.12g,%.12g,%.12g,%.12g,%.12g\n", dirs.theta[i], dirs.phi[i],
                   values[i].real(), values[i].imag(), std::abs(values[i]));
  }
  std::fclose(f);
}

} // namespace fracbem
