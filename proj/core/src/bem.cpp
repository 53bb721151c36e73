#include "fracbem/bem.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "fracbem/quadrature.hpp"

namespace fracbem {

namespace {

using cplx = std::complex<double>;

double cell_size(const Cell& c) {
  if (std::holds_alternative<SegmentCell>(c)) {
    const auto& s = std::get<SegmentCell>(c);
    return s.x1 - s.x0;
  }
  if (std::holds_alternative<SquareCell>(c)) return std::get<SquareCell>(c).side;
  const auto& t = std::get<TriangleCell>(c);
  return dist(t.v0, t.v1);
}

ElementKind cell_kind(const Cell& c) {
  if (std::holds_alternative<SegmentCell>(c)) return ElementKind::segment;
  if (std::holds_alternative<SquareCell>(c)) return ElementKind::square;
  return ElementKind::triangle;
}

} // namespace

void validate_wave(const IncidentWave& w) {
  if (!(w.k > 0)) throw std::invalid_argument("wavenumber must be positive");
  if (std::fabs(norm(w.direction) - 1.0) > 1e-14)
    throw std::invalid_argument("incident direction must be a unit vector");
}

LinearSystem assemble_collocation(const Mesh& m, const IncidentWave& wave) {
  validate_wave(wave);
  if (m.elements.empty()) throw std::invalid_argument("empty mesh");
  const std::size_t n = m.size();
  KernelSpec spec = KernelSpec::helmholtz(m.ambient, wave.k);
  LinearSystem sys;
  sys.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  sys.rhs.resize(static_cast<Eigen::Index>(n));

  std::vector<int> qs(n);
  for (std::size_t e = 0; e < n; ++e)
    qs[e] = points_per_axis(m.elements[e].diameter, spec.wavelength());

  for (std::size_t l = 0; l < n; ++l) {
    const Element& rowel = m.elements[l];
    Vec3 x{rowel.center.x, rowel.center.y, 0.0};
    sys.rhs(static_cast<Eigen::Index>(l)) =
        std::exp(cplx(0.0, wave.k * (wave.direction.x * x.x + wave.direction.y * x.y)));
    for (std::size_t c = 0; c < n; ++c) {
      const Element& colel = m.elements[c];
      cplx acc{};
      for (const Cell& part : colel.parts) {
        double diam = cell_diameter(part);
        double d = cell_distance(part, x);
        if (d < 1e-12 * std::max(1.0, diam)) {
          Vec2 ctr = cell_centroid(part);
          bool centered = l == c && std::hypot(ctr.x - x.x, ctr.y - x.y) <= 1e-12 * diam;
          if (!centered)
            throw std::runtime_error("collocation node touches a foreign cell closure; mesh is not pre-convex");
          acc += diagonal_entry(spec, cell_kind(part), cell_size(part));
        } else {
          acc += cell_integral(spec, part, x, qs[c]);
        }
      }
      sys.matrix(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(c)) = acc;
    }
  }
  return sys;
}

LinearSystem assemble_galerkin_2d(const Mesh& m, const IncidentWave& wave) {
  validate_wave(wave);
  if (m.ambient != 2) throw std::invalid_argument("Galerkin assembly is for segment meshes on the line");
  if (m.elements.empty()) throw std::invalid_argument("empty mesh");
  const std::size_t n = m.size();
  KernelSpec spec = KernelSpec::helmholtz(2, wave.k);
  LinearSystem sys;
  sys.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  sys.rhs.resize(static_cast<Eigen::Index>(n));

  const double kd = wave.k * wave.direction.x;
  for (std::size_t l = 0; l < n; ++l) {
    cplx rhs{};
    for (const Cell& part : m.elements[l].parts) {
      const auto& s = std::get<SegmentCell>(part);
      double len = s.x1 - s.x0;
      if (std::fabs(kd) * len < 1e-8) {
        double mid = 0.5 * (s.x0 + s.x1);
        rhs += len * std::exp(cplx(0.0, kd * mid));
      } else {
        rhs += (std::exp(cplx(0.0, kd * s.x1)) - std::exp(cplx(0.0, kd * s.x0))) / cplx(0.0, kd);
      }
    }
    sys.rhs(static_cast<Eigen::Index>(l)) = rhs;
  }

  for (std::size_t l = 0; l < n; ++l) {
    for (std::size_t c = l; c < n; ++c) {
      cplx acc{};
      for (const Cell& pl : m.elements[l].parts) {
        const auto& sl = std::get<SegmentCell>(pl);
        for (const Cell& pc : m.elements[c].parts) {
          const auto& sc = std::get<SegmentCell>(pc);
          acc += segment_pair_integral(spec, sl.x0, sl.x1, sc.x0, sc.x1);
        }
      }
      sys.matrix(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(c)) = acc;
      sys.matrix(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(l)) = acc;
    }
  }
  return sys;
}

SolveInfo solve(const LinearSystem& sys, std::size_t dense_limit) {
  const Eigen::Index n = sys.matrix.rows();
  if (n == 0 || sys.matrix.cols() != n || sys.rhs.size() != n)
    throw std::invalid_argument("malformed linear system");
  if (static_cast<std::size_t>(n) > dense_limit)
    throw std::invalid_argument("system size exceeds the dense solver limit");
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(sys.matrix);
  Eigen::VectorXcd u = lu.solve(sys.rhs);
  double bnorm = sys.rhs.norm();
  double res = bnorm > 0 ? (sys.matrix * u - sys.rhs).norm() / bnorm : 0.0;
  if (!std::isfinite(res) || res > 1e-10) {
    const auto& LU = lu.matrixLU();
    double dmin = 1e300, dmax = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double a = std::abs(LU(i, i));
      dmin = std::min(dmin, a);
      dmax = std::max(dmax, a);
    }
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "linear system is numerically singular: residual %.3e, pivot-ratio condition estimate %.3e",
                  res, dmax / std::max(dmin, 1e-300));
    throw std::runtime_error(buf);
  }
  return SolveInfo{std::move(u), res};
}

Density solve_density(const Mesh& m, const IncidentWave& wave,
                      DiscretizationMethod method, std::size_t dense_limit) {
  LinearSystem sys;
  if (method == DiscretizationMethod::galerkin) {
    sys = assemble_galerkin_2d(m, wave);
  } else {
    sys = assemble_collocation(m, wave);
  }
  SolveInfo info = solve(sys, dense_limit);
  Density d;
  d.mesh = std::make_shared<Mesh>(m);
  d.coefficients = std::move(info.coefficients);
  d.k = wave.k;
  return d;
}

void write_system_binary(const LinearSystem& sys, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  std::uint64_t n = static_cast<std::uint64_t>(sys.matrix.rows());
  std::fwrite(&n, sizeof n, 1, f);
  for (Eigen::Index i = 0; i < sys.matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < sys.matrix.cols(); ++j) {
      double re = sys.matrix(i, j).real(), im = sys.matrix(i, j).imag();
      std::fwrite(&re, sizeof re, 1, f);
      std::fwrite(&im, sizeof im, 1, f);
    }
  }
  for (Eigen::Index i = 0; i < sys.rhs.size(); ++i) {
    double re = sys.rhs(i).real(), im = sys.rhs(i).imag();
    std::fwrite(&re, sizeof re, 1, f);
    std::fwrite(&im, sizeof im, 1, f);
  }
  std::fclose(f);
}

} // namespace fracbem
