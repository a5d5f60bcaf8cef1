#include "spfd/field_source.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <optional>
#include <sstream>

#include "spfd/error.hpp"
#include "spfd/fit_operators.hpp"
#include "spfd/parallel.hpp"
#include "text_util.hpp"

namespace spfd {

namespace {

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double dot3(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
double len(const Vec3& a) { return std::sqrt(dot3(a, a)); }

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = sub(b, a);
  const double t = std::clamp(dot3(sub(p, a), ab) / dot3(ab, ab), 0.0, 1.0);
  const Vec3 q{a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]};
  return len(sub(p, q));
}

}  // namespace

void CoilSpec::validate() const {
  if (!(radius > 0.0)) throw InvalidArgument("coil radius must be positive");
  if (segments < 8) throw InvalidArgument("coil needs at least 8 segments");
  if (std::abs(len(axis) - 1.0) > 1e-9) throw InvalidArgument("coil axis must be a unit vector");
}

Vec3 coil_field(const CoilSpec& coil, const Vec3& p) {
  coil.validate();
  const Vec3& n = coil.axis;
  const Vec3 helper = std::abs(n[0]) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
  Vec3 u = cross(n, helper);
  const double ul = len(u);
  u = {u[0] / ul, u[1] / ul, u[2] / ul};
  const Vec3 v = cross(n, u);

  auto vertex = [&](int k) {
    const double phi = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(coil.segments);
    const double c = std::cos(phi), s = std::sin(phi);
    return Vec3{coil.center[0] + coil.radius * (c * u[0] + s * v[0]),
                coil.center[1] + coil.radius * (c * u[1] + s * v[1]),
                coil.center[2] + coil.radius * (c * u[2] + s * v[2])};
  };

  // Straight segment a -> b: B = mu0 I / (4 pi) (r1 x r2)(|r1| + |r2|) / (|r1||r2|(|r1||r2| + r1.r2))
  Vec3 b{0.0, 0.0, 0.0};
  const double scale = kMu0 * coil.current / (4.0 * std::numbers::pi);
  Vec3 a = vertex(0);
  for (int k = 0; k < coil.segments; ++k) {
    const Vec3 next = vertex(k + 1 == coil.segments ? 0 : k + 1);
    if (point_segment_distance(p, a, next) < 1e-12) throw SingularPointError("field point lies on the coil wire");
    const Vec3 r1 = sub(p, a), r2 = sub(p, next);
    const double l1 = len(r1), l2 = len(r2);
    const double denom = l1 * l2 * (l1 * l2 + dot3(r1, r2));
    if (denom != 0.0) {
      const Vec3 c = cross(r1, r2);
      const double f = scale * (l1 + l2) / denom;
      b[0] += f * c[0];
      b[1] += f * c[1];
      b[2] += f * c[2];
    }
    a = next;
  }
  return b;
}

Vec3 evaluate(const FieldSource& source, const Vec3& p) {
  if (const auto* coil = std::get_if<CoilSpec>(&source)) return coil_field(*coil, p);
  return std::get<UniformField>(source).b;
}

FieldSampleSet sample_on_lattice(const FieldSource& source, const Lattice& lattice, double f) {
  for (int a = 0; a < 3; ++a) {
    if (lattice.dims[a] < 1) throw InvalidArgument("lattice dims must be >= 1");
    if (!(lattice.spacing[a] > 0.0)) throw InvalidArgument("lattice spacing must be positive");
  }
  FieldSampleSet set;
  set.frequency_hz = f;
  set.lattice = lattice;
  set.samples.reserve(lattice.size());
  for (std::size_t k = 0; k < lattice.dims[2]; ++k)
    for (std::size_t j = 0; j < lattice.dims[1]; ++j)
      for (std::size_t i = 0; i < lattice.dims[0]; ++i) {
        const Vec3 p = lattice.point(i, j, k);
        set.samples.push_back({p, evaluate(source, p)});
      }
  return set;
}

Lattice covering_lattice(const StaggeredGrid& grid, double spacing) {
  if (!(spacing > 0.0)) throw InvalidArgument("lattice spacing must be positive");
  Lattice l;
  l.origin = grid.origin();
  for (int a = 0; a < 3; ++a) {
    const double extent = static_cast<double>(grid.cell_dims()[a]) * grid.spacing()[a];
    const auto intervals = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(extent / spacing - 1e-9)));
    l.dims[a] = intervals + 1;
    l.spacing[a] = extent / static_cast<double>(intervals);
  }
  return l;
}

void FieldSampleSet::validate() const {
  if (!(frequency_hz > 0.0)) throw FormatError("field samples need a positive frequency");
  for (int a = 0; a < 3; ++a) {
    if (lattice.dims[a] < 1) throw FormatError("lattice dims must be >= 1");
    if (!(lattice.spacing[a] > 0.0)) throw FormatError("lattice spacing must be positive");
  }
  if (samples.size() != lattice.size())
    throw FormatError("record count " + std::to_string(samples.size()) + " does not match lattice size " +
                      std::to_string(lattice.size()));
  std::size_t r = 0;
  for (std::size_t k = 0; k < lattice.dims[2]; ++k)
    for (std::size_t j = 0; j < lattice.dims[1]; ++j)
      for (std::size_t i = 0; i < lattice.dims[0]; ++i, ++r) {
        const Vec3 p = lattice.point(i, j, k);
        for (int a = 0; a < 3; ++a)
          if (std::abs(p[a] - samples[r].position[a]) > 1e-9)
            throw FormatError("sample " + std::to_string(r) + " is off the lattice");
      }
}

// ---------------------------------------------------------------------------
// Sample file

FieldSampleSet parse_field_samples(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::optional<double> freq;
  std::optional<Dims3> dims;
  std::optional<Vec3> origin, spacing;
  FieldSampleSet set;
  auto vec3 = [](std::string_view v, std::string_view key) {
    const auto parts = detail::split_ws(v);
    if (parts.size() != 3) throw FormatError(std::string(key) + " needs 3 values");
    return Vec3{detail::parse_double(parts[0], key), detail::parse_double(parts[1], key),
                detail::parse_double(parts[2], key)};
  };
  while (std::getline(in, line)) {
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    if (const auto eq = t.find('='); eq != std::string_view::npos) {
      if (!set.samples.empty()) throw FormatError("header line after sample records");
      const auto key = detail::trim(t.substr(0, eq));
      const auto value = detail::trim(t.substr(eq + 1));
      if (key == "frequency_hz") {
        freq = detail::parse_double(value, key);
      } else if (key == "lattice_dims") {
        const auto parts = detail::split_ws(value);
        if (parts.size() != 3) throw FormatError("lattice_dims needs 3 values");
        Dims3 d{};
        for (int a = 0; a < 3; ++a) {
          const auto x = detail::parse_int(parts[a], key);
          if (x < 1) throw FormatError("lattice_dims must be >= 1");
          d[a] = static_cast<std::size_t>(x);
        }
        dims = d;
      } else if (key == "lattice_origin_m") {
        origin = vec3(value, key);
      } else if (key == "lattice_spacing_m") {
        spacing = vec3(value, key);
      } else {
        throw FormatError("unknown field-sample key '" + std::string(key) + "'");
      }
      continue;
    }
    const auto parts = detail::split_ws(t);
    if (parts.size() != 6) throw FormatError("sample record needs 6 values: '" + line + "'");
    FieldSample s{};
    for (int a = 0; a < 3; ++a) {
      s.position[a] = detail::parse_double(parts[a], "sample position");
      s.b[a] = detail::parse_double(parts[3 + a], "sample flux density");
    }
    set.samples.push_back(s);
  }
  if (!freq || !dims || !origin || !spacing)
    throw FormatError("field samples need frequency_hz, lattice_dims, lattice_origin_m and lattice_spacing_m");
  set.frequency_hz = *freq;
  set.lattice = {*origin, *spacing, *dims};
  set.validate();
  return set;
}

FieldSampleSet load_field_samples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open field sample file '" + path.string() + "'");
  try {
    return parse_field_samples(std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string serialize_field_samples(const FieldSampleSet& set) {
  using detail::format_double;
  std::ostringstream os;
  const auto& l = set.lattice;
  os << "frequency_hz = " << format_double(set.frequency_hz) << '\n';
  os << "lattice_dims = " << l.dims[0] << ' ' << l.dims[1] << ' ' << l.dims[2] << '\n';
  os << "lattice_origin_m = " << format_double(l.origin[0]) << ' ' << format_double(l.origin[1]) << ' '
     << format_double(l.origin[2]) << '\n';
  os << "lattice_spacing_m = " << format_double(l.spacing[0]) << ' ' << format_double(l.spacing[1]) << ' '
     << format_double(l.spacing[2]) << '\n';
  for (const auto& s : set.samples) {
    os << format_double(s.position[0]) << ' ' << format_double(s.position[1]) << ' ' << format_double(s.position[2])
       << ' ' << format_double(s.b[0]) << ' ' << format_double(s.b[1]) << ' ' << format_double(s.b[2]) << '\n';
  }
  return os.str();
}

void save_field_samples(const FieldSampleSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write field sample file '" + path.string() + "'");
  out << serialize_field_samples(set);
}

// ---------------------------------------------------------------------------
// Interpolation

Vec3 interpolate_b(const FieldSampleSet& set, const Vec3& p) {
  const auto& l = set.lattice;
  std::size_t base[3];
  double w[3][2];
  int span[3];
  for (int a = 0; a < 3; ++a) {
    const double s = (p[a] - l.origin[a]) / l.spacing[a];
    if (l.dims[a] < 2) {
      if (std::abs(p[a] - l.origin[a]) > 1e-12 * std::max(1.0, std::abs(l.origin[a])))
        throw InvalidArgument("lattice has a single point along an axis that needs interpolation");
      base[a] = 0;
      w[a][0] = 1.0;
      w[a][1] = 0.0;
      span[a] = 1;
      continue;
    }
    const double c = std::clamp(std::floor(s), 0.0, static_cast<double>(l.dims[a] - 2));
    const double t = s - c;  // outside [0, 1] extrapolates linearly
    base[a] = static_cast<std::size_t>(c);
    w[a][0] = 1.0 - t;
    w[a][1] = t;
    span[a] = 2;
  }
  Vec3 b{0.0, 0.0, 0.0};
  for (int dk = 0; dk < span[2]; ++dk)
    for (int dj = 0; dj < span[1]; ++dj)
      for (int di = 0; di < span[0]; ++di) {
        const double weight = w[0][di] * w[1][dj] * w[2][dk];
        const std::size_t idx = (base[0] + di) + l.dims[0] * ((base[1] + dj) + l.dims[1] * (base[2] + dk));
        for (int a = 0; a < 3; ++a) b[a] += weight * set.samples[idx].b[a];
      }
  return b;
}

std::vector<double> interpolate_to_faces(const FieldSampleSet& samples, const StaggeredGrid& grid) {
  if (samples.samples.size() != samples.lattice.size()) throw InvalidArgument("sample set does not fill its lattice");
  std::vector<double> flux(grid.num_faces());
  const long nf = static_cast<long>(flux.size());
  // each face written once; errors are collected outside the parallel loop
  std::vector<std::uint8_t> failed(flux.size(), 0);
#pragma omp parallel for num_threads(thread_count()) schedule(static) if (nf > 65536)
  for (long f = 0; f < nf; ++f) {
    const auto u = static_cast<std::size_t>(f);
    const auto normal = static_cast<int>(grid.face_info(u).normal);
    try {
      flux[u] = interpolate_b(samples, grid.face_center(u))[normal] * grid.face_area(static_cast<Axis>(normal));
    } catch (const InvalidArgument&) {
      failed[u] = 1;
    }
  }
  if (std::find(failed.begin(), failed.end(), std::uint8_t{1}) != failed.end())
    throw InvalidArgument("lattice has a single point along an axis that needs interpolation");
  return flux;
}

std::vector<double> evaluate_on_faces(const FieldSource& source, const StaggeredGrid& grid) {
  std::vector<double> flux(grid.num_faces());
  for (std::size_t f = 0; f < flux.size(); ++f) {
    const auto normal = grid.face_info(f).normal;
    flux[f] = evaluate(source, grid.face_center(f))[static_cast<int>(normal)] * grid.face_area(normal);
  }
  return flux;
}

// ---------------------------------------------------------------------------
// Divergence cleaning

double relative_divergence(std::span<const double> flux, const StaggeredGrid& grid) {
  const double bnorm = norm2(flux);
  if (bnorm == 0.0) return 0.0;
  return norm2(build_divergence(grid) * flux) / bnorm;
}

std::vector<double> divergence_clean(std::span<const double> flux, const StaggeredGrid& grid, double tol,
                                     const SolveConfig& solver, CleanReport* report) {
  if (flux.size() != grid.num_faces()) throw InvalidArgument("face flux length differs from face count");
  if (!(tol > 0.0)) throw InvalidArgument("divergence tolerance must be positive");
  CleanReport local;
  CleanReport& rep = report ? *report : local;
  rep = {};

  const SparseMatrix s = build_divergence(grid);
  const auto sb = s * flux;
  const double bnorm = norm2(flux);
  const double snorm = norm2(sb);
  rep.divergence_before = bnorm == 0.0 ? 0.0 : snorm / bnorm;
  if (snorm <= tol * bnorm) {
    rep.divergence_after = rep.divergence_before;
    return {flux.begin(), flux.end()};
  }

  const SparseMatrix st = s.transpose();
  const SparseMatrix laplacian = multiply(s, st);
  SolveConfig cfg = solver;
  cfg.rel_tol = std::max(1e-3 * tol * bnorm / snorm, 1e-15);
  SolveReport sr;
  const auto phi = solve(laplacian, sb, cfg, sr);
  rep.iterations = sr.iterations;

  std::vector<double> out(flux.begin(), flux.end());
  const auto correction = st * phi;
  for (std::size_t f = 0; f < out.size(); ++f) out[f] -= correction[f];
  rep.projected = true;
  rep.divergence_after = norm2(s * out) / bnorm;
  if (!(rep.divergence_after <= 1e-3 * tol))
    throw SolverError("divergence projection did not converge: relative divergence " +
                      detail::format_double(rep.divergence_after));
  return out;
}

}  // namespace spfd
