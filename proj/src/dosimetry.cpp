#include "spfd/dosimetry.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "spfd/error.hpp"
#include "text_util.hpp"

namespace spfd {

std::vector<double> edge_voltages(std::span<const double> a, std::span<const double> psi, const StaggeredGrid& grid,
                                  double omega) {
  if (a.size() != grid.num_edges() || psi.size() != grid.num_nodes())
    throw InvalidArgument("dimension mismatch in edge voltages");
  std::vector<double> e(a.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    const auto info = grid.edge_info(i);
    e[i] = omega * (a[i] + (psi[info.head] - psi[info.tail]));
  }
  return e;
}

std::vector<double> edge_voltages(std::span<const double> a, std::span<const double> reduced,
                                  const PoissonSystem& system, const StaggeredGrid& grid, double omega) {
  const auto psi = expand_to_nodes(system, reduced);
  return edge_voltages(a, psi, grid, omega);
}

std::vector<double> node_field_strength(std::span<const double> ev, const StaggeredGrid& grid,
                                        std::span<const double> m) {
  if (ev.size() != grid.num_edges() || m.size() != grid.num_edges())
    throw InvalidArgument("dimension mismatch in node field strength");
  constexpr Axis axes[3] = {Axis::x, Axis::y, Axis::z};
  const auto& cells = grid.cell_dims();
  std::vector<double> out(grid.num_nodes());
  for (std::size_t n = 0; n < out.size(); ++n) {
    const auto ijk = grid.node_ijk(n);
    double sq = 0.0;
    for (int a = 0; a < 3; ++a) {
      double sum = 0.0;
      int count = 0;
      if (ijk[a] < cells[a]) {
        const auto e = grid.edge(axes[a], ijk[0], ijk[1], ijk[2]);
        if (m[e] > 0.0) {
          sum += ev[e];
          ++count;
        }
      }
      if (ijk[a] > 0) {
        auto t = ijk;
        --t[a];
        const auto e = grid.edge(axes[a], t[0], t[1], t[2]);
        if (m[e] > 0.0) {
          sum += ev[e];
          ++count;
        }
      }
      if (count > 0) {
        const double comp = sum / (count * grid.edge_length(axes[a]));
        sq += comp * comp;
      }
    }
    out[n] = std::sqrt(sq);
  }
  return out;
}

std::vector<double> node_field_strength(std::span<const double> ev, const StaggeredGrid& grid,
                                        const VoxelModel& model, double f) {
  return node_field_strength(ev, grid, edge_conductances(model, grid, f));
}

VoxelField voxel_average(std::span<const double> node_field, const StaggeredGrid& grid, const VoxelModel& model,
                         double f) {
  if (node_field.size() != grid.num_nodes()) throw InvalidArgument("node field length differs from node count");
  if (model.dims() != grid.cell_dims()) throw InvalidArgument("model and grid dims differ");
  const auto kappa = model.conductivity_field(f);
  const auto& c = grid.cell_dims();
  VoxelField out;
  for (std::size_t k = 0; k < c[2]; ++k)
    for (std::size_t j = 0; j < c[1]; ++j)
      for (std::size_t i = 0; i < c[0]; ++i) {
        const std::size_t v = grid.cell(i, j, k);
        if (!(kappa[v] > 0.0)) continue;
        double s = 0.0;
        for (int corner = 0; corner < 8; ++corner)
          s += node_field[grid.node(i + (corner & 1), j + ((corner >> 1) & 1), k + ((corner >> 2) & 1))];
        out.values.push_back(s / 8.0);
        out.indices.push_back(v);
      }
  return out;
}

double percentile99(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("percentile of an empty array");
  const std::size_t n = values.size();
  const std::size_t rank = (99 * n + 99) / 100;  // ceil(0.99 n) without rounding error
  std::vector<double> tmp(values.begin(), values.end());
  auto nth = tmp.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(tmp.begin(), nth, tmp.end());
  return *nth;
}

double scale_reference_field(double e, double f, double f_prime, double kappa_f, double kappa_f_prime) {
  if (!(f > 0.0) || !(f_prime > 0.0)) throw InvalidArgument("frequencies must be positive");
  if (!(kappa_f > 0.0) || !(kappa_f_prime > 0.0)) throw InvalidArgument("conductivities must be positive");
  return e * ((f / f_prime) * (kappa_f_prime / kappa_f));
}

std::vector<double> scale_reference_field(std::span<const double> e, double f, double f_prime, double kappa_f,
                                          double kappa_f_prime) {
  std::vector<double> out(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) out[i] = scale_reference_field(e[i], f, f_prime, kappa_f, kappa_f_prime);
  return out;
}

LimitCheck check_limits(const ExposureReport& report, double limit) {
  if (!(limit > 0.0)) throw InvalidArgument("limit must be positive");
  LimitCheck c;
  c.pass = report.percentile99 <= limit;
  c.margin = report.percentile99 == 0.0 ? std::numeric_limits<double>::infinity() : limit / report.percentile99;
  return c;
}

ExposureReport make_report(const VoxelField& field, const VoxelModel& model, double f, bool rms) {
  ExposureReport r;
  r.frequency_hz = f;
  r.rms = rms;
  r.voxel_field = field.values;
  r.voxel_indices = field.indices;
  if (rms)
    for (auto& v : r.voxel_field) v /= std::sqrt(2.0);
  if (r.voxel_field.empty()) return r;
  r.percentile99 = percentile99(r.voxel_field);
  r.max = *std::max_element(r.voxel_field.begin(), r.voxel_field.end());

  std::map<TissueId, std::vector<double>> per_tissue;
  for (std::size_t q = 0; q < r.voxel_field.size(); ++q)
    per_tissue[model.tissue_ids()[r.voxel_indices[q]]].push_back(r.voxel_field[q]);
  for (const auto& [id, vals] : per_tissue) {
    TissueStats s;
    s.id = id;
    s.name = model.tissue_table().at(id).name;
    s.count = vals.size();
    double sum = 0.0;
    for (double v : vals) sum += v;
    s.mean = sum / static_cast<double>(vals.size());
    s.max = *std::max_element(vals.begin(), vals.end());
    s.p99 = percentile99(vals);
    r.tissues.push_back(std::move(s));
  }
  return r;
}

std::string serialize_report(const ExposureReport& r) {
  using detail::format_double;
  std::ostringstream os;
  os << "frequency_hz = " << format_double(r.frequency_hz) << '\n';
  os << "n_voxels = " << r.voxel_field.size() << '\n';
  os << "p99_vpm = " << format_double(r.percentile99) << '\n';
  os << "max_vpm = " << format_double(r.max) << '\n';
  os << "amplitude = " << (r.rms ? "rms" : "peak") << '\n';
  os << "dofs = " << r.dofs << '\n';
  os << "rel_tol = " << format_double(r.rel_tol) << '\n';
  os << "achieved_rel_residual = " << format_double(r.solver.relative_residual) << '\n';
  os << "solver_converged = " << (r.solver.converged ? "true" : "false") << '\n';
  os << "solver_iterations = " << r.solver.iterations << '\n';
  os << "setup_seconds = " << format_double(r.solver.setup_seconds) << '\n';
  os << "solve_seconds = " << format_double(r.solver.solve_seconds) << '\n';
  for (const auto& t : r.tissues)
    os << "tissue " << t.id << ' ' << t.name << ' ' << t.count << ' ' << format_double(t.mean) << ' '
       << format_double(t.max) << ' ' << format_double(t.p99) << '\n';
  return os.str();
}

void write_report(const ExposureReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write report '" + path.string() + "'");
  out << serialize_report(report);
}

void write_field_dump(const ExposureReport& report, const VoxelModel& model, const std::filesystem::path& path) {
  std::vector<double> dense(model.voxel_count(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t q = 0; q < report.voxel_field.size(); ++q) dense[report.voxel_indices[q]] = report.voxel_field[q];
  std::string bytes = model_header(model) + "END_HEADER\n";
  const std::size_t off = bytes.size();
  bytes.resize(off + 8 * dense.size());
  for (std::size_t v = 0; v < dense.size(); ++v) {
    const auto bits = std::bit_cast<std::uint64_t>(dense[v]);
    for (int b = 0; b < 8; ++b) bytes[off + 8 * v + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write field dump '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

FieldDump read_field_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open field dump '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto header = parse_model_header(bytes);
  const std::size_t n = header.dims[0] * header.dims[1] * header.dims[2];
  if (bytes.size() - header.payload_offset != 8 * n)
    throw FormatError(path.string() + ": payload size mismatch for f64 field dump");
  std::vector<double> values(n);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + header.payload_offset);
  for (std::size_t v = 0; v < n; ++v) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[8 * v + b]) << (8 * b);
    values[v] = std::bit_cast<double>(bits);
  }
  VoxelModel grid_model(header.dims, header.spacing, header.origin, std::vector<TissueId>(n, kFreeSpace),
                        std::move(header.tissues));
  return {std::move(grid_model), std::move(values)};
}

std::vector<std::vector<double>> field_slice(const FieldDump& dump, Axis plane, std::size_t index) {
  const auto& d = dump.model.dims();
  const int a = static_cast<int>(plane);
  if (index >= d[a]) throw InvalidArgument("slice index out of range");
  const int row_axis = plane == Axis::z ? 1 : 2;
  const int col_axis = plane == Axis::x ? 1 : 0;
  std::vector<std::vector<double>> rows(d[row_axis], std::vector<double>(d[col_axis]));
  for (std::size_t r = 0; r < d[row_axis]; ++r)
    for (std::size_t c = 0; c < d[col_axis]; ++c) {
      std::size_t ijk[3];
      ijk[a] = index;
      ijk[row_axis] = r;
      ijk[col_axis] = c;
      rows[r][c] = dump.values[dump.model.voxel_index(ijk[0], ijk[1], ijk[2])];
    }
  return rows;
}

}  // namespace spfd
