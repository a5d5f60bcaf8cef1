#include "spfd/voxel_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "spfd/error.hpp"
#include "text_util.hpp"

namespace spfd {

// ---------------------------------------------------------------------------
// ConductivitySamples

ConductivitySamples::ConductivitySamples(std::vector<ConductivitySample> samples)
    : samples_(std::move(samples)) {
  if (samples_.empty()) throw InvalidArgument("conductivity table needs at least one sample");
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto& s = samples_[i];
    if (!std::isfinite(s.frequency_hz) || s.frequency_hz <= 0.0)
      throw InvalidArgument("conductivity sample frequency must be finite and positive");
    if (!std::isfinite(s.kappa) || s.kappa < 0.0)
      throw InvalidArgument("conductivity must be finite and non-negative");
    if (i > 0 && !(s.frequency_hz > samples_[i - 1].frequency_hz))
      throw InvalidArgument("non-increasing frequencies in conductivity table");
  }
}

ConductivitySamples ConductivitySamples::constant(double kappa) {
  return ConductivitySamples({{1.0, kappa}});
}

double ConductivitySamples::at(double f) const {
  if (!(f > 0.0)) throw InvalidArgument("frequency must be positive");
  if (samples_.empty()) return 0.0;
  if (f <= samples_.front().frequency_hz) return samples_.front().kappa;
  if (f >= samples_.back().frequency_hz) return samples_.back().kappa;
  const auto hi = std::upper_bound(samples_.begin(), samples_.end(), f,
                                   [](double v, const ConductivitySample& s) { return v < s.frequency_hz; });
  const auto lo = hi - 1;
  if (lo->frequency_hz == f) return lo->kappa;
  const double t = (std::log(f) - std::log(lo->frequency_hz)) /
                   (std::log(hi->frequency_hz) - std::log(lo->frequency_hz));
  if (lo->kappa == hi->kappa) return lo->kappa;
  // log-log is undefined next to a zero sample; fall back to linear in log f
  if (lo->kappa == 0.0 || hi->kappa == 0.0) return lo->kappa + t * (hi->kappa - lo->kappa);
  return std::exp(std::log(lo->kappa) + t * (std::log(hi->kappa) - std::log(lo->kappa)));
}

// ---------------------------------------------------------------------------
// VoxelModel

VoxelModel::VoxelModel(Dims3 dims, Vec3 spacing, Vec3 origin, std::vector<TissueId> tissue_ids,
                       std::map<TissueId, Tissue> tissue_table)
    : dims_(dims), spacing_(spacing), origin_(origin), ids_(std::move(tissue_ids)),
      table_(std::move(tissue_table)) {
  for (int d = 0; d < 3; ++d) {
    if (dims_[d] < 1) throw InvalidArgument("voxel dims must be >= 1");
    if (!(spacing_[d] > 0.0) || !std::isfinite(spacing_[d]))
      throw InvalidArgument("voxel spacing must be positive");
    if (!std::isfinite(origin_[d])) throw InvalidArgument("origin must be finite");
  }
  if (ids_.size() != dims_[0] * dims_[1] * dims_[2])
    throw InvalidArgument("tissue id array length does not match dims");
  if (auto it = table_.find(kFreeSpace); it != table_.end()) {
    for (const auto& s : it->second.conductivity.samples())
      if (s.kappa != 0.0) throw InvalidArgument("tissue 0 is reserved for free space (kappa = 0)");
  }
  std::vector<bool> seen(65536, false);
  for (TissueId id : ids_) seen[id] = true;
  for (std::size_t id = 1; id < seen.size(); ++id) {
    if (seen[id] && !table_.count(static_cast<TissueId>(id)))
      throw InvalidArgument("tissue id " + std::to_string(id) + " has no table entry");
  }
}

double VoxelModel::kappa_at(TissueId id, double f) const {
  if (!(f > 0.0)) throw InvalidArgument("frequency must be positive");
  if (id == kFreeSpace) return 0.0;
  auto it = table_.find(id);
  if (it == table_.end()) throw InvalidArgument("unknown tissue id " + std::to_string(id));
  return it->second.conductivity.at(f);
}

std::vector<double> VoxelModel::conductivity_field(double f) const {
  std::map<TissueId, double> lookup;
  for (const auto& [id, tissue] : table_) lookup[id] = kappa_at(id, f);
  lookup[kFreeSpace] = 0.0;
  std::vector<double> out(ids_.size());
  std::transform(ids_.begin(), ids_.end(), out.begin(), [&](TissueId id) { return lookup.at(id); });
  return out;
}

std::size_t VoxelModel::conductive_voxel_count(double f) const {
  const auto kappa = conductivity_field(f);
  return static_cast<std::size_t>(std::count_if(kappa.begin(), kappa.end(), [](double k) { return k > 0.0; }));
}

// ---------------------------------------------------------------------------
// Phantom file format

namespace {

constexpr std::string_view kEndHeader = "END_HEADER\n";

Vec3 parse_vec3(std::string_view value, std::string_view key) {
  const auto parts = detail::split_ws(value);
  if (parts.size() != 3) throw FormatError("malformed header: '" + std::string(key) + "' needs 3 values");
  return {detail::parse_double(parts[0], key), detail::parse_double(parts[1], key),
          detail::parse_double(parts[2], key)};
}

}  // namespace

ModelHeader parse_model_header(const std::string& bytes) {
  // header ends at the first line that is exactly END_HEADER
  std::size_t end = std::string::npos;
  for (std::size_t pos = 0; pos < bytes.size();) {
    if (bytes.compare(pos, kEndHeader.size(), kEndHeader) == 0) {
      end = pos;
      break;
    }
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
  if (end == std::string::npos) throw FormatError("malformed header: missing END_HEADER line");

  std::optional<Dims3> dims;
  std::optional<Vec3> spacing, origin;
  bool version_seen = false;
  std::map<TissueId, Tissue> table;

  std::istringstream header(bytes.substr(0, end));
  std::string line;
  std::set<std::string> seen_keys;
  while (std::getline(header, line)) {
    const auto trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string_view::npos) throw FormatError("malformed header line: '" + line + "'");
    const std::string key(detail::trim(trimmed.substr(0, eq)));
    const auto value = detail::trim(trimmed.substr(eq + 1));
    if (key != "tissue" && !seen_keys.insert(key).second)
      throw FormatError("malformed header: duplicate key '" + key + "'");

    if (key == "format_version") {
      if (detail::parse_int(value, key) != 1) throw FormatError("unsupported format_version");
      version_seen = true;
    } else if (key == "dims") {
      const auto parts = detail::split_ws(value);
      if (parts.size() != 3) throw FormatError("malformed header: 'dims' needs 3 values");
      Dims3 d{};
      for (int a = 0; a < 3; ++a) {
        const auto v = detail::parse_int(parts[a], key);
        if (v < 1) throw FormatError("malformed header: dims must be >= 1");
        d[a] = static_cast<std::size_t>(v);
      }
      dims = d;
    } else if (key == "spacing_m") {
      spacing = parse_vec3(value, key);
    } else if (key == "origin_m") {
      origin = parse_vec3(value, key);
    } else if (key == "tissue") {
      const auto parts = detail::split_ws(value);
      if (parts.size() < 3) throw FormatError("malformed tissue line: '" + line + "'");
      const auto id = detail::parse_int(parts[0], "tissue id");
      if (id < 0 || id > 65535) throw FormatError("tissue id out of range");
      std::vector<ConductivitySample> samples;
      for (std::size_t p = 2; p < parts.size(); ++p) {
        const auto colon = parts[p].find(':');
        if (colon == std::string_view::npos) throw FormatError("malformed conductivity sample '" + std::string(parts[p]) + "'");
        samples.push_back({detail::parse_double(parts[p].substr(0, colon), "tissue frequency"),
                           detail::parse_double(parts[p].substr(colon + 1), "tissue conductivity")});
      }
      for (std::size_t s = 1; s < samples.size(); ++s)
        if (!(samples[s].frequency_hz > samples[s - 1].frequency_hz))
          throw FormatError("non-increasing frequencies for tissue " + std::to_string(id));
      Tissue tissue;
      tissue.name = std::string(parts[1]);
      try {
        tissue.conductivity = ConductivitySamples(std::move(samples));
      } catch (const InvalidArgument& e) {
        throw FormatError("tissue " + std::to_string(id) + ": " + e.what());
      }
      if (!table.emplace(static_cast<TissueId>(id), std::move(tissue)).second)
        throw FormatError("duplicate tissue id " + std::to_string(id));
    } else {
      throw FormatError("malformed header: unknown key '" + key + "'");
    }
  }
  if (!version_seen || !dims || !spacing || !origin)
    throw FormatError("malformed header: format_version, dims, spacing_m and origin_m are required");
  return {*dims, *spacing, *origin, std::move(table), end + kEndHeader.size()};
}

VoxelModel parse_model(const std::string& bytes) {
  auto [dims, spacing, origin, table, payload_offset] = parse_model_header(bytes);
  const std::size_t n = dims[0] * dims[1] * dims[2];
  const std::size_t payload_size = bytes.size() - payload_offset;
  if (payload_size != 2 * n)
    throw FormatError("payload size mismatch: expected " + std::to_string(2 * n) + " bytes, got " +
                      std::to_string(payload_size));
  std::vector<TissueId> ids(n);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + payload_offset);
  for (std::size_t v = 0; v < n; ++v) ids[v] = static_cast<TissueId>(p[2 * v] | (p[2 * v + 1] << 8));
  for (std::size_t v = 0; v < n; ++v) {
    if (ids[v] != kFreeSpace && !table.count(ids[v]))
      throw FormatError("tissue id " + std::to_string(ids[v]) + " has no table entry");
  }
  try {
    return VoxelModel(dims, spacing, origin, std::move(ids), std::move(table));
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what());
  }
}

VoxelModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open phantom file '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_model(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string model_header(const VoxelModel& model) {
  using detail::format_double;
  std::ostringstream os;
  const auto& d = model.dims();
  const auto& s = model.spacing();
  const auto& o = model.origin();
  os << "format_version = 1\n";
  os << "dims = " << d[0] << ' ' << d[1] << ' ' << d[2] << '\n';
  os << "spacing_m = " << format_double(s[0]) << ' ' << format_double(s[1]) << ' ' << format_double(s[2]) << '\n';
  os << "origin_m = " << format_double(o[0]) << ' ' << format_double(o[1]) << ' ' << format_double(o[2]) << '\n';
  for (const auto& [id, tissue] : model.tissue_table()) {
    os << "tissue = " << id << ' ' << tissue.name;
    for (const auto& smp : tissue.conductivity.samples())
      os << ' ' << format_double(smp.frequency_hz) << ':' << format_double(smp.kappa);
    os << '\n';
  }
  return os.str();
}

std::string serialize_model(const VoxelModel& model) {
  std::string out = model_header(model);
  out += kEndHeader;
  const auto& ids = model.tissue_ids();
  const std::size_t off = out.size();
  out.resize(off + 2 * ids.size());
  for (std::size_t v = 0; v < ids.size(); ++v) {
    out[off + 2 * v] = static_cast<char>(ids[v] & 0xff);
    out[off + 2 * v + 1] = static_cast<char>(ids[v] >> 8);
  }
  return out;
}

void save_model(const VoxelModel& model, const std::filesystem::path& path) {
  for (const auto& [id, tissue] : model.tissue_table()) {
    if (tissue.name.empty() || tissue.name.find_first_of(" \t\r\n") != std::string::npos)
      throw InvalidArgument("tissue names must be non-empty without whitespace");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write phantom file '" + path.string() + "'");
  const auto bytes = serialize_model(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Synthetic phantoms

PhantomKind parse_phantom_kind(const std::string& name) {
  if (name == "sphere") return PhantomKind::sphere;
  if (name == "cylinder") return PhantomKind::cylinder;
  if (name == "block") return PhantomKind::block;
  if (name == "layered-block") return PhantomKind::layered_block;
  throw InvalidArgument("unknown phantom kind '" + name + "'");
}

VoxelModel make_phantom(PhantomKind kind, Dims3 dims, Vec3 spacing, const PhantomParams& params) {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) throw InvalidArgument("voxel dims must be >= 1");
    if (!(spacing[a] > 0.0)) throw InvalidArgument("voxel spacing must be positive");
  }
  Vec3 lo = params.origin, hi{};
  for (int a = 0; a < 3; ++a) hi[a] = lo[a] + static_cast<double>(dims[a]) * spacing[a];
  Vec3 c{};
  for (int a = 0; a < 3; ++a) c[a] = params.center ? (*params.center)[a] : 0.5 * (lo[a] + hi[a]);

  // Analytic bounding box of the shape, checked against the grid box.
  Vec3 half{};
  double layer_total = 0.0;
  switch (kind) {
    case PhantomKind::sphere:
      if (params.radius < 0.0) throw InvalidArgument("radius must be >= 0");
      half = {params.radius, params.radius, params.radius};
      break;
    case PhantomKind::cylinder: {
      if (params.radius < 0.0 || params.height < 0.0) throw InvalidArgument("radius and height must be >= 0");
      const double hz = params.height > 0.0 ? 0.5 * params.height : 0.5 * (hi[2] - lo[2]);
      if (params.height == 0.0 && params.center) c[2] = 0.5 * (lo[2] + hi[2]);
      half = {params.radius, params.radius, hz};
      break;
    }
    case PhantomKind::block:
      half = params.half_extent;
      break;
    case PhantomKind::layered_block:
      if (params.layers.empty()) throw InvalidArgument("layered-block needs at least one layer");
      for (const auto& l : params.layers) {
        if (!(l.thickness > 0.0) || l.kappa < 0.0) throw InvalidArgument("invalid layer");
        layer_total += l.thickness;
      }
      half = {params.half_extent[0], params.half_extent[1], 0.5 * layer_total};
      break;
  }
  for (int a = 0; a < 3; ++a) {
    if (half[a] < 0.0) throw InvalidArgument("negative shape extent");
    const double tol = 1e-9 * (hi[a] - lo[a]);
    if (c[a] - half[a] < lo[a] - tol || c[a] + half[a] > hi[a] + tol)
      throw InvalidArgument("shape exceeds grid bounds");
  }

  std::map<TissueId, Tissue> table;
  table[kFreeSpace] = {"free_space", ConductivitySamples::constant(0.0)};
  if (kind == PhantomKind::layered_block) {
    for (std::size_t l = 0; l < params.layers.size(); ++l)
      table[static_cast<TissueId>(l + 1)] = {"layer_" + std::to_string(l + 1),
                                             ConductivitySamples::constant(params.layers[l].kappa)};
  } else {
    if (params.kappa < 0.0) throw InvalidArgument("kappa must be >= 0");
    table[1] = {"tissue", ConductivitySamples::constant(params.kappa)};
  }

  std::vector<TissueId> ids(dims[0] * dims[1] * dims[2], kFreeSpace);
  for (std::size_t k = 0; k < dims[2]; ++k) {
    const double z = lo[2] + (static_cast<double>(k) + 0.5) * spacing[2] - c[2];
    for (std::size_t j = 0; j < dims[1]; ++j) {
      const double y = lo[1] + (static_cast<double>(j) + 0.5) * spacing[1] - c[1];
      for (std::size_t i = 0; i < dims[0]; ++i) {
        const double x = lo[0] + (static_cast<double>(i) + 0.5) * spacing[0] - c[0];
        TissueId id = kFreeSpace;
        switch (kind) {
          case PhantomKind::sphere:
            if (params.radius > 0.0 && x * x + y * y + z * z <= params.radius * params.radius) id = 1;
            break;
          case PhantomKind::cylinder:
            if (params.radius > 0.0 && x * x + y * y <= params.radius * params.radius && std::abs(z) <= half[2]) id = 1;
            break;
          case PhantomKind::block:
            if (std::abs(x) <= half[0] && std::abs(y) <= half[1] && std::abs(z) <= half[2]) id = 1;
            break;
          case PhantomKind::layered_block:
            if (std::abs(x) <= half[0] && std::abs(y) <= half[1] && std::abs(z) <= half[2]) {
              double top = -half[2];
              for (std::size_t l = 0; l < params.layers.size(); ++l) {
                top += params.layers[l].thickness;
                if (z <= top || l + 1 == params.layers.size()) {
                  id = static_cast<TissueId>(l + 1);
                  break;
                }
              }
            }
            break;
        }
        ids[i + dims[0] * (j + dims[1] * k)] = id;
      }
    }
  }
  return VoxelModel(dims, spacing, params.origin, std::move(ids), std::move(table));
}

// ---------------------------------------------------------------------------
// Connectivity

ComponentLabels conductive_component_labels(const VoxelModel& model, double f) {
  const auto kappa = model.conductivity_field(f);
  const auto [nx, ny, nz] = model.dims();
  const std::size_t px = nx + 1, py = ny + 1, pz = nz + 1;

  auto voxel_on = [&](long i, long j, long k) {
    if (i < 0 || j < 0 || k < 0 || i >= static_cast<long>(nx) || j >= static_cast<long>(ny) ||
        k >= static_cast<long>(nz))
      return false;
    return kappa[static_cast<std::size_t>(i) + nx * (static_cast<std::size_t>(j) + ny * static_cast<std::size_t>(k))] > 0.0;
  };
  // An edge is conductive iff one of its (up to) four adjacent voxels is.
  // Edge from node (i,j,k) along axis a.
  auto edge_on = [&](long i, long j, long k, int a) {
    switch (a) {
      case 0:
        return voxel_on(i, j - 1, k - 1) || voxel_on(i, j, k - 1) || voxel_on(i, j - 1, k) || voxel_on(i, j, k);
      case 1:
        return voxel_on(i - 1, j, k - 1) || voxel_on(i, j, k - 1) || voxel_on(i - 1, j, k) || voxel_on(i, j, k);
      default:
        return voxel_on(i - 1, j - 1, k) || voxel_on(i, j - 1, k) || voxel_on(i - 1, j, k) || voxel_on(i, j, k);
    }
  };

  ComponentLabels out;
  out.labels.assign(px * py * pz, kNoComponent);
  std::deque<std::size_t> queue;
  for (std::size_t seed = 0; seed < out.labels.size(); ++seed) {
    if (out.labels[seed] != kNoComponent) continue;
    const long si = static_cast<long>(seed % px), sj = static_cast<long>((seed / px) % py),
               sk = static_cast<long>(seed / (px * py));
    bool touches = false;
    for (int a = 0; a < 3 && !touches; ++a) {
      const long step[3] = {a == 0, a == 1, a == 2};
      touches = edge_on(si, sj, sk, a) || edge_on(si - step[0], sj - step[1], sk - step[2], a);
    }
    if (!touches) continue;

    const auto label = static_cast<std::int32_t>(out.component_count++);
    out.labels[seed] = label;
    queue.push_back(seed);
    while (!queue.empty()) {
      const std::size_t n = queue.front();
      queue.pop_front();
      ++out.labeled_nodes;
      const long i = static_cast<long>(n % px), j = static_cast<long>((n / px) % py),
                 k = static_cast<long>(n / (px * py));
      for (int a = 0; a < 3; ++a) {
        const long step[3] = {a == 0, a == 1, a == 2};
        const long dims_a = static_cast<long>(a == 0 ? px : a == 1 ? py : pz);
        const long coord = a == 0 ? i : a == 1 ? j : k;
        // forward neighbour via edge starting at this node
        if (coord + 1 < dims_a && edge_on(i, j, k, a)) {
          const std::size_t m = n + (a == 0 ? 1 : a == 1 ? px : px * py);
          if (out.labels[m] == kNoComponent) {
            out.labels[m] = label;
            queue.push_back(m);
          }
        }
        // backward neighbour via edge ending at this node
        if (coord > 0 && edge_on(i - step[0], j - step[1], k - step[2], a)) {
          const std::size_t m = n - (a == 0 ? 1 : a == 1 ? px : px * py);
          if (out.labels[m] == kNoComponent) {
            out.labels[m] = label;
            queue.push_back(m);
          }
        }
      }
    }
  }
  return out;
}

}  // namespace spfd
