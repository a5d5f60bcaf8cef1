#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace spfd {

using Vec3 = std::array<double, 3>;
using Dims3 = std::array<std::size_t, 3>;
using TissueId = std::uint16_t;

/// Tissue ID reserved for free space; its conductivity is identically zero.
inline constexpr TissueId kFreeSpace = 0;

struct ConductivitySample {
  double frequency_hz;
  double kappa;  // S/m
};

/// Frequency-dependent conductivity table of one tissue.
///
/// Samples are strictly increasing in frequency with finite non-negative
/// conductivities. Evaluation interpolates piecewise linearly in log-log
/// space and clamps to the end samples outside the sampled range.
class ConductivitySamples {
 public:
  ConductivitySamples() = default;
  explicit ConductivitySamples(std::vector<ConductivitySample> samples);

  /// Constant conductivity (one sample at 1 Hz).
  static ConductivitySamples constant(double kappa);

  double at(double frequency_hz) const;
  const std::vector<ConductivitySample>& samples() const noexcept { return samples_; }

 private:
  std::vector<ConductivitySample> samples_;
};

struct Tissue {
  std::string name;
  ConductivitySamples conductivity;
};

/// Uniform Cartesian grid of tissue IDs, x-fastest ordering.
class VoxelModel {
 public:
  VoxelModel(Dims3 dims, Vec3 spacing, Vec3 origin, std::vector<TissueId> tissue_ids,
             std::map<TissueId, Tissue> tissue_table);

  const Dims3& dims() const noexcept { return dims_; }
  const Vec3& spacing() const noexcept { return spacing_; }
  const Vec3& origin() const noexcept { return origin_; }
  const std::vector<TissueId>& tissue_ids() const noexcept { return ids_; }
  const std::map<TissueId, Tissue>& tissue_table() const noexcept { return table_; }

  std::size_t voxel_count() const noexcept { return ids_.size(); }
  std::size_t voxel_index(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return i + dims_[0] * (j + dims_[1] * k);
  }
  TissueId id_at(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return ids_[voxel_index(i, j, k)];
  }
  Vec3 voxel_center(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return {origin_[0] + (static_cast<double>(i) + 0.5) * spacing_[0],
            origin_[1] + (static_cast<double>(j) + 0.5) * spacing_[1],
            origin_[2] + (static_cast<double>(k) + 0.5) * spacing_[2]};
  }

  /// Conductivity of `id` at `frequency_hz`; throws InvalidArgument for
  /// unknown IDs or non-positive frequency.
  double kappa_at(TissueId id, double frequency_hz) const;

  /// Per-voxel conductivity at `frequency_hz`.
  std::vector<double> conductivity_field(double frequency_hz) const;

  /// Number of voxels with nonzero conductivity at `frequency_hz`.
  std::size_t conductive_voxel_count(double frequency_hz) const;

 private:
  Dims3 dims_;
  Vec3 spacing_;
  Vec3 origin_;
  std::vector<TissueId> ids_;
  std::map<TissueId, Tissue> table_;
};

// ---------------------------------------------------------------------------
// Phantom file I/O

/// Header fields of a phantom-format file.
struct ModelHeader {
  Dims3 dims{};
  Vec3 spacing{};
  Vec3 origin{};
  std::map<TissueId, Tissue> tissues;
  std::size_t payload_offset = 0;  // first byte after END_HEADER
};

/// Parses the text header shared by phantom and field-dump files.
ModelHeader parse_model_header(const std::string& bytes);

VoxelModel load_model(const std::filesystem::path& path);
VoxelModel parse_model(const std::string& bytes);

void save_model(const VoxelModel& model, const std::filesystem::path& path);
/// Canonical byte representation written by save_model.
std::string serialize_model(const VoxelModel& model);

/// Header shared by the phantom and field-dump files (without END_HEADER).
std::string model_header(const VoxelModel& model);

// ---------------------------------------------------------------------------
// Synthetic phantoms

enum class PhantomKind { sphere, cylinder, block, layered_block };

PhantomKind parse_phantom_kind(const std::string& name);

struct PhantomLayer {
  double thickness;  // meters along z
  double kappa;      // S/m
};

struct PhantomParams {
  /// Shape center in world coordinates; unset means the grid center.
  std::optional<Vec3> center;
  double radius = 0.0;               // sphere, cylinder
  double height = 0.0;               // cylinder along z; 0 spans the grid
  Vec3 half_extent{0.0, 0.0, 0.0};   // block, layered-block
  double kappa = 0.2;                // tissue 1 for single-tissue kinds
  std::vector<PhantomLayer> layers;  // layered-block, bottom to top
  Vec3 origin{0.0, 0.0, 0.0};
};

/// Center-inclusion voxelization of an analytic shape. Inside voxels get
/// tissue 1 (layer l gets tissue l + 1), outside voxels get 0.
VoxelModel make_phantom(PhantomKind kind, Dims3 dims, Vec3 spacing, const PhantomParams& params);

// ---------------------------------------------------------------------------
// Connectivity

inline constexpr std::int32_t kNoComponent = -1;

struct ComponentLabels {
  /// One label per grid node ((nx+1)(ny+1)(nz+1), x-fastest); kNoComponent
  /// for nodes that touch no conductive edge.
  std::vector<std::int32_t> labels;
  std::size_t component_count = 0;
  std::size_t labeled_nodes = 0;
};

/// Connected components of conductive nodes under 6-neighbour flood fill
/// across conductive edges. Components are numbered in order of their
/// lowest node index.
ComponentLabels conductive_component_labels(const VoxelModel& model, double frequency_hz);

}  // namespace spfd
