#pragma once

#include <array>
#include <cstddef>

#include "spfd/voxel_model.hpp"

namespace spfd {

/// Axis-aligned orientation of an edge or face normal.
enum class Axis : int { x = 0, y = 1, z = 2 };

/// Index spaces of the primal FIT grid spanned by a voxel box. Zero cells
/// along an axis are allowed (a single node layer, as in the one-node grid).
///
/// A grid of nx*ny*nz voxels has (nx+1)(ny+1)(nz+1) nodes. Edges and faces
/// are stored orientation-blocked in the order x, y, z; inside each block the
/// linear index is x-fastest. An x-edge (i,j,k) joins nodes (i,j,k) and
/// (i+1,j,k); an x-face (i,j,k) is the facet at x = x_i spanning voxels
/// (i-1,j,k) and (i,j,k).
class StaggeredGrid {
 public:
  StaggeredGrid(Dims3 cells, Vec3 spacing, Vec3 origin = {0.0, 0.0, 0.0});
  explicit StaggeredGrid(const VoxelModel& model)
      : StaggeredGrid(model.dims(), model.spacing(), model.origin()) {}

  const Dims3& cell_dims() const noexcept { return cells_; }
  Dims3 node_dims() const noexcept { return {cells_[0] + 1, cells_[1] + 1, cells_[2] + 1}; }
  const Vec3& spacing() const noexcept { return spacing_; }
  const Vec3& origin() const noexcept { return origin_; }

  std::size_t num_nodes() const noexcept { return nodes_; }
  std::size_t num_cells() const noexcept { return cells_[0] * cells_[1] * cells_[2]; }
  std::size_t num_edges() const noexcept { return edge_offset_[3]; }
  std::size_t num_faces() const noexcept { return face_offset_[3]; }

  /// Per-orientation extents of the edge block of axis `a`.
  Dims3 edge_dims(Axis a) const noexcept;
  /// Per-orientation extents of the face block with normal `a`.
  Dims3 face_dims(Axis a) const noexcept;
  std::size_t edge_offset(Axis a) const noexcept { return edge_offset_[static_cast<int>(a)]; }
  std::size_t face_offset(Axis a) const noexcept { return face_offset_[static_cast<int>(a)]; }

  std::size_t node(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return i + (cells_[0] + 1) * (j + (cells_[1] + 1) * k);
  }
  std::size_t cell(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return i + cells_[0] * (j + cells_[1] * k);
  }
  std::size_t edge(Axis a, std::size_t i, std::size_t j, std::size_t k) const noexcept {
    const auto d = edge_dims(a);
    return edge_offset(a) + i + d[0] * (j + d[1] * k);
  }
  std::size_t face(Axis a, std::size_t i, std::size_t j, std::size_t k) const noexcept {
    const auto d = face_dims(a);
    return face_offset(a) + i + d[0] * (j + d[1] * k);
  }

  struct EdgeInfo {
    Axis axis;
    std::array<std::size_t, 3> ijk;  // tail node coordinates
    std::size_t tail;
    std::size_t head;
  };
  EdgeInfo edge_info(std::size_t e) const noexcept;

  struct FaceInfo {
    Axis normal;
    std::array<std::size_t, 3> ijk;
  };
  FaceInfo face_info(std::size_t f) const noexcept;

  std::array<std::size_t, 3> node_ijk(std::size_t n) const noexcept {
    const std::size_t px = cells_[0] + 1, py = cells_[1] + 1;
    return {n % px, (n / px) % py, n / (px * py)};
  }

  double edge_length(Axis a) const noexcept { return spacing_[static_cast<int>(a)]; }
  /// Area of the dual facet pierced by an edge of axis `a`.
  double dual_area(Axis a) const noexcept;
  /// Area of a primal face with normal `a`.
  double face_area(Axis a) const noexcept { return dual_area(a); }

  Vec3 node_position(std::size_t n) const noexcept;
  Vec3 face_center(std::size_t f) const noexcept;

 private:
  Dims3 cells_;
  Vec3 spacing_;
  Vec3 origin_;
  std::size_t nodes_;
  std::array<std::size_t, 4> edge_offset_{};
  std::array<std::size_t, 4> face_offset_{};
};

}  // namespace spfd
