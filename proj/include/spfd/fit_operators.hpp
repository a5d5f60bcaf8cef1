#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spfd/sparse_matrix.hpp"
#include "spfd/staggered_grid.hpp"
#include "spfd/voxel_model.hpp"

namespace spfd {

/// Topological gradient, edges x nodes: -1 on the tail node, +1 on the head.
SparseMatrix build_gradient(const StaggeredGrid& grid);

/// Topological curl, faces x edges: four +-1 entries per face, oriented by
/// the right-hand rule around the face normal.
SparseMatrix build_curl(const StaggeredGrid& grid);

/// Topological divergence, cells x faces: six +-1 entries, outward positive.
SparseMatrix build_divergence(const StaggeredGrid& grid);

/// Diagonal of the edge conductance matrix at `frequency_hz`, in siemens.
///
/// Entry e is mean(kappa over the 4 voxels around e) * dual_area / length,
/// where voxels outside the grid count as zero conductivity and the mean
/// always divides by 4.
std::vector<double> edge_conductances(const VoxelModel& model, const StaggeredGrid& grid, double frequency_hz);

/// Edge conductance matrix as a diagonal SparseMatrix (zero entries dropped).
SparseMatrix build_mkappa(const VoxelModel& model, const StaggeredGrid& grid, double frequency_hz);

inline constexpr std::int64_t kNoDof = -1;

/// Reduced Poisson system G^T Mk G psi = -G^T Mk a on the conductive nodes.
struct PoissonSystem {
  SparseMatrix matrix;
  std::vector<double> rhs;
  /// Reduced DOF per grid node, kNoDof for pinned and non-conductive nodes.
  std::vector<std::int64_t> dof_of_node;
  std::vector<std::size_t> node_of_dof;
  /// Lowest-index node of every conductive component, held at psi = 0.
  std::vector<std::size_t> pinned_nodes;
  std::size_t conductive_nodes = 0;
  std::size_t component_count = 0;
  std::vector<double> edge_conductance;

  std::size_t dofs() const noexcept { return node_of_dof.size(); }
};

enum class AssemblyMethod {
  stencil,         // direct 7-point assembly
  triple_product,  // sparse G^T Mk G restricted to the DOFs; for cross-checks
};

/// Builds the reduced system. Throws EmptySystemError when the model has no
/// conductive node at `frequency_hz`.
PoissonSystem assemble_poisson(const VoxelModel& model, const StaggeredGrid& grid,
                               std::span<const double> vector_potential, double frequency_hz,
                               AssemblyMethod method = AssemblyMethod::stencil);

/// Recomputes -G^T Mk a on the reduced DOFs of an assembled system.
std::vector<double> poisson_rhs(const PoissonSystem& system, const StaggeredGrid& grid,
                                std::span<const double> vector_potential);

/// Scatters a reduced solution to all grid nodes; pinned and excluded nodes get 0.
std::vector<double> expand_to_nodes(const PoissonSystem& system, std::span<const double> reduced);

}  // namespace spfd
