#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spfd/staggered_grid.hpp"

namespace spfd {

/// Spanning tree of the grid's node-edge graph.
struct SpanningTree {
  std::vector<std::uint8_t> in_tree;  // per edge
  std::size_t root = 0;
  /// Parent node and connecting edge of every node; the root points to itself.
  std::vector<std::size_t> parent;
  std::vector<std::size_t> parent_edge;

  std::size_t edge_count() const noexcept;
};

/// Comb tree rooted at node (0,0,0): the x-edges of the line (.,0,0), the
/// y-edges of the plane (.,.,0) and every z-edge.
SpanningTree build_comb_tree(const StaggeredGrid& grid);

/// Breadth-first tree from node (0,0,0), neighbours visited in the order
/// +x, -x, +y, -y, +z, -z.
SpanningTree build_bfs_tree(const StaggeredGrid& grid);

/// Returns the number of connected components of the tree subgraph, computed
/// with union-find. A spanning tree yields 1 with exactly nodes-1 edges.
std::size_t tree_component_count(const StaggeredGrid& grid, const SpanningTree& tree);

struct GaugeOptions {
  double tolerance = 1e-10;  // relative flux residual accepted
};

/// Recovers edge vector potentials a with C a = b from face fluxes b.
///
/// Tree edges are fixed to zero; the remaining edges are determined by
/// greedy elimination over faces that have exactly one undetermined edge,
/// processed FIFO in face-index order. Throws GaugingError if the queue
/// empties with edges left or if ||C a - b|| > tolerance * ||b||.
std::vector<double> gauge_vector_potential(std::span<const double> face_flux, const StaggeredGrid& grid,
                                           const SpanningTree& tree, const GaugeOptions& options = {});

}  // namespace spfd
