#include "spfd/gauging.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <string>

#include "spfd/error.hpp"
#include "spfd/fit_operators.hpp"
#include "spfd/parallel.hpp"
#include "text_util.hpp"

namespace spfd {

std::size_t SpanningTree::edge_count() const noexcept {
  return static_cast<std::size_t>(std::count(in_tree.begin(), in_tree.end(), std::uint8_t{1}));
}

SpanningTree build_comb_tree(const StaggeredGrid& grid) {
  const auto nd = grid.node_dims();
  SpanningTree t;
  t.in_tree.assign(grid.num_edges(), 0);
  t.parent.resize(grid.num_nodes());
  t.parent_edge.resize(grid.num_nodes());
  t.root = grid.node(0, 0, 0);
  for (std::size_t k = 0; k < nd[2]; ++k)
    for (std::size_t j = 0; j < nd[1]; ++j)
      for (std::size_t i = 0; i < nd[0]; ++i) {
        const std::size_t n = grid.node(i, j, k);
        std::size_t e;
        if (k > 0) {
          e = grid.edge(Axis::z, i, j, k - 1);
          t.parent[n] = grid.node(i, j, k - 1);
        } else if (j > 0) {
          e = grid.edge(Axis::y, i, j - 1, 0);
          t.parent[n] = grid.node(i, j - 1, 0);
        } else if (i > 0) {
          e = grid.edge(Axis::x, i - 1, 0, 0);
          t.parent[n] = grid.node(i - 1, 0, 0);
        } else {
          t.parent[n] = n;
          t.parent_edge[n] = 0;
          continue;
        }
        t.in_tree[e] = 1;
        t.parent_edge[n] = e;
      }
  return t;
}

SpanningTree build_bfs_tree(const StaggeredGrid& grid) {
  const auto nd = grid.node_dims();
  SpanningTree t;
  t.in_tree.assign(grid.num_edges(), 0);
  t.parent.assign(grid.num_nodes(), grid.num_nodes());
  t.parent_edge.assign(grid.num_nodes(), 0);
  t.root = 0;
  t.parent[0] = 0;
  std::deque<std::size_t> queue{0};
  constexpr Axis axes[3] = {Axis::x, Axis::y, Axis::z};
  while (!queue.empty()) {
    const std::size_t n = queue.front();
    queue.pop_front();
    const auto ijk = grid.node_ijk(n);
    for (int a = 0; a < 3; ++a) {
      for (int dir : {+1, -1}) {
        if (dir > 0 && ijk[a] + 1 >= nd[a]) continue;
        if (dir < 0 && ijk[a] == 0) continue;
        auto o = ijk;
        o[a] = dir > 0 ? o[a] + 1 : o[a] - 1;
        const std::size_t m = grid.node(o[0], o[1], o[2]);
        if (t.parent[m] != grid.num_nodes()) continue;
        const auto& tail = dir > 0 ? ijk : o;
        const std::size_t e = grid.edge(axes[a], tail[0], tail[1], tail[2]);
        t.parent[m] = n;
        t.parent_edge[m] = e;
        t.in_tree[e] = 1;
        queue.push_back(m);
      }
    }
  }
  return t;
}

std::size_t tree_component_count(const StaggeredGrid& grid, const SpanningTree& tree) {
  std::vector<std::size_t> root(grid.num_nodes());
  std::iota(root.begin(), root.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (root[x] != x) {
      root[x] = root[root[x]];
      x = root[x];
    }
    return x;
  };
  std::size_t components = grid.num_nodes();
  for (std::size_t e = 0; e < tree.in_tree.size(); ++e) {
    if (!tree.in_tree[e]) continue;
    const auto info = grid.edge_info(e);
    const auto a = find(info.tail), b = find(info.head);
    if (a != b) {
      root[a] = b;
      --components;
    }
  }
  return components;
}

std::vector<double> gauge_vector_potential(std::span<const double> b, const StaggeredGrid& grid,
                                           const SpanningTree& tree, const GaugeOptions& options) {
  if (b.size() != grid.num_faces()) throw InvalidArgument("face flux length differs from face count");
  if (tree.in_tree.size() != grid.num_edges()) throw InvalidArgument("tree does not match grid");

  const SparseMatrix curl = build_curl(grid);
  const SparseMatrix curl_t = curl.transpose();
  const auto& off = curl.row_offsets();
  const auto& ci = curl.col_indices();
  const auto& cv = curl.values();

  const std::size_t ne = grid.num_edges();
  const std::size_t nf = grid.num_faces();
  std::vector<double> a(ne, 0.0);
  std::vector<std::uint8_t> known(tree.in_tree.begin(), tree.in_tree.end());
  std::vector<std::uint8_t> open_count(nf, 0);
  std::deque<std::size_t> queue;
  for (std::size_t f = 0; f < nf; ++f) {
    for (auto p = off[f]; p < off[f + 1]; ++p) open_count[f] += known[ci[p]] ? 0 : 1;
    if (open_count[f] == 1) queue.push_back(f);
  }
  std::size_t unknown = ne - static_cast<std::size_t>(std::count(known.begin(), known.end(), std::uint8_t{1}));

  while (!queue.empty()) {
    const std::size_t f = queue.front();
    queue.pop_front();
    if (open_count[f] != 1) continue;
    std::int64_t target = -1;
    double sign = 0.0;
    double rest = 0.0;
    for (auto p = off[f]; p < off[f + 1]; ++p) {
      if (known[ci[p]]) {
        rest += cv[p] * a[ci[p]];
      } else {
        target = ci[p];
        sign = cv[p];
      }
    }
    a[target] = (b[f] - rest) / sign;
    known[target] = 1;
    --unknown;
    const auto& to = curl_t.row_offsets();
    for (auto p = to[target]; p < to[target + 1]; ++p) {
      const auto g = static_cast<std::size_t>(curl_t.col_indices()[p]);
      if (--open_count[g] == 1) queue.push_back(g);
    }
  }
  if (unknown > 0)
    throw GaugingError("gauging stalled with " + std::to_string(unknown) + " undetermined edges");

  std::vector<double> residual(nf);
  curl.multiply(a, residual);
  double worst = 0.0;
  std::size_t worst_face = 0;
  for (std::size_t f = 0; f < nf; ++f) {
    residual[f] -= b[f];
    if (std::abs(residual[f]) > worst) {
      worst = std::abs(residual[f]);
      worst_face = f;
    }
  }
  const double rnorm = norm2(residual);
  const double bnorm = norm2(b);
  if (rnorm > options.tolerance * bnorm)
    throw GaugingError("incompatible fluxes: ||C a - b|| / ||b|| = " + detail::format_double(rnorm / bnorm) +
                       ", worst face " + std::to_string(worst_face) + " (residual " + detail::format_double(worst) + ")");
  return a;
}

}  // namespace spfd
