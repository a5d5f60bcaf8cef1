#include "spfd/fit_operators.hpp"

#include <deque>

#include "spfd/error.hpp"

namespace spfd {

namespace {

constexpr Axis kAxes[3] = {Axis::x, Axis::y, Axis::z};

// Edges incident to a node: for each axis the edge leaving it (head side)
// and the edge arriving at it, or -1 at the grid boundary.
struct Incidence {
  std::int64_t out[3];
  std::int64_t in[3];
};

Incidence incident_edges(const StaggeredGrid& grid, std::size_t node) {
  const auto ijk = grid.node_ijk(node);
  const auto& cells = grid.cell_dims();
  Incidence inc{};
  for (int a = 0; a < 3; ++a) {
    inc.out[a] = ijk[a] < cells[a] ? static_cast<std::int64_t>(grid.edge(kAxes[a], ijk[0], ijk[1], ijk[2])) : -1;
    if (ijk[a] > 0) {
      auto t = ijk;
      --t[a];
      inc.in[a] = static_cast<std::int64_t>(grid.edge(kAxes[a], t[0], t[1], t[2]));
    } else {
      inc.in[a] = -1;
    }
  }
  return inc;
}

}  // namespace

SparseMatrix build_gradient(const StaggeredGrid& grid) {
  const std::size_t ne = grid.num_edges();
  std::vector<std::int64_t> off(ne + 1);
  std::vector<std::int32_t> ci(2 * ne);
  std::vector<double> vals(2 * ne);
  for (std::size_t e = 0; e < ne; ++e) {
    const auto info = grid.edge_info(e);
    off[e + 1] = static_cast<std::int64_t>(2 * (e + 1));
    // tail < head always holds for the canonical node numbering
    ci[2 * e] = static_cast<std::int32_t>(info.tail);
    vals[2 * e] = -1.0;
    ci[2 * e + 1] = static_cast<std::int32_t>(info.head);
    vals[2 * e + 1] = 1.0;
  }
  return SparseMatrix(ne, grid.num_nodes(), std::move(off), std::move(ci), std::move(vals));
}

SparseMatrix build_curl(const StaggeredGrid& grid) {
  const std::size_t nf = grid.num_faces();
  std::vector<Triplet> t;
  t.reserve(4 * nf);
  for (std::size_t f = 0; f < nf; ++f) {
    const auto info = grid.face_info(f);
    const auto [i, j, k] = info.ijk;
    const auto r = static_cast<std::int64_t>(f);
    auto add = [&](Axis a, std::size_t ii, std::size_t jj, std::size_t kk, double s) {
      t.push_back({r, static_cast<std::int64_t>(grid.edge(a, ii, jj, kk)), s});
    };
    switch (info.normal) {
      case Axis::x:  // circulation y -> z
        add(Axis::y, i, j, k, 1.0);
        add(Axis::z, i, j + 1, k, 1.0);
        add(Axis::y, i, j, k + 1, -1.0);
        add(Axis::z, i, j, k, -1.0);
        break;
      case Axis::y:  // circulation z -> x
        add(Axis::z, i, j, k, 1.0);
        add(Axis::x, i, j, k + 1, 1.0);
        add(Axis::z, i + 1, j, k, -1.0);
        add(Axis::x, i, j, k, -1.0);
        break;
      case Axis::z:  // circulation x -> y
        add(Axis::x, i, j, k, 1.0);
        add(Axis::y, i + 1, j, k, 1.0);
        add(Axis::x, i, j + 1, k, -1.0);
        add(Axis::y, i, j, k, -1.0);
        break;
    }
  }
  return SparseMatrix::from_triplets(nf, grid.num_edges(), std::move(t));
}

SparseMatrix build_divergence(const StaggeredGrid& grid) {
  const auto& c = grid.cell_dims();
  std::vector<Triplet> t;
  t.reserve(6 * grid.num_cells());
  for (std::size_t k = 0; k < c[2]; ++k)
    for (std::size_t j = 0; j < c[1]; ++j)
      for (std::size_t i = 0; i < c[0]; ++i) {
        const auto r = static_cast<std::int64_t>(grid.cell(i, j, k));
        auto add = [&](std::size_t f, double s) { t.push_back({r, static_cast<std::int64_t>(f), s}); };
        add(grid.face(Axis::x, i, j, k), -1.0);
        add(grid.face(Axis::x, i + 1, j, k), 1.0);
        add(grid.face(Axis::y, i, j, k), -1.0);
        add(grid.face(Axis::y, i, j + 1, k), 1.0);
        add(grid.face(Axis::z, i, j, k), -1.0);
        add(grid.face(Axis::z, i, j, k + 1), 1.0);
      }
  return SparseMatrix::from_triplets(grid.num_cells(), grid.num_faces(), std::move(t));
}

std::vector<double> edge_conductances(const VoxelModel& model, const StaggeredGrid& grid, double f) {
  if (model.dims() != grid.cell_dims()) throw InvalidArgument("model and grid dims differ");
  const auto kappa = model.conductivity_field(f);
  const auto& c = grid.cell_dims();
  auto voxel = [&](long i, long j, long k) {
    if (i < 0 || j < 0 || k < 0 || i >= static_cast<long>(c[0]) || j >= static_cast<long>(c[1]) ||
        k >= static_cast<long>(c[2]))
      return 0.0;
    return kappa[grid.cell(static_cast<std::size_t>(i), static_cast<std::size_t>(j), static_cast<std::size_t>(k))];
  };
  std::vector<double> m(grid.num_edges(), 0.0);
  for (std::size_t e = 0; e < m.size(); ++e) {
    const auto info = grid.edge_info(e);
    const long i = static_cast<long>(info.ijk[0]), j = static_cast<long>(info.ijk[1]),
               k = static_cast<long>(info.ijk[2]);
    double sum = 0.0;
    switch (info.axis) {
      case Axis::x: sum = voxel(i, j - 1, k - 1) + voxel(i, j, k - 1) + voxel(i, j - 1, k) + voxel(i, j, k); break;
      case Axis::y: sum = voxel(i - 1, j, k - 1) + voxel(i, j, k - 1) + voxel(i - 1, j, k) + voxel(i, j, k); break;
      case Axis::z: sum = voxel(i - 1, j - 1, k) + voxel(i, j - 1, k) + voxel(i - 1, j, k) + voxel(i, j, k); break;
    }
    m[e] = 0.25 * sum * grid.dual_area(info.axis) / grid.edge_length(info.axis);
  }
  return m;
}

SparseMatrix build_mkappa(const VoxelModel& model, const StaggeredGrid& grid, double f) {
  return SparseMatrix::diagonal(edge_conductances(model, grid, f));
}

std::vector<double> poisson_rhs(const PoissonSystem& system, const StaggeredGrid& grid,
                                std::span<const double> a) {
  if (a.size() != grid.num_edges()) throw InvalidArgument("vector potential length differs from edge count");
  const auto& m = system.edge_conductance;
  std::vector<double> rhs(system.dofs(), 0.0);
  for (std::size_t d = 0; d < rhs.size(); ++d) {
    const auto inc = incident_edges(grid, system.node_of_dof[d]);
    double s = 0.0;
    // (G^T v)_n = sum over incoming edges - sum over outgoing edges
    for (int ax = 0; ax < 3; ++ax) {
      if (inc.in[ax] >= 0) s += m[inc.in[ax]] * a[inc.in[ax]];
      if (inc.out[ax] >= 0) s -= m[inc.out[ax]] * a[inc.out[ax]];
    }
    rhs[d] = -s;
  }
  return rhs;
}

PoissonSystem assemble_poisson(const VoxelModel& model, const StaggeredGrid& grid,
                               std::span<const double> a, double f, AssemblyMethod method) {
  if (a.size() != grid.num_edges()) throw InvalidArgument("vector potential length differs from edge count");
  PoissonSystem sys;
  sys.edge_conductance = edge_conductances(model, grid, f);
  const auto& m = sys.edge_conductance;
  const std::size_t nn = grid.num_nodes();

  // Components over conductive edges; seeds visited in index order, so the
  // seed of each component is its lowest node.
  std::vector<std::int32_t> comp(nn, -1);
  std::deque<std::size_t> queue;
  for (std::size_t seed = 0; seed < nn; ++seed) {
    if (comp[seed] >= 0) continue;
    const auto inc = incident_edges(grid, seed);
    bool conductive = false;
    for (int ax = 0; ax < 3; ++ax)
      conductive = conductive || (inc.out[ax] >= 0 && m[inc.out[ax]] > 0.0) || (inc.in[ax] >= 0 && m[inc.in[ax]] > 0.0);
    if (!conductive) continue;
    const auto label = static_cast<std::int32_t>(sys.component_count++);
    sys.pinned_nodes.push_back(seed);
    comp[seed] = label;
    queue.push_back(seed);
    while (!queue.empty()) {
      const std::size_t n = queue.front();
      queue.pop_front();
      ++sys.conductive_nodes;
      const auto ni = incident_edges(grid, n);
      for (int ax = 0; ax < 3; ++ax) {
        for (const auto e : {ni.out[ax], ni.in[ax]}) {
          if (e < 0 || !(m[e] > 0.0)) continue;
          const auto info = grid.edge_info(static_cast<std::size_t>(e));
          const std::size_t other = info.tail == n ? info.head : info.tail;
          if (comp[other] < 0) {
            comp[other] = label;
            queue.push_back(other);
          }
        }
      }
    }
  }
  if (sys.conductive_nodes == 0) throw EmptySystemError("no conductive nodes: the Poisson system is empty");

  sys.dof_of_node.assign(nn, kNoDof);
  std::size_t next_pin = 0;
  for (std::size_t n = 0; n < nn; ++n) {
    if (comp[n] < 0) continue;
    if (next_pin < sys.pinned_nodes.size() && sys.pinned_nodes[next_pin] == n) {
      ++next_pin;
      continue;
    }
    sys.dof_of_node[n] = static_cast<std::int64_t>(sys.node_of_dof.size());
    sys.node_of_dof.push_back(n);
  }
  const std::size_t ndof = sys.node_of_dof.size();

  if (method == AssemblyMethod::stencil) {
    std::vector<std::int64_t> off(ndof + 1, 0);
    std::vector<std::int32_t> ci;
    std::vector<double> vals;
    ci.reserve(7 * ndof);
    vals.reserve(7 * ndof);
    for (std::size_t d = 0; d < ndof; ++d) {
      const std::size_t n = sys.node_of_dof[d];
      const auto inc = incident_edges(grid, n);
      double diag = 0.0;
      for (int ax = 0; ax < 3; ++ax) {
        if (inc.out[ax] >= 0) diag += m[inc.out[ax]];
        if (inc.in[ax] >= 0) diag += m[inc.in[ax]];
      }
      auto neighbour = [&](std::int64_t e) {
        if (e < 0 || !(m[e] > 0.0)) return;
        const auto info = grid.edge_info(static_cast<std::size_t>(e));
        const std::size_t other = info.tail == n ? info.head : info.tail;
        if (sys.dof_of_node[other] == kNoDof) return;
        ci.push_back(static_cast<std::int32_t>(sys.dof_of_node[other]));
        vals.push_back(-m[e]);
      };
      // ascending node order: -z, -y, -x, self, +x, +y, +z
      neighbour(inc.in[2]);
      neighbour(inc.in[1]);
      neighbour(inc.in[0]);
      ci.push_back(static_cast<std::int32_t>(d));
      vals.push_back(diag);
      neighbour(inc.out[0]);
      neighbour(inc.out[1]);
      neighbour(inc.out[2]);
      off[d + 1] = static_cast<std::int64_t>(ci.size());
    }
    sys.matrix = SparseMatrix(ndof, ndof, std::move(off), std::move(ci), std::move(vals));
  } else {
    const auto g = build_gradient(grid);
    const auto full = triple_product(g.transpose(), build_mkappa(model, grid, f), g);
    std::vector<Triplet> sel;
    sel.reserve(ndof);
    for (std::size_t d = 0; d < ndof; ++d)
      sel.push_back({static_cast<std::int64_t>(d), static_cast<std::int64_t>(sys.node_of_dof[d]), 1.0});
    const auto r = SparseMatrix::from_triplets(ndof, nn, std::move(sel));
    sys.matrix = triple_product(r, full, r.transpose());
  }
  sys.rhs = poisson_rhs(sys, grid, a);
  return sys;
}

std::vector<double> expand_to_nodes(const PoissonSystem& system, std::span<const double> reduced) {
  if (reduced.size() != system.dofs()) throw InvalidArgument("reduced vector length differs from DOF count");
  std::vector<double> full(system.dof_of_node.size(), 0.0);
  for (std::size_t d = 0; d < reduced.size(); ++d) full[system.node_of_dof[d]] = reduced[d];
  return full;
}

}  // namespace spfd
