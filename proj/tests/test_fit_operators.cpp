#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

#include "spfd/error.hpp"
#include "spfd/fit_operators.hpp"
#include "spfd/staggered_grid.hpp"
#include "support.hpp"

using namespace spfd;

namespace {

const Axis kAxes[3] = {Axis::x, Axis::y, Axis::z};

std::vector<double> random_integers(std::size_t n, int lo, int hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = static_cast<double>(test::uniform_int(lo, hi));
  return v;
}

bool all_zero(const std::vector<double>& v) {
  for (double x : v)
    if (x != 0.0) return false;
  return true;
}

VoxelModel random_model(Dims3 d, double fill) {
  std::vector<TissueId> ids(d[0] * d[1] * d[2]);
  for (auto& id : ids) id = test::uniform(0.0, 1.0) < fill ? static_cast<TissueId>(test::uniform_int(1, 2)) : 0;
  std::map<TissueId, Tissue> table{{0, {"free_space", ConductivitySamples::constant(0.0)}},
                                   {1, {"a", ConductivitySamples::constant(0.5)}},
                                   {2, {"b", ConductivitySamples::constant(0.005)}}};
  return VoxelModel(d, {0.002, 0.0025, 0.003}, {0, 0, 0}, std::move(ids), std::move(table));
}

}  // namespace

TEST_CASE("grid index spaces") {
  const StaggeredGrid g({3, 4, 5}, {1.0, 2.0, 3.0});
  CHECK(g.num_nodes() == 4 * 5 * 6);
  CHECK(g.num_cells() == 60);
  CHECK(g.num_edges() == 3 * 5 * 6 + 4 * 4 * 6 + 4 * 5 * 5);
  CHECK(g.num_faces() == 4 * 4 * 5 + 3 * 5 * 5 + 3 * 4 * 6);
  CHECK(g.edge_offset(Axis::y) == 90);
  CHECK(g.face_offset(Axis::y) == 80);
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const auto info = g.edge_info(e);
    REQUIRE(info.tail < g.num_nodes());
    REQUIRE(info.head < g.num_nodes());
    const auto t = g.node_ijk(info.tail), h = g.node_ijk(info.head);
    const int a = static_cast<int>(info.axis);
    for (int d = 0; d < 3; ++d) CHECK(h[d] == t[d] + (d == a ? 1 : 0));
    CHECK(g.edge(info.axis, t[0], t[1], t[2]) == e);
  }
  for (std::size_t f = 0; f < g.num_faces(); ++f) {
    const auto info = g.face_info(f);
    CHECK(g.face(info.normal, info.ijk[0], info.ijk[1], info.ijk[2]) == f);
  }
  CHECK(g.dual_area(Axis::x) == 6.0);
  CHECK(g.dual_area(Axis::z) == 2.0);
}

TEST_CASE("gradient operator") {
  const StaggeredGrid unit({1, 1, 1}, {1, 1, 1});
  const auto g1 = build_gradient(unit);
  CHECK(g1.rows() == 12);
  CHECK(g1.cols() == 8);
  CHECK(g1.nnz() == 24);

  const StaggeredGrid g({4, 3, 2}, {0.002, 0.003, 0.004});
  const auto G = build_gradient(g);
  CHECK(all_zero(G * std::vector<double>(g.num_nodes(), 1.0)));

  std::vector<double> x(g.num_nodes());
  for (std::size_t n = 0; n < x.size(); ++n) x[n] = g.node_position(n)[0];
  const auto gx = G * x;
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    if (g.edge_info(e).axis == Axis::x)
      CHECK(gx[e] == doctest::Approx(0.002).epsilon(1e-12));
    else
      CHECK(gx[e] == 0.0);
  }
}

TEST_CASE("curl operator") {
  const StaggeredGrid unit({1, 1, 1}, {1, 1, 1});
  const auto c1 = build_curl(unit);
  CHECK(c1.rows() == 6);
  CHECK(c1.cols() == 12);
  CHECK(c1.nnz() == 24);

  const StaggeredGrid g({3, 3, 3}, {1, 1, 1});
  const auto C = build_curl(g);
  for (std::size_t f = 0; f < g.num_faces(); ++f) CHECK(C.row_offsets()[f + 1] - C.row_offsets()[f] == 4);

  std::vector<double> a(g.num_edges(), 0.0);
  for (std::size_t e = 0; e < g.num_edges(); ++e)
    if (g.edge_info(e).axis == Axis::x) a[e] = 0.75;
  const auto b = C * a;
  for (std::size_t f = 0; f < g.num_faces(); ++f)
    if (g.face_info(f).normal == Axis::z) CHECK(b[f] == 0.0);
}

TEST_CASE("curl orientation follows the right-hand rule") {
  // a_y = x on y-edges gives circulation +1 per unit z-face (curl_z = d a_y / dx).
  const StaggeredGrid g({2, 2, 2}, {1, 1, 1});
  std::vector<double> a(g.num_edges(), 0.0);
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const auto info = g.edge_info(e);
    if (info.axis == Axis::y) a[e] = static_cast<double>(info.ijk[0]);
  }
  const auto b = build_curl(g) * a;
  for (std::size_t f = 0; f < g.num_faces(); ++f)
    CHECK(b[f] == (g.face_info(f).normal == Axis::z ? 1.0 : 0.0));
}

TEST_CASE("discrete identities C G = 0 and S C = 0 hold exactly") {
  for (std::size_t nx = 1; nx <= 5; ++nx)
    for (std::size_t ny = 1; ny <= 5; ++ny)
      for (std::size_t nz = 1; nz <= 5; ++nz) {
        const StaggeredGrid g({nx, ny, nz}, {1, 1, 1});
        CHECK(multiply(build_curl(g), build_gradient(g)).nnz() == 0);
        CHECK(multiply(build_divergence(g), build_curl(g)).nnz() == 0);
      }
  for (std::size_t n : {6u, 7u, 8u}) {
    const StaggeredGrid g({n, n, n}, {1, 1, 1});
    CHECK(multiply(build_divergence(g), build_curl(g)).nnz() == 0);
  }
}

TEST_CASE("divergence operator") {
  const StaggeredGrid g({3, 4, 2}, {1, 1, 1});
  const auto S = build_divergence(g);
  CHECK(S.rows() == g.num_cells());
  for (std::size_t c = 0; c < g.num_cells(); ++c) CHECK(S.row_offsets()[c + 1] - S.row_offsets()[c] == 6);

  std::vector<double> b(g.num_faces(), 0.0);
  for (std::size_t f = 0; f < g.num_faces(); ++f)
    if (g.face_info(f).normal == Axis::z) b[f] = 3.5;
  CHECK(all_zero(S * b));

  const auto C = build_curl(g);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_integers(g.num_edges(), -1000, 1000);
    CHECK(all_zero(S * (C * a)));
  }
}

TEST_CASE("conductance matrix") {
  SUBCASE("free space gives the zero matrix") {
    const VoxelModel m({3, 3, 3}, {0.002, 0.002, 0.002}, {0, 0, 0}, std::vector<TissueId>(27, 0),
                       test::single_tissue_table(0.2));
    const StaggeredGrid g(m);
    CHECK(build_mkappa(m, g, 85e3).nnz() == 0);
  }
  SUBCASE("interior and surface edges of a homogeneous block") {
    const auto m = test::homogeneous_cube(4, 0.2, 0.002);
    const StaggeredGrid g(m);
    const auto mk = build_mkappa(m, g, 85e3);
    const auto interior = g.edge(Axis::x, 1, 2, 2);
    CHECK(mk.at(interior, interior) == doctest::Approx(4e-4).epsilon(1e-14));
    const auto face_edge = g.edge(Axis::x, 1, 0, 2);  // on the y = 0 surface: 2 of 4 voxels
    CHECK(mk.at(face_edge, face_edge) == doctest::Approx(2e-4).epsilon(1e-14));
    const auto corner_edge = g.edge(Axis::x, 1, 0, 0);  // 1 of 4 voxels
    CHECK(mk.at(corner_edge, corner_edge) == doctest::Approx(1e-4).epsilon(1e-14));
    CHECK(mk.nnz() == g.num_edges());
  }
  SUBCASE("anisotropic spacing uses dual area over length") {
    const VoxelModel m({2, 2, 2}, {0.001, 0.002, 0.004}, {0, 0, 0}, std::vector<TissueId>(8, 1),
                       test::single_tissue_table(0.5));
    const StaggeredGrid g(m);
    const auto m_e = edge_conductances(m, g, 1e3);
    CHECK(m_e[g.edge(Axis::z, 1, 1, 0)] == doctest::Approx(0.5 * 0.001 * 0.002 / 0.004));
    CHECK(m_e[g.edge(Axis::x, 0, 1, 1)] == doctest::Approx(0.5 * 0.002 * 0.004 / 0.001));
  }
}

TEST_CASE("3x3x3 cube system matches a hand-assembled 7-point stencil") {
  const double kappa = 0.2, delta = 0.002;
  const auto m = test::homogeneous_cube(3, kappa, delta);
  const StaggeredGrid g(m);
  const auto sys = assemble_poisson(m, g, std::vector<double>(g.num_edges(), 0.0), 85e3);

  // Oracle: count the voxels touching every node pair by geometry.
  const std::size_t np = 4;
  auto node = [&](long i, long j, long k) { return static_cast<std::size_t>(i + np * (j + np * k)); };
  auto inside = [](long i, long j, long k) { return i >= 0 && j >= 0 && k >= 0 && i < 3 && j < 3 && k < 3; };
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(64, 64);
  for (long k = 0; k < 4; ++k)
    for (long j = 0; j < 4; ++j)
      for (long i = 0; i < 4; ++i)
        for (int a = 0; a < 3; ++a) {
          long h[3] = {i, j, k};
          ++h[a];
          if (h[a] > 3) continue;
          // voxels around the edge: offsets -1/0 in the two transverse directions
          const int t1 = (a + 1) % 3, t2 = (a + 2) % 3;
          int count = 0;
          for (int d1 = -1; d1 <= 0; ++d1)
            for (int d2 = -1; d2 <= 0; ++d2) {
              long v[3] = {i, j, k};
              v[t1] += d1;
              v[t2] += d2;
              if (inside(v[0], v[1], v[2])) ++count;
            }
          const double c = kappa * count / 4.0 * delta;
          const auto p = node(i, j, k), q = node(h[0], h[1], h[2]);
          full(p, p) += c;
          full(q, q) += c;
          full(p, q) -= c;
          full(q, p) -= c;
        }
  // pin node 0
  const Eigen::MatrixXd reduced = full.bottomRightCorner(63, 63);
  CHECK(sys.dofs() == 63);
  CHECK(sys.pinned_nodes == std::vector<std::size_t>{0});
  const auto a = test::dense(sys.matrix);
  CHECK((a - reduced).cwiseAbs().maxCoeff() <= 1e-18);
}

TEST_CASE("gradient excitations are absorbed by the scalar potential") {
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = random_model({6, 5, 4}, 0.6);
    const StaggeredGrid g(m);
    const auto psi0 = test::random_vector(g.num_nodes());
    const auto a = build_gradient(g) * psi0;
    PoissonSystem sys;
    try {
      sys = assemble_poisson(m, g, a, 1e3);
    } catch (const EmptySystemError&) {
      continue;
    }
    const auto labels = conductive_component_labels(m, 1e3);
    std::vector<double> expected(sys.dofs());
    for (std::size_t d = 0; d < sys.dofs(); ++d) {
      const auto n = sys.node_of_dof[d];
      const auto pinned = sys.pinned_nodes[static_cast<std::size_t>(labels.labels[n])];
      expected[d] = -(psi0[n] - psi0[pinned]);
    }
    const auto ax = sys.matrix * expected;
    double num = 0.0, den = 0.0;
    for (std::size_t d = 0; d < ax.size(); ++d) {
      num += (ax[d] - sys.rhs[d]) * (ax[d] - sys.rhs[d]);
      den += sys.rhs[d] * sys.rhs[d];
    }
    CHECK(std::sqrt(num / den) <= 1e-12);
  }
}

TEST_CASE("zero vector potential gives a zero right-hand side") {
  const auto m = test::homogeneous_cube(4);
  const StaggeredGrid g(m);
  const auto sys = assemble_poisson(m, g, std::vector<double>(g.num_edges(), 0.0), 1e3);
  CHECK(all_zero(sys.rhs));
}

TEST_CASE("free-space model is an empty system") {
  const VoxelModel m({3, 3, 3}, {1, 1, 1}, {0, 0, 0}, std::vector<TissueId>(27, 0), test::single_tissue_table(1));
  const StaggeredGrid g(m);
  CHECK_THROWS_AS(assemble_poisson(m, g, std::vector<double>(g.num_edges(), 0.0), 1e3), EmptySystemError);
  CHECK_THROWS_AS(assemble_poisson(m, g, std::vector<double>(3, 0.0), 1e3), InvalidArgument);
}

TEST_CASE("assembled systems satisfy the structural invariants (property)") {
  for (int trial = 0; trial < 25; ++trial) {
    const Dims3 d{static_cast<std::size_t>(test::uniform_int(1, 6)), static_cast<std::size_t>(test::uniform_int(1, 6)),
                  static_cast<std::size_t>(test::uniform_int(1, 6))};
    const auto m = random_model(d, test::uniform(0.2, 0.9));
    const StaggeredGrid g(m);
    const auto a = test::random_vector(g.num_edges());
    PoissonSystem sys;
    try {
      sys = assemble_poisson(m, g, a, 1e3);
    } catch (const EmptySystemError&) {
      CHECK(m.conductive_voxel_count(1e3) == 0);
      continue;
    }
    const auto labels = conductive_component_labels(m, 1e3);
    CHECK(sys.conductive_nodes == labels.labeled_nodes);
    CHECK(sys.component_count == labels.component_count);
    CHECK(sys.dofs() == labels.labeled_nodes - labels.component_count);

    // stencil and sparse triple product agree
    const auto tp = assemble_poisson(m, g, a, 1e3, AssemblyMethod::triple_product);
    const auto ds = test::dense(sys.matrix), dt = test::dense(tp.matrix);
    const double scale = ds.cwiseAbs().maxCoeff();
    CHECK((ds - dt).cwiseAbs().maxCoeff() <= 1e-13 * scale);
    CHECK(test::rel_diff(sys.rhs, tp.rhs) <= 1e-13);
    CHECK(test::rel_diff(poisson_rhs(sys, g, a), sys.rhs) <= 1e-14);

    // symmetric and positive definite after pinning
    CHECK((ds - ds.transpose()).cwiseAbs().maxCoeff() <= 1e-13 * scale);
    for (Eigen::Index i = 0; i < ds.rows(); ++i) CHECK(ds(i, i) > 0.0);
    if (ds.rows() > 0) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ds);
      CHECK(eig.eigenvalues().minCoeff() > 0.0);
    }

    // before pinning: zero row sums, diagonal = -sum of off-diagonals
    const auto G = build_gradient(g);
    const auto full = test::dense(triple_product(G.transpose(), build_mkappa(m, g, 1e3), G));
    for (Eigen::Index r = 0; r < full.rows(); ++r) {
      const double off = full.row(r).sum() - full(r, r);
      CHECK(std::abs(full(r, r) + off) <= 1e-13 * scale);
    }
  }
}

TEST_CASE("expand_to_nodes scatters the reduced solution") {
  const auto m = test::homogeneous_cube(2);
  const StaggeredGrid g(m);
  const auto sys = assemble_poisson(m, g, std::vector<double>(g.num_edges(), 0.0), 1e3);
  std::vector<double> x(sys.dofs());
  for (std::size_t d = 0; d < x.size(); ++d) x[d] = static_cast<double>(d + 1);
  const auto full = expand_to_nodes(sys, x);
  CHECK(full.size() == g.num_nodes());
  CHECK(full[sys.pinned_nodes[0]] == 0.0);
  for (std::size_t d = 0; d < x.size(); ++d) CHECK(full[sys.node_of_dof[d]] == x[d]);
  CHECK_THROWS_AS(expand_to_nodes(sys, std::vector<double>(2)), InvalidArgument);
}
