#include <doctest.h>

#include <cmath>
#include <limits>

#include "spfd/error.hpp"
#include "spfd/field_source.hpp"
#include "spfd/fit_operators.hpp"
#include "spfd/gauging.hpp"
#include "support.hpp"

using namespace spfd;

namespace {

Dims3 random_dims(int lo, int hi) {
  return {static_cast<std::size_t>(test::uniform_int(lo, hi)), static_cast<std::size_t>(test::uniform_int(lo, hi)),
          static_cast<std::size_t>(test::uniform_int(lo, hi))};
}

std::vector<double> random_cotree_integers(const SpanningTree& tree, int lo, int hi) {
  std::vector<double> a(tree.in_tree.size(), 0.0);
  for (std::size_t e = 0; e < a.size(); ++e)
    if (!tree.in_tree[e]) a[e] = static_cast<double>(test::uniform_int(lo, hi));
  return a;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST_CASE("comb tree on a single voxel") {
  const StaggeredGrid g({1, 1, 1}, {1, 1, 1});
  const auto t = build_comb_tree(g);
  CHECK(t.edge_count() == 7);
  std::size_t per_axis[3] = {0, 0, 0};
  for (std::size_t e = 0; e < g.num_edges(); ++e)
    if (t.in_tree[e]) ++per_axis[static_cast<int>(g.edge_info(e).axis)];
  CHECK(per_axis[0] == 1);
  CHECK(per_axis[1] == 2);
  CHECK(per_axis[2] == 4);
  CHECK(t.root == 0);
}

TEST_CASE("one-node grid has an empty tree") {
  const StaggeredGrid g({0, 0, 0}, {1, 1, 1});
  CHECK(g.num_nodes() == 1);
  CHECK(g.num_edges() == 0);
  const auto t = build_comb_tree(g);
  CHECK(t.edge_count() == 0);
  CHECK(tree_component_count(g, t) == 1);
  CHECK(gauge_vector_potential({}, g, t).empty());
}

TEST_CASE("comb and BFS trees span every grid (property)") {
  for (int trial = 0; trial < 30; ++trial) {
    const StaggeredGrid g(random_dims(1, 7), {1, 1, 1});
    for (const auto& t : {build_comb_tree(g), build_bfs_tree(g)}) {
      CHECK(t.edge_count() == g.num_nodes() - 1);
      CHECK(tree_component_count(g, t) == 1);
      // parent links reach the root
      for (std::size_t n = 0; n < g.num_nodes(); ++n) {
        std::size_t cur = n, steps = 0;
        while (cur != t.root && steps <= g.num_nodes()) {
          CHECK(t.in_tree[t.parent_edge[cur]] == 1);
          cur = t.parent[cur];
          ++steps;
        }
        CHECK(cur == t.root);
      }
    }
  }
}

TEST_CASE("zero flux gives zero potential") {
  const StaggeredGrid g({4, 3, 2}, {0.002, 0.002, 0.002});
  const auto a = gauge_vector_potential(std::vector<double>(g.num_faces(), 0.0), g, build_comb_tree(g));
  CHECK(max_abs(a) == 0.0);
}

TEST_CASE("integer potentials on the cotree round-trip exactly (property)") {
  for (int trial = 0; trial < 20; ++trial) {
    const StaggeredGrid g(random_dims(1, 6), {0.002, 0.002, 0.002});
    const auto C = build_curl(g);
    for (const auto& tree : {build_comb_tree(g), build_bfs_tree(g)}) {
      const auto a0 = random_cotree_integers(tree, -50, 50);
      const auto a = gauge_vector_potential(C * a0, g, tree);
      CHECK(a == a0);
    }
  }
}

TEST_CASE("uniform field fluxes are reproduced and tree edges stay zero") {
  for (std::size_t n : {2u, 5u, 9u}) {
    const StaggeredGrid g({n, n, n}, {0.002, 0.002, 0.002});
    const auto b = evaluate_on_faces(UniformField{{0.0, 0.0, 1e-6}}, g);
    const auto tree = build_comb_tree(g);
    const auto a = gauge_vector_potential(b, g, tree);
    const auto cb = build_curl(g) * a;
    CHECK(test::rel_diff(cb, b) <= 1e-12);
    for (std::size_t e = 0; e < a.size(); ++e)
      if (tree.in_tree[e]) CHECK(a[e] == 0.0);
  }
}

TEST_CASE("floating-point back-substitution error stays near machine precision (property)") {
  for (int trial = 0; trial < 10; ++trial) {
    const StaggeredGrid g(random_dims(2, 8), {0.002, 0.002, 0.002});
    const auto tree = build_comb_tree(g);
    // dyadic values keep C a0 and S C a0 exact, so b is exactly compatible
    auto a0 = random_cotree_integers(tree, -1 << 20, 1 << 20);
    for (auto& x : a0) x = std::ldexp(x, -30);
    const auto b = build_curl(g) * a0;
    const auto a = gauge_vector_potential(b, g, tree);
    const auto cb = build_curl(g) * a;
    std::vector<double> diff(b.size());
    for (std::size_t f = 0; f < b.size(); ++f) diff[f] = cb[f] - b[f];
    CHECK(max_abs(diff) <= 64.0 * std::numeric_limits<double>::epsilon() * max_abs(b));
  }
}

TEST_CASE("incompatible fluxes are rejected") {
  const StaggeredGrid g({3, 3, 3}, {1, 1, 1});
  std::vector<double> b(g.num_faces(), 0.0);
  b[g.face(Axis::z, 1, 1, 1)] = 1.0;  // a lone flux tube end: S b != 0
  try {
    gauge_vector_potential(b, g, build_comb_tree(g));
    FAIL("expected a GaugingError");
  } catch (const GaugingError& e) {
    CHECK(std::string(e.what()).find("face") != std::string::npos);
  }
}

TEST_CASE("a tree that spans nothing stalls the elimination") {
  const StaggeredGrid g({2, 2, 2}, {1, 1, 1});
  auto tree = build_comb_tree(g);
  std::fill(tree.in_tree.begin(), tree.in_tree.end(), std::uint8_t{0});
  try {
    gauge_vector_potential(std::vector<double>(g.num_faces(), 0.0), g, tree);
    FAIL("expected a GaugingError");
  } catch (const GaugingError& e) {
    CHECK(std::string(e.what()).find("stalled") != std::string::npos);
  }
  CHECK_THROWS_AS(gauge_vector_potential(std::vector<double>(3, 0.0), g, build_comb_tree(g)), InvalidArgument);
}
