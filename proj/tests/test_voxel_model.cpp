#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>

#include "spfd/error.hpp"
#include "spfd/voxel_model.hpp"
#include "support.hpp"

using namespace spfd;
using spfd::test::TempDir;

namespace {

std::string header_with(const std::string& extra_lines, const std::string& dims = "2 2 2") {
  return "format_version = 1\ndims = " + dims + "\nspacing_m = 0.002 0.002 0.002\norigin_m = 0 0 0\n" + extra_lines +
         "END_HEADER\n";
}

std::string zero_payload(std::size_t voxels) { return std::string(2 * voxels, '\0'); }

// Independent component counter: union-find over conductive voxels with
// 26-neighbour adjacency (voxels sharing a face, an edge or a corner).
std::size_t voxel_components_26(const VoxelModel& m, double f) {
  const auto& d = m.dims();
  const auto kappa = m.conductivity_field(f);
  std::vector<std::size_t> parent(kappa.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t k = 0; k < d[2]; ++k)
    for (std::size_t j = 0; j < d[1]; ++j)
      for (std::size_t i = 0; i < d[0]; ++i) {
        const auto v = m.voxel_index(i, j, k);
        if (!(kappa[v] > 0.0)) continue;
        for (int dk = -1; dk <= 1; ++dk)
          for (int dj = -1; dj <= 1; ++dj)
            for (int di = -1; di <= 1; ++di) {
              const long ii = static_cast<long>(i) + di, jj = static_cast<long>(j) + dj,
                         kk = static_cast<long>(k) + dk;
              if (ii < 0 || jj < 0 || kk < 0 || ii >= static_cast<long>(d[0]) || jj >= static_cast<long>(d[1]) ||
                  kk >= static_cast<long>(d[2]))
                continue;
              const auto w = m.voxel_index(ii, jj, kk);
              if (kappa[w] > 0.0) parent[find(v)] = find(w);
            }
      }
  std::set<std::size_t> roots;
  for (std::size_t v = 0; v < kappa.size(); ++v)
    if (kappa[v] > 0.0) roots.insert(find(v));
  return roots.size();
}

VoxelModel random_model(Dims3 d, double fill) {
  std::vector<TissueId> ids(d[0] * d[1] * d[2]);
  for (auto& id : ids) id = test::uniform(0.0, 1.0) < fill ? static_cast<TissueId>(test::uniform_int(1, 2)) : 0;
  std::map<TissueId, Tissue> table{{0, {"free_space", ConductivitySamples::constant(0.0)}},
                                   {1, {"a", ConductivitySamples::constant(0.3)}},
                                   {2, {"b", ConductivitySamples::constant(0.05)}}};
  return VoxelModel(d, {0.002, 0.002, 0.002}, {0, 0, 0}, std::move(ids), std::move(table));
}

}  // namespace

TEST_CASE("conductivity samples interpolate log-log and clamp") {
  const ConductivitySamples flat({{1e3, 0.1}, {1e5, 0.1}});
  CHECK(flat.at(1e4) == doctest::Approx(0.1).epsilon(1e-15));

  const ConductivitySamples rising({{1e3, 0.01}, {1e5, 1.0}});
  CHECK(rising.at(1e4) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(rising.at(1e3) == 0.01);
  CHECK(rising.at(1e5) == 1.0);
  CHECK(rising.at(1.0) == 0.01);
  CHECK(rising.at(1e9) == 1.0);

  const ConductivitySamples zeros({{1e3, 0.0}, {1e6, 0.0}});
  CHECK(zeros.at(3e4) == 0.0);
}

TEST_CASE("conductivity tables reject invalid samples") {
  CHECK_THROWS_AS(ConductivitySamples(std::vector<ConductivitySample>{}), InvalidArgument);
  CHECK_THROWS_AS(ConductivitySamples({{1e3, 0.1}, {1e3, 0.2}}), InvalidArgument);
  CHECK_THROWS_AS(ConductivitySamples({{1e4, 0.1}, {1e3, 0.2}}), InvalidArgument);
  CHECK_THROWS_AS(ConductivitySamples({{1e3, -0.1}}), InvalidArgument);
  CHECK_THROWS_AS(ConductivitySamples({{1e3, std::nan("")}}), InvalidArgument);
}

TEST_CASE("kappa_at is monotone for monotone tables (property)") {
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<std::size_t>(test::uniform_int(1, 6));
    std::vector<ConductivitySample> s;
    double f = std::pow(10.0, test::uniform(0.0, 3.0));
    double k = test::uniform(0.0, 0.5);
    for (std::size_t i = 0; i < n; ++i) {
      s.push_back({f, k});
      f *= std::pow(10.0, test::uniform(0.1, 1.5));
      k += test::uniform(0.0, 0.5);
    }
    const ConductivitySamples table(s);
    double prev = 0.0;
    for (double lf = -1.0; lf < 12.0; lf += 0.37) {
      const double v = table.at(std::pow(10.0, lf));
      CHECK(v >= prev * (1.0 - 1e-14));
      prev = v;
    }
  }
}

TEST_CASE("free space has zero conductivity at any frequency") {
  const auto m = test::homogeneous_cube(2);
  for (double f : {1.0, 85e3, 5e6}) CHECK(m.kappa_at(kFreeSpace, f) == 0.0);
  CHECK_THROWS_AS(m.kappa_at(7, 1e3), InvalidArgument);
}

TEST_CASE("model constructor enforces invariants") {
  auto table = test::single_tissue_table(0.2);
  CHECK_THROWS_AS(VoxelModel({2, 2, 2}, {1, 1, 1}, {0, 0, 0}, std::vector<TissueId>(7, 0), table), InvalidArgument);
  CHECK_THROWS_AS(VoxelModel({2, 2, 0}, {1, 1, 1}, {0, 0, 0}, {}, table), InvalidArgument);
  CHECK_THROWS_AS(VoxelModel({1, 1, 1}, {1, 0, 1}, {0, 0, 0}, {0}, table), InvalidArgument);
  CHECK_THROWS_AS(VoxelModel({1, 1, 1}, {1, 1, 1}, {0, 0, 0}, {3}, table), InvalidArgument);
  table[0] = {"free_space", ConductivitySamples::constant(0.5)};
  CHECK_THROWS_AS(VoxelModel({1, 1, 1}, {1, 1, 1}, {0, 0, 0}, {0}, table), InvalidArgument);
}

TEST_CASE("load_model reads an all-free-space model") {
  TempDir dir;
  const auto path = dir / "empty.vox";
  {
    std::ofstream out(path, std::ios::binary);
    out << header_with("tissue = 0 free_space 1:0\n") << zero_payload(8);
  }
  const auto m = load_model(path);
  CHECK(m.voxel_count() == 8);
  CHECK(m.conductive_voxel_count(85e3) == 0);
}

TEST_CASE("load_model rejects malformed files") {
  const std::string tissue0 = "tissue = 0 free_space 1:0\n";
  SUBCASE("payload size mismatch") {
    const auto bytes = header_with(tissue0) + std::string(7, '\0');
    try {
      parse_model(bytes);
      FAIL("expected a FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("payload size mismatch") != std::string::npos);
    }
  }
  SUBCASE("unknown key") { CHECK_THROWS_AS(parse_model(header_with(tissue0 + "colour = red\n") + zero_payload(8)), FormatError); }
  SUBCASE("missing END_HEADER") { CHECK_THROWS_AS(parse_model("format_version = 1\ndims = 1 1 1\n"), FormatError); }
  SUBCASE("tissue without table entry") {
    auto payload = zero_payload(8);
    payload[0] = 5;
    CHECK_THROWS_AS(parse_model(header_with(tissue0) + payload), FormatError);
  }
  SUBCASE("non-increasing frequencies") {
    CHECK_THROWS_AS(parse_model(header_with(tissue0 + "tissue = 1 muscle 100:0.1 10:0.2\n") + zero_payload(8)),
                    FormatError);
  }
  SUBCASE("bad dims") { CHECK_THROWS_AS(parse_model(header_with(tissue0, "2 2") + zero_payload(4)), FormatError); }
  SUBCASE("missing file names the path") {
    try {
      load_model("/nonexistent/phantom.vox");
      FAIL("expected an Error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("/nonexistent/phantom.vox") != std::string::npos);
    }
  }
}

TEST_CASE("phantom files round-trip bit-identically") {
  PhantomParams p;
  p.radius = 0.02;
  const auto sphere = make_phantom(PhantomKind::sphere, {24, 24, 24}, {0.002, 0.002, 0.002}, p);
  TempDir dir;
  save_model(sphere, dir / "s.vox");
  const auto back = load_model(dir / "s.vox");
  CHECK(back.tissue_ids() == sphere.tissue_ids());
  CHECK(back.dims() == sphere.dims());
  CHECK(back.spacing() == sphere.spacing());
  CHECK(serialize_model(back) == serialize_model(sphere));

  // multi-sample tables survive with exact values
  std::map<TissueId, Tissue> table{{0, {"free_space", ConductivitySamples::constant(0.0)}},
                                   {3, {"muscle", ConductivitySamples({{10.0, 0.2}, {1e5, 0.3456789012345}})}}};
  const VoxelModel m({2, 1, 1}, {0.001, 0.002, 0.003}, {-0.1, 0.25, 1e-3}, {3, 0}, table);
  const auto bytes = serialize_model(m);
  const auto m2 = parse_model(bytes);
  CHECK(serialize_model(m2) == bytes);
  CHECK(m2.kappa_at(3, 1e5) == 0.3456789012345);
  CHECK(m2.origin() == m.origin());
}

TEST_CASE("sphere phantoms") {
  PhantomParams p;
  p.radius = 0.0;
  const auto empty = make_phantom(PhantomKind::sphere, {8, 8, 8}, {0.002, 0.002, 0.002}, p);
  CHECK(empty.conductive_voxel_count(1e3) == 0);

  for (double r_cells : {10.0, 12.5, 16.0}) {
    const double delta = 0.002;
    p.radius = r_cells * delta;
    const auto n = static_cast<std::size_t>(2 * std::ceil(r_cells) + 2);
    const auto s = make_phantom(PhantomKind::sphere, {n, n, n}, {delta, delta, delta}, p);
    const double expected = 4.0 / 3.0 * std::numbers::pi * std::pow(r_cells, 3);
    CHECK(std::abs(static_cast<double>(s.conductive_voxel_count(1e3)) - expected) / expected < 0.05);
  }

  p.radius = 0.02;
  CHECK_THROWS_AS(make_phantom(PhantomKind::sphere, {10, 10, 10}, {0.002, 0.002, 0.002}, p), InvalidArgument);
}

TEST_CASE("cylinder phantoms are translation invariant along z") {
  PhantomParams p;
  p.radius = 0.013;
  const auto c = make_phantom(PhantomKind::cylinder, {16, 16, 9}, {0.002, 0.002, 0.002}, p);
  for (std::size_t k = 1; k < 9; ++k)
    for (std::size_t j = 0; j < 16; ++j)
      for (std::size_t i = 0; i < 16; ++i) CHECK(c.id_at(i, j, k) == c.id_at(i, j, 0));
  CHECK(c.conductive_voxel_count(1e3) > 0);
}

TEST_CASE("layered blocks assign one tissue per layer") {
  PhantomParams p;
  p.half_extent = {0.004, 0.004, 0.0};
  p.layers = {{0.004, 0.02}, {0.004, 2.0}};
  const auto m = make_phantom(PhantomKind::layered_block, {6, 6, 6}, {0.002, 0.002, 0.002}, p);
  CHECK(m.tissue_table().size() == 3);
  CHECK(m.kappa_at(1, 85e3) == 0.02);
  CHECK(m.kappa_at(2, 85e3) == 2.0);
  CHECK(m.id_at(3, 3, 1) == 1);
  CHECK(m.id_at(3, 3, 2) == 1);
  CHECK(m.id_at(3, 3, 3) == 2);
  CHECK(m.id_at(3, 3, 4) == 2);
  CHECK(m.id_at(3, 3, 0) == 0);
  CHECK(m.id_at(0, 3, 3) == 0);
}

TEST_CASE("component labels") {
  SUBCASE("all free space") {
    PhantomParams p;
    const auto m = make_phantom(PhantomKind::sphere, {4, 4, 4}, {0.002, 0.002, 0.002}, p);
    const auto labels = conductive_component_labels(m, 1e3);
    CHECK(labels.component_count == 0);
    CHECK(labels.labeled_nodes == 0);
  }
  SUBCASE("single sphere") {
    PhantomParams p;
    p.radius = 0.01;
    const auto m = make_phantom(PhantomKind::sphere, {12, 12, 12}, {0.002, 0.002, 0.002}, p);
    CHECK(conductive_component_labels(m, 1e3).component_count == 1);
  }
  SUBCASE("two blocks separated by a free-space voxel") {
    std::vector<TissueId> ids(7 * 3 * 3, 0);
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t i = 0; i < 7; ++i)
          if (i != 3) ids[i + 7 * (j + 3 * k)] = 1;
    const VoxelModel m({7, 3, 3}, {0.002, 0.002, 0.002}, {0, 0, 0}, ids, test::single_tissue_table(0.2));
    const auto labels = conductive_component_labels(m, 1e3);
    CHECK(labels.component_count == 2);
    CHECK(voxel_components_26(m, 1e3) == 2);
  }
  SUBCASE("diagonal neighbours connect through a shared corner") {
    std::vector<TissueId> ids(8, 0);
    ids[0] = 1;
    ids[7] = 1;
    const VoxelModel m({2, 2, 2}, {1, 1, 1}, {0, 0, 0}, ids, test::single_tissue_table(1.0));
    CHECK(conductive_component_labels(m, 1.0).component_count == 1);
  }
}

TEST_CASE("component count matches an independent voxel flood fill (property)") {
  for (int trial = 0; trial < 40; ++trial) {
    const Dims3 d{static_cast<std::size_t>(test::uniform_int(1, 12)), static_cast<std::size_t>(test::uniform_int(1, 12)),
                  static_cast<std::size_t>(test::uniform_int(1, 12))};
    const auto m = random_model(d, test::uniform(0.02, 0.3));
    const auto labels = conductive_component_labels(m, 1e3);
    CHECK(labels.component_count == voxel_components_26(m, 1e3));
  }
  const auto big = random_model({32, 32, 32}, 0.08);
  CHECK(conductive_component_labels(big, 1e3).component_count == voxel_components_26(big, 1e3));
}

TEST_CASE("component labels ignore which tissue fills a voxel (property)") {
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_model({9, 7, 5}, 0.25);
    auto swapped = m.tissue_ids();
    for (auto& id : swapped) id = id == 1 ? 2 : id == 2 ? 1 : 0;
    const VoxelModel m2(m.dims(), m.spacing(), m.origin(), swapped, m.tissue_table());
    const auto a = conductive_component_labels(m, 1e3);
    const auto b = conductive_component_labels(m2, 1e3);
    CHECK(a.labels == b.labels);
    CHECK(a.component_count == b.component_count);
  }
}
