#include "spfd/staggered_grid.hpp"

#include "spfd/error.hpp"

namespace spfd {

StaggeredGrid::StaggeredGrid(Dims3 cells, Vec3 spacing, Vec3 origin)
    : cells_(cells), spacing_(spacing), origin_(origin) {
  for (int a = 0; a < 3; ++a) {
    if (!(spacing_[a] > 0.0)) throw InvalidArgument("grid spacing must be positive");
  }
  nodes_ = (cells_[0] + 1) * (cells_[1] + 1) * (cells_[2] + 1);
  for (int a = 0; a < 3; ++a) {
    const auto ed = edge_dims(static_cast<Axis>(a));
    const auto fd = face_dims(static_cast<Axis>(a));
    edge_offset_[a + 1] = edge_offset_[a] + ed[0] * ed[1] * ed[2];
    face_offset_[a + 1] = face_offset_[a] + fd[0] * fd[1] * fd[2];
  }
}

Dims3 StaggeredGrid::edge_dims(Axis a) const noexcept {
  Dims3 d{cells_[0] + 1, cells_[1] + 1, cells_[2] + 1};
  d[static_cast<int>(a)] -= 1;
  return d;
}

Dims3 StaggeredGrid::face_dims(Axis a) const noexcept {
  Dims3 d = cells_;
  d[static_cast<int>(a)] += 1;
  return d;
}

StaggeredGrid::EdgeInfo StaggeredGrid::edge_info(std::size_t e) const noexcept {
  int a = 0;
  while (e >= edge_offset_[a + 1]) ++a;
  const auto d = edge_dims(static_cast<Axis>(a));
  const std::size_t local = e - edge_offset_[a];
  const std::array<std::size_t, 3> ijk{local % d[0], (local / d[0]) % d[1], local / (d[0] * d[1])};
  const std::size_t tail = node(ijk[0], ijk[1], ijk[2]);
  const std::size_t head = node(ijk[0] + (a == 0), ijk[1] + (a == 1), ijk[2] + (a == 2));
  return {static_cast<Axis>(a), ijk, tail, head};
}

StaggeredGrid::FaceInfo StaggeredGrid::face_info(std::size_t f) const noexcept {
  int a = 0;
  while (f >= face_offset_[a + 1]) ++a;
  const auto d = face_dims(static_cast<Axis>(a));
  const std::size_t local = f - face_offset_[a];
  return {static_cast<Axis>(a), {local % d[0], (local / d[0]) % d[1], local / (d[0] * d[1])}};
}

double StaggeredGrid::dual_area(Axis a) const noexcept {
  switch (a) {
    case Axis::x: return spacing_[1] * spacing_[2];
    case Axis::y: return spacing_[0] * spacing_[2];
    default: return spacing_[0] * spacing_[1];
  }
}

Vec3 StaggeredGrid::node_position(std::size_t n) const noexcept {
  const auto ijk = node_ijk(n);
  return {origin_[0] + static_cast<double>(ijk[0]) * spacing_[0],
          origin_[1] + static_cast<double>(ijk[1]) * spacing_[1],
          origin_[2] + static_cast<double>(ijk[2]) * spacing_[2]};
}

Vec3 StaggeredGrid::face_center(std::size_t f) const noexcept {
  const auto info = face_info(f);
  Vec3 p{};
  for (int d = 0; d < 3; ++d) {
    const double offset = d == static_cast<int>(info.normal) ? 0.0 : 0.5;
    p[d] = origin_[d] + (static_cast<double>(info.ijk[d]) + offset) * spacing_[d];
  }
  return p;
}

}  // namespace spfd
