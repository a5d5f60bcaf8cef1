#pragma once

#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "spfd/linsolve.hpp"
#include "spfd/staggered_grid.hpp"
#include "spfd/voxel_model.hpp"

namespace spfd {

inline constexpr double kMu0 = 1.25663706212e-6;  // vacuum permeability, H/m

/// Circular current loop approximated by a regular polygon.
struct CoilSpec {
  Vec3 center{0.0, 0.0, 0.0};
  Vec3 axis{0.0, 0.0, 1.0};
  double radius = 0.1;   // m
  double current = 1.0;  // A, amplitude
  int segments = 256;

  void validate() const;
};

/// Spatially uniform flux density.
struct UniformField {
  Vec3 b{0.0, 0.0, 0.0};  // T
};

using FieldSource = std::variant<CoilSpec, UniformField>;

/// Regular Cartesian sampling lattice (x-fastest).
struct Lattice {
  Vec3 origin{0.0, 0.0, 0.0};
  Vec3 spacing{1.0, 1.0, 1.0};
  Dims3 dims{1, 1, 1};

  std::size_t size() const noexcept { return dims[0] * dims[1] * dims[2]; }
  Vec3 point(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return {origin[0] + static_cast<double>(i) * spacing[0], origin[1] + static_cast<double>(j) * spacing[1],
            origin[2] + static_cast<double>(k) * spacing[2]};
  }
};

struct FieldSample {
  Vec3 position;
  Vec3 b;  // single-phase amplitude, T
};

/// Flux density sampled on a coarse lattice at one frequency.
struct FieldSampleSet {
  double frequency_hz = 0.0;
  Lattice lattice;
  std::vector<FieldSample> samples;

  /// Checks the record count and that positions match the lattice to 1e-9 m.
  void validate() const;
};

/// Biot-Savart field of the polygonized loop. Throws SingularPointError
/// within 1e-12 m of the wire.
Vec3 coil_field(const CoilSpec& coil, const Vec3& p);

Vec3 evaluate(const FieldSource& source, const Vec3& p);

FieldSampleSet sample_on_lattice(const FieldSource& source, const Lattice& lattice, double frequency_hz);

/// Lattice that covers the grid's bounding box with the given spacing
/// (at least two points per axis).
Lattice covering_lattice(const StaggeredGrid& grid, double spacing);

FieldSampleSet load_field_samples(const std::filesystem::path& path);
FieldSampleSet parse_field_samples(const std::string& text);
void save_field_samples(const FieldSampleSet& set, const std::filesystem::path& path);
std::string serialize_field_samples(const FieldSampleSet& set);

/// Trilinear interpolation (linear extrapolation outside the lattice) of
/// the sampled flux density at `p`.
Vec3 interpolate_b(const FieldSampleSet& samples, const Vec3& p);

/// Face fluxes B_n(face center) * face area for every grid face (Wb).
std::vector<double> interpolate_to_faces(const FieldSampleSet& samples, const StaggeredGrid& grid);

/// Face fluxes from exact point evaluation of a source at the face centers.
std::vector<double> evaluate_on_faces(const FieldSource& source, const StaggeredGrid& grid);

struct CleanReport {
  bool projected = false;
  double divergence_before = 0.0;  // ||S b|| / ||b||
  double divergence_after = 0.0;
  std::size_t iterations = 0;
};

/// Removes the discrete divergence of face fluxes by projecting onto the
/// kernel of S: solves S S^T phi = S b and returns b - S^T phi. Input with
/// relative divergence already <= tol is returned unchanged; a projected
/// result is driven three orders of magnitude below tol.
std::vector<double> divergence_clean(std::span<const double> flux, const StaggeredGrid& grid, double tol = 1e-10,
                                     const SolveConfig& solver = {}, CleanReport* report = nullptr);

/// ||S b||_2 / ||b||_2 (0 for b = 0).
double relative_divergence(std::span<const double> flux, const StaggeredGrid& grid);

}  // namespace spfd
