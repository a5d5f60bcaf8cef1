#pragma once

#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "spfd/fit_operators.hpp"
#include "spfd/linsolve.hpp"
#include "spfd/staggered_grid.hpp"
#include "spfd/voxel_model.hpp"

namespace spfd {

struct TissueStats {
  TissueId id = 0;
  std::string name;
  std::size_t count = 0;
  double mean = 0.0;
  double max = 0.0;
  double p99 = 0.0;
};

/// Voxel-averaged |E| (amplitude, V/m) over the conductive voxels.
struct ExposureReport {
  double frequency_hz = 0.0;
  std::vector<double> voxel_field;         // one value per conductive voxel
  std::vector<std::size_t> voxel_indices;  // linear voxel index of each value
  double percentile99 = 0.0;
  double max = 0.0;
  std::vector<TissueStats> tissues;
  std::size_t dofs = 0;
  double rel_tol = 0.0;
  bool rms = false;
  SolveReport solver;
};

/// omega (a + G psi) per edge. The -j factor of the phasor is a 90 degree
/// phase and is dropped; values are real amplitudes in volt.
std::vector<double> edge_voltages(std::span<const double> vector_potential, std::span<const double> node_potential,
                                  const StaggeredGrid& grid, double omega);

/// Overload taking the reduced solution of `system`.
std::vector<double> edge_voltages(std::span<const double> vector_potential, std::span<const double> reduced_potential,
                                  const PoissonSystem& system, const StaggeredGrid& grid, double omega);

/// |E| per node: per axis, the mean of voltage/length over the node's
/// incident edges with positive conductance (0 if there is none).
std::vector<double> node_field_strength(std::span<const double> edge_voltage, const StaggeredGrid& grid,
                                        std::span<const double> edge_conductance);

std::vector<double> node_field_strength(std::span<const double> edge_voltage, const StaggeredGrid& grid,
                                        const VoxelModel& model, double frequency_hz);

struct VoxelField {
  std::vector<double> values;
  std::vector<std::size_t> indices;
};

/// Mean of the eight corner-node values of every conductive voxel, in
/// increasing voxel index.
VoxelField voxel_average(std::span<const double> node_field, const StaggeredGrid& grid, const VoxelModel& model,
                         double frequency_hz);

/// Nearest-rank 99th percentile: sorted element at zero-based index
/// ceil(0.99 n) - 1. Throws InvalidArgument on empty input.
double percentile99(std::span<const double> values);

/// E * (f / f') * (kappa(f') / kappa(f)).
double scale_reference_field(double e, double f, double f_prime, double kappa_f, double kappa_f_prime);
std::vector<double> scale_reference_field(std::span<const double> e, double f, double f_prime, double kappa_f,
                                          double kappa_f_prime);

struct LimitCheck {
  bool pass = true;
  double margin = std::numeric_limits<double>::infinity();  // limit / p99
};

LimitCheck check_limits(const ExposureReport& report, double limit);

/// Statistics (p99, max, per tissue) over `field`.
ExposureReport make_report(const VoxelField& field, const VoxelModel& model, double frequency_hz, bool rms = false);

// Report and field-dump files.
std::string serialize_report(const ExposureReport& report);
void write_report(const ExposureReport& report, const std::filesystem::path& path);

/// Dense voxel |E| grid with NaN for free space.
struct FieldDump {
  VoxelModel model;
  std::vector<double> values;
};

void write_field_dump(const ExposureReport& report, const VoxelModel& model, const std::filesystem::path& path);
FieldDump read_field_dump(const std::filesystem::path& path);

/// Rows of one plane of a field dump; x-plane rows run over k, columns over
/// j; y-plane rows over k, columns over i; z-plane rows over j, columns over i.
std::vector<std::vector<double>> field_slice(const FieldDump& dump, Axis plane, std::size_t index);

}  // namespace spfd
