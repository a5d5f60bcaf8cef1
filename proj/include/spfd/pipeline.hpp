#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "spfd/dosimetry.hpp"
#include "spfd/field_source.hpp"
#include "spfd/gauging.hpp"
#include "spfd/linsolve.hpp"
#include "spfd/voxel_model.hpp"

namespace spfd {

enum class TreeKind { comb, bfs };

/// Field input: a sample file, in-memory samples, or an analytic source that
/// is first sampled on a lattice covering the grid.
using FieldInput = std::variant<std::filesystem::path, FieldSampleSet, FieldSource>;

struct PipelineConfig {
  std::variant<std::filesystem::path, VoxelModel> phantom = std::filesystem::path{};
  FieldInput field = UniformField{};
  /// Operating frequency; <= 0 takes the frequency of the sample file.
  double frequency_hz = 0.0;
  SolveConfig solver;
  bool clean_divergence = true;
  double divergence_tol = 1e-10;
  double gauge_tol = 1e-10;
  TreeKind tree = TreeKind::comb;
  /// Lattice spacing used to sample analytic sources (m).
  double source_lattice_spacing = 0.01;
  bool rms = false;
  std::optional<std::filesystem::path> out_report;
  std::optional<std::filesystem::path> out_field;
  double latency_budget_s = 5.0;

  void validate() const;
};

inline constexpr std::array<std::string_view, 6> kPipelineSteps = {"interpolate", "gauge", "assemble",
                                                                   "solve",       "efield", "report"};

/// Wall-clock seconds per step. AMG setup is part of "assemble"; "solve"
/// times the Krylov iteration only.
struct PipelineTiming {
  std::array<double, 6> steps{};
  double total = 0.0;
  double budget_s = 5.0;
  bool budget_met = true;

  double step(std::string_view name) const;
};

struct PipelineResult {
  ExposureReport report;
  PipelineTiming timing;
};

/// Runs interpolation, divergence cleaning, gauging, assembly, solve,
/// field reconstruction and reporting. Step failures are rethrown as
/// PipelineError naming the step; exceeding the latency budget only clears
/// `budget_met`.
PipelineResult run_pipeline(const PipelineConfig& cfg);

struct TimingStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n - 1)
  double min = 0.0;
  double max = 0.0;
};

/// Statistics of >= 2 timing samples.
TimingStats summarize(std::span<const double> samples);

struct BenchmarkResult {
  std::array<TimingStats, 6> steps{};
  TimingStats total;
  TimingStats amg_setup;
  std::vector<std::size_t> iterations;  // per run
  std::size_t runs = 0;
};

/// Repeats the pipeline `runs` (>= 2) times on identical inputs.
BenchmarkResult run_benchmark(const PipelineConfig& cfg, std::size_t runs = 5);

/// Benchmark driver over an arbitrary run function; used by tests to inject
/// synthetic timings.
BenchmarkResult run_benchmark(std::size_t runs, const std::function<PipelineResult()>& run_once);

/// CSV `step,mean_s,stddev_s,min_s,max_s` with the six steps and `total`.
std::string benchmark_csv(const BenchmarkResult& result);

}  // namespace spfd
