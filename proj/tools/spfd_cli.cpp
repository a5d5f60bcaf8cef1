// spfd: voxel phantom generation, induced-field runs, benchmarks and
// plot-data extraction.

#include <CLI11.hpp>

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "spfd/dosimetry.hpp"
#include "spfd/error.hpp"
#include "spfd/field_source.hpp"
#include "spfd/fit_operators.hpp"
#include "spfd/gauging.hpp"
#include "spfd/parallel.hpp"
#include "spfd/pipeline.hpp"
#include "spfd/sparse_matrix.hpp"
#include "spfd/voxel_model.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr double kMm = 1e-3;

spfd::Vec3 mm_to_m(const std::vector<double>& v) {
  if (v.size() == 1) return {v[0] * kMm, v[0] * kMm, v[0] * kMm};
  return {v[0] * kMm, v[1] * kMm, v[2] * kMm};
}

// Field-source flags shared by run, bench, field and mm-export.
struct SourceFlags {
  std::string field_file;
  std::optional<double> coil_radius_mm;
  std::vector<double> coil_center_mm;
  std::vector<double> coil_axis{0.0, 0.0, 1.0};
  double coil_current = 1.0;
  int coil_segments = 256;
  std::optional<double> uniform_bz;
  double lattice_mm = 10.0;

  void add(CLI::App& app, bool allow_file) {
    std::vector<CLI::Option*> group;
    if (allow_file)
      group.push_back(app.add_option("--field", field_file, "Field sample file")->check(CLI::ExistingFile));
    auto* coil = app.add_option("--coil", coil_radius_mm, "Circular coil of the given radius (mm)")
                     ->check(CLI::PositiveNumber);
    group.push_back(coil);
    group.push_back(app.add_option("--uniform", uniform_bz, "Uniform B_z amplitude (T)"));
    for (auto* a : group)
      for (auto* b : group)
        if (a != b) a->excludes(b);
    app.add_option("--coil-center-mm", coil_center_mm, "Coil center (mm); default grid center")
        ->expected(3)
        ->needs(coil);
    app.add_option("--coil-axis", coil_axis, "Coil axis direction")->expected(3)->needs(coil);
    app.add_option("--coil-current", coil_current, "Coil current amplitude (A)")->needs(coil);
    app.add_option("--coil-segments", coil_segments, "Polygon segments of the coil")
        ->check(CLI::Range(8, 1 << 20))
        ->needs(coil);
    app.add_option("--lattice-mm", lattice_mm, "Sampling lattice spacing for analytic sources (mm)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  }

  bool given() const { return !field_file.empty() || coil_radius_mm || uniform_bz; }

  spfd::FieldSource source(const spfd::StaggeredGrid& grid) const {
    if (uniform_bz) return spfd::UniformField{{0.0, 0.0, *uniform_bz}};
    spfd::CoilSpec coil;
    coil.radius = *coil_radius_mm * kMm;
    coil.current = coil_current;
    coil.segments = coil_segments;
    coil.axis = {coil_axis[0], coil_axis[1], coil_axis[2]};
    if (coil_center_mm.empty()) {
      for (int a = 0; a < 3; ++a)
        coil.center[a] = grid.origin()[a] + 0.5 * static_cast<double>(grid.cell_dims()[a]) * grid.spacing()[a];
    } else {
      coil.center = mm_to_m(coil_center_mm);
    }
    coil.validate();
    return coil;
  }

  spfd::FieldInput input(const spfd::StaggeredGrid& grid) const {
    if (!field_file.empty()) return std::filesystem::path(field_file);
    return source(grid);
  }
};

struct RunFlags {
  std::string phantom;
  SourceFlags source;
  double freq_hz = 0.0;
  double rel_tol = 1e-12;
  int max_iters = 1000;
  int threads = 0;
  bool no_clean = false;
  bool rms = false;
  std::string tree = "comb";
  double budget_s = 5.0;

  void add(CLI::App& app) {
    app.add_option("--phantom", phantom, "Phantom file")->required();
    source.add(app, true);
    app.add_option("--freq-hz", freq_hz, "Operating frequency (Hz); default from the field file")
        ->check(CLI::PositiveNumber);
    app.add_option("--rel-tol", rel_tol, "FGMRES relative residual tolerance")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--max-iters", max_iters, "FGMRES iteration cap")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--threads", threads, "Worker threads (overrides SPFD_THREADS)")->check(CLI::PositiveNumber);
    app.add_flag("--no-clean", no_clean, "Skip divergence cleaning of the interpolated flux");
    app.add_flag("--rms", rms, "Report RMS instead of peak amplitude");
    app.add_option("--tree", tree, "Gauging tree")->check(CLI::IsMember({"comb", "bfs"}))->capture_default_str();
    app.add_option("--budget-s", budget_s, "Latency budget (s)")->check(CLI::PositiveNumber)->capture_default_str();
  }

  // Validation that CLI11 cannot express; failures here are usage errors.
  void check() const {
    if (!source.given()) throw UsageError("one of --field, --coil, --uniform is required");
    if (source.field_file.empty() && !(freq_hz > 0.0)) throw UsageError("--freq-hz is required with --coil/--uniform");
  }

  spfd::PipelineConfig config() const {
    if (threads > 0) spfd::set_thread_count(threads);
    spfd::PipelineConfig cfg;
    cfg.phantom = spfd::load_model(phantom);
    const spfd::StaggeredGrid grid(std::get<spfd::VoxelModel>(cfg.phantom));
    cfg.field = source.input(grid);
    cfg.frequency_hz = freq_hz;
    cfg.solver.rel_tol = rel_tol;
    cfg.solver.max_iters = static_cast<std::size_t>(max_iters);
    cfg.solver.threads = threads;
    cfg.clean_divergence = !no_clean;
    cfg.rms = rms;
    cfg.tree = tree == "bfs" ? spfd::TreeKind::bfs : spfd::TreeKind::comb;
    cfg.source_lattice_spacing = source.lattice_mm * kMm;
    cfg.latency_budget_s = budget_s;
    return cfg;
  }
};

void print_timing(const spfd::PipelineTiming& t) {
  std::printf("%-12s %10s\n", "step", "seconds");
  for (std::size_t s = 0; s < spfd::kPipelineSteps.size(); ++s)
    std::printf("%-12s %10.4f\n", std::string(spfd::kPipelineSteps[s]).c_str(), t.steps[s]);
  std::printf("%-12s %10.4f  (budget %.2f s: %s)\n", "total", t.total, t.budget_s, t.budget_met ? "met" : "exceeded");
}

int cmd_phantom(const std::string& kind, const std::vector<std::size_t>& dims, const std::vector<double>& spacing_mm,
                double radius_mm, double height_mm, const std::vector<double>& half_extent_mm,
                const std::vector<double>& center_mm, double kappa, const std::vector<std::string>& layers,
                const std::string& out) {
  spfd::PhantomParams p;
  p.radius = radius_mm * kMm;
  p.height = height_mm * kMm;
  p.kappa = kappa;
  if (!half_extent_mm.empty()) {
    p.half_extent = mm_to_m(half_extent_mm);
  } else {
    const auto h = mm_to_m(spacing_mm);
    for (int a = 0; a < 3; ++a) p.half_extent[a] = 0.5 * static_cast<double>(dims[a]) * h[a];
  }
  if (!center_mm.empty()) p.center = mm_to_m(center_mm);
  for (const auto& l : layers) {
    const auto colon = l.find(':');
    if (colon == std::string::npos) throw UsageError("--layer expects THICKNESS_MM:KAPPA, got '" + l + "'");
    p.layers.push_back({std::stod(l.substr(0, colon)) * kMm, std::stod(l.substr(colon + 1))});
  }
  const auto model = spfd::make_phantom(spfd::parse_phantom_kind(kind), {dims[0], dims[1], dims[2]},
                                        mm_to_m(spacing_mm), p);
  spfd::save_model(model, out);
  std::printf("wrote %s: %zu x %zu x %zu voxels, %zu conductive\n", out.c_str(), dims[0], dims[1], dims[2],
              model.conductive_voxel_count(1.0));
  return 0;
}

int cmd_field(const std::string& phantom, const SourceFlags& src, double freq_hz, const std::string& out) {
  const auto model = spfd::load_model(phantom);
  const spfd::StaggeredGrid grid(model);
  if (!src.uniform_bz && !src.coil_radius_mm) throw UsageError("one of --coil, --uniform is required");
  const auto source = src.source(grid);
  const double spacing = std::holds_alternative<spfd::UniformField>(source) ? std::numeric_limits<double>::infinity()
                                                                            : src.lattice_mm * kMm;
  const auto set = spfd::sample_on_lattice(source, spfd::covering_lattice(grid, spacing), freq_hz);
  spfd::save_field_samples(set, out);
  std::printf("wrote %s: %zu samples\n", out.c_str(), set.samples.size());
  return 0;
}

int cmd_run(const RunFlags& flags, const std::string& out_report, const std::string& out_field) {
  flags.check();
  auto cfg = flags.config();
  if (!out_report.empty()) cfg.out_report = out_report;
  if (!out_field.empty()) cfg.out_field = out_field;
  const auto result = spfd::run_pipeline(cfg);
  const auto& r = result.report;
  std::printf("p99 |E| = %.6g V/m, max = %.6g V/m over %zu voxels (%s)\n", r.percentile99, r.max,
              r.voxel_field.size(), r.rms ? "rms" : "peak");
  std::printf("dofs %zu, %zu iterations, residual %.3g, AMG setup %.4f s\n", r.dofs, r.solver.iterations,
              r.solver.relative_residual, r.solver.setup_seconds);
  print_timing(result.timing);
  return 0;
}

int cmd_bench(const RunFlags& flags, std::size_t runs, const std::string& out_csv) {
  flags.check();
  const auto cfg = flags.config();
  const auto b = spfd::run_benchmark(cfg, runs);
  std::printf("%zu runs\n%-12s %10s %10s %10s %10s\n", b.runs, "step", "mean_s", "stddev_s", "min_s", "max_s");
  auto line = [](std::string_view name, const spfd::TimingStats& s) {
    std::printf("%-12s %10.4f %10.4f %10.4f %10.4f\n", std::string(name).c_str(), s.mean, s.stddev, s.min, s.max);
  };
  for (std::size_t s = 0; s < spfd::kPipelineSteps.size(); ++s) line(spfd::kPipelineSteps[s], b.steps[s]);
  line("total", b.total);
  line("amg_setup", b.amg_setup);
  std::printf("iterations:");
  for (auto it : b.iterations) std::printf(" %zu", it);
  std::printf("\n");
  const auto csv = spfd::benchmark_csv(b);
  if (out_csv.empty()) {
    std::printf("\n%s", csv.c_str());
  } else {
    std::ofstream out(out_csv);
    if (!out) throw spfd::Error("cannot write '" + out_csv + "'");
    out << csv;
  }
  return 0;
}

int cmd_report_slice(const std::string& dump_path, const std::string& plane, std::size_t index) {
  const auto dump = spfd::read_field_dump(dump_path);
  const auto axis = plane == "x" ? spfd::Axis::x : plane == "y" ? spfd::Axis::y : spfd::Axis::z;
  const auto extent = dump.model.dims()[static_cast<int>(axis)];
  if (index >= extent)
    throw UsageError("--index " + std::to_string(index) + " out of range for plane " + plane + " (size " +
                     std::to_string(extent) + ")");
  for (const auto& row : spfd::field_slice(dump, axis, index)) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) std::fputc(' ', stdout);
      if (std::isnan(row[c]))
        std::fputs("nan", stdout);
      else
        std::printf("%.17g", row[c]);
    }
    std::fputc('\n', stdout);
  }
  return 0;
}

int cmd_mm_export(const RunFlags& flags, const std::string& out, const std::string& out_rhs) {
  flags.check();
  const auto cfg = flags.config();
  const auto& model = std::get<spfd::VoxelModel>(cfg.phantom);
  const spfd::StaggeredGrid grid(model);
  spfd::FieldSampleSet samples;
  if (const auto* p = std::get_if<std::filesystem::path>(&cfg.field)) {
    samples = spfd::load_field_samples(*p);
  } else {
    const auto& source = std::get<spfd::FieldSource>(cfg.field);
    const double spacing = std::holds_alternative<spfd::UniformField>(source)
                               ? std::numeric_limits<double>::infinity()
                               : cfg.source_lattice_spacing;
    samples = spfd::sample_on_lattice(source, spfd::covering_lattice(grid, spacing), cfg.frequency_hz);
  }
  const double f = cfg.frequency_hz > 0.0 ? cfg.frequency_hz : samples.frequency_hz;
  auto flux = spfd::interpolate_to_faces(samples, grid);
  if (cfg.clean_divergence) flux = spfd::divergence_clean(flux, grid, cfg.divergence_tol, cfg.solver);
  const auto tree = cfg.tree == spfd::TreeKind::comb ? spfd::build_comb_tree(grid) : spfd::build_bfs_tree(grid);
  const auto a = spfd::gauge_vector_potential(flux, grid, tree, {cfg.gauge_tol});
  const auto system = spfd::assemble_poisson(model, grid, a, f);
  spfd::write_matrix_market(system.matrix, out);
  if (!out_rhs.empty()) spfd::write_matrix_market_vector(system.rhs, out_rhs);
  std::printf("wrote %s: %zu x %zu, %zu nonzeros\n", out.c_str(), system.matrix.rows(), system.matrix.cols(),
              system.matrix.nnz());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Induced electric fields in voxel phantoms exposed to low-frequency magnetic fields"};
  app.require_subcommand(1, 1);

  // phantom
  auto* phantom = app.add_subcommand("phantom", "Generate a synthetic voxel phantom");
  std::string kind = "sphere", phantom_out;
  std::vector<std::size_t> dims;
  std::vector<double> spacing_mm{2.0}, half_extent_mm, center_mm;
  double radius_mm = 0.0, height_mm = 0.0, kappa = 0.2;
  std::vector<std::string> layers;
  phantom->add_option("--kind", kind, "sphere | cylinder | block | layered-block")->capture_default_str();
  phantom->add_option("--dims", dims, "Voxel counts nx ny nz")->expected(3)->required();
  phantom->add_option("--spacing-mm", spacing_mm, "Voxel spacing (one value or three)")
      ->expected(1, 3)
      ->check(CLI::PositiveNumber);
  phantom->add_option("--radius-mm", radius_mm, "Sphere/cylinder radius")->check(CLI::NonNegativeNumber);
  phantom->add_option("--height-mm", height_mm, "Cylinder height; 0 spans the grid")->check(CLI::NonNegativeNumber);
  phantom->add_option("--half-extent-mm", half_extent_mm, "Block half extents (one value or three); default fills the grid")->expected(1, 3);
  phantom->add_option("--center-mm", center_mm, "Shape center; default grid center")->expected(3);
  phantom->add_option("--kappa", kappa, "Conductivity (S/m)")->check(CLI::NonNegativeNumber)->capture_default_str();
  phantom->add_option("--layer", layers, "Layer THICKNESS_MM:KAPPA, bottom to top (repeatable)");
  phantom->add_option("--out", phantom_out, "Output phantom file")->required();

  // field
  auto* field = app.add_subcommand("field", "Sample a coil or uniform field on a lattice covering a phantom");
  std::string field_phantom, field_out;
  SourceFlags field_src;
  double field_freq = 0.0;
  field->add_option("--phantom", field_phantom, "Phantom whose bounding box is covered")->required();
  field_src.add(*field, false);
  field->add_option("--freq-hz", field_freq, "Frequency recorded in the file")->required()->check(CLI::PositiveNumber);
  field->add_option("--out", field_out, "Output field sample file")->required();

  // run
  auto* run = app.add_subcommand("run", "Compute the induced field and exposure report");
  RunFlags run_flags;
  std::string out_report, out_field;
  run_flags.add(*run);
  run->add_option("--out-report", out_report, "Report file");
  run->add_option("--out-field", out_field, "Voxel |E| dump file");

  // bench
  auto* bench = app.add_subcommand("bench", "Repeat the pipeline and summarize step timings");
  RunFlags bench_flags;
  std::size_t runs = 5;
  std::string out_csv;
  bench_flags.add(*bench);
  bench->add_option("--runs", runs, "Number of runs (>= 2)")->check(CLI::Range(2, 1000000))->capture_default_str();
  bench->add_option("--out-csv", out_csv, "CSV output; default prints it after the table");

  // report-slice
  auto* slice = app.add_subcommand("report-slice", "Print one plane of a field dump as a text matrix");
  std::string dump_path, plane;
  std::size_t index = 0;
  slice->add_option("--field-dump", dump_path, "Field dump written by run --out-field")->required();
  slice->add_option("--plane", plane, "Slice normal")->required()->check(CLI::IsMember({"x", "y", "z"}));
  slice->add_option("--index", index, "Voxel index along the normal")->required();

  // mm-export
  auto* mm = app.add_subcommand("mm-export", "Write the assembled Poisson matrix in Matrix Market format");
  RunFlags mm_flags;
  std::string mm_out, mm_rhs;
  mm_flags.add(*mm);
  mm->add_option("--out", mm_out, "Matrix output file")->required();
  mm->add_option("--out-rhs", mm_rhs, "Right-hand side output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*phantom)
      return cmd_phantom(kind, dims, spacing_mm, radius_mm, height_mm, half_extent_mm, center_mm, kappa, layers,
                         phantom_out);
    if (*field) return cmd_field(field_phantom, field_src, field_freq, field_out);
    if (*run) return cmd_run(run_flags, out_report, out_field);
    if (*bench) return cmd_bench(bench_flags, runs, out_csv);
    if (*slice) return cmd_report_slice(dump_path, plane, index);
    if (*mm) return cmd_mm_export(mm_flags, mm_out, mm_rhs);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\nRun with --help for more information.\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
