#include "spfd/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <type_traits>

#include "spfd/error.hpp"
#include "spfd/fit_operators.hpp"
#include "text_util.hpp"

namespace spfd {

namespace {

using Clock = std::chrono::steady_clock;

template <class Fn>
auto timed_step(std::string_view name, double& seconds, Fn&& fn) {
  const auto t0 = Clock::now();
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    } else {
      auto result = fn();
      seconds = std::chrono::duration<double>(Clock::now() - t0).count();
      return result;
    }
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(std::string(name), e.what());
  }
}

std::size_t step_index(std::string_view name) {
  for (std::size_t i = 0; i < kPipelineSteps.size(); ++i)
    if (kPipelineSteps[i] == name) return i;
  throw InvalidArgument("unknown pipeline step '" + std::string(name) + "'");
}

}  // namespace

void PipelineConfig::validate() const {
  if (!(latency_budget_s > 0.0)) throw InvalidArgument("latency budget must be positive");
  if (!(divergence_tol > 0.0) || !(gauge_tol > 0.0)) throw InvalidArgument("tolerances must be positive");
  if (std::holds_alternative<FieldSource>(field) && !(frequency_hz > 0.0))
    throw InvalidArgument("an analytic field source needs a positive frequency");
  solver.validate();
}

double PipelineTiming::step(std::string_view name) const { return steps[step_index(name)]; }

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();

  // Inputs are loaded outside the timed steps.
  const VoxelModel model = [&] {
    try {
      if (const auto* p = std::get_if<std::filesystem::path>(&cfg.phantom)) return load_model(*p);
      return std::get<VoxelModel>(cfg.phantom);
    } catch (const std::exception& e) {
      throw PipelineError("load", e.what());
    }
  }();
  const StaggeredGrid grid(model);

  FieldSampleSet samples;
  try {
    if (const auto* p = std::get_if<std::filesystem::path>(&cfg.field)) {
      samples = load_field_samples(*p);
    } else if (const auto* s = std::get_if<FieldSampleSet>(&cfg.field)) {
      samples = *s;
    } else {
      const auto& source = std::get<FieldSource>(cfg.field);
      const double spacing = std::holds_alternative<UniformField>(source)
                                 ? std::numeric_limits<double>::infinity()
                                 : cfg.source_lattice_spacing;
      samples = sample_on_lattice(source, covering_lattice(grid, spacing), cfg.frequency_hz);
    }
  } catch (const std::exception& e) {
    throw PipelineError("load", e.what());
  }
  const double f = cfg.frequency_hz > 0.0 ? cfg.frequency_hz : samples.frequency_hz;
  if (!(f > 0.0)) throw PipelineError("load", "no operating frequency given");

  PipelineResult result;
  auto& t = result.timing;
  const auto t_start = Clock::now();

  const auto flux = timed_step("interpolate", t.steps[0], [&] {
    auto b = interpolate_to_faces(samples, grid);
    if (cfg.clean_divergence) b = divergence_clean(b, grid, cfg.divergence_tol, cfg.solver);
    return b;
  });

  const auto potential = timed_step("gauge", t.steps[1], [&] {
    const auto tree = cfg.tree == TreeKind::comb ? build_comb_tree(grid) : build_bfs_tree(grid);
    return gauge_vector_potential(flux, grid, tree, {cfg.gauge_tol});
  });

  PoissonSystem system;
  AmgHierarchy hierarchy;
  timed_step("assemble", t.steps[2], [&] {
    system = assemble_poisson(model, grid, potential, f);
    hierarchy = amg_setup(system.matrix, cfg.solver);
  });

  SolveReport solve_report;
  const auto psi = timed_step("solve", t.steps[3], [&] {
    auto x = fgmres_solve(system.matrix, system.rhs, hierarchy, cfg.solver, solve_report);
    if (!solve_report.converged)
      throw SolverError("FGMRES did not reach rel_tol " + detail::format_double(cfg.solver.rel_tol) + " within " +
                        std::to_string(cfg.solver.max_iters) + " iterations (residual " +
                        detail::format_double(solve_report.relative_residual) + ")");
    return x;
  });

  const auto field = timed_step("efield", t.steps[4], [&] {
    const double omega = 2.0 * std::numbers::pi * f;
    const auto ev = edge_voltages(potential, psi, system, grid, omega);
    const auto nodal = node_field_strength(ev, grid, system.edge_conductance);
    return voxel_average(nodal, grid, model, f);
  });

  timed_step("report", t.steps[5], [&] {
    result.report = make_report(field, model, f, cfg.rms);
    result.report.dofs = system.dofs();
    result.report.rel_tol = cfg.solver.rel_tol;
    result.report.solver = solve_report;
    if (cfg.out_report) write_report(result.report, *cfg.out_report);
    if (cfg.out_field) write_field_dump(result.report, model, *cfg.out_field);
  });

  t.total = std::chrono::duration<double>(Clock::now() - t_start).count();
  t.budget_s = cfg.latency_budget_s;
  t.budget_met = t.total <= cfg.latency_budget_s;
  return result;
}

TimingStats summarize(std::span<const double> samples) {
  if (samples.size() < 2) throw InvalidArgument("timing statistics need at least two runs");
  TimingStats s;
  s.min = samples[0];
  s.max = samples[0];
  double sum = 0.0;
  for (double v : samples) {
    sum += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  const double n = static_cast<double>(samples.size());
  s.mean = sum / n;
  double sq = 0.0;
  for (double v : samples) sq += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(sq / (n - 1.0));
  return s;
}

BenchmarkResult run_benchmark(std::size_t runs, const std::function<PipelineResult()>& run_once) {
  if (runs < 2) throw InvalidArgument("benchmark needs at least two runs");
  std::array<std::vector<double>, 6> per_step;
  std::vector<double> totals, setups;
  BenchmarkResult out;
  out.runs = runs;
  for (std::size_t r = 0; r < runs; ++r) {
    const auto res = run_once();
    for (std::size_t s = 0; s < 6; ++s) per_step[s].push_back(res.timing.steps[s]);
    totals.push_back(res.timing.total);
    setups.push_back(res.report.solver.setup_seconds);
    out.iterations.push_back(res.report.solver.iterations);
  }
  for (std::size_t s = 0; s < 6; ++s) out.steps[s] = summarize(per_step[s]);
  out.total = summarize(totals);
  out.amg_setup = summarize(setups);
  return out;
}

BenchmarkResult run_benchmark(const PipelineConfig& cfg, std::size_t runs) {
  if (runs < 2) throw InvalidArgument("benchmark needs at least two runs");
  // load once so every run sees identical in-memory inputs
  PipelineConfig fixed = cfg;
  if (const auto* p = std::get_if<std::filesystem::path>(&cfg.phantom)) fixed.phantom = load_model(*p);
  if (const auto* p = std::get_if<std::filesystem::path>(&cfg.field)) fixed.field = load_field_samples(*p);
  fixed.out_report.reset();
  fixed.out_field.reset();
  return run_benchmark(runs, [&] { return run_pipeline(fixed); });
}

std::string benchmark_csv(const BenchmarkResult& r) {
  using detail::format_double;
  std::ostringstream os;
  os << "step,mean_s,stddev_s,min_s,max_s\n";
  auto row = [&](std::string_view name, const TimingStats& s) {
    os << name << ',' << format_double(s.mean) << ',' << format_double(s.stddev) << ',' << format_double(s.min) << ','
       << format_double(s.max) << '\n';
  };
  for (std::size_t s = 0; s < 6; ++s) row(kPipelineSteps[s], r.steps[s]);
  row("total", r.total);
  return os.str();
}

}  // namespace spfd
