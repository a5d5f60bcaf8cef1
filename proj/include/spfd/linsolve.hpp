#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "spfd/sparse_matrix.hpp"

namespace spfd {

struct SolveConfig {
  double rel_tol = 1e-12;
  std::size_t max_iters = 1000;
  std::size_t restart = 30;
  int pre_sweeps = 1;
  int post_sweeps = 1;
  double jacobi_damping = 2.0 / 3.0;
  double strength_threshold = 0.08;  // halved on every coarser level
  std::size_t coarse_cap = 500;
  std::size_t max_levels = 20;
  int threads = 0;  // 0 = runtime default
  /// Receives `iter k rel_resid r` lines when set.
  std::ostream* trace = nullptr;

  void validate() const;
};

struct AmgLevel {
  SparseMatrix a;
  SparseMatrix p;  // prolongation to this level from the next coarser one
  SparseMatrix r;  // restriction, P^T
  std::vector<double> inv_diag;
};

/// Smoothed-aggregation multigrid hierarchy. The coarsest level is solved
/// with a dense LU factorization.
struct AmgHierarchy {
  std::vector<AmgLevel> levels;  // last entry is the coarsest (no p/r)
  std::vector<double> coarse_lu;  // row-major n x n
  std::vector<std::size_t> coarse_pivots;
  int pre_sweeps = 1;
  int post_sweeps = 1;
  double damping = 2.0 / 3.0;
  double setup_seconds = 0.0;

  std::size_t level_count() const noexcept { return levels.size(); }
  std::vector<std::size_t> level_sizes() const;
  /// sum of nnz over levels / nnz of the finest level
  double operator_complexity() const;
  /// Bytes held by all level matrices, smoother data and the dense factor.
  std::size_t memory_bytes() const;
};

struct SolveReport {
  bool converged = false;
  std::size_t iterations = 0;
  double relative_residual = 0.0;
  double setup_seconds = 0.0;
  double solve_seconds = 0.0;
  std::vector<std::size_t> level_sizes;
  std::size_t memory_bytes = 0;
};

/// Plain aggregation on the strength graph |a_ij| >= theta sqrt(|a_ii a_jj|),
/// greedy root-node aggregates in index order. Exposed for tests.
/// Returns the aggregate of every row, -1 for rows left unaggregated.
std::vector<std::int64_t> aggregate(const SparseMatrix& a, double theta, std::size_t* aggregate_count);

AmgHierarchy amg_setup(const SparseMatrix& a, const SolveConfig& cfg = {});

/// One V(pre, post) cycle with zero initial guess; linear in `r`.
std::vector<double> v_cycle(const AmgHierarchy& hierarchy, std::span<const double> r);

/// Right-preconditioned restarted flexible GMRES with one V-cycle per
/// iteration. Throws SolverError on NaN/Inf breakdown; running out of
/// iterations returns the best iterate with `converged = false`.
std::vector<double> fgmres_solve(const SparseMatrix& a, std::span<const double> rhs, const AmgHierarchy& hierarchy,
                                 const SolveConfig& cfg, SolveReport& report);

/// Setup and solve in one call.
std::vector<double> solve(const SparseMatrix& a, std::span<const double> rhs, const SolveConfig& cfg,
                          SolveReport& report);

/// ||rhs - A x||_2 / ||rhs||_2, evaluated independently of the solver.
double relative_residual(const SparseMatrix& a, std::span<const double> x, std::span<const double> rhs);

}  // namespace spfd
