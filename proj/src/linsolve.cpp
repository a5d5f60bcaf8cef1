#include "spfd/linsolve.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <string>

#include "spfd/error.hpp"
#include "spfd/parallel.hpp"

namespace spfd {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Restores the previous worker count on scope exit.
class ThreadScope {
 public:
  explicit ThreadScope(int threads) : previous_(thread_count()), active_(threads > 0) {
    if (active_) set_thread_count(threads);
  }
  ~ThreadScope() {
    if (active_) set_thread_count(previous_);
  }
  ThreadScope(const ThreadScope&) = delete;
  ThreadScope& operator=(const ThreadScope&) = delete;

 private:
  int previous_;
  bool active_;
};

void lu_factor(std::vector<double>& m, std::vector<std::size_t>& piv, std::size_t n) {
  piv.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::abs(m[k * n + k]);
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(m[i * n + k]) > best) {
        best = std::abs(m[i * n + k]);
        p = i;
      }
    }
    if (best == 0.0) throw SolverError("coarsest-level matrix is singular");
    piv[k] = p;
    if (p != k)
      for (std::size_t j = 0; j < n; ++j) std::swap(m[k * n + j], m[p * n + j]);
    const double inv = 1.0 / m[k * n + k];
    for (std::size_t i = k + 1; i < n; ++i) {
      const double l = m[i * n + k] * inv;
      m[i * n + k] = l;
      if (l == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) m[i * n + j] -= l * m[k * n + j];
    }
  }
}

void lu_solve(const std::vector<double>& m, const std::vector<std::size_t>& piv, std::span<double> x) {
  const std::size_t n = piv.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::swap(x[k], x[piv[k]]);
    for (std::size_t i = k + 1; i < n; ++i) x[i] -= m[i * n + k] * x[k];
  }
  for (std::size_t k = n; k-- > 0;) {
    for (std::size_t j = k + 1; j < n; ++j) x[k] -= m[k * n + j] * x[j];
    x[k] /= m[k * n + k];
  }
}

std::vector<double> dense_copy(const SparseMatrix& a) {
  const std::size_t n = a.rows();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (auto p = a.row_offsets()[r]; p < a.row_offsets()[r + 1]; ++p) d[r * n + a.col_indices()[p]] = a.values()[p];
  return d;
}

// I - omega D^{-1} A, same sparsity as A plus the diagonal.
SparseMatrix jacobi_operator(const SparseMatrix& a, std::span<const double> inv_diag, double omega) {
  std::vector<Triplet> t;
  t.reserve(a.nnz() + a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    t.push_back({static_cast<std::int64_t>(r), static_cast<std::int64_t>(r), 1.0});
    for (auto p = a.row_offsets()[r]; p < a.row_offsets()[r + 1]; ++p)
      t.push_back({static_cast<std::int64_t>(r), a.col_indices()[p], -omega * inv_diag[r] * a.values()[p]});
  }
  return SparseMatrix::from_triplets(a.rows(), a.cols(), std::move(t));
}

// x += omega D^{-1} (b - A x); `tmp` is scratch of the same length.
void jacobi_sweep(const AmgLevel& lvl, double omega, std::span<const double> b, std::span<double> x,
                  std::span<double> tmp) {
  lvl.a.multiply(x, tmp);
  const long n = static_cast<long>(x.size());
#pragma omp parallel for num_threads(thread_count()) schedule(static) if (n > 32768)
  for (long i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    x[u] += omega * lvl.inv_diag[u] * (b[u] - tmp[u]);
  }
}

void cycle(const AmgHierarchy& h, std::size_t level, std::span<const double> b, std::span<double> x) {
  const AmgLevel& lvl = h.levels[level];
  const std::size_t n = b.size();
  if (level + 1 == h.levels.size()) {
    std::copy(b.begin(), b.end(), x.begin());
    lu_solve(h.coarse_lu, h.coarse_pivots, x);
    return;
  }
  std::vector<double> tmp(n);
  std::fill(x.begin(), x.end(), 0.0);
  for (int s = 0; s < h.pre_sweeps; ++s) jacobi_sweep(lvl, h.damping, b, x, tmp);

  lvl.a.multiply(x, tmp);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = b[i] - tmp[i];
  const std::size_t nc = lvl.r.rows();
  std::vector<double> bc(nc), xc(nc);
  lvl.r.multiply(tmp, bc);
  cycle(h, level + 1, bc, xc);
  lvl.p.multiply(xc, tmp);
  for (std::size_t i = 0; i < n; ++i) x[i] += tmp[i];

  for (int s = 0; s < h.post_sweeps; ++s) jacobi_sweep(lvl, h.damping, b, x, tmp);
}

}  // namespace

void SolveConfig::validate() const {
  if (!(rel_tol > 0.0)) throw InvalidArgument("rel_tol must be positive");
  if (restart < 1) throw InvalidArgument("restart must be >= 1");
  if (!(jacobi_damping > 0.0 && jacobi_damping <= 1.0)) throw InvalidArgument("jacobi damping must lie in (0, 1]");
  if (pre_sweeps < 0 || post_sweeps < 0) throw InvalidArgument("sweep counts must be >= 0");
  if (max_levels < 1) throw InvalidArgument("max_levels must be >= 1");
}

std::vector<std::size_t> AmgHierarchy::level_sizes() const {
  std::vector<std::size_t> s;
  for (const auto& l : levels) s.push_back(l.a.rows());
  return s;
}

double AmgHierarchy::operator_complexity() const {
  if (levels.empty() || levels.front().a.nnz() == 0) return 0.0;
  double total = 0.0;
  for (const auto& l : levels) total += static_cast<double>(l.a.nnz());
  return total / static_cast<double>(levels.front().a.nnz());
}

std::size_t AmgHierarchy::memory_bytes() const {
  std::size_t b = coarse_lu.size() * sizeof(double) + coarse_pivots.size() * sizeof(std::size_t);
  for (const auto& l : levels)
    b += l.a.memory_bytes() + l.p.memory_bytes() + l.r.memory_bytes() + l.inv_diag.size() * sizeof(double);
  return b;
}

std::vector<std::int64_t> aggregate(const SparseMatrix& a, double theta, std::size_t* aggregate_count) {
  const std::size_t n = a.rows();
  const auto diag = a.diagonal_values();
  const auto& off = a.row_offsets();
  const auto& ci = a.col_indices();
  const auto& v = a.values();

  // strength graph (symmetric for symmetric A)
  std::vector<std::int64_t> soff(n + 1, 0);
  std::vector<std::int32_t> sadj;
  sadj.reserve(a.nnz());
  for (std::size_t i = 0; i < n; ++i) {
    for (auto p = off[i]; p < off[i + 1]; ++p) {
      const auto j = static_cast<std::size_t>(ci[p]);
      if (j == i) continue;
      if (std::abs(v[p]) >= theta * std::sqrt(std::abs(diag[i] * diag[j]))) sadj.push_back(ci[p]);
    }
    soff[i + 1] = static_cast<std::int64_t>(sadj.size());
  }

  std::vector<std::int64_t> agg(n, -1);
  std::vector<std::uint8_t> isolated(n, 0);
  std::int64_t count = 0;

  // pass 1: root nodes whose whole strong neighbourhood is free
  for (std::size_t i = 0; i < n; ++i) {
    if (agg[i] >= 0) continue;
    if (soff[i] == soff[i + 1]) {
      isolated[i] = 1;
      continue;
    }
    bool free = true;
    for (auto p = soff[i]; p < soff[i + 1] && free; ++p) free = agg[sadj[p]] < 0;
    if (!free) continue;
    agg[i] = count;
    for (auto p = soff[i]; p < soff[i + 1]; ++p) agg[sadj[p]] = count;
    ++count;
  }
  const std::vector<std::int64_t> pass1 = agg;

  // pass 2: attach leftovers to a neighbouring pass-1 aggregate
  for (std::size_t i = 0; i < n; ++i) {
    if (agg[i] >= 0 || isolated[i]) continue;
    for (auto p = soff[i]; p < soff[i + 1]; ++p) {
      if (pass1[sadj[p]] >= 0) {
        agg[i] = pass1[sadj[p]];
        break;
      }
    }
  }

  // pass 3: remaining nodes form aggregates with their free neighbours
  for (std::size_t i = 0; i < n; ++i) {
    if (agg[i] >= 0 || isolated[i]) continue;
    agg[i] = count;
    for (auto p = soff[i]; p < soff[i + 1]; ++p)
      if (agg[sadj[p]] < 0 && !isolated[sadj[p]]) agg[sadj[p]] = count;
    ++count;
  }
  if (aggregate_count) *aggregate_count = static_cast<std::size_t>(count);
  return agg;
}

AmgHierarchy amg_setup(const SparseMatrix& a, const SolveConfig& cfg) {
  cfg.validate();
  if (a.rows() != a.cols()) throw InvalidArgument("AMG needs a square matrix");
  const auto t0 = Clock::now();
  ThreadScope scope(cfg.threads);

  AmgHierarchy h;
  h.pre_sweeps = cfg.pre_sweeps;
  h.post_sweeps = cfg.post_sweeps;
  h.damping = cfg.jacobi_damping;

  SparseMatrix current = a;
  for (std::size_t level = 0;; ++level) {
    AmgLevel lvl;
    lvl.a = std::move(current);
    const std::size_t n = lvl.a.rows();
    const auto d = lvl.a.diagonal_values();
    lvl.inv_diag.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!(d[i] > 0.0)) throw SolverError("non-positive diagonal entry in AMG level " + std::to_string(level));
      lvl.inv_diag[i] = 1.0 / d[i];
    }
    if (n <= cfg.coarse_cap || level + 1 >= cfg.max_levels) {
      h.levels.push_back(std::move(lvl));
      break;
    }

    const double theta = cfg.strength_threshold * std::pow(0.5, static_cast<double>(level));
    std::size_t nagg = 0;
    const auto agg = aggregate(lvl.a, theta, &nagg);
    if (nagg == 0 || nagg >= n) {
      // stagnation: this level becomes the (dense) coarsest
      h.levels.push_back(std::move(lvl));
      break;
    }

    std::vector<Triplet> tent;
    tent.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      if (agg[i] >= 0) tent.push_back({static_cast<std::int64_t>(i), agg[i], 1.0});
    const auto p_tent = SparseMatrix::from_triplets(n, nagg, std::move(tent));
    lvl.p = multiply(jacobi_operator(lvl.a, lvl.inv_diag, cfg.jacobi_damping), p_tent);
    lvl.r = lvl.p.transpose();
    current = triple_product(lvl.r, lvl.a, lvl.p);
    h.levels.push_back(std::move(lvl));
  }

  const auto& coarsest = h.levels.back().a;
  constexpr std::size_t kDenseLimit = 8192;
  if (coarsest.rows() > kDenseLimit)
    throw SolverError("aggregation stagnated at " + std::to_string(coarsest.rows()) +
                      " rows; too large for the dense coarse solve");
  h.coarse_lu = dense_copy(coarsest);
  lu_factor(h.coarse_lu, h.coarse_pivots, coarsest.rows());
  h.setup_seconds = seconds_since(t0);
  return h;
}

std::vector<double> v_cycle(const AmgHierarchy& h, std::span<const double> r) {
  if (h.levels.empty() || r.size() != h.levels.front().a.rows())
    throw InvalidArgument("residual length does not match the finest AMG level");
  std::vector<double> x(r.size(), 0.0);
  cycle(h, 0, r, x);
  return x;
}

double relative_residual(const SparseMatrix& a, std::span<const double> x, std::span<const double> rhs) {
  std::vector<double> r(rhs.size());
  a.multiply(x, r);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = rhs[i] - r[i];
  const double b = norm2(rhs);
  return b == 0.0 ? norm2(r) : norm2(r) / b;
}

std::vector<double> fgmres_solve(const SparseMatrix& a, std::span<const double> rhs, const AmgHierarchy& h,
                                 const SolveConfig& cfg, SolveReport& report) {
  cfg.validate();
  if (a.rows() != a.cols() || rhs.size() != a.rows()) throw InvalidArgument("dimension mismatch in solve");
  for (double v : rhs)
    if (!std::isfinite(v)) throw SolverError("right-hand side contains NaN or Inf");
  const auto t0 = Clock::now();
  ThreadScope scope(cfg.threads);

  const std::size_t n = rhs.size();
  report = {};
  report.setup_seconds = h.setup_seconds;
  report.level_sizes = h.level_sizes();
  const std::size_t m = cfg.restart;
  report.memory_bytes = h.memory_bytes() + a.memory_bytes() + (2 * m + 4) * n * sizeof(double);

  std::vector<double> x(n, 0.0);
  const double bnorm = norm2(rhs);
  if (bnorm == 0.0) {
    report.converged = true;
    report.solve_seconds = seconds_since(t0);
    return x;
  }

  std::vector<std::vector<double>> basis(m + 1, std::vector<double>(n));
  std::vector<std::vector<double>> precond(m, std::vector<double>(n));
  std::vector<double> hess((m + 1) * m, 0.0);  // column-major (m+1) x m
  std::vector<double> cs(m), sn(m), g(m + 1), y(m);
  std::vector<double> r(n), w(n);
  auto H = [&](std::size_t i, std::size_t j) -> double& { return hess[j * (m + 1) + i]; };

  std::size_t iters = 0;
  for (;;) {
    a.multiply(x, r);
    for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - r[i];
    const double beta = norm2(r);
    report.relative_residual = beta / bnorm;
    if (!std::isfinite(beta)) throw SolverError("FGMRES breakdown: non-finite residual");
    if (report.relative_residual <= cfg.rel_tol) {
      report.converged = true;
      break;
    }
    if (iters >= cfg.max_iters) break;

    for (std::size_t i = 0; i < n; ++i) basis[0][i] = r[i] / beta;
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = beta;
    std::size_t k = 0;
    while (k < m && iters < cfg.max_iters) {
      precond[k] = v_cycle(h, basis[k]);
      a.multiply(precond[k], w);
      for (std::size_t i = 0; i <= k; ++i) {
        H(i, k) = dot(w, basis[i]);
        axpy(-H(i, k), basis[i], w);
      }
      const double hnext = norm2(w);
      H(k + 1, k) = hnext;
      if (!std::isfinite(hnext)) throw SolverError("FGMRES breakdown: non-finite Arnoldi vector");
      if (hnext > 0.0)
        for (std::size_t i = 0; i < n; ++i) basis[k + 1][i] = w[i] / hnext;

      for (std::size_t i = 0; i < k; ++i) {
        const double t = cs[i] * H(i, k) + sn[i] * H(i + 1, k);
        H(i + 1, k) = -sn[i] * H(i, k) + cs[i] * H(i + 1, k);
        H(i, k) = t;
      }
      const double rho = std::hypot(H(k, k), H(k + 1, k));
      if (rho == 0.0) throw SolverError("FGMRES breakdown: singular Hessenberg column");
      cs[k] = H(k, k) / rho;
      sn[k] = H(k + 1, k) / rho;
      H(k, k) = rho;
      H(k + 1, k) = 0.0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = cs[k] * g[k];
      ++k;
      ++iters;
      const double estimate = std::abs(g[k]) / bnorm;
      if (cfg.trace) *cfg.trace << "iter " << iters << " rel_resid " << estimate << '\n';
      if (estimate <= cfg.rel_tol || hnext == 0.0) break;
    }

    for (std::size_t i = k; i-- > 0;) {
      double s = g[i];
      for (std::size_t j = i + 1; j < k; ++j) s -= H(i, j) * y[j];
      y[i] = s / H(i, i);
    }
    for (std::size_t j = 0; j < k; ++j) axpy(y[j], precond[j], x);
  }
  report.iterations = iters;
  report.solve_seconds = seconds_since(t0);
  return x;
}

std::vector<double> solve(const SparseMatrix& a, std::span<const double> rhs, const SolveConfig& cfg,
                          SolveReport& report) {
  const auto h = amg_setup(a, cfg);
  return fgmres_solve(a, rhs, h, cfg, report);
}

}  // namespace spfd
