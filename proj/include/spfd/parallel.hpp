#pragma once

#include <cstddef>
#include <span>

namespace spfd {

/// Worker count used by data-parallel kernels; 0 selects the runtime
/// default (SPFD_THREADS when set, otherwise hardware concurrency).
void set_thread_count(int threads);
int thread_count();

/// Dot product with a fixed blocked summation order. The result does not
/// depend on the number of worker threads.
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

}  // namespace spfd
