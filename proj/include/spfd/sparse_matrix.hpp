#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace spfd {

/// Coordinate entry used to build a SparseMatrix.
struct Triplet {
  std::int64_t row;
  std::int64_t col;
  double value;
};

/// Compressed-row real matrix.
///
/// After construction the column indices of every row are strictly
/// increasing and no explicit zeros are stored.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), row_offsets_(rows + 1, 0) {}
  /// Raw CSR constructor; validates and canonicalizes (sorts, merges, drops zeros).
  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::int64_t> row_offsets,
               std::vector<std::int32_t> col_indices, std::vector<double> values);

  /// Sums duplicate entries and drops entries that end up exactly zero.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets);
  static SparseMatrix identity(std::size_t n);
  static SparseMatrix diagonal(std::span<const double> diag);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  const std::vector<std::int64_t>& row_offsets() const noexcept { return row_offsets_; }
  const std::vector<std::int32_t>& col_indices() const noexcept { return cols_idx_; }
  const std::vector<double>& values() const noexcept { return values_; }

  /// Entry (r, c), zero when not stored.
  double at(std::size_t r, std::size_t c) const;
  std::vector<double> diagonal_values() const;

  /// y = A x
  void multiply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> operator*(std::span<const double> x) const;
  /// y = A^T x
  std::vector<double> multiply_transpose(std::span<const double> x) const;

  SparseMatrix transpose() const;

  /// Bytes held by the CSR arrays.
  std::size_t memory_bytes() const noexcept {
    return row_offsets_.size() * sizeof(std::int64_t) + cols_idx_.size() * sizeof(std::int32_t) +
           values_.size() * sizeof(double);
  }

  bool operator==(const SparseMatrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::int64_t> row_offsets_{0};
  std::vector<std::int32_t> cols_idx_;
  std::vector<double> values_;
};

/// C = A B (row-by-row Gustavson product).
SparseMatrix multiply(const SparseMatrix& a, const SparseMatrix& b);

/// Galerkin product P^T A P.
SparseMatrix triple_product(const SparseMatrix& p_transpose, const SparseMatrix& a, const SparseMatrix& p);

// Matrix Market coordinate (real general) and array formats.
void write_matrix_market(const SparseMatrix& m, const std::filesystem::path& path);
std::string matrix_market_string(const SparseMatrix& m);
SparseMatrix read_matrix_market(const std::filesystem::path& path);
SparseMatrix parse_matrix_market(const std::string& text);

void write_matrix_market_vector(std::span<const double> v, const std::filesystem::path& path);
std::vector<double> read_matrix_market_vector(const std::filesystem::path& path);

}  // namespace spfd
