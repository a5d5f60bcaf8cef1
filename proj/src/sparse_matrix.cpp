#include "spfd/sparse_matrix.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <sstream>

#include "spfd/error.hpp"
#include "spfd/parallel.hpp"
#include "text_util.hpp"

namespace spfd {

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::int64_t> row_offsets,
                           std::vector<std::int32_t> col_indices, std::vector<double> values)
    : rows_(rows), cols_(cols) {
  if (row_offsets.size() != rows + 1 || row_offsets.front() != 0 ||
      static_cast<std::size_t>(row_offsets.back()) != col_indices.size() || col_indices.size() != values.size())
    throw InvalidArgument("inconsistent CSR arrays");
  if (cols > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max()))
    throw InvalidArgument("column count exceeds 32-bit index range");
  row_offsets_.assign(rows + 1, 0);
  cols_idx_.reserve(col_indices.size());
  values_.reserve(values.size());
  std::vector<std::pair<std::int32_t, double>> row;
  for (std::size_t r = 0; r < rows; ++r) {
    row.clear();
    for (auto p = row_offsets[r]; p < row_offsets[r + 1]; ++p) {
      if (col_indices[p] < 0 || static_cast<std::size_t>(col_indices[p]) >= cols)
        throw InvalidArgument("column index out of range");
      row.emplace_back(col_indices[p], values[p]);
    }
    std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t q = 0; q < row.size();) {
      double sum = 0.0;
      const auto c = row[q].first;
      for (; q < row.size() && row[q].first == c; ++q) sum += row[q].second;
      if (sum != 0.0) {
        cols_idx_.push_back(c);
        values_.push_back(sum);
      }
    }
    row_offsets_[r + 1] = static_cast<std::int64_t>(cols_idx_.size());
  }
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets) {
  std::vector<std::int64_t> offsets(rows + 1, 0);
  for (const auto& t : triplets) {
    if (t.row < 0 || static_cast<std::size_t>(t.row) >= rows) throw InvalidArgument("row index out of range");
    ++offsets[t.row + 1];
  }
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  std::vector<std::int32_t> ci(triplets.size());
  std::vector<double> vals(triplets.size());
  std::vector<std::int64_t> fill(offsets.begin(), offsets.end() - 1);
  for (const auto& t : triplets) {
    if (t.col < 0 || static_cast<std::size_t>(t.col) >= cols) throw InvalidArgument("column index out of range");
    const auto p = fill[t.row]++;
    ci[p] = static_cast<std::int32_t>(t.col);
    vals[p] = t.value;
  }
  return SparseMatrix(rows, cols, std::move(offsets), std::move(ci), std::move(vals));
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  std::vector<double> ones(n, 1.0);
  return diagonal(ones);
}

SparseMatrix SparseMatrix::diagonal(std::span<const double> diag) {
  const std::size_t n = diag.size();
  std::vector<std::int64_t> offsets(n + 1);
  std::vector<std::int32_t> ci(n);
  std::vector<double> vals(diag.begin(), diag.end());
  for (std::size_t i = 0; i < n; ++i) {
    offsets[i + 1] = static_cast<std::int64_t>(i + 1);
    ci[i] = static_cast<std::int32_t>(i);
  }
  return SparseMatrix(n, n, std::move(offsets), std::move(ci), std::move(vals));
}

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  const auto b = cols_idx_.begin() + row_offsets_[r];
  const auto e = cols_idx_.begin() + row_offsets_[r + 1];
  const auto it = std::lower_bound(b, e, static_cast<std::int32_t>(c));
  return (it != e && *it == static_cast<std::int32_t>(c)) ? values_[it - cols_idx_.begin()] : 0.0;
}

std::vector<double> SparseMatrix::diagonal_values() const {
  std::vector<double> d(std::min(rows_, cols_), 0.0);
  for (std::size_t r = 0; r < d.size(); ++r) d[r] = at(r, r);
  return d;
}

void SparseMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  if (x.size() != cols_ || y.size() != rows_) throw InvalidArgument("dimension mismatch in matrix-vector product");
  const long n = static_cast<long>(rows_);
#pragma omp parallel for num_threads(thread_count()) schedule(static) if (n > 8192)
  for (long r = 0; r < n; ++r) {
    double s = 0.0;
    for (auto p = row_offsets_[r]; p < row_offsets_[r + 1]; ++p) s += values_[p] * x[cols_idx_[p]];
    y[static_cast<std::size_t>(r)] = s;
  }
}

std::vector<double> SparseMatrix::operator*(std::span<const double> x) const {
  std::vector<double> y(rows_);
  multiply(x, y);
  return y;
}

std::vector<double> SparseMatrix::multiply_transpose(std::span<const double> x) const {
  if (x.size() != rows_) throw InvalidArgument("dimension mismatch in transposed product");
  std::vector<double> y(cols_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r)
    for (auto p = row_offsets_[r]; p < row_offsets_[r + 1]; ++p) y[cols_idx_[p]] += values_[p] * x[r];
  return y;
}

SparseMatrix SparseMatrix::transpose() const {
  std::vector<std::int64_t> offsets(cols_ + 1, 0);
  for (auto c : cols_idx_) ++offsets[c + 1];
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  std::vector<std::int32_t> ci(nnz());
  std::vector<double> vals(nnz());
  std::vector<std::int64_t> fill(offsets.begin(), offsets.end() - 1);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (auto p = row_offsets_[r]; p < row_offsets_[r + 1]; ++p) {
      const auto q = fill[cols_idx_[p]]++;
      ci[q] = static_cast<std::int32_t>(r);
      vals[q] = values_[p];
    }
  }
  SparseMatrix t;
  t.rows_ = cols_;
  t.cols_ = rows_;
  t.row_offsets_ = std::move(offsets);
  t.cols_idx_ = std::move(ci);
  t.values_ = std::move(vals);
  return t;
}

SparseMatrix multiply(const SparseMatrix& a, const SparseMatrix& b) {
  if (a.cols() != b.rows()) throw InvalidArgument("dimension mismatch in sparse product");
  const auto& ao = a.row_offsets();
  const auto& ac = a.col_indices();
  const auto& av = a.values();
  const auto& bo = b.row_offsets();
  const auto& bc = b.col_indices();
  const auto& bv = b.values();

  std::vector<std::int64_t> offsets(a.rows() + 1, 0);
  std::vector<std::int32_t> ci;
  std::vector<double> vals;
  std::vector<std::int64_t> marker(b.cols(), -1);
  std::vector<double> acc(b.cols(), 0.0);
  std::vector<std::int32_t> pattern;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    pattern.clear();
    for (auto p = ao[r]; p < ao[r + 1]; ++p) {
      const double va = av[p];
      const auto k = ac[p];
      for (auto q = bo[k]; q < bo[k + 1]; ++q) {
        const auto c = bc[q];
        if (marker[c] != static_cast<std::int64_t>(r)) {
          marker[c] = static_cast<std::int64_t>(r);
          acc[c] = 0.0;
          pattern.push_back(c);
        }
        acc[c] += va * bv[q];
      }
    }
    std::sort(pattern.begin(), pattern.end());
    for (auto c : pattern) {
      if (acc[c] != 0.0) {
        ci.push_back(c);
        vals.push_back(acc[c]);
      }
    }
    offsets[r + 1] = static_cast<std::int64_t>(ci.size());
  }
  return SparseMatrix(a.rows(), b.cols(), std::move(offsets), std::move(ci), std::move(vals));
}

SparseMatrix triple_product(const SparseMatrix& p_transpose, const SparseMatrix& a, const SparseMatrix& p) {
  return multiply(p_transpose, multiply(a, p));
}

// ---------------------------------------------------------------------------
// Matrix Market

std::string matrix_market_string(const SparseMatrix& m) {
  std::ostringstream os;
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << m.rows() << ' ' << m.cols() << ' ' << m.nnz() << '\n';
  const auto& off = m.row_offsets();
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (auto p = off[r]; p < off[r + 1]; ++p)
      os << r + 1 << ' ' << m.col_indices()[p] + 1 << ' ' << detail::format_double(m.values()[p]) << '\n';
  return os.str();
}

void write_matrix_market(const SparseMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << matrix_market_string(m);
}

SparseMatrix parse_matrix_market(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0)
    throw FormatError("missing %%MatrixMarket banner");
  const auto banner = detail::split_ws(line);
  if (banner.size() < 5 || banner[1] != "matrix" || banner[2] != "coordinate" || banner[3] != "real")
    throw FormatError("only 'matrix coordinate real' Matrix Market files are supported");
  const bool symmetric = banner[4] == "symmetric";
  if (!symmetric && banner[4] != "general") throw FormatError("unsupported Matrix Market symmetry");
  while (std::getline(in, line) && (line.empty() || line[0] == '%')) {}
  const auto dims = detail::split_ws(line);
  if (dims.size() != 3) throw FormatError("malformed Matrix Market size line");
  const auto rows = static_cast<std::size_t>(detail::parse_int(dims[0], "rows"));
  const auto cols = static_cast<std::size_t>(detail::parse_int(dims[1], "cols"));
  const auto count = static_cast<std::size_t>(detail::parse_int(dims[2], "nnz"));
  std::vector<Triplet> trip;
  trip.reserve(symmetric ? 2 * count : count);
  for (std::size_t e = 0; e < count; ++e) {
    if (!std::getline(in, line)) throw FormatError("truncated Matrix Market file");
    const auto parts = detail::split_ws(line);
    if (parts.size() != 3) throw FormatError("malformed Matrix Market entry");
    const auto r = detail::parse_int(parts[0], "row") - 1;
    const auto c = detail::parse_int(parts[1], "col") - 1;
    const double v = detail::parse_double(parts[2], "value");
    if (r < 0 || c < 0 || static_cast<std::size_t>(r) >= rows || static_cast<std::size_t>(c) >= cols)
      throw FormatError("Matrix Market entry (" + std::string(parts[0]) + ", " + std::string(parts[1]) + ") out of range");
    trip.push_back({r, c, v});
    if (symmetric && r != c) trip.push_back({c, r, v});
  }
  return SparseMatrix::from_triplets(rows, cols, std::move(trip));
}

SparseMatrix read_matrix_market(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return parse_matrix_market(std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()));
}

void write_matrix_market_vector(std::span<const double> v, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "%%MatrixMarket matrix array real general\n" << v.size() << " 1\n";
  for (double x : v) out << detail::format_double(x) << '\n';
}

std::vector<double> read_matrix_market_vector(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("%%MatrixMarket matrix array real", 0) != 0)
    throw FormatError("expected a Matrix Market real array");
  while (std::getline(in, line) && (line.empty() || line[0] == '%')) {}
  const auto dims = detail::split_ws(line);
  if (dims.size() != 2 || dims[1] != "1") throw FormatError("expected a column vector");
  const auto n = static_cast<std::size_t>(detail::parse_int(dims[0], "rows"));
  std::vector<double> v;
  v.reserve(n);
  while (v.size() < n && std::getline(in, line)) {
    const auto t = detail::trim(line);
    if (!t.empty()) v.push_back(detail::parse_double(t, "vector entry"));
  }
  if (v.size() != n) throw FormatError("truncated Matrix Market vector");
  return v;
}

}  // namespace spfd
