#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "spfd/sparse_matrix.hpp"
#include "spfd/voxel_model.hpp"

namespace spfd::test {

inline std::mt19937_64& rng() {
  static std::mt19937_64 engine(20240607);
  return engine;
}

inline double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng()); }
inline std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng());
}

inline std::vector<double> random_vector(std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = uniform(lo, hi);
  return v;
}

inline std::map<TissueId, Tissue> single_tissue_table(double kappa) {
  return {{kFreeSpace, {"free_space", ConductivitySamples::constant(0.0)}},
          {1, {"tissue", ConductivitySamples::constant(kappa)}}};
}

/// Model with every voxel set to tissue 1.
inline VoxelModel homogeneous_cube(std::size_t n, double kappa = 0.2, double spacing = 0.002) {
  return VoxelModel({n, n, n}, {spacing, spacing, spacing}, {0.0, 0.0, 0.0},
                    std::vector<TissueId>(n * n * n, 1), single_tissue_table(kappa));
}

inline Eigen::MatrixXd dense(const SparseMatrix& m) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (auto p = m.row_offsets()[r]; p < m.row_offsets()[r + 1]; ++p)
      d(static_cast<Eigen::Index>(r), m.col_indices()[p]) = m.values()[p];
  return d;
}

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline double rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  return (to_eigen(a) - to_eigen(b)).norm() / to_eigen(b).norm();
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    path_ = std::filesystem::temp_directory_path() /
            ("spfd_test_" + std::to_string(std::random_device{}()) + "_" + std::to_string(uniform_int(0, 1 << 30)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace spfd::test
