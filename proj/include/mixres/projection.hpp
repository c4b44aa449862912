#pragma once

#include <Eigen/Dense>
#include <filesystem>

namespace mixres::projection {

/// Affine projection x -> components * ((x - mean) / scale). components rows
/// are orthonormal in the standardized frame; scale is all ones when fitted
/// with standardize = false. The split keeps the residual map purely linear:
/// project(x_l + x_r) - project(x_l) == project_residual(x_r) exactly.
struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
  Eigen::MatrixXd components;          // d x s, orthonormal rows
  Eigen::VectorXd explained_variance;  // non-increasing
};

/// Top-d eigenvectors of the sample covariance (divisor N-1) of the
/// optionally standardized rows. Sign convention: each component's
/// largest-magnitude entry is positive.
PcaModel pca_fit(const Eigen::MatrixXd& data, int d, bool standardize = true);

Eigen::VectorXd project(const PcaModel& m, const Eigen::VectorXd& x);

/// Linear part only (no mean subtraction) for residual vectors.
Eigen::VectorXd project_residual(const PcaModel& m, const Eigen::VectorXd& x_r);

void save_pca(const PcaModel& m, const std::filesystem::path& dir);
PcaModel load_pca(const std::filesystem::path& dir);

}  // namespace mixres::projection
