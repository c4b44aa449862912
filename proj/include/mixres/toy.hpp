#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "mixres/core/dataset.hpp"
#include "mixres/core/rng.hpp"

namespace mixres::toy {

struct ToyDataset {
  std::vector<Eigen::Vector2d> points;
  std::vector<int> labels;
  std::vector<bool> high_res;
};

struct ToyParams {
  Eigen::Vector2d mu0{-1.0, 0.0};
  Eigen::Vector2d mu1{1.0, 0.0};
  Eigen::Matrix2d sigma = Eigen::Matrix2d::Identity();
};

/// Per class: n_high points from N(mu_c, sigma) and n_low points from the
/// same normal with one eighth of the covariance.
ToyDataset gen_toy_data(int n_high, int n_low, core::RngStream stream,
                        const ToyParams& params = {});

struct LdaModel {
  Eigen::Vector2d class_means[2];
  Eigen::Matrix2d pooled_cov;  // divisor N - 2
  Eigen::Vector2d weight;      // pooled_cov^{-1} (mu1 - mu0)
  double bias = 0.0;

  int predict(const Eigen::Vector2d& x) const {
    return weight.dot(x) + bias > 0.0 ? 1 : 0;
  }
};

LdaModel lda_fit(const std::vector<Eigen::Vector2d>& points,
                 const std::vector<int>& labels);

/// L2 norm of the (weight, bias) change when point i joins the fit of all
/// other points. Both classes must keep >= 2 points without i.
double influence_magnitude(const std::vector<Eigen::Vector2d>& points,
                           const std::vector<int>& labels, std::size_t i);

/// For each resolution: downsample, flatten, standardise, PCA to 2 dims,
/// and report the total variance of the 2-d projections. Images must all
/// carry the same label.
std::vector<std::pair<int, double>> variance_vs_resolution(
    const core::LabeledDataset& images, const std::vector<int>& resolutions);

}  // namespace mixres::toy
