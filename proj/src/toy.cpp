#include "mixres/toy.hpp"

#include <cmath>
#include <stdexcept>

#include "mixres/projection.hpp"
#include "mixres/trainer.hpp"

namespace mixres::toy {

namespace {

Eigen::Vector2d sample_normal(const Eigen::Vector2d& mu,
                              const Eigen::Matrix2d& chol_l,
                              core::RngStream& rng) {
  Eigen::Vector2d z(rng.next_gaussian(), rng.next_gaussian());
  return mu + chol_l * z;
}

}  // namespace

ToyDataset gen_toy_data(int n_high, int n_low, core::RngStream stream,
                        const ToyParams& params) {
  if (n_high < 2 || n_low < 2) {
    throw std::invalid_argument("need >= 2 points per class and resolution");
  }
  Eigen::LLT<Eigen::Matrix2d> llt(params.sigma);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("sigma must be positive definite");
  }
  Eigen::Matrix2d chol_high = llt.matrixL();
  Eigen::Matrix2d chol_low = chol_high / std::sqrt(8.0);  // sigma / 8

  ToyDataset out;
  for (int label = 0; label < 2; ++label) {
    const Eigen::Vector2d& mu = label == 0 ? params.mu0 : params.mu1;
    core::RngStream rng = stream.substream(static_cast<std::uint64_t>(label));
    for (int i = 0; i < n_high; ++i) {
      out.points.push_back(sample_normal(mu, chol_high, rng));
      out.labels.push_back(label);
      out.high_res.push_back(true);
    }
    for (int i = 0; i < n_low; ++i) {
      out.points.push_back(sample_normal(mu, chol_low, rng));
      out.labels.push_back(label);
      out.high_res.push_back(false);
    }
  }
  return out;
}

LdaModel lda_fit(const std::vector<Eigen::Vector2d>& points,
                 const std::vector<int>& labels) {
  if (points.size() != labels.size() || points.size() < 4) {
    throw std::invalid_argument("lda needs matched points/labels, >= 4 points");
  }
  Eigen::Vector2d sums[2] = {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
  int counts[2] = {0, 0};
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw std::invalid_argument("lda labels must be 0 or 1");
    }
    sums[labels[i]] += points[i];
    counts[labels[i]] += 1;
  }
  if (counts[0] < 2 || counts[1] < 2) {
    throw std::invalid_argument("lda needs >= 2 points per class");
  }

  LdaModel m;
  m.class_means[0] = sums[0] / counts[0];
  m.class_means[1] = sums[1] / counts[1];

  Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
  for (std::size_t i = 0; i < points.size(); ++i) {
    Eigen::Vector2d d = points[i] - m.class_means[labels[i]];
    scatter += d * d.transpose();
  }
  m.pooled_cov = scatter / static_cast<double>(points.size() - 2);

  double det = m.pooled_cov.determinant();
  if (!(std::abs(det) > 1e-12)) {
    throw std::runtime_error("singular pooled covariance");
  }
  m.weight = m.pooled_cov.inverse() * (m.class_means[1] - m.class_means[0]);
  m.bias = -0.5 * m.weight.dot(m.class_means[0] + m.class_means[1]) +
           std::log(static_cast<double>(counts[1]) / counts[0]);
  return m;
}

double influence_magnitude(const std::vector<Eigen::Vector2d>& points,
                           const std::vector<int>& labels, std::size_t i) {
  if (i >= points.size()) throw std::invalid_argument("index out of range");
  std::vector<Eigen::Vector2d> rest_points;
  std::vector<int> rest_labels;
  rest_points.reserve(points.size() - 1);
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (j == i) continue;
    rest_points.push_back(points[j]);
    rest_labels.push_back(labels[j]);
  }
  LdaModel with_all = lda_fit(points, labels);
  LdaModel without = lda_fit(rest_points, rest_labels);
  Eigen::Vector3d delta(with_all.weight(0) - without.weight(0),
                        with_all.weight(1) - without.weight(1),
                        with_all.bias - without.bias);
  return delta.norm();
}

std::vector<std::pair<int, double>> variance_vs_resolution(
    const core::LabeledDataset& images, const std::vector<int>& resolutions) {
  if (images.size() < 3) throw std::invalid_argument("need >= 3 images");
  for (int label : images.labels()) {
    if (label != images.labels().front()) {
      throw std::invalid_argument("variance_vs_resolution expects one class");
    }
  }
  int native = static_cast<int>(images.inputs().front().shape()[0]);
  std::vector<std::pair<int, double>> out;
  out.reserve(resolutions.size());
  for (int res : resolutions) {
    if (res > native) throw std::invalid_argument("resolution exceeds native side");
    std::size_t dim = images.inputs().front().rank() == 2
                          ? static_cast<std::size_t>(res) * res
                          : static_cast<std::size_t>(res);
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(images.size()),
                         static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < images.size(); ++i) {
      core::Tensor small = trainer::downsample(images.inputs()[i], res);
      rows.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(
          small.data().data(), static_cast<Eigen::Index>(small.size()));
    }
    projection::PcaModel pca = projection::pca_fit(rows, 2);
    out.emplace_back(res, pca.explained_variance.sum());
  }
  return out;
}

}  // namespace mixres::toy
