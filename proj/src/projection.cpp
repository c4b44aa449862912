#include "mixres/projection.hpp"

#include <cmath>
#include <stdexcept>

#include "mixres/core/io.hpp"

namespace mixres::projection {

namespace {

core::Tensor to_tensor(const Eigen::VectorXd& v) {
  return core::Tensor({static_cast<std::size_t>(v.size())},
                      std::vector<double>(v.data(), v.data() + v.size()));
}

core::Tensor to_tensor(const Eigen::MatrixXd& m) {
  std::vector<double> data(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      data[static_cast<std::size_t>(i) * m.cols() + j] = m(i, j);
    }
  }
  return core::Tensor(
      {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
      std::move(data));
}

Eigen::VectorXd to_vector(const core::Tensor& t) {
  if (t.rank() != 1) throw std::runtime_error("expected rank-1 tensor");
  return Eigen::Map<const Eigen::VectorXd>(t.data().data(),
                                           static_cast<Eigen::Index>(t.size()));
}

Eigen::MatrixXd to_matrix(const core::Tensor& t) {
  if (t.rank() != 2) throw std::runtime_error("expected rank-2 tensor");
  Eigen::MatrixXd m(t.shape()[0], t.shape()[1]);
  for (std::size_t i = 0; i < t.shape()[0]; ++i) {
    for (std::size_t j = 0; j < t.shape()[1]; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t(i, j);
    }
  }
  return m;
}

}  // namespace

PcaModel pca_fit(const Eigen::MatrixXd& data, int d, bool standardize) {
  const Eigen::Index n = data.rows();
  const Eigen::Index s = data.cols();
  if (n < 2) throw std::invalid_argument("pca_fit needs >= 2 rows");
  if (d < 1 || d > std::min<Eigen::Index>(n - 1, s)) {
    throw std::invalid_argument("pca dimension out of range [1, min(N-1, s)]");
  }

  PcaModel m;
  m.mean = data.colwise().mean();
  m.scale = Eigen::VectorXd::Ones(s);
  if (standardize) {
    for (Eigen::Index j = 0; j < s; ++j) {
      double var =
          (data.col(j).array() - m.mean(j)).square().sum() / double(n - 1);
      double sd = std::sqrt(var);
      m.scale(j) = sd > 1e-12 ? sd : 1.0;  // constant features carry no signal
    }
  }

  Eigen::MatrixXd centered =
      (data.rowwise() - m.mean.transpose()).array().rowwise() /
      m.scale.transpose().array();
  Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("pca eigendecomposition failed");
  }
  // Eigen returns eigenvalues ascending; take the top d in descending order.
  m.components.resize(d, s);
  m.explained_variance.resize(d);
  for (int k = 0; k < d; ++k) {
    Eigen::Index src = s - 1 - k;
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    Eigen::Index arg_max = 0;
    v.cwiseAbs().maxCoeff(&arg_max);
    if (v(arg_max) < 0) v = -v;
    m.components.row(k) = v.transpose();
    m.explained_variance(k) = std::max(0.0, solver.eigenvalues()(src));
  }
  return m;
}

Eigen::VectorXd project(const PcaModel& m, const Eigen::VectorXd& x) {
  if (x.size() != m.mean.size()) {
    throw std::invalid_argument("project: dimension mismatch");
  }
  return m.components * ((x - m.mean).array() / m.scale.array()).matrix();
}

Eigen::VectorXd project_residual(const PcaModel& m, const Eigen::VectorXd& x_r) {
  if (x_r.size() != m.mean.size()) {
    throw std::invalid_argument("project_residual: dimension mismatch");
  }
  return m.components * (x_r.array() / m.scale.array()).matrix();
}

void save_pca(const PcaModel& m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  core::write_tensor(to_tensor(m.mean), dir / "mean.mrt1");
  core::write_tensor(to_tensor(m.scale), dir / "scale.mrt1");
  core::write_tensor(to_tensor(m.components), dir / "components.mrt1");
  core::write_tensor(to_tensor(m.explained_variance),
                     dir / "explained_variance.mrt1");
}

PcaModel load_pca(const std::filesystem::path& dir) {
  PcaModel m;
  m.mean = to_vector(core::read_tensor(dir / "mean.mrt1"));
  m.scale = to_vector(core::read_tensor(dir / "scale.mrt1"));
  m.components = to_matrix(core::read_tensor(dir / "components.mrt1"));
  m.explained_variance =
      to_vector(core::read_tensor(dir / "explained_variance.mrt1"));
  if (m.components.cols() != m.mean.size() ||
      m.components.rows() != m.explained_variance.size()) {
    throw std::runtime_error("pca model tensors are inconsistent");
  }
  return m;
}

}  // namespace mixres::projection
