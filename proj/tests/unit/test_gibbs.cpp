#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <filesystem>

#include "mixres/core/parallel.hpp"
#include "mixres/core/io.hpp"
#include "mixres/gibbs.hpp"

using namespace mixres;

namespace {

gibbs::MlpParams random_params(const gibbs::MlpArchitecture& arch,
                               core::RngStream& rng, double scale = 0.7) {
  gibbs::MlpParams p;
  for (int l = 0; l < arch.num_layers(); ++l) {
    int in = arch.layer_widths[l];
    int out = arch.layer_widths[l + 1];
    Eigen::MatrixXd w(out, in);
    for (int i = 0; i < out; ++i) {
      for (int j = 0; j < in; ++j) w(i, j) = scale * rng.next_gaussian();
    }
    Eigen::VectorXd b(out);
    for (int i = 0; i < out; ++i) b(i) = 0.1 * rng.next_gaussian();
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  return p;
}

Eigen::VectorXd random_vector(int n, core::RngStream& rng) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.next_gaussian();
  return v;
}

// Straight-line softmax cross entropy, written independently of the library.
double naive_loss(const gibbs::MlpParams& p, Eigen::VectorXd x, int y) {
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    x = p.weights[l] * x + p.biases[l];
    if (l + 1 < p.weights.size()) {
      for (int i = 0; i < x.size(); ++i) x(i) = x(i) > 0 ? x(i) : 0.0;
    }
  }
  double denom = 0.0;
  double shift = x.maxCoeff();
  for (int i = 0; i < x.size(); ++i) denom += std::exp(x(i) - shift);
  return -(x(y) - shift - std::log(denom));
}

core::LabeledDataset blob_data(int per_class, core::RngStream rng) {
  std::vector<core::Tensor> inputs;
  std::vector<int> labels;
  for (int label = 0; label < 2; ++label) {
    double cx = label == 0 ? -2.0 : 2.0;
    for (int i = 0; i < per_class; ++i) {
      inputs.push_back(core::Tensor(
          {2}, {cx + 0.5 * rng.next_gaussian(), 0.5 * rng.next_gaussian()}));
      labels.push_back(label);
    }
  }
  return core::LabeledDataset(std::move(inputs), std::move(labels), 2, "blobs");
}

std::uint64_t params_hash(const gibbs::MlpParams& p) {
  std::vector<std::uint8_t> bytes;
  for (double v : p.flatten()) core::append_f64_le(bytes, v);
  return core::fnv1a64(bytes);
}

}  // namespace

TEST_SUITE_BEGIN("gibbs");

TEST_CASE("loss: uniform predictor gives ln 2") {
  gibbs::MlpArchitecture arch = gibbs::make_mlp_arch(3, 2, 4, 2);
  gibbs::MlpParams p;
  for (int l = 0; l < arch.num_layers(); ++l) {
    p.weights.push_back(Eigen::MatrixXd::Zero(arch.layer_widths[l + 1],
                                              arch.layer_widths[l]));
    p.biases.push_back(Eigen::VectorXd::Zero(arch.layer_widths[l + 1]));
  }
  Eigen::Vector3d x(0.3, -0.2, 0.9);
  CHECK(gibbs::loss(p, x, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(gibbs::loss(p, x, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("loss: saturated correct class is near zero") {
  gibbs::MlpParams p;
  p.weights.push_back(Eigen::MatrixXd::Zero(2, 2));
  p.biases.push_back(Eigen::VectorXd::Zero(2));
  p.biases[0](1) = 20.0;
  Eigen::Vector2d x(0.0, 0.0);
  CHECK(gibbs::loss(p, x, 1) < 1e-8);
  CHECK(gibbs::loss(p, x, 1) >= 0.0);
}

TEST_CASE("loss matches an independent softmax computation") {
  core::RngStream rng(31, 0);
  gibbs::MlpArchitecture arch = gibbs::make_mlp_arch(5, 3, 8, 3);
  for (int trial = 0; trial < 20; ++trial) {
    gibbs::MlpParams p = random_params(arch, rng);
    Eigen::VectorXd x = random_vector(5, rng);
    int y = static_cast<int>(rng.next_below(3));
    CHECK(gibbs::loss(p, x, y) ==
          doctest::Approx(naive_loss(p, x, y)).epsilon(1e-12));
  }
}

TEST_CASE("input gradient: constant network has zero gradient") {
  gibbs::MlpArchitecture arch = gibbs::make_mlp_arch(4, 2, 4, 2);
  gibbs::MlpParams p;
  for (int l = 0; l < arch.num_layers(); ++l) {
    p.weights.push_back(Eigen::MatrixXd::Zero(arch.layer_widths[l + 1],
                                              arch.layer_widths[l]));
    p.biases.push_back(Eigen::VectorXd::Zero(arch.layer_widths[l + 1]));
  }
  Eigen::VectorXd x = Eigen::VectorXd::Constant(4, 0.7);
  CHECK(gibbs::input_gradient(p, x, 0).norm() == 0.0);
}

TEST_CASE("input gradient matches central finite differences") {
  core::RngStream rng(32, 0);
  gibbs::MlpArchitecture arch = gibbs::make_mlp_arch(6, 4, 10, 2);
  const double h = 1e-5;
  int checked = 0;
  while (checked < 25) {
    gibbs::MlpParams p = random_params(arch, rng, 0.4);
    Eigen::VectorXd x = random_vector(6, rng);
    int y = static_cast<int>(rng.next_below(2));
    Eigen::VectorXd g = gibbs::input_gradient(p, x, y);
    // Keep away from ReLU kinks and saturated-softmax plateaus, where a
    // finite-difference quotient cannot resolve the relative error.
    if (g.norm() < 1e-3) continue;
    Eigen::VectorXd fd(6);
    for (int j = 0; j < 6; ++j) {
      Eigen::VectorXd xp = x, xm = x;
      xp(j) += h;
      xm(j) -= h;
      fd(j) = (gibbs::loss(p, xp, y) - gibbs::loss(p, xm, y)) / (2 * h);
    }
    double rel = (g - fd).norm() / fd.norm();
    CHECK(rel < 1e-5);
    ++checked;
  }
}

TEST_CASE("input gradient tracks final-layer rescaling") {
  core::RngStream rng(33, 0);
  gibbs::MlpArchitecture arch = gibbs::make_mlp_arch(4, 3, 6, 2);
  gibbs::MlpParams p = random_params(arch, rng);
  Eigen::VectorXd x = random_vector(4, rng);
  gibbs::MlpParams scaled = p;
  scaled.weights.back() *= 2.0;
  scaled.biases.back() *= 2.0;
  const double h = 1e-5;
  Eigen::VectorXd g = gibbs::input_gradient(scaled, x, 1);
  Eigen::VectorXd fd(4);
  for (int j = 0; j < 4; ++j) {
    Eigen::VectorXd xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    fd(j) = (gibbs::loss(scaled, xp, 1) - gibbs::loss(scaled, xm, 1)) / (2 * h);
  }
  CHECK((g - fd).norm() / std::max(1e-12, fd.norm()) < 1e-5);
}

TEST_CASE("input hessian: linear model matches softmax curvature") {
  core::RngStream rng(34, 0);
  gibbs::MlpParams p;
  Eigen::MatrixXd w(3, 4);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) w(i, j) = 0.6 * rng.next_gaussian();
  }
  p.weights.push_back(w);
  p.biases.push_back(Eigen::VectorXd::Zero(3));
  Eigen::VectorXd x = random_vector(4, rng);

  Eigen::VectorXd logits = w * x;
  Eigen::VectorXd exps = (logits.array() - logits.maxCoeff()).exp();
  Eigen::VectorXd s = exps / exps.sum();
  Eigen::MatrixXd curv = s.asDiagonal();
  curv -= s * s.transpose();
  Eigen::MatrixXd expected = w.transpose() * curv * w;

  Eigen::MatrixXd h = gibbs::input_hessian(p, x, 1);
  CHECK((h - expected).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((h - h.transpose()).norm() == 0.0);
}

TEST_CASE("input hessian: zero network and guard") {
  gibbs::MlpParams p;
  p.weights.push_back(Eigen::MatrixXd::Zero(2, 3));
  p.biases.push_back(Eigen::VectorXd::Zero(2));
  Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
  CHECK(gibbs::input_hessian(p, x, 0).norm() == 0.0);

  gibbs::MlpParams big;
  big.weights.push_back(Eigen::MatrixXd::Zero(2, 65));
  big.biases.push_back(Eigen::VectorXd::Zero(2));
  Eigen::VectorXd xbig = Eigen::VectorXd::Zero(65);
  CHECK_THROWS_WITH_AS(gibbs::input_hessian(big, xbig, 0),
                       doctest::Contains("hessian guard"), std::invalid_argument);
}

TEST_CASE("quadratic form agrees with the materialised hessian") {
  core::RngStream rng(35, 0);
  gibbs::MlpArchitecture arch = gibbs::make_mlp_arch(5, 3, 8, 2);
  for (int trial = 0; trial < 5; ++trial) {
    gibbs::MlpParams p = random_params(arch, rng);
    Eigen::VectorXd x = random_vector(5, rng);
    Eigen::VectorXd dir = random_vector(5, rng);
    double direct = gibbs::input_quadratic_form(p, x, 1, dir);
    Eigen::MatrixXd h = gibbs::input_hessian(p, x, 1);
    double via_matrix = dir.dot(h * dir);
    CHECK(direct == doctest::Approx(via_matrix).epsilon(1e-4).scale(1.0));
  }
}

TEST_CASE("train_member: deterministic, learns separable blobs, validates") {
  core::LabeledDataset data = blob_data(30, core::RngStream(40, 0));
  gibbs::MlpArchitecture arch = gibbs::make_mlp_arch(2, 3, 8, 2);
  gibbs::TrainConfig cfg;
  cfg.epochs = 200;
  cfg.learning_rate = 5e-3;

  gibbs::MlpParams a = gibbs::train_member(data, arch, cfg, core::RngStream(1, 0));
  gibbs::MlpParams b = gibbs::train_member(data, arch, cfg, core::RngStream(1, 0));
  CHECK(params_hash(a) == params_hash(b));

  int correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    Eigen::Vector2d x(data.inputs()[i].data()[0], data.inputs()[i].data()[1]);
    double l0 = gibbs::loss(a, x, 0);
    double l1 = gibbs::loss(a, x, 1);
    int pred = l1 < l0 ? 1 : 0;
    if (pred == data.labels()[i]) ++correct;
  }
  CHECK(static_cast<double>(correct) / data.size() >= 0.95);

  gibbs::TrainConfig bad = cfg;
  bad.epochs = 0;
  CHECK_THROWS_AS(gibbs::train_member(data, arch, bad, core::RngStream(1, 0)),
                  std::invalid_argument);
}

TEST_CASE("sample_posterior: schedule-independent and seed-sensitive") {
  core::LabeledDataset data = blob_data(12, core::RngStream(41, 0));
  gibbs::MlpArchitecture arch = gibbs::make_mlp_arch(2, 2, 4, 2);
  gibbs::TrainConfig cfg;
  cfg.epochs = 30;
  cfg.learning_rate = 1e-2;

  core::set_default_thread_count(1);
  gibbs::PosteriorEnsemble e1 = gibbs::sample_posterior(data, arch, cfg, 6, 99);
  core::set_default_thread_count(4);
  gibbs::PosteriorEnsemble e2 = gibbs::sample_posterior(data, arch, cfg, 6, 99);
  core::set_default_thread_count(0);
  REQUIRE(e1.size() == e2.size());
  for (int i = 0; i < e1.size(); ++i) {
    CHECK(params_hash(e1.members[i]) == params_hash(e2.members[i]));
  }

  gibbs::PosteriorEnsemble e3 = gibbs::sample_posterior(data, arch, cfg, 6, 100);
  CHECK(params_hash(e1.members[0]) != params_hash(e3.members[0]));

  CHECK_THROWS_AS(gibbs::sample_posterior(data, arch, cfg, 1, 99),
                  std::invalid_argument);
}

TEST_CASE("moment diagnostics") {
  core::LabeledDataset data = blob_data(8, core::RngStream(42, 0));
  gibbs::MlpArchitecture arch = gibbs::make_mlp_arch(2, 2, 4, 2);
  gibbs::TrainConfig cfg;
  cfg.epochs = 10;
  gibbs::PosteriorEnsemble e = gibbs::sample_posterior(data, arch, cfg, 5, 7);
  Eigen::Vector2d x(0.2, -0.4);

  gibbs::MomentDiagnostics d = gibbs::moment_diagnostics(e, x, 1);
  // Brute-force loop.
  double mean = 0.0, second = 0.0, maxv = 0.0;
  for (const auto& member : e.members) {
    double l = gibbs::loss(member, x, 1);
    mean += l;
    second += l * l;
    maxv = std::max(maxv, l);
  }
  mean /= e.size();
  second /= e.size();
  CHECK(d.mean_loss == doctest::Approx(mean).epsilon(1e-12));
  CHECK(d.second_moment == doctest::Approx(second).epsilon(1e-12));
  CHECK(d.max_loss == doctest::Approx(maxv).epsilon(1e-12));

  // Single-member view: the diagnostics reduce to that member's loss.
  gibbs::PosteriorEnsemble single = e;
  single.members.resize(1);
  gibbs::MomentDiagnostics ds = gibbs::moment_diagnostics(single, x, 1);
  CHECK(ds.mean_loss ==
        doctest::Approx(gibbs::loss(e.members[0], x, 1)).epsilon(1e-15));

  // All-zero members give the uniform ln 2.
  gibbs::PosteriorEnsemble zeros = e;
  for (auto& member : zeros.members) {
    for (auto& w : member.weights) w.setZero();
    for (auto& b : member.biases) b.setZero();
  }
  gibbs::MomentDiagnostics dz = gibbs::moment_diagnostics(zeros, x, 1);
  CHECK(dz.mean_loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("ensemble serialization round trip") {
  core::LabeledDataset data = blob_data(8, core::RngStream(43, 0));
  gibbs::MlpArchitecture arch = gibbs::make_mlp_arch(2, 3, 4, 2);
  gibbs::TrainConfig cfg;
  cfg.epochs = 5;
  gibbs::PosteriorEnsemble e = gibbs::sample_posterior(data, arch, cfg, 3, 17);

  auto dir = std::filesystem::temp_directory_path() / "mixres_ensemble_test";
  std::filesystem::remove_all(dir);
  gibbs::save_ensemble(e, dir);
  gibbs::PosteriorEnsemble back = gibbs::load_ensemble(dir);
  CHECK(back.size() == e.size());
  CHECK(back.dataset_hash == e.dataset_hash);
  CHECK(back.master_seed == e.master_seed);
  CHECK(back.arch.layer_widths == e.arch.layer_widths);
  for (int i = 0; i < e.size(); ++i) {
    CHECK(params_hash(back.members[i]) == params_hash(e.members[i]));
  }
}

TEST_SUITE_END();
