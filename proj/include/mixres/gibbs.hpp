#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "mixres/core/dataset.hpp"
#include "mixres/core/rng.hpp"

namespace mixres::gibbs {

/// Linear layers with ReLU between them; the last layer emits raw logits.
struct MlpArchitecture {
  std::vector<int> layer_widths;  // first = input dim, last = class count

  int input_dim() const { return layer_widths.front(); }
  int output_dim() const { return layer_widths.back(); }
  int num_layers() const { return static_cast<int>(layer_widths.size()) - 1; }
  void validate() const;
};

/// [input, hidden x (depth-1), num_classes]; depth counts linear layers.
MlpArchitecture make_mlp_arch(int input_dim, int depth, int hidden,
                              int num_classes);

struct MlpParams {
  std::vector<Eigen::MatrixXd> weights;  // out x in
  std::vector<Eigen::VectorXd> biases;

  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  static MlpParams unflatten(const MlpArchitecture& arch,
                             const std::vector<double>& flat);
};

enum class Optimizer { GradientDescent, Adam };

struct TrainConfig {
  int epochs = 300;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::Adam;
  int batch_size = 0;  // 0 = full batch
  double weight_decay = 0.0;
  double init_scale = 1.0;

  void validate() const;
};

struct PosteriorEnsemble {
  std::vector<MlpParams> members;
  std::uint64_t dataset_hash = 0;
  MlpArchitecture arch;
  TrainConfig config;
  std::uint64_t master_seed = 0;

  int size() const { return static_cast<int>(members.size()); }
};

// ---------------------------------------------------------------------------
// Pointwise evaluation
// ---------------------------------------------------------------------------

/// Cross-entropy -log softmax(logits)[y], log-sum-exp with max shift.
double loss(const MlpParams& p, const Eigen::VectorXd& x, int y);

/// Exact reverse-mode gradient of loss w.r.t. the input. ReLU subgradient
/// at 0 is 0.
Eigen::VectorXd input_gradient(const MlpParams& p, const Eigen::VectorXd& x,
                               int y);

/// Central finite differences of input_gradient (step 1e-4), symmetrised.
/// Guarded to input dims <= 64. If any pre-activation is exactly 0 the
/// evaluation point is jittered by 1e-9 to stay off the kink.
Eigen::MatrixXd input_hessian(const MlpParams& p, const Eigen::VectorXd& x,
                              int y);

/// dir^T H dir via a central difference of the gradient along dir; equal to
/// the quadratic form of input_hessian without materialising it.
double input_quadratic_form(const MlpParams& p, const Eigen::VectorXd& x, int y,
                            const Eigen::VectorXd& dir);

// ---------------------------------------------------------------------------
// Batch forward/backward (columns are samples); shared with the trainer.
// ---------------------------------------------------------------------------

struct BatchCache {
  std::vector<Eigen::MatrixXd> activations;  // activations[0] = input
  std::vector<Eigen::MatrixXd> preacts;
};

Eigen::MatrixXd forward_batch(const MlpParams& p, const Eigen::MatrixXd& x,
                              BatchCache* cache = nullptr);

/// Mean cross-entropy over columns; fills dlogits (softmax - onehot)/B if
/// requested.
double ce_loss_batch(const Eigen::MatrixXd& logits, const std::vector<int>& y,
                     Eigen::MatrixXd* dlogits = nullptr);

struct MlpGrads {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

void backward_batch(const MlpParams& p, const BatchCache& cache,
                    const Eigen::MatrixXd& dlogits, MlpGrads& grads,
                    Eigen::MatrixXd* dinput = nullptr);

// ---------------------------------------------------------------------------
// Training and ensembles
// ---------------------------------------------------------------------------

/// Deterministic given (data, arch, cfg, stream): Gaussian init with
/// std = init_scale / sqrt(fan_in), per-epoch shuffling from the stream in
/// minibatch mode. Throws with the epoch index if the loss turns non-finite.
MlpParams train_member(const core::LabeledDataset& data,
                       const MlpArchitecture& arch, const TrainConfig& cfg,
                       core::RngStream stream);

/// M members trained on stream ids 0..M-1; member i is independent of the
/// execution schedule and thread count.
PosteriorEnsemble sample_posterior(const core::LabeledDataset& data,
                                   const MlpArchitecture& arch,
                                   const TrainConfig& cfg, int ensemble_size,
                                   std::uint64_t master_seed);

struct MomentDiagnostics {
  double mean_loss = 0.0;
  double second_moment = 0.0;
  double max_loss = 0.0;
};

MomentDiagnostics moment_diagnostics(const PosteriorEnsemble& e,
                                     const Eigen::VectorXd& x, int y);

/// Per-member loss values at (x, y), in member order.
std::vector<double> member_losses(const PosteriorEnsemble& e,
                                  const Eigen::VectorXd& x, int y);

/// Per-member input gradients at (x, y) stacked into an M x d matrix.
Eigen::MatrixXd member_input_gradients(const PosteriorEnsemble& e,
                                       const Eigen::VectorXd& x, int y);

/// Per-member quadratic forms dir^T H dir at (x, y).
std::vector<double> member_quadratic_forms(const PosteriorEnsemble& e,
                                           const Eigen::VectorXd& x, int y,
                                           const Eigen::VectorXd& dir);

/// Directory of member_<idx>.mrt1 files plus manifest.json.
void save_ensemble(const PosteriorEnsemble& e, const std::filesystem::path& dir);
PosteriorEnsemble load_ensemble(const std::filesystem::path& dir);

/// Converts rank-1 dataset inputs to a d x N matrix of sample columns.
Eigen::MatrixXd dataset_to_columns(const core::LabeledDataset& data);

/// Convenience: base dataset plus one extra labeled point.
core::LabeledDataset augment_dataset(const core::LabeledDataset& base,
                                     const Eigen::VectorXd& x, int y,
                                     const std::string& name);

}  // namespace mixres::gibbs
