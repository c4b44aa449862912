#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mixres/core/dataset.hpp"
#include "mixres/schedule.hpp"

namespace mixres::trainer {

enum class DownsampleMode { Dwt, Haar, Area };

DownsampleMode downsample_mode_from_name(const std::string& name);
std::string downsample_mode_name(DownsampleMode mode);

/// Reduces a rank-1 signal or rank-2 square image to target_side samples
/// per axis. Power-of-two reductions use the wavelet approximation band
/// (Dwt: db2, Haar: block means) rescaled to preserve mean value; Area and
/// non-power-of-two ratios use area-weighted averaging.
core::Tensor downsample(const core::Tensor& x, int target_side,
                        DownsampleMode mode = DownsampleMode::Dwt);

/// Alignment-preserving embedding back to target_side samples per axis:
/// the synthesis transform with zeroed detail bands for Dwt/Haar, value
/// replication for Area. upsample(downsample(x)) is the low-pass part of x.
core::Tensor upsample(const core::Tensor& x, int target_side,
                      DownsampleMode mode = DownsampleMode::Dwt);

struct StorageReport {
  double downsampled_fraction = 0.0;  // t^2 / s^2
  double mixed_fraction = 0.0;        // (t^2 (1-r) + s^2 r) / s^2
  int grid_cells_red = 0;             // ceil(downsampled * 100)
  int grid_cells_yellow = 0;          // ceil(mixed * 100) - red
};

StorageReport storage_report(int s, int t, double r);

/// Huber kernel with delta = 1.
double smooth_l1(double d);

/// Smooth-L1 between per-dimension whitened feature batches (columns are
/// samples; eps = 1e-5 in the variance). Mean over all entries.
double scale_consistency_loss(const Eigen::MatrixXd& feat_high,
                              const Eigen::MatrixXd& feat_low);

enum class ExperimentKind { Subset, Ratio, Downsampled, Size };
enum class ModelKind { Mlp, Cnn };

ExperimentKind experiment_from_name(const std::string& name);
std::string experiment_name(ExperimentKind kind);
ModelKind model_from_name(const std::string& name);
std::string model_name(ModelKind kind);

struct MixTrainConfig {
  ExperimentKind experiment = ExperimentKind::Ratio;
  ModelKind model = ModelKind::Mlp;
  int high_side = 32;
  int low_side = 8;
  double high_fraction = 0.1;
  int epochs = 100;
  int warmup_epochs = 20;
  double base_lr = 5e-4;
  double weight_decay = 0.05;
  double grad_clip_norm = 1.0;
  schedule::ScheduleKind schedule_kind = schedule::ScheduleKind::OnePhase;
  double ratio_low_override = -1.0;  // < 0: use the data-derived low share
  bool rescale = true;
  double scale_consistency_weight = 0.0;
  int batch_size = 64;
  DownsampleMode downsample_mode = DownsampleMode::Dwt;
  std::uint64_t seed = 1;

  void validate() const;
};

double warmup_cosine_lr(double base_lr, int epoch, int warmup_epochs,
                        int total_epochs);

struct ReplicateResult {
  int replicate = 0;
  double test_accuracy = 0.0;
  std::vector<double> epoch_train_loss;
  std::vector<double> epoch_w_low;   // effective (post-rescale) weights
  std::vector<double> epoch_w_high;
  std::vector<double> epoch_lr;
};

struct ExperimentResult {
  MixTrainConfig config;
  double test_accuracy_mean = 0.0;
  double test_accuracy_std = 0.0;
  std::vector<ReplicateResult> replicates;
  StorageReport storage;
};

/// Runs the configured experiment for the given number of seed replicates.
/// Each replicate derives its own stream from (cfg.seed, replicate), splits
/// train/test deterministically, trains with AdamW + warmup-cosine LR +
/// gradient clipping, and evaluates on high-resolution test inputs only.
ExperimentResult run_experiment(const MixTrainConfig& cfg,
                                const core::LabeledDataset& data,
                                int replicates);

}  // namespace mixres::trainer
