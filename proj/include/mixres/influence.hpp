#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mixres/gibbs.hpp"

namespace mixres::influence {

/// Monte Carlo divergence from per-member losses at one point:
/// log(mean(exp(-l))) + mean(l), max-shifted. Non-negative for every sample
/// (Jensen); values in (-1e-9, 0) are clamped to 0, anything lower throws.
double kl_from_losses(std::span<const double> losses);

/// kl_from_losses over an ensemble at (x, y). If declared_base_hash is
/// given it must match the ensemble's dataset hash.
double kl_exact(const gibbs::PosteriorEnsemble& e, const Eigen::VectorXd& x,
                int y, std::optional<std::uint64_t> declared_base_hash = {});

/// A resolution triple already projected into model input space;
/// x_h == x_l + x_r must hold there.
struct ProjectedTriple {
  Eigen::VectorXd x_h;
  Eigen::VectorXd x_l;
  Eigen::VectorXd x_r;
  int levels_removed = 0;
};

/// Per-ensemble statistics backing one report.
struct LossStats {
  double mean_loss_h = 0.0;
  double mean_loss_l = 0.0;
  double var_loss_h = 0.0;
  double var_loss_l = 0.0;  // sigma_l^2 under the base ensemble
  double log_mean_exp_neg_h = 0.0;
  double log_mean_exp_neg_l = 0.0;
  Eigen::VectorXd grad_mean;
  Eigen::MatrixXd grad_cov;
  std::optional<double> quad_form_std;  // Q_H(x_r), second-order only
  double zeta = 0.0;                    // under the augmented ensemble
  double c = 0.0;
};

struct InfluenceReport {
  double kl_h = 0.0;
  double kl_l = 0.0;
  double ratio_exact = 0.0;
  double diff_exact = 0.0;
  double ratio_var_approx = 0.0;
  double ratio_lb = 0.0;
  double ratio_ub = 0.0;
  double ratio_lb_tight = 0.0;
  double diff_lb = 0.0;
  double diff_ub = 0.0;
  double diff_lb_tight = 0.0;
  std::optional<double> ratio_lb2;
  std::optional<double> ratio_ub2;
  std::optional<double> diff_lb2;
  std::optional<double> diff_ub2;
  double residual_norm_sigma_g = 0.0;  // ||x_r||_{Sigma_g} under base
  int levels_removed = 0;
  int m_base = 0;
  int m_low = 0;
  std::uint64_t master_seed_base = 0;
  std::uint64_t master_seed_low = 0;
  LossStats stats;
};

/// Exact divergences, the variance approximation, first-order ratio and
/// difference bounds with their tightened variants, plus the second-order
/// bounds when requested. e_low must be trained on e_base's dataset plus
/// x_l; expected_low_hash is the hash of that augmented dataset.
InfluenceReport influence_report(const gibbs::PosteriorEnsemble& e_base,
                                 const gibbs::PosteriorEnsemble& e_low,
                                 const ProjectedTriple& triple, int y,
                                 bool with_second_order,
                                 std::uint64_t expected_low_hash);

struct CovarianceSignCheck {
  double cov1 = 0.0;  // Cov[g'x_r, loss(x_l)] under base
  double cov2 = 0.0;  // Cov[g'x_r, exp(loss(x_l))] under augmented, max-shifted
};

/// Empirical hypotheses behind the tightened lower bounds.
CovarianceSignCheck covariance_sign_check(const gibbs::PosteriorEnsemble& e_base,
                                          const gibbs::PosteriorEnsemble& e_low,
                                          const ProjectedTriple& triple, int y);

struct TightnessRecord {
  int input_dim = 0;
  int depth = 0;
  int levels_removed = 0;
  double rel_error_var_approx = 0.0;  // e_r
  double gap_ratio_lb = 0.0;          // exact - bound
  double gap_ratio_ub = 0.0;          // |bound - exact|
  double gap_ratio_lb_tight = 0.0;
  double gap_diff_lb = 0.0;
  double gap_diff_ub = 0.0;
  double gap_diff_lb_tight = 0.0;
  double sigma_l_sq = 0.0;
  double residual_norm = 0.0;
};

/// Grid sweep over projected input dimension, model depth and removed
/// levels; one record per cell, deterministic given seed. Ensembles are
/// cached per (dim, depth) across the levels axis.
std::vector<TightnessRecord> tightness_sweep(
    const std::vector<int>& dims, const std::vector<int>& depths,
    const std::vector<int>& levels_list, const gibbs::TrainConfig& base_cfg,
    int ensemble_size, std::uint64_t seed);

}  // namespace mixres::influence
