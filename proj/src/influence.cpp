#include "mixres/influence.hpp"

#include <cmath>
#include <stdexcept>

#include "mixres/core/stats.hpp"
#include "mixres/core/synth.hpp"
#include "mixres/influence_sim.hpp"

namespace mixres::influence {

double kl_from_losses(std::span<const double> losses) {
  if (losses.size() < 2) {
    throw std::invalid_argument("kl estimator needs >= 2 loss samples");
  }
  std::vector<double> neg(losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i) neg[i] = -losses[i];
  double kl = core::log_mean_exp(neg) + core::mean(losses);
  if (kl < -1e-9) {
    throw std::runtime_error("kl estimator negative beyond tolerance");
  }
  return kl < 0.0 ? 0.0 : kl;
}

double kl_exact(const gibbs::PosteriorEnsemble& e, const Eigen::VectorXd& x,
                int y, std::optional<std::uint64_t> declared_base_hash) {
  if (declared_base_hash && *declared_base_hash != e.dataset_hash) {
    throw std::runtime_error("dataset hash mismatch between declared base set "
                             "and ensemble");
  }
  std::vector<double> losses = gibbs::member_losses(e, x, y);
  return kl_from_losses(losses);
}

namespace {

// Gradient covariance (N-1 divisor) with compensated per-entry sums.
Eigen::MatrixXd gradient_covariance(const Eigen::MatrixXd& grads,
                                    Eigen::VectorXd& mean_out) {
  const Eigen::Index m = grads.rows();
  const Eigen::Index d = grads.cols();
  mean_out.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    core::KahanSum acc;
    for (Eigen::Index i = 0; i < m; ++i) acc.add(grads(i, j));
    mean_out(j) = acc.value() / static_cast<double>(m);
  }
  Eigen::MatrixXd cov(d, d);
  for (Eigen::Index a = 0; a < d; ++a) {
    for (Eigen::Index b = a; b < d; ++b) {
      core::KahanSum acc;
      for (Eigen::Index i = 0; i < m; ++i) {
        acc.add((grads(i, a) - mean_out(a)) * (grads(i, b) - mean_out(b)));
      }
      double v = acc.value() / static_cast<double>(m - 1);
      cov(a, b) = v;
      cov(b, a) = v;
    }
  }
  return cov;
}

// Coefficient of variation of exp(loss), computed in log space:
// cv^2 = bessel * (exp(lme(2L) - 2 lme(L)) - 1).
double cv_of_exp(std::span<const double> losses) {
  std::vector<double> doubled(losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i) doubled[i] = 2.0 * losses[i];
  double delta = core::log_mean_exp(doubled) - 2.0 * core::log_mean_exp(losses);
  double m = static_cast<double>(losses.size());
  double cv_sq = (m / (m - 1.0)) * (std::exp(delta) - 1.0);
  return std::sqrt(cv_sq > 0.0 ? cv_sq : 0.0);
}

double quadratic_norm_sq(const Eigen::MatrixXd& cov, const Eigen::VectorXd& v) {
  double q = v.dot(cov * v);
  return q > 0.0 ? q : 0.0;  // MC noise can leave a tiny negative
}

void check_triple(const ProjectedTriple& t) {
  if (t.x_h.size() != t.x_l.size() || t.x_h.size() != t.x_r.size()) {
    throw std::invalid_argument("triple dimension mismatch");
  }
}

}  // namespace

InfluenceReport influence_report(const gibbs::PosteriorEnsemble& e_base,
                                 const gibbs::PosteriorEnsemble& e_low,
                                 const ProjectedTriple& triple, int y,
                                 bool with_second_order,
                                 std::uint64_t expected_low_hash) {
  check_triple(triple);
  if (e_low.dataset_hash != expected_low_hash) {
    throw std::runtime_error(
        "augmented ensemble dataset hash does not match base set plus x_l");
  }

  InfluenceReport r;
  r.levels_removed = triple.levels_removed;
  r.m_base = e_base.size();
  r.m_low = e_low.size();
  r.master_seed_base = e_base.master_seed;
  r.master_seed_low = e_low.master_seed;

  std::vector<double> loss_h = gibbs::member_losses(e_base, triple.x_h, y);
  std::vector<double> loss_l = gibbs::member_losses(e_base, triple.x_l, y);

  r.kl_h = kl_from_losses(loss_h);
  r.kl_l = kl_from_losses(loss_l);
  if (r.kl_l < 1e-12) {
    throw std::runtime_error(
        "low-resolution KL numerically zero; ratio undefined");
  }
  r.ratio_exact = r.kl_h / r.kl_l;
  r.diff_exact = r.kl_h - r.kl_l;

  r.stats.mean_loss_h = core::mean(loss_h);
  r.stats.mean_loss_l = core::mean(loss_l);
  r.stats.var_loss_h = core::variance(loss_h);
  r.stats.var_loss_l = core::variance(loss_l);
  {
    std::vector<double> neg(loss_h.size());
    for (std::size_t i = 0; i < loss_h.size(); ++i) neg[i] = -loss_h[i];
    r.stats.log_mean_exp_neg_h = core::log_mean_exp(neg);
    for (std::size_t i = 0; i < loss_l.size(); ++i) neg[i] = -loss_l[i];
    r.stats.log_mean_exp_neg_l = core::log_mean_exp(neg);
  }
  r.ratio_var_approx = r.stats.var_loss_h / r.stats.var_loss_l;

  // Ratio bounds under the base ensemble at x_l.
  Eigen::MatrixXd grads = gibbs::member_input_gradients(e_base, triple.x_l, y);
  r.stats.grad_cov = gradient_covariance(grads, r.stats.grad_mean);
  double q = quadratic_norm_sq(r.stats.grad_cov, triple.x_r);
  double sigma_l_sq = r.stats.var_loss_l;
  double t = q / sigma_l_sq;
  double sqrt_t = std::sqrt(t);
  r.residual_norm_sigma_g = std::sqrt(q);
  r.ratio_lb = (1.0 - sqrt_t) * (1.0 - sqrt_t);
  r.ratio_ub = (1.0 + sqrt_t) * (1.0 + sqrt_t);
  r.ratio_lb_tight = 1.0 + t;

  // Difference bounds under the augmented ensemble.
  std::vector<double> loss_l_aug = gibbs::member_losses(e_low, triple.x_l, y);
  Eigen::MatrixXd grads_aug =
      gibbs::member_input_gradients(e_low, triple.x_l, y);
  Eigen::VectorXd grad_mean_aug;
  Eigen::MatrixXd cov_aug = gradient_covariance(grads_aug, grad_mean_aug);
  double q_aug = quadratic_norm_sq(cov_aug, triple.x_r);
  double norm_aug = std::sqrt(q_aug);
  double zeta = cv_of_exp(loss_l_aug);
  r.stats.zeta = zeta;
  r.stats.c = zeta;
  r.diff_lb = 0.5 * q_aug - zeta * norm_aug;
  r.diff_ub = 0.5 * q_aug + zeta * norm_aug;
  r.diff_lb_tight = 0.5 * q_aug;

  if (with_second_order) {
    // Ratio refinement under the base ensemble.
    std::vector<double> qf_base =
        gibbs::member_quadratic_forms(e_base, triple.x_l, y, triple.x_r);
    double q_h = std::sqrt(core::variance(qf_base));
    r.stats.quad_form_std = q_h;
    double sigma_l = std::sqrt(sigma_l_sq);
    double n_g = r.residual_norm_sigma_g;
    r.ratio_lb2 = ((sigma_l - n_g) * (sigma_l - n_g) + 0.25 * q_h * q_h -
                   (sigma_l * q_h + n_g * q_h)) /
                  sigma_l_sq;
    r.ratio_ub2 = ((sigma_l + n_g) * (sigma_l + n_g) + 0.25 * q_h * q_h +
                   (sigma_l * q_h + n_g * q_h)) /
                  sigma_l_sq;
    // Difference refinement under the augmented ensemble.
    std::vector<double> qf_aug =
        gibbs::member_quadratic_forms(e_low, triple.x_l, y, triple.x_r);
    double q_h_aug = std::sqrt(core::variance(qf_aug));
    double lo = norm_aug - 0.5 * q_h_aug;
    double hi = norm_aug + 0.5 * q_h_aug;
    r.diff_lb2 = 0.5 * lo * lo - zeta * hi;
    r.diff_ub2 = 0.5 * hi * hi + zeta * hi;
  }
  return r;
}

CovarianceSignCheck covariance_sign_check(
    const gibbs::PosteriorEnsemble& e_base,
    const gibbs::PosteriorEnsemble& e_low, const ProjectedTriple& triple,
    int y) {
  check_triple(triple);
  CovarianceSignCheck out;

  // cov1 under the base ensemble, plain linear space.
  {
    Eigen::MatrixXd grads = gibbs::member_input_gradients(e_base, triple.x_l, y);
    std::vector<double> proj(grads.rows());
    for (Eigen::Index i = 0; i < grads.rows(); ++i) {
      proj[static_cast<std::size_t>(i)] = grads.row(i).dot(triple.x_r);
    }
    std::vector<double> losses = gibbs::member_losses(e_base, triple.x_l, y);
    out.cov1 = core::covariance(proj, losses);
  }

  // cov2 under the augmented ensemble; exp(loss) handled with a max shift.
  {
    Eigen::MatrixXd grads = gibbs::member_input_gradients(e_low, triple.x_l, y);
    std::vector<double> proj(grads.rows());
    for (Eigen::Index i = 0; i < grads.rows(); ++i) {
      proj[static_cast<std::size_t>(i)] = grads.row(i).dot(triple.x_r);
    }
    std::vector<double> losses = gibbs::member_losses(e_low, triple.x_l, y);
    double shift = core::max_value(losses);
    std::vector<double> shifted(losses.size());
    for (std::size_t i = 0; i < losses.size(); ++i) {
      shifted[i] = std::exp(losses[i] - shift);
    }
    out.cov2 = std::exp(shift) * core::covariance(proj, shifted);
  }
  return out;
}

std::vector<TightnessRecord> tightness_sweep(
    const std::vector<int>& dims, const std::vector<int>& depths,
    const std::vector<int>& levels_list, const gibbs::TrainConfig& base_cfg,
    int ensemble_size, std::uint64_t seed) {
  BoundsSimConfig cfg;
  cfg.train = base_cfg;
  cfg.ensemble_size = ensemble_size;
  cfg.seeds = {seed};
  cfg.levels_removed = levels_list;

  std::vector<TightnessRecord> records;
  core::LabeledDataset images = core::synth_two_class_images(
      cfg.n_per_class, cfg.side, core::RngStream(seed, 0));

  for (int dim : dims) {
    cfg.pca_dim = dim;
    SimDataset prepared = prepare_sim_dataset(images, cfg);
    for (int depth : depths) {
      cfg.depth = depth;
      gibbs::MlpArchitecture arch =
          gibbs::make_mlp_arch(dim, depth, cfg.hidden, 2);
      gibbs::PosteriorEnsemble e_base = gibbs::sample_posterior(
          prepared.base, arch, cfg.train, ensemble_size,
          core::mix_seed(seed, static_cast<std::uint64_t>(dim) * 131 + depth));
      for (std::size_t li = 0; li < levels_list.size(); ++li) {
        int level = levels_list[li];
        const ProjectedTriple& triple = prepared.triples[li];
        core::LabeledDataset aug = gibbs::augment_dataset(
            prepared.base, triple.x_l, prepared.eval_label, "sweep-aug");
        gibbs::PosteriorEnsemble e_low = gibbs::sample_posterior(
            aug, arch, cfg.train, ensemble_size,
            core::mix_seed(seed, static_cast<std::uint64_t>(dim) * 131 * 977 +
                                     depth * 977 + level + 1));
        InfluenceReport rep = influence_report(e_base, e_low, triple,
                                               prepared.eval_label, false,
                                               aug.content_hash());
        TightnessRecord rec;
        rec.input_dim = dim;
        rec.depth = depth;
        rec.levels_removed = level;
        rec.rel_error_var_approx =
            (rep.ratio_exact - rep.ratio_var_approx) / rep.ratio_exact;
        rec.gap_ratio_lb = rep.ratio_exact - rep.ratio_lb;
        rec.gap_ratio_ub = std::abs(rep.ratio_ub - rep.ratio_exact);
        rec.gap_ratio_lb_tight = rep.ratio_exact - rep.ratio_lb_tight;
        rec.gap_diff_lb = rep.diff_exact - rep.diff_lb;
        rec.gap_diff_ub = std::abs(rep.diff_ub - rep.diff_exact);
        rec.gap_diff_lb_tight = rep.diff_exact - rep.diff_lb_tight;
        rec.sigma_l_sq = rep.stats.var_loss_l;
        rec.residual_norm = rep.residual_norm_sigma_g;
        records.push_back(rec);
      }
    }
  }
  return records;
}

}  // namespace mixres::influence
