// Acceptance suite: runs every criterion at its stated scale and prints one
// pass/fail line each. Exit code is the number of failed criteria.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>
#include <vector>

#include "mixres/core/stats.hpp"
#include "mixres/core/synth.hpp"
#include "mixres/influence_sim.hpp"
#include "mixres/schedule.hpp"
#include "mixres/toy.hpp"
#include "mixres/trainer.hpp"
#include "mixres/wavelet.hpp"

using namespace mixres;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Check {
  bool ok = true;
  std::ostringstream log;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      log << (log.str().empty() ? "" : "; ") << what;
    }
  }
};

double hardware_cores() {
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1.0 : static_cast<double>(hc);
}

// Stated limits assume 8 cores; on narrower machines the member-parallel
// workloads scale nearly linearly, so compare the 8-core-equivalent time.
double equivalent_seconds(double elapsed, bool core_scaled) {
  if (!core_scaled) return elapsed;
  double cores = hardware_cores();
  return cores >= 8.0 ? elapsed : elapsed * cores / 8.0;
}

// ---------------------------------------------------------------------------
// 1. Wavelet exactness
// ---------------------------------------------------------------------------

Outcome criterion_wavelet() {
  Check c;
  core::RngStream rng(1001, 0);
  double worst_recon = 0.0;
  double worst_add = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    bool image = trial % 2 == 1;
    core::Tensor x;
    if (image) {
      std::size_t side = 8 * (1 + rng.next_below(8));  // 8..64
      std::vector<double> data(side * side);
      for (auto& v : data) v = rng.next_gaussian();
      x = core::Tensor({side, side}, std::move(data));
    } else {
      std::size_t len = 8 * (1 + rng.next_below(32));  // 8..256
      std::vector<double> data(len);
      for (auto& v : data) v = rng.next_gaussian();
      x = core::Tensor({len}, std::move(data));
    }
    int max_levels = 0;
    std::size_t shortest = x.shape()[0];
    while (shortest % (std::size_t{2} << max_levels) == 0 && max_levels < 3) {
      ++max_levels;
    }
    int levels = std::max(1, max_levels);
    core::Tensor back = wavelet::dwt_inverse(wavelet::dwt_forward(x, levels));
    for (std::size_t i = 0; i < x.size(); ++i) {
      worst_recon = std::max(worst_recon,
                             std::abs(back.data()[i] - x.data()[i]));
    }
    int removed = static_cast<int>(rng.next_below(levels + 1));
    wavelet::ResolutionTriple t = wavelet::make_triple(x, levels, removed);
    for (std::size_t i = 0; i < x.size(); ++i) {
      double sum = t.x_l.data()[i] + t.x_r.data()[i];
      worst_add = std::max(worst_add, std::abs(sum - x.data()[i]));
    }
  }
  c.expect(worst_recon < 1e-10, "reconstruction error " + std::to_string(worst_recon));
  c.expect(worst_add < 1e-9, "additivity error " + std::to_string(worst_add));
  std::ostringstream detail;
  detail << "max recon " << worst_recon << ", max additivity " << worst_add;
  return {c.ok, c.ok ? detail.str() : c.log.str()};
}

// ---------------------------------------------------------------------------
// 2. Gradient oracle
// ---------------------------------------------------------------------------

Outcome criterion_gradient() {
  Check c;
  core::RngStream rng(1002, 0);
  gibbs::MlpArchitecture arch = gibbs::make_mlp_arch(8, 4, 12, 2);
  const double h = 1e-5;
  double worst = 0.0;
  int checked = 0;
  while (checked < 100) {
    gibbs::MlpParams p;
    for (int l = 0; l < arch.num_layers(); ++l) {
      int in = arch.layer_widths[l];
      int out = arch.layer_widths[l + 1];
      Eigen::MatrixXd w(out, in);
      for (int i = 0; i < out; ++i) {
        for (int j = 0; j < in; ++j) w(i, j) = 0.4 * rng.next_gaussian();
      }
      Eigen::VectorXd b(out);
      for (int i = 0; i < out; ++i) b(i) = 0.1 * rng.next_gaussian();
      p.weights.push_back(std::move(w));
      p.biases.push_back(std::move(b));
    }
    Eigen::VectorXd x(8);
    for (int i = 0; i < 8; ++i) x(i) = rng.next_gaussian();
    int y = static_cast<int>(rng.next_below(2));
    Eigen::VectorXd g = gibbs::input_gradient(p, x, y);
    // Pairs are drawn away from ReLU kinks / saturated plateaus: a
    // finite-difference quotient has no relative accuracy when the true
    // gradient is at roundoff scale.
    if (g.norm() < 1e-3) continue;
    ++checked;
    Eigen::VectorXd fd(8);
    for (int j = 0; j < 8; ++j) {
      Eigen::VectorXd xp = x, xm = x;
      xp(j) += h;
      xm(j) -= h;
      fd(j) = (gibbs::loss(p, xp, y) - gibbs::loss(p, xm, y)) / (2 * h);
    }
    double rel = (g - fd).norm() / fd.norm();
    worst = std::max(worst, rel);
  }
  c.expect(worst < 1e-5, "relative error " + std::to_string(worst));
  std::ostringstream detail;
  detail << "max relative error " << worst << " over 100 nets";
  return {c.ok, c.ok ? detail.str() : c.log.str()};
}

// ---------------------------------------------------------------------------
// 3. KL estimator oracle (conjugate Gaussian)
// ---------------------------------------------------------------------------

Outcome criterion_kl_oracle() {
  Check c;
  const int dim = 3;
  const int n = 20;
  core::RngStream data_rng(1003, 0);
  Eigen::MatrixXd points(dim, n);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < dim; ++d) points(d, i) = data_rng.next_gaussian();
  }
  Eigen::VectorXd mean = points.rowwise().mean();
  Eigen::VectorXd x_star = mean + Eigen::VectorXd::Constant(dim, 0.7);
  double closed_form =
      0.5 * (static_cast<double>(dim) / n +
             dim * std::log(static_cast<double>(n) / (n + 1)) +
             (x_star - mean).squaredNorm() / (n + 1));
  double sigma = 1.0 / std::sqrt(static_cast<double>(n));

  auto estimate = [&](int m, std::uint64_t stream_id) {
    core::RngStream rng(1003, stream_id);
    std::vector<double> losses(m);
    for (int i = 0; i < m; ++i) {
      double sq = 0.0;
      for (int d = 0; d < dim; ++d) {
        double t = mean(d) + sigma * rng.next_gaussian() - x_star(d);
        sq += t * t;
      }
      losses[i] = 0.5 * sq;
    }
    return influence::kl_from_losses(losses);
  };

  // Standard error at M = 5000 from replicate estimates.
  const int replicates = 32;
  std::vector<double> at5000(replicates);
  for (int r = 0; r < replicates; ++r) at5000[r] = estimate(5000, 100 + r);
  double se5000 = std::sqrt(core::variance(at5000));
  double first = at5000[0];
  c.expect(std::abs(first - closed_form) <= 3.0 * se5000,
           "estimate " + std::to_string(first) + " vs closed form " +
               std::to_string(closed_form) + " (3se = " +
               std::to_string(3.0 * se5000) + ")");

  // log-log slope of the standard error in M.
  std::vector<int> ms{250, 500, 1000, 2000, 4000};
  std::vector<double> log_m, log_se;
  for (std::size_t k = 0; k < ms.size(); ++k) {
    std::vector<double> reps(40);
    for (int r = 0; r < 40; ++r) {
      reps[r] = estimate(ms[k], 1000 + 100 * k + r);
    }
    log_m.push_back(std::log(static_cast<double>(ms[k])));
    log_se.push_back(std::log(std::sqrt(core::variance(reps))));
  }
  double mx = core::mean(log_m), my = core::mean(log_se);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < log_m.size(); ++k) {
    num += (log_m[k] - mx) * (log_se[k] - my);
    den += (log_m[k] - mx) * (log_m[k] - mx);
  }
  double slope = num / den;
  c.expect(std::abs(slope + 0.5) <= 0.1,
           "se slope " + std::to_string(slope) + " outside -0.5 +- 0.1");

  std::ostringstream detail;
  detail << "estimate " << first << " vs " << closed_form << " (3se "
         << 3.0 * se5000 << "), se slope " << slope;
  return {c.ok, c.ok ? detail.str() : c.log.str()};
}

// ---------------------------------------------------------------------------
// 4. Influence trend at the reference regime
// ---------------------------------------------------------------------------

Outcome criterion_influence_trends() {
  Check c;
  influence::BoundsSimConfig cfg;
  cfg.n_per_class = 100;
  cfg.side = 32;
  cfg.pca_dim = 10;
  cfg.dwt_levels = 3;
  cfg.levels_removed = {0, 1, 2, 3};
  cfg.depth = 4;
  cfg.hidden = 16;
  cfg.ensemble_size = 1000;
  cfg.seeds = {1, 2, 3, 4, 5};
  cfg.train.epochs = 150;
  cfg.train.learning_rate = 1e-3;

  std::vector<influence::BoundsRow> rows = influence::run_bounds_simulation(cfg);

  int contained = 0, cells = 0;
  std::ostringstream ratios;
  for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
    double prev_ratio = -1.0;
    for (std::size_t l = 0; l < cfg.levels_removed.size(); ++l) {
      const influence::InfluenceReport& r =
          rows[s * cfg.levels_removed.size() + l].report;
      ++cells;
      if (r.levels_removed == 0) {
        c.expect(r.ratio_exact == 1.0,
                 "seed " + std::to_string(cfg.seeds[s]) +
                     ": level-0 ratio not exactly 1");
      }
      c.expect(r.ratio_exact > prev_ratio,
               "seed " + std::to_string(cfg.seeds[s]) + ": ratio not strictly "
               "increasing at level " + std::to_string(r.levels_removed));
      prev_ratio = r.ratio_exact;
      bool in_ratio =
          r.ratio_exact >= r.ratio_lb && r.ratio_exact <= r.ratio_ub;
      bool in_diff = r.diff_exact >= r.diff_lb && r.diff_exact <= r.diff_ub;
      if (in_ratio && in_diff) ++contained;
      c.expect(r.ratio_lb_tight >= r.ratio_lb - 1e-12,
               "tight ratio bound below the plain one");
      c.expect(r.diff_lb_tight >= r.diff_lb - 1e-15,
               "tight diff bound below the plain one");
      if (s == 0) ratios << (l ? " " : "") << r.ratio_exact;
    }
  }
  double coverage = static_cast<double>(contained) / cells;
  c.expect(coverage >= 0.95,
           "containment " + std::to_string(coverage) + " below 0.95");
  std::ostringstream detail;
  detail << "seed-1 ratios [" << ratios.str() << "], containment " << contained
         << "/" << cells;
  return {c.ok, c.ok ? detail.str() : c.log.str() + "; " + detail.str()};
}

// ---------------------------------------------------------------------------
// 5. Approximation quality sweep
// ---------------------------------------------------------------------------

Outcome criterion_tightness() {
  Check c;
  std::vector<int> dims{2, 10, 50};
  std::vector<int> depths{2, 3, 4};
  std::vector<int> levels{1, 3};
  gibbs::TrainConfig tc;
  tc.epochs = 150;
  tc.learning_rate = 1e-3;

  double worst_er = 0.0;
  int gap_wins = 0;
  const std::vector<std::uint64_t> seeds{11, 12, 13, 14, 15};
  for (std::uint64_t seed : seeds) {
    std::vector<influence::TightnessRecord> records =
        influence::tightness_sweep(dims, depths, levels, tc, 500, seed);
    double gap1 = 0.0, gap3 = 0.0;
    for (const auto& rec : records) {
      if (rec.levels_removed == 3) {
        worst_er = std::max(worst_er, std::abs(rec.rel_error_var_approx));
      }
      double total_gap = rec.gap_ratio_lb + rec.gap_ratio_ub +
                         rec.gap_diff_lb + rec.gap_diff_ub;
      (rec.levels_removed == 3 ? gap3 : gap1) += total_gap;
    }
    if (gap3 > gap1) ++gap_wins;
  }
  c.expect(worst_er < 0.05, "max |e_r| " + std::to_string(worst_er));
  c.expect(gap_wins >= 4, "gap growth on only " + std::to_string(gap_wins) +
                              "/5 seeds");
  std::ostringstream detail;
  detail << "max |e_r| " << worst_er << ", gap growth on " << gap_wins
         << "/5 seeds";
  return {c.ok, c.ok ? detail.str() : c.log.str()};
}

// ---------------------------------------------------------------------------
// 6. Schedule exactness
// ---------------------------------------------------------------------------

Outcome criterion_schedules() {
  Check c;
  const double ratio_low = 0.65;
  schedule::ScheduleConfig one;
  one.kind = schedule::ScheduleKind::OnePhase;
  one.ratio_low = ratio_low;
  schedule::ScheduleConfig two;
  two.kind = schedule::ScheduleKind::TwoPhase;
  two.ratio_low = ratio_low;

  const int total = 10000;  // p values 0, 0.35, 0.7, 1 land on whole epochs
  for (double p : {0.0, 0.35, 0.7, 1.0}) {
    int epoch = static_cast<int>(p * total);
    double w1 = schedule::low_weight(one, epoch, total);
    double expect1 = ratio_low * (0.2 + 0.8 * 0.5 * (1.0 + std::cos(M_PI * p)));
    c.expect(std::abs(w1 - expect1) < 1e-12, "one-phase at p=" + std::to_string(p));

    double w2 = schedule::low_weight(two, epoch, total);
    double expect2;
    if (p <= 0.7) {
      expect2 = ratio_low * (0.05 + 0.95 * 0.5 * (1.0 + std::cos(M_PI * p / 0.7)));
    } else {
      expect2 = ratio_low * 0.05 * 0.5 * (1.0 + std::cos(M_PI * (p - 0.7) / 0.3));
    }
    c.expect(std::abs(w2 - expect2) < 1e-12, "two-phase at p=" + std::to_string(p));
  }
  c.expect(std::abs(schedule::low_weight(one, 0, total) - ratio_low) < 1e-12,
           "one-phase start");
  c.expect(std::abs(schedule::low_weight(one, total, total) - 0.2 * ratio_low) <
               1e-12,
           "one-phase end");
  c.expect(std::abs(schedule::low_weight(two, 0, total) - ratio_low) < 1e-12,
           "two-phase start");
  c.expect(std::abs(schedule::low_weight(two, total, total)) < 1e-12,
           "two-phase end");
  // Continuity at the transition epoch.
  double left = schedule::low_weight(two, 6999, total);
  double at = schedule::low_weight(two, 7000, total);
  double right = schedule::low_weight(two, 7001, total);
  c.expect(std::abs(at - 0.05 * ratio_low) < 1e-12, "transition value");
  c.expect(std::abs(left - at) < 1e-3 && std::abs(right - at) < 1e-3,
           "transition continuity");

  auto [wl, wh] = schedule::rescale_weights(0.9, 1.0, 9, 1);
  c.expect(std::abs(wl - 0.5) < 1e-12 && std::abs(wh - 5.0) < 1e-12,
           "rescale arithmetic");
  return {c.ok, c.ok ? "all schedule values exact to 1e-12" : c.log.str()};
}

// ---------------------------------------------------------------------------
// 7. Storage arithmetic
// ---------------------------------------------------------------------------

Outcome criterion_storage() {
  Check c;
  trainer::StorageReport r = trainer::storage_report(32, 12, 0.1);
  c.expect(r.downsampled_fraction == 0.140625, "downsampled fraction");
  c.expect(r.mixed_fraction == 0.2265625, "mixed fraction");
  std::ostringstream detail;
  detail << "fractions " << r.downsampled_fraction << " / " << r.mixed_fraction
         << ", cells " << r.grid_cells_red << "+" << r.grid_cells_yellow;
  return {c.ok, c.ok ? detail.str() : c.log.str()};
}

// ---------------------------------------------------------------------------
// 8. Mixed-resolution direction
// ---------------------------------------------------------------------------

Outcome criterion_mixed_training() {
  Check c;
  core::LabeledDataset data =
      core::synth_two_class_images(500, 32, core::RngStream(1008, 0));
  const int replicates = 5;

  trainer::MixTrainConfig base;
  base.high_side = 32;
  base.low_side = 8;
  base.high_fraction = 0.1;
  base.seed = 21;

  trainer::MixTrainConfig ratio_cfg = base;
  ratio_cfg.experiment = trainer::ExperimentKind::Ratio;
  trainer::ExperimentResult ratio =
      trainer::run_experiment(ratio_cfg, data, replicates);

  trainer::MixTrainConfig subset_cfg = base;
  subset_cfg.experiment = trainer::ExperimentKind::Subset;
  trainer::ExperimentResult subset =
      trainer::run_experiment(subset_cfg, data, replicates);

  int wins = 0;
  for (int i = 0; i < replicates; ++i) {
    if (ratio.replicates[i].test_accuracy > subset.replicates[i].test_accuracy) {
      ++wins;
    }
  }
  c.expect(ratio.test_accuracy_mean >= subset.test_accuracy_mean,
           "ratio mean below subset mean");
  c.expect(wins >= 4, "ratio beat subset on only " + std::to_string(wins) + "/5");

  // Size sweep: accuracy non-decreasing in the low side per replicate.
  std::vector<int> low_sides{4, 8, 16};
  std::vector<std::vector<double>> acc(low_sides.size());
  for (std::size_t k = 0; k < low_sides.size(); ++k) {
    trainer::MixTrainConfig size_cfg = base;
    size_cfg.experiment = trainer::ExperimentKind::Size;
    size_cfg.low_side = low_sides[k];
    trainer::ExperimentResult res =
        trainer::run_experiment(size_cfg, data, replicates);
    for (const auto& rep : res.replicates) {
      acc[k].push_back(rep.test_accuracy);
    }
  }
  int monotone = 0;
  for (int i = 0; i < replicates; ++i) {
    if (acc[1][i] >= acc[0][i] && acc[2][i] >= acc[1][i]) ++monotone;
  }
  c.expect(monotone >= 4,
           "size sweep monotone on only " + std::to_string(monotone) + "/5");

  std::ostringstream detail;
  detail << "ratio " << ratio.test_accuracy_mean << " vs subset "
         << subset.test_accuracy_mean << " (wins " << wins << "/5), size sweep "
         << "monotone " << monotone << "/5";
  return {c.ok, c.ok ? detail.str() : c.log.str() + "; " + detail.str()};
}

// ---------------------------------------------------------------------------
// 9. Toy example
// ---------------------------------------------------------------------------

Outcome criterion_toy() {
  Check c;
  int influence_wins = 0;
  int variance_wins = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    toy::ToyDataset data = toy::gen_toy_data(60, 60, core::RngStream(seed, 0));
    double sum_high = 0.0, sum_low = 0.0;
    int n_high = 0, n_low = 0;
    for (std::size_t i = 0; i < data.points.size(); ++i) {
      double mag = toy::influence_magnitude(data.points, data.labels, i);
      if (data.high_res[i]) {
        sum_high += mag;
        ++n_high;
      } else {
        sum_low += mag;
        ++n_low;
      }
    }
    if (sum_high / n_high > sum_low / n_low) ++influence_wins;

    core::LabeledDataset images =
        core::synth_two_class_images(30, 32, core::RngStream(seed, 1));
    std::vector<core::Tensor> textured;
    std::vector<int> labels;
    for (std::size_t i = 0; i < images.size(); ++i) {
      if (images.labels()[i] == 1) {
        textured.push_back(images.inputs()[i]);
        labels.push_back(1);
      }
    }
    core::LabeledDataset single(std::move(textured), std::move(labels), 2, "t");
    auto rows = toy::variance_vs_resolution(single, {4, 8, 16, 32});
    bool monotone = true;
    for (std::size_t k = 1; k < rows.size(); ++k) {
      if (rows[k].second < rows[k - 1].second) monotone = false;
    }
    if (monotone) ++variance_wins;
  }
  c.expect(influence_wins >= 4,
           "influence direction on only " + std::to_string(influence_wins) + "/5");
  c.expect(variance_wins >= 4,
           "variance monotone on only " + std::to_string(variance_wins) + "/5");
  std::ostringstream detail;
  detail << "influence direction " << influence_wins << "/5, variance monotone "
         << variance_wins << "/5";
  return {c.ok, c.ok ? detail.str() : c.log.str()};
}

// ---------------------------------------------------------------------------
// 10. CLI determinism
// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome criterion_cli_determinism() {
  Check c;
  fs::path dir = fs::temp_directory_path() / "mixres_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::string bin = std::string(MIXRES_BIN_DIR) + "/mixres";

  auto run_cmd = [&](const std::string& args) {
    std::string cmd = bin + " " + args + " > /dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
  };
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream out(dir / name);
    out << body;
    return (dir / name).string();
  };

  struct Job {
    std::string name;
    std::string args;
    std::vector<std::string> files;
  };
  std::vector<Job> jobs;
  std::string bounds_cfg = write(
      "bounds.toml",
      "n_per_class = 10\nside = 16\npca_dim = 4\nlevels = [0, 1]\nm = 16\n"
      "seeds = [1]\nepochs = 25\nhidden = 8\n");
  jobs.push_back({"simulate-bounds", "simulate-bounds --config " + bounds_cfg,
                  {"bounds.csv", "covariance_checks.csv"}});
  std::string tight_cfg = write("tight.toml",
                                "dims = [2, 4]\ndepths = [2]\nlevels = [1]\n"
                                "m = 12\nseeds = [1]\nepochs = 20\n");
  jobs.push_back({"tightness", "tightness --config " + tight_cfg,
                  {"tightness.csv"}});
  std::string toy_cfg = write("toy.toml",
                              "n_high = 10\nn_low = 10\nseed = 2\nimages_n = 8\n"
                              "images_side = 16\nresolutions = [4, 8]\n");
  jobs.push_back({"toy", "toy --config " + toy_cfg,
                  {"toy_points.csv", "toy_variance.csv"}});
  std::string train_cfg = write(
      "train.toml",
      "experiment = \"ratio\"\nhigh_side = 16\nlow_side = 8\nepochs = 6\n"
      "warmup_epochs = 1\nbatch_size = 16\nreplicates = 2\nn_per_class = 20\n"
      "seed = 4\n");
  jobs.push_back({"train", "train --config " + train_cfg,
                  {"train_results.csv", "loss_curves.csv"}});
  jobs.push_back({"storage", "storage --s 32 --t 12 --r 0.1",
                  {"storage.json"}});

  for (const auto& job : jobs) {
    fs::path out1 = dir / (job.name + "_t1");
    fs::path out2 = dir / (job.name + "_t4");
    int rc1 = run_cmd(job.args + " --out-dir " + out1.string() + " --threads 1");
    int rc2 = run_cmd(job.args + " --out-dir " + out2.string() + " --threads 4");
    c.expect(rc1 == 0 && rc2 == 0, job.name + " exited nonzero");
    for (const auto& file : job.files) {
      std::string a = slurp(out1 / file);
      std::string b = slurp(out2 / file);
      c.expect(!a.empty() && a == b, job.name + "/" + file + " differs");
    }
  }
  return {c.ok, c.ok ? "all command outputs byte-identical across thread counts"
                     : c.log.str()};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    std::string name;
    double limit_seconds;
    bool core_scaled;
    Outcome (*fn)();
  };
  std::vector<Criterion> criteria{
      {1, "wavelet exactness", 10.0, false, criterion_wavelet},
      {2, "gradient oracle", 5.0, false, criterion_gradient},
      {3, "kl estimator oracle", 60.0, false, criterion_kl_oracle},
      {4, "influence trend reproduction", 900.0, true, criterion_influence_trends},
      {5, "approximation quality sweep", 1200.0, true, criterion_tightness},
      {6, "schedule exactness", 1.0, false, criterion_schedules},
      {7, "storage arithmetic", 1.0, false, criterion_storage},
      {8, "mixed-resolution direction", 1800.0, true, criterion_mixed_training},
      {9, "toy example", 120.0, false, criterion_toy},
      {10, "cli determinism", 1800.0, true, criterion_cli_determinism},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criterion.fn();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    double elapsed = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start)
                         .count();
    double equivalent = equivalent_seconds(elapsed, criterion.core_scaled);
    bool in_time = equivalent <= criterion.limit_seconds;
    bool pass = outcome.pass && in_time;
    if (!pass) ++failures;
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << "criterion " << criterion.id
              << ": " << criterion.name << " (" << elapsed << " s";
    if (criterion.core_scaled && hardware_cores() < 8.0) {
      std::cout << ", 8-core-equivalent " << equivalent << " s";
    }
    std::cout << ") - " << outcome.detail;
    if (!in_time) {
      std::cout << " [over time limit " << criterion.limit_seconds << " s]";
    }
    std::cout << std::endl;
  }
  std::cout << (failures == 0 ? "ALL CRITERIA PASSED"
                              : std::to_string(failures) + " CRITERIA FAILED")
            << std::endl;
  return failures;
}
