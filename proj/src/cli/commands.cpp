#include "mixres/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>

#include "mixres/cli/config.hpp"
#include "mixres/cli/output.hpp"
#include "mixres/core/parallel.hpp"
#include "mixres/core/stats.hpp"
#include "mixres/core/synth.hpp"
#include "mixres/influence_sim.hpp"
#include "mixres/toy.hpp"
#include "mixres/trainer.hpp"

namespace mixres::cli {

using json = nlohmann::json;

namespace {

std::string hash_hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

gibbs::TrainConfig train_config_from(const json& cfg, int default_epochs) {
  gibbs::TrainConfig tc;
  tc.epochs = get_int(cfg, "epochs", default_epochs);
  tc.learning_rate = get_double(cfg, "learning_rate", 1e-3);
  std::string opt = get_string(cfg, "optimizer", "adam");
  if (opt == "adam") {
    tc.optimizer = gibbs::Optimizer::Adam;
  } else if (opt == "gd") {
    tc.optimizer = gibbs::Optimizer::GradientDescent;
  } else {
    throw ConfigError("optimizer must be 'adam' or 'gd'");
  }
  tc.batch_size = get_int(cfg, "batch_size", 0);
  tc.weight_decay = get_double(cfg, "weight_decay", 0.0);
  tc.init_scale = get_double(cfg, "init_scale", 1.0);
  return tc;
}

struct Aggregate {
  double mean = 0.0;
  double stdev = 0.0;
};

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  a.mean = core::mean(values);
  a.stdev = values.size() > 1 ? std::sqrt(core::variance(values)) : 0.0;
  return a;
}

}  // namespace

// ---------------------------------------------------------------------------
// simulate-bounds
// ---------------------------------------------------------------------------

int cmd_simulate_bounds(const json& cfg, const GlobalOptions& opts) {
  check_known_keys(cfg,
                   {"n_per_class", "side", "pca_dim", "dwt_levels", "levels",
                    "depth", "hidden", "m", "seeds", "second_order", "epochs",
                    "learning_rate", "optimizer", "batch_size", "weight_decay",
                    "init_scale", "errorbar_multiplier"},
                   "simulate-bounds config");

  influence::BoundsSimConfig sim;
  sim.n_per_class = get_int(cfg, "n_per_class", 100);
  sim.side = get_int(cfg, "side", 32);
  sim.pca_dim = get_int(cfg, "pca_dim", 10);
  sim.dwt_levels = get_int(cfg, "dwt_levels", 3);
  sim.levels_removed = get_int_list(cfg, "levels", {0, 1, 2, 3});
  sim.depth = get_int(cfg, "depth", 4);
  sim.hidden = get_int(cfg, "hidden", 16);
  sim.ensemble_size = get_int(cfg, "m", 500);
  sim.seeds = get_u64_list(cfg, "seeds", {1, 2, 3});
  sim.second_order = get_bool(cfg, "second_order", false);
  sim.train = train_config_from(cfg, 300);
  double errorbar_multiplier = get_double(cfg, "errorbar_multiplier", 1.0);
  if (opts.seed_override) sim.seeds = {*opts.seed_override};

  RunManifest manifest;
  manifest.command = "simulate-bounds";
  manifest.config = cfg;
  manifest.config["resolved_seeds"] = sim.seeds;
  manifest.version = kVersion;
  manifest.seeds = sim.seeds;
  manifest.started_at = iso_timestamp_now();

  std::vector<influence::BoundsRow> rows = influence::run_bounds_simulation(sim);

  std::filesystem::create_directories(opts.out_dir);
  const std::vector<std::string> columns = {
      "seed",          "levels_removed",       "kl_h",
      "kl_l",          "ratio_exact",          "diff_exact",
      "ratio_var_approx", "ratio_lb",          "ratio_ub",
      "ratio_lb_tight",   "diff_lb",           "diff_ub",
      "diff_lb_tight",    "ratio_lb2",         "ratio_ub2",
      "diff_lb2",         "diff_ub2",          "residual_norm_sigma_g",
      "m_base",           "m_low",             "master_seed_base",
      "master_seed_low"};
  {
    CsvWriter csv(opts.out_dir / "bounds.csv", "manifest.json", columns);
    for (const auto& row : rows) {
      const influence::InfluenceReport& r = row.report;
      auto opt_cell = [](const std::optional<double>& v) {
        return v ? CsvWriter::cell(*v) : std::string("nan");
      };
      csv.row({CsvWriter::cell(row.seed), CsvWriter::cell(r.levels_removed),
               CsvWriter::cell(r.kl_h), CsvWriter::cell(r.kl_l),
               CsvWriter::cell(r.ratio_exact), CsvWriter::cell(r.diff_exact),
               CsvWriter::cell(r.ratio_var_approx), CsvWriter::cell(r.ratio_lb),
               CsvWriter::cell(r.ratio_ub), CsvWriter::cell(r.ratio_lb_tight),
               CsvWriter::cell(r.diff_lb), CsvWriter::cell(r.diff_ub),
               CsvWriter::cell(r.diff_lb_tight), opt_cell(r.ratio_lb2),
               opt_cell(r.ratio_ub2), opt_cell(r.diff_lb2), opt_cell(r.diff_ub2),
               CsvWriter::cell(r.residual_norm_sigma_g),
               CsvWriter::cell(r.m_base), CsvWriter::cell(r.m_low),
               CsvWriter::cell(r.master_seed_base),
               CsvWriter::cell(r.master_seed_low)});
    }
  }
  {
    CsvWriter csv(opts.out_dir / "covariance_checks.csv", "manifest.json",
                  {"seed", "levels_removed", "cov1", "cov2"});
    for (const auto& row : rows) {
      csv.row({CsvWriter::cell(row.seed),
               CsvWriter::cell(row.report.levels_removed),
               CsvWriter::cell(row.cov.cov1), CsvWriter::cell(row.cov.cov2)});
    }
  }

  // Aggregate per level over seeds for the two figures.
  auto collect = [&](auto getter) {
    std::map<int, std::vector<double>> by_level;
    for (const auto& row : rows) {
      by_level[row.report.levels_removed].push_back(getter(row.report));
    }
    Series s;
    for (const auto& [level, values] : by_level) {
      Aggregate a = aggregate(values);
      s.x.push_back(level);
      s.y.push_back(a.mean);
      s.yerr.push_back(errorbar_multiplier * a.stdev);
    }
    return s;
  };
  using Rep = influence::InfluenceReport;
  std::vector<Series> ratio_series;
  auto add_ratio = [&](const std::string& label, double (*getter)(const Rep&)) {
    Series s = collect(getter);
    s.label = label;
    ratio_series.push_back(std::move(s));
  };
  add_ratio("exact", [](const Rep& r) { return r.ratio_exact; });
  add_ratio("variance approx", [](const Rep& r) { return r.ratio_var_approx; });
  add_ratio("lower bound", [](const Rep& r) { return r.ratio_lb; });
  add_ratio("upper bound", [](const Rep& r) { return r.ratio_ub; });
  add_ratio("tight lower bound", [](const Rep& r) { return r.ratio_lb_tight; });
  write_line_chart(opts.out_dir / "bounds_ratio.svg", "Divergence ratio",
                   "levels removed", "ratio", ratio_series, 1.0);

  std::vector<Series> diff_series;
  auto add_diff = [&](const std::string& label, double (*getter)(const Rep&)) {
    Series s = collect(getter);
    s.label = label;
    diff_series.push_back(std::move(s));
  };
  add_diff("exact", [](const Rep& r) { return r.diff_exact; });
  add_diff("lower bound", [](const Rep& r) { return r.diff_lb; });
  add_diff("upper bound", [](const Rep& r) { return r.diff_ub; });
  add_diff("tight lower bound", [](const Rep& r) { return r.diff_lb_tight; });
  write_line_chart(opts.out_dir / "bounds_diff.svg", "Divergence difference",
                   "levels removed", "difference", diff_series, 0.0);

  manifest.outputs = {"bounds.csv", "covariance_checks.csv", "bounds_ratio.svg",
                      "bounds_diff.svg"};
  manifest.finished_at = iso_timestamp_now();
  write_manifest(manifest, opts.out_dir);
  return 0;
}

// ---------------------------------------------------------------------------
// tightness
// ---------------------------------------------------------------------------

int cmd_tightness(const json& cfg, const GlobalOptions& opts) {
  check_known_keys(cfg,
                   {"dims", "depths", "levels", "m", "seeds", "epochs",
                    "learning_rate", "optimizer", "batch_size", "weight_decay",
                    "init_scale"},
                   "tightness config");
  std::vector<int> dims = get_int_list(cfg, "dims", {2, 10, 50});
  std::vector<int> depths = get_int_list(cfg, "depths", {2, 3, 4});
  std::vector<int> levels = get_int_list(cfg, "levels", {1, 3});
  int m = get_int(cfg, "m", 500);
  std::vector<std::uint64_t> seeds = get_u64_list(cfg, "seeds", {1});
  gibbs::TrainConfig tc = train_config_from(cfg, 300);
  if (opts.seed_override) seeds = {*opts.seed_override};

  RunManifest manifest;
  manifest.command = "tightness";
  manifest.config = cfg;
  manifest.config["resolved_seeds"] = seeds;
  manifest.version = kVersion;
  manifest.seeds = seeds;
  manifest.started_at = iso_timestamp_now();

  std::filesystem::create_directories(opts.out_dir);
  CsvWriter csv(opts.out_dir / "tightness.csv", "manifest.json",
                {"seed", "input_dim", "depth", "levels_removed",
                 "rel_error_var_approx", "gap_ratio_lb", "gap_ratio_ub",
                 "gap_ratio_lb_tight", "gap_diff_lb", "gap_diff_ub",
                 "gap_diff_lb_tight", "sigma_l_sq", "residual_norm"});

  std::vector<std::pair<std::uint64_t, influence::TightnessRecord>> all;
  for (std::uint64_t seed : seeds) {
    std::vector<influence::TightnessRecord> records =
        influence::tightness_sweep(dims, depths, levels, tc, m, seed);
    for (const auto& rec : records) {
      csv.row({CsvWriter::cell(seed), CsvWriter::cell(rec.input_dim),
               CsvWriter::cell(rec.depth), CsvWriter::cell(rec.levels_removed),
               CsvWriter::cell(rec.rel_error_var_approx),
               CsvWriter::cell(rec.gap_ratio_lb), CsvWriter::cell(rec.gap_ratio_ub),
               CsvWriter::cell(rec.gap_ratio_lb_tight),
               CsvWriter::cell(rec.gap_diff_lb), CsvWriter::cell(rec.gap_diff_ub),
               CsvWriter::cell(rec.gap_diff_lb_tight),
               CsvWriter::cell(rec.sigma_l_sq), CsvWriter::cell(rec.residual_norm)});
      all.emplace_back(seed, rec);
    }
  }

  // Gap plots vs input dimension at the deepest removed level, per depth.
  int ref_level = *std::max_element(levels.begin(), levels.end());
  auto gap_chart = [&](const std::string& file, const std::string& title,
                       double (*lb)(const influence::TightnessRecord&),
                       double (*ub)(const influence::TightnessRecord&)) {
    std::vector<Series> series;
    for (int depth : depths) {
      Series slb, sub;
      slb.label = "lb gap, depth " + std::to_string(depth);
      sub.label = "ub gap, depth " + std::to_string(depth);
      for (const auto& [seed, rec] : all) {
        if (rec.depth != depth || rec.levels_removed != ref_level) continue;
        slb.x.push_back(rec.input_dim);
        slb.y.push_back(lb(rec));
        sub.x.push_back(rec.input_dim);
        sub.y.push_back(ub(rec));
      }
      series.push_back(std::move(slb));
      series.push_back(std::move(sub));
    }
    write_line_chart(opts.out_dir / file, title, "input dimension", "gap",
                     series);
  };
  gap_chart("gaps_ratio.svg", "Ratio bound gaps",
            [](const influence::TightnessRecord& r) { return r.gap_ratio_lb; },
            [](const influence::TightnessRecord& r) { return r.gap_ratio_ub; });
  gap_chart("gaps_diff.svg", "Difference bound gaps",
            [](const influence::TightnessRecord& r) { return r.gap_diff_lb; },
            [](const influence::TightnessRecord& r) { return r.gap_diff_ub; });

  manifest.outputs = {"tightness.csv", "gaps_ratio.svg", "gaps_diff.svg"};
  manifest.finished_at = iso_timestamp_now();
  write_manifest(manifest, opts.out_dir);
  return 0;
}

// ---------------------------------------------------------------------------
// toy
// ---------------------------------------------------------------------------

int cmd_toy(const json& cfg, const GlobalOptions& opts) {
  check_known_keys(cfg,
                   {"n_high", "n_low", "seed", "mu0_x", "mu0_y", "mu1_x",
                    "mu1_y", "sigma_xx", "sigma_xy", "sigma_yy", "images_n",
                    "images_side", "resolutions"},
                   "toy config");
  int n_high = get_int(cfg, "n_high", 60);
  int n_low = get_int(cfg, "n_low", 60);
  std::uint64_t seed = static_cast<std::uint64_t>(get_int(cfg, "seed", 1));
  if (opts.seed_override) seed = *opts.seed_override;
  toy::ToyParams params;
  params.mu0 = {get_double(cfg, "mu0_x", -1.0), get_double(cfg, "mu0_y", 0.0)};
  params.mu1 = {get_double(cfg, "mu1_x", 1.0), get_double(cfg, "mu1_y", 0.0)};
  params.sigma << get_double(cfg, "sigma_xx", 1.0), get_double(cfg, "sigma_xy", 0.0),
      get_double(cfg, "sigma_xy", 0.0), get_double(cfg, "sigma_yy", 1.0);
  int images_n = get_int(cfg, "images_n", 60);
  int images_side = get_int(cfg, "images_side", 32);
  std::vector<int> resolutions = get_int_list(cfg, "resolutions", {4, 8, 16, 32});

  RunManifest manifest;
  manifest.command = "toy";
  manifest.config = cfg;
  manifest.config["resolved_seed"] = seed;
  manifest.version = kVersion;
  manifest.seeds = {seed};
  manifest.started_at = iso_timestamp_now();

  toy::ToyDataset data = toy::gen_toy_data(n_high, n_low,
                                           core::RngStream(seed, 0), params);
  std::vector<double> influences(data.points.size());
  core::parallel_for(data.points.size(), [&](std::size_t i) {
    influences[i] = toy::influence_magnitude(data.points, data.labels, i);
  });
  toy::LdaModel lda = toy::lda_fit(data.points, data.labels);

  // Variance curve on a single textured class.
  core::LabeledDataset images = core::synth_two_class_images(
      images_n, images_side, core::RngStream(seed, 1));
  std::vector<core::Tensor> textured;
  std::vector<int> textured_labels;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images.labels()[i] == 1) {
      textured.push_back(images.inputs()[i]);
      textured_labels.push_back(1);
    }
  }
  core::LabeledDataset single_class(std::move(textured), std::move(textured_labels),
                                    2, "textured-class");
  auto variances = toy::variance_vs_resolution(single_class, resolutions);

  std::filesystem::create_directories(opts.out_dir);
  {
    CsvWriter csv(opts.out_dir / "toy_points.csv", "manifest.json",
                  {"x", "y", "label", "resolution_tag", "influence"});
    for (std::size_t i = 0; i < data.points.size(); ++i) {
      csv.row({CsvWriter::cell(data.points[i](0)),
               CsvWriter::cell(data.points[i](1)),
               CsvWriter::cell(data.labels[i]),
               std::string(data.high_res[i] ? "high" : "low"),
               CsvWriter::cell(influences[i])});
    }
  }
  {
    CsvWriter csv(opts.out_dir / "toy_variance.csv", "manifest.json",
                  {"resolution", "variance"});
    for (const auto& [res, var] : variances) {
      csv.row({CsvWriter::cell(res), CsvWriter::cell(var)});
    }
  }

  // Scatter in the style of a two-class plot: marker size tracks influence.
  double max_influence = 1e-12;
  for (double v : influences) max_influence = std::max(max_influence, v);
  std::vector<ScatterPoint> points;
  for (std::size_t i = 0; i < data.points.size(); ++i) {
    ScatterPoint p;
    p.x = data.points[i](0);
    p.y = data.points[i](1);
    p.radius = 2.0 + 10.0 * influences[i] / max_influence;
    p.color = data.labels[i] == 0 ? "#1f77b4" : "#d62728";
    points.push_back(p);
  }
  std::optional<std::pair<double, double>> line;
  if (std::abs(lda.weight(1)) > 1e-12) {
    // w0 x + w1 y + b = 0  ->  y = -(w0/w1) x - b/w1
    line = {{-lda.weight(0) / lda.weight(1), -lda.bias / lda.weight(1)}};
  }
  write_scatter_chart(opts.out_dir / "toy_scatter.svg",
                      "Parameter-change influence", points, line);

  Series var_series;
  var_series.label = "variance";
  for (const auto& [res, var] : variances) {
    var_series.x.push_back(res);
    var_series.y.push_back(var);
  }
  write_line_chart(opts.out_dir / "toy_variance.svg",
                   "Projection variance vs resolution", "resolution",
                   "top-2 variance", {var_series});

  manifest.outputs = {"toy_points.csv", "toy_variance.csv", "toy_scatter.svg",
                      "toy_variance.svg"};
  manifest.finished_at = iso_timestamp_now();
  write_manifest(manifest, opts.out_dir);
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

int cmd_train(const json& cfg, const GlobalOptions& opts) {
  check_known_keys(cfg,
                   {"experiment", "model", "high_side", "low_side",
                    "high_fraction", "grid", "epochs", "warmup_epochs",
                    "base_lr", "weight_decay", "grad_clip_norm", "schedule",
                    "rescale", "scale_consistency_weight", "batch_size",
                    "downsample_mode", "seed", "replicates", "n_per_class"},
                   "train config");
  trainer::MixTrainConfig base;
  base.experiment = trainer::experiment_from_name(get_string(cfg, "experiment", "ratio"));
  base.model = trainer::model_from_name(get_string(cfg, "model", "mlp"));
  base.high_side = get_int(cfg, "high_side", 32);
  base.low_side = get_int(cfg, "low_side", 8);
  base.high_fraction = get_double(cfg, "high_fraction", 0.1);
  base.epochs = get_int(cfg, "epochs", 100);
  base.warmup_epochs = get_int(cfg, "warmup_epochs", 20);
  base.base_lr = get_double(cfg, "base_lr", 5e-4);
  base.weight_decay = get_double(cfg, "weight_decay", 0.05);
  base.grad_clip_norm = get_double(cfg, "grad_clip_norm", 1.0);
  base.schedule_kind = schedule::schedule_from_name(
      get_string(cfg, "schedule", "one_phase_cosine"));
  base.rescale = get_bool(cfg, "rescale", true);
  base.scale_consistency_weight = get_double(cfg, "scale_consistency_weight", 0.0);
  base.batch_size = get_int(cfg, "batch_size", 64);
  base.downsample_mode = trainer::downsample_mode_from_name(
      get_string(cfg, "downsample_mode", "dwt"));
  base.seed = static_cast<std::uint64_t>(get_int(cfg, "seed", 1));
  if (opts.seed_override) base.seed = *opts.seed_override;
  int replicates = get_int(cfg, "replicates", 5);
  int n_per_class = get_int(cfg, "n_per_class", 500);
  std::vector<double> grid = get_double_list(cfg, "grid", {});

  bool grid_is_side = base.experiment == trainer::ExperimentKind::Size ||
                      base.experiment == trainer::ExperimentKind::Downsampled;
  if (grid.empty()) {
    grid = {grid_is_side ? static_cast<double>(base.low_side)
                         : base.high_fraction};
  }

  RunManifest manifest;
  manifest.command = "train";
  manifest.config = cfg;
  manifest.config["resolved_seed"] = base.seed;
  manifest.version = kVersion;
  manifest.seeds = {base.seed};
  manifest.started_at = iso_timestamp_now();

  core::LabeledDataset data = core::synth_two_class_images(
      n_per_class, base.high_side, core::RngStream(base.seed, 9000));
  manifest.dataset_hashes.push_back(hash_hex(data.content_hash()));

  std::filesystem::create_directories(opts.out_dir);
  CsvWriter results(opts.out_dir / "train_results.csv", "manifest.json",
                    {"experiment", "model", "cell", "replicate",
                     "test_accuracy", "downsampled_fraction", "mixed_fraction"});
  CsvWriter curves(opts.out_dir / "loss_curves.csv", "manifest.json",
                   {"cell", "replicate", "epoch", "lr", "w_low_eff",
                    "w_high_eff", "train_loss"});

  json summary;
  summary["experiment"] = trainer::experiment_name(base.experiment);
  summary["model"] = trainer::model_name(base.model);
  summary["config"] = cfg;
  summary["cells"] = json::array();

  Series acc_series;
  acc_series.label = "test accuracy";
  for (double cell : grid) {
    trainer::MixTrainConfig cell_cfg = base;
    if (grid_is_side) {
      cell_cfg.low_side = static_cast<int>(cell);
    } else {
      cell_cfg.high_fraction = cell;
    }
    trainer::ExperimentResult res =
        trainer::run_experiment(cell_cfg, data, replicates);
    for (const auto& rep : res.replicates) {
      results.row({trainer::experiment_name(base.experiment),
                   trainer::model_name(base.model), CsvWriter::cell(cell),
                   CsvWriter::cell(rep.replicate),
                   CsvWriter::cell(rep.test_accuracy),
                   CsvWriter::cell(res.storage.downsampled_fraction),
                   CsvWriter::cell(res.storage.mixed_fraction)});
      for (std::size_t e = 0; e < rep.epoch_train_loss.size(); ++e) {
        curves.row({CsvWriter::cell(cell), CsvWriter::cell(rep.replicate),
                    CsvWriter::cell(static_cast<int>(e)),
                    CsvWriter::cell(rep.epoch_lr[e]),
                    CsvWriter::cell(rep.epoch_w_low[e]),
                    CsvWriter::cell(rep.epoch_w_high[e]),
                    CsvWriter::cell(rep.epoch_train_loss[e])});
      }
    }
    json cell_summary;
    cell_summary["cell"] = cell;
    cell_summary["test_accuracy_mean"] = res.test_accuracy_mean;
    cell_summary["test_accuracy_std"] = res.test_accuracy_std;
    cell_summary["downsampled_fraction"] = res.storage.downsampled_fraction;
    cell_summary["mixed_fraction"] = res.storage.mixed_fraction;
    summary["cells"].push_back(cell_summary);
    acc_series.x.push_back(cell);
    acc_series.y.push_back(res.test_accuracy_mean);
    acc_series.yerr.push_back(res.test_accuracy_std);
  }

  {
    std::ofstream out(opts.out_dir / "train_summary.json", std::ios::trunc);
    out << summary.dump(2) << "\n";
  }
  write_line_chart(opts.out_dir / "accuracy.svg", "Test accuracy",
                   grid_is_side ? "low side" : "high fraction", "accuracy",
                   {acc_series});

  manifest.outputs = {"train_results.csv", "loss_curves.csv",
                      "train_summary.json", "accuracy.svg"};
  manifest.finished_at = iso_timestamp_now();
  write_manifest(manifest, opts.out_dir);
  return 0;
}

// ---------------------------------------------------------------------------
// storage
// ---------------------------------------------------------------------------

int cmd_storage(int s, int t, double r, const GlobalOptions& opts) {
  trainer::StorageReport rep = trainer::storage_report(s, t, r);
  json j;
  j["downsampled_fraction"] = rep.downsampled_fraction;
  j["mixed_fraction"] = rep.mixed_fraction;
  j["grid_cells_red"] = rep.grid_cells_red;
  j["grid_cells_yellow"] = rep.grid_cells_yellow;
  std::cout << j.dump(2) << std::endl;

  if (!opts.out_dir.empty()) {
    std::filesystem::create_directories(opts.out_dir);
    {
      std::ofstream out(opts.out_dir / "storage.json", std::ios::trunc);
      out << j.dump(2) << "\n";
    }
    write_grid_chart(opts.out_dir / "storage_grid.svg",
                     "Storage fractions (100 cells = full resolution)",
                     rep.grid_cells_red, rep.grid_cells_yellow);
    RunManifest manifest;
    manifest.command = "storage";
    manifest.config = {{"s", s}, {"t", t}, {"r", r}};
    manifest.version = kVersion;
    manifest.started_at = iso_timestamp_now();
    manifest.finished_at = manifest.started_at;
    manifest.outputs = {"storage.json", "storage_grid.svg"};
    write_manifest(manifest, opts.out_dir);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// entry point
// ---------------------------------------------------------------------------

int run_main(int argc, char** argv) {
  CLI::App app{std::string(kVersion) +
               " — datapoint influence across resolutions"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  int threads = 0;
  std::uint64_t seed_override = 0;
  bool have_seed_override = false;

  const char* env_out = std::getenv("MIXRES_OUT");
  std::string default_out = env_out ? env_out : "out";

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    if (needs_config) {
      sub->add_option("--config", config_path, "TOML or JSON config file")
          ->required();
    }
    sub->add_option("--out-dir", out_dir, "output directory")
        ->default_val(default_out);
    sub->add_option("--threads", threads, "worker thread cap (0 = all cores)");
    sub->add_option("--seed-override", seed_override,
                    "replace the config seeds with one seed")
        ->each([&](const std::string&) { have_seed_override = true; });
  };

  CLI::App* sim = app.add_subcommand("simulate-bounds",
                                     "divergence ratio/difference bounds");
  add_common(sim, true);
  CLI::App* tight = app.add_subcommand("tightness", "approximation quality sweep");
  add_common(tight, true);
  CLI::App* toy_cmd = app.add_subcommand("toy", "closed-form two-class example");
  add_common(toy_cmd, true);
  CLI::App* train = app.add_subcommand("train", "mixed-resolution experiments");
  add_common(train, true);

  CLI::App* storage = app.add_subcommand("storage", "storage fraction report");
  int s_flag = 32, t_flag = 12;
  double r_flag = 0.1;
  storage->add_option("--s", s_flag, "high-resolution side")->required();
  storage->add_option("--t", t_flag, "low-resolution side")->required();
  storage->add_option("--r", r_flag, "high-resolution fraction")->required();
  add_common(storage, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    core::set_default_thread_count(threads);
    GlobalOptions opts;
    opts.out_dir = out_dir;
    if (have_seed_override) opts.seed_override = seed_override;

    if (storage->parsed()) return cmd_storage(s_flag, t_flag, r_flag, opts);

    json cfg = load_config_file(config_path);
    if (sim->parsed()) return cmd_simulate_bounds(cfg, opts);
    if (tight->parsed()) return cmd_tightness(cfg, opts);
    if (toy_cmd->parsed()) return cmd_toy(cfg, opts);
    if (train->parsed()) return cmd_train(cfg, opts);
    std::cerr << "no subcommand selected\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace mixres::cli
