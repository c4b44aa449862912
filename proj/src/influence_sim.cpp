#include "mixres/influence_sim.hpp"

#include <stdexcept>

#include "mixres/core/synth.hpp"
#include "mixres/wavelet.hpp"

namespace mixres::influence {

namespace {

Eigen::VectorXd flatten(const core::Tensor& t) {
  return Eigen::Map<const Eigen::VectorXd>(t.data().data(),
                                           static_cast<Eigen::Index>(t.size()));
}

core::Tensor to_rank1(const Eigen::VectorXd& v) {
  return core::Tensor({static_cast<std::size_t>(v.size())},
                      std::vector<double>(v.data(), v.data() + v.size()));
}

}  // namespace

SimDataset prepare_sim_dataset(const core::LabeledDataset& images,
                               const BoundsSimConfig& cfg) {
  const std::size_t n = images.size();
  const std::size_t pixels = images.inputs().front().size();
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(n),
                       static_cast<Eigen::Index>(pixels));
  for (std::size_t i = 0; i < n; ++i) {
    rows.row(static_cast<Eigen::Index>(i)) = flatten(images.inputs()[i]);
  }

  projection::PcaModel pca = projection::pca_fit(rows, cfg.pca_dim);

  std::size_t eval_index = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (images.labels()[i] == 1) {
      eval_index = i;
      break;
    }
  }
  if (eval_index == n) {
    throw std::invalid_argument("simulation dataset holds no class-1 point");
  }

  std::vector<core::Tensor> base_inputs;
  std::vector<int> base_labels;
  base_inputs.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (i == eval_index) continue;
    base_inputs.push_back(to_rank1(projection::project(pca, flatten(images.inputs()[i]))));
    base_labels.push_back(images.labels()[i]);
  }

  SimDataset out{
      core::LabeledDataset(std::move(base_inputs), std::move(base_labels),
                           images.num_classes(), "sim-base"),
      {},
      images.labels()[eval_index],
      std::move(pca)};

  const core::Tensor& eval_image = images.inputs()[eval_index];
  out.triples.reserve(cfg.levels_removed.size());
  for (int level : cfg.levels_removed) {
    wavelet::ResolutionTriple t =
        wavelet::make_triple(eval_image, cfg.dwt_levels, level);
    ProjectedTriple pt;
    pt.x_h = projection::project(out.pca, flatten(t.x_h));
    pt.x_l = projection::project(out.pca, flatten(t.x_l));
    pt.x_r = projection::project_residual(out.pca, flatten(t.x_r));
    pt.levels_removed = level;
    out.triples.push_back(std::move(pt));
  }
  return out;
}

std::vector<BoundsRow> run_bounds_simulation(const BoundsSimConfig& cfg) {
  std::vector<BoundsRow> rows;
  rows.reserve(cfg.seeds.size() * cfg.levels_removed.size());
  for (std::uint64_t seed : cfg.seeds) {
    core::LabeledDataset images = core::synth_two_class_images(
        cfg.n_per_class, cfg.side, core::RngStream(seed, 0));
    SimDataset prepared = prepare_sim_dataset(images, cfg);
    gibbs::MlpArchitecture arch =
        gibbs::make_mlp_arch(cfg.pca_dim, cfg.depth, cfg.hidden, 2);
    gibbs::PosteriorEnsemble e_base =
        gibbs::sample_posterior(prepared.base, arch, cfg.train,
                                cfg.ensemble_size, core::mix_seed(seed, 1));
    for (std::size_t li = 0; li < cfg.levels_removed.size(); ++li) {
      const ProjectedTriple& triple = prepared.triples[li];
      core::LabeledDataset aug = gibbs::augment_dataset(
          prepared.base, triple.x_l, prepared.eval_label, "sim-aug");
      gibbs::PosteriorEnsemble e_low = gibbs::sample_posterior(
          aug, arch, cfg.train, cfg.ensemble_size,
          core::mix_seed(seed, 100 + static_cast<std::uint64_t>(
                                         cfg.levels_removed[li])));
      BoundsRow row;
      row.seed = seed;
      row.report = influence_report(e_base, e_low, triple, prepared.eval_label,
                                    cfg.second_order, aug.content_hash());
      row.cov = covariance_sign_check(e_base, e_low, triple, prepared.eval_label);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace mixres::influence
