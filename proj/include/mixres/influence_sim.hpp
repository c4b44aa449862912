#pragma once

#include <cstdint>
#include <vector>

#include "mixres/core/dataset.hpp"
#include "mixres/influence.hpp"
#include "mixres/projection.hpp"

namespace mixres::influence {

/// Shared configuration for the bounds simulation and tightness sweeps:
/// textured two-class images, band-zeroed triples of one held-out point,
/// PCA embedding, and one ensemble pair per removed-level count.
struct BoundsSimConfig {
  int n_per_class = 100;
  int side = 32;
  int dwt_levels = 3;
  int pca_dim = 10;
  std::vector<int> levels_removed{0, 1, 2, 3};
  int depth = 4;
  int hidden = 16;
  gibbs::TrainConfig train;
  int ensemble_size = 500;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  bool second_order = false;
};

/// Projected base set (held-out point excluded) plus the projected triples
/// of the held-out point, one per levels_removed entry.
struct SimDataset {
  core::LabeledDataset base;
  std::vector<ProjectedTriple> triples;
  int eval_label = 0;
  projection::PcaModel pca;
};

/// Builds the projected dataset from raw images. PCA is fitted once on the
/// full-resolution pool and reused for every resolution, so all triples
/// live in one coordinate frame. The held-out point is the first class-1
/// image.
SimDataset prepare_sim_dataset(const core::LabeledDataset& images,
                               const BoundsSimConfig& cfg);

struct BoundsRow {
  std::uint64_t seed = 0;
  InfluenceReport report;
  CovarianceSignCheck cov;
};

/// One row per (seed, levels_removed), seed-major. The base ensemble is
/// shared across levels of a seed; each level trains its own augmented
/// ensemble.
std::vector<BoundsRow> run_bounds_simulation(const BoundsSimConfig& cfg);

}  // namespace mixres::influence
