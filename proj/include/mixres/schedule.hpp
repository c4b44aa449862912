#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mixres/core/rng.hpp"

namespace mixres::schedule {

enum class ScheduleKind { OnePhase, TwoPhase, Equal };

/// Low-resolution loss-weight schedule. OnePhase decays from ratio_low to
/// 0.2 * ratio_low; TwoPhase decays to floor_a * ratio_low by p_star, then
/// to 0; Equal keeps both branches at 1.
struct ScheduleConfig {
  ScheduleKind kind = ScheduleKind::OnePhase;
  double ratio_low = 0.5;
  double p_star = 0.7;
  double floor_a = 0.05;
  double w_high = 1.0;

  void validate() const;
};

/// Names accepted in trainer configs: "one_phase_cosine",
/// "two_phase_cosine", "equal".
ScheduleKind schedule_from_name(const std::string& name);
std::string schedule_name(ScheduleKind kind);

double low_weight(const ScheduleConfig& cfg, int epoch, int total_epochs);

/// Balances branch weights for unequal batch counts:
/// w' = w * 0.5 / (n / (n_low + n_high)).
std::pair<double, double> rescale_weights(double w_low, double w_high,
                                          int n_low, int n_high);

struct BatchDescriptor {
  bool high_res = false;
  std::vector<int> indices;  // sample indices within the resolution pool
};

/// Interleaved batch order: ceil(n_high / batch) high and ceil(n_low / batch)
/// low batches, every prefix within one batch of the global high:low ratio.
/// Sample order within each resolution is shuffled from the stream.
std::vector<BatchDescriptor> batch_plan(int n_high_samples, int n_low_samples,
                                        int batch_size, core::RngStream stream);

}  // namespace mixres::schedule
