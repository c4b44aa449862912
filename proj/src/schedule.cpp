#include "mixres/schedule.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mixres::schedule {

void ScheduleConfig::validate() const {
  if (ratio_low < 0.0 || ratio_low > 1.0) {
    throw std::invalid_argument("ratio_low must lie in [0, 1]");
  }
  if (!(p_star > 0.0 && p_star < 1.0)) {
    throw std::invalid_argument("p_star must lie in (0, 1)");
  }
  if (!(floor_a > 0.0 && floor_a < 1.0)) {
    throw std::invalid_argument("floor_a must lie in (0, 1)");
  }
  if (w_high != 1.0) {
    throw std::invalid_argument("w_high is fixed at 1.0");
  }
}

ScheduleKind schedule_from_name(const std::string& name) {
  if (name == "one_phase_cosine") return ScheduleKind::OnePhase;
  if (name == "two_phase_cosine") return ScheduleKind::TwoPhase;
  if (name == "equal") return ScheduleKind::Equal;
  throw std::invalid_argument("unknown schedule: " + name);
}

std::string schedule_name(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::OnePhase: return "one_phase_cosine";
    case ScheduleKind::TwoPhase: return "two_phase_cosine";
    case ScheduleKind::Equal: return "equal";
  }
  return "unknown";
}

double low_weight(const ScheduleConfig& cfg, int epoch, int total_epochs) {
  cfg.validate();
  if (total_epochs < 1) throw std::invalid_argument("total_epochs must be >= 1");
  if (epoch < 0 || epoch > total_epochs) {
    throw std::invalid_argument("epoch must lie in [0, total_epochs]");
  }
  const double p = static_cast<double>(epoch) / total_epochs;
  constexpr double pi = std::numbers::pi;
  switch (cfg.kind) {
    case ScheduleKind::Equal:
      return 1.0;
    case ScheduleKind::OnePhase: {
      double w = 0.5 * (1.0 + std::cos(pi * p));
      return cfg.ratio_low * (0.2 + 0.8 * w);
    }
    case ScheduleKind::TwoPhase: {
      if (p <= cfg.p_star) {
        double w = 0.5 * (1.0 + std::cos(pi * p / cfg.p_star));
        return cfg.ratio_low * (cfg.floor_a + (1.0 - cfg.floor_a) * w);
      }
      double w = 0.5 * (1.0 + std::cos(pi * (p - cfg.p_star) / (1.0 - cfg.p_star)));
      return cfg.ratio_low * cfg.floor_a * w;
    }
  }
  throw std::logic_error("unreachable schedule kind");
}

std::pair<double, double> rescale_weights(double w_low, double w_high,
                                          int n_low, int n_high) {
  if (n_low < 1 || n_high < 1) {
    throw std::invalid_argument("batch counts must be >= 1");
  }
  double total = static_cast<double>(n_low + n_high);
  double low = w_low * 0.5 / (static_cast<double>(n_low) / total);
  double high = w_high * 0.5 / (static_cast<double>(n_high) / total);
  return {low, high};
}

std::vector<BatchDescriptor> batch_plan(int n_high_samples, int n_low_samples,
                                        int batch_size,
                                        core::RngStream stream) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (n_high_samples < 0 || n_low_samples < 0) {
    throw std::invalid_argument("sample counts must be >= 0");
  }

  auto shuffled_indices = [](int n, core::RngStream rng) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    rng.shuffle(idx);
    return idx;
  };
  std::vector<int> high_order = shuffled_indices(n_high_samples, stream.substream(0));
  std::vector<int> low_order = shuffled_indices(n_low_samples, stream.substream(1));

  auto chunk = [batch_size](const std::vector<int>& order, bool high) {
    std::vector<BatchDescriptor> batches;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(batch_size)) {
      BatchDescriptor b;
      b.high_res = high;
      std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(batch_size));
      b.indices.assign(order.begin() + start, order.begin() + end);
      batches.push_back(std::move(b));
    }
    return batches;
  };
  std::vector<BatchDescriptor> high_batches = chunk(high_order, true);
  std::vector<BatchDescriptor> low_batches = chunk(low_order, false);

  // Largest-remainder interleave: after t emitted batches each type has
  // received floor/ceil of its proportional share, so any prefix deviates
  // from the global ratio by less than one batch.
  std::vector<BatchDescriptor> plan;
  plan.reserve(high_batches.size() + low_batches.size());
  const double nh = static_cast<double>(high_batches.size());
  const double nl = static_cast<double>(low_batches.size());
  const double total = nh + nl;
  std::size_t taken_high = 0;
  std::size_t taken_low = 0;
  while (taken_high < high_batches.size() || taken_low < low_batches.size()) {
    double step = static_cast<double>(taken_high + taken_low + 1);
    double want_high = nh * step / total - static_cast<double>(taken_high);
    double want_low = nl * step / total - static_cast<double>(taken_low);
    bool pick_high;
    if (taken_high == high_batches.size()) {
      pick_high = false;
    } else if (taken_low == low_batches.size()) {
      pick_high = true;
    } else {
      pick_high = want_high >= want_low;
    }
    if (pick_high) {
      plan.push_back(std::move(high_batches[taken_high++]));
    } else {
      plan.push_back(std::move(low_batches[taken_low++]));
    }
  }
  return plan;
}

}  // namespace mixres::schedule
