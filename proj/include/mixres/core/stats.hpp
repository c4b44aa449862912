#pragma once

#include <span>

namespace mixres::core {

/// Compensated (Kahan) accumulator. The bound estimators subtract
/// near-equal variances, so plain accumulation loses the digits that
/// the reports are made of.
class KahanSum {
public:
  void add(double value) {
    double y = value - compensation_;
    double t = sum_ + y;
    compensation_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

double sum(std::span<const double> values);
double mean(std::span<const double> values);
double max_value(std::span<const double> values);

/// Unbiased (N-1) sample variance, two-pass.
double variance(std::span<const double> values);

/// Unbiased (N-1) sample covariance, two-pass.
double covariance(std::span<const double> a, std::span<const double> b);

/// log(mean(exp(v))) with max-shift; safe for entries up to ~1e308 in
/// magnitude after shifting.
double log_mean_exp(std::span<const double> values);

}  // namespace mixres::core
