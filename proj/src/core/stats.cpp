#include "mixres/core/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace mixres::core {

double sum(std::span<const double> values) {
  KahanSum acc;
  for (double v : values) acc.add(v);
  return acc.value();
}

double mean(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean of empty range");
  return sum(values) / static_cast<double>(values.size());
}

double max_value(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("max of empty range");
  double m = values[0];
  for (double v : values) m = v > m ? v : m;
  return m;
}

double variance(std::span<const double> values) {
  if (values.size() < 2) throw std::invalid_argument("variance needs >= 2 values");
  double mu = mean(values);
  KahanSum acc;
  for (double v : values) {
    double d = v - mu;
    acc.add(d * d);
  }
  return acc.value() / static_cast<double>(values.size() - 1);
}

double covariance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("covariance length mismatch");
  if (a.size() < 2) throw std::invalid_argument("covariance needs >= 2 values");
  double mu_a = mean(a);
  double mu_b = mean(b);
  KahanSum acc;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc.add((a[i] - mu_a) * (b[i] - mu_b));
  }
  return acc.value() / static_cast<double>(a.size() - 1);
}

double log_mean_exp(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("log_mean_exp of empty range");
  double shift = max_value(values);
  KahanSum acc;
  for (double v : values) acc.add(std::exp(v - shift));
  return shift + std::log(acc.value() / static_cast<double>(values.size()));
}

}  // namespace mixres::core
