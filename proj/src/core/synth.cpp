#include "mixres/core/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mixres::core {

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

void add_blob(std::vector<double>& img, int side, double cx, double cy,
              double sigma, double amp) {
  double inv = 1.0 / (2.0 * sigma * sigma);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      double dx = x - cx;
      double dy = y - cy;
      img[static_cast<std::size_t>(y) * side + x] +=
          amp * std::exp(-(dx * dx + dy * dy) * inv);
    }
  }
}

void add_grating(std::vector<double>& img, int side, double wavelength,
                 double theta, double phase, double amp) {
  double ux = std::cos(theta) / wavelength;
  double uy = std::sin(theta) / wavelength;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      img[static_cast<std::size_t>(y) * side + x] +=
          amp * std::sin(two_pi * (ux * x + uy * y) + phase);
    }
  }
}

Tensor make_image(int side, int label, RngStream rng) {
  std::vector<double> img(static_cast<std::size_t>(side) * side, 0.15);
  // Class signal lives at two scales: class 1 has sharper blobs and
  // stronger texture. Both classes carry randomly oriented gratings so the
  // fine-scale dimensions hold population variance rather than a bare
  // presence/absence flag.
  for (int b = 0; b < 2; ++b) {
    double cx = (0.3 + 0.4 * rng.next_double()) * side;
    double cy = (0.3 + 0.4 * rng.next_double()) * side;
    double sigma = label == 0 ? (0.20 + 0.12 * rng.next_double()) * side
                              : (0.13 + 0.09 * rng.next_double()) * side;
    double amp = 0.35 + 0.25 * rng.next_double();
    add_blob(img, side, cx, cy, sigma, amp);
  }
  // Wavelengths sit one per detail scale of a 3-level transform.
  const double wavelengths[3] = {side * 3.0 / 32.0, side * 6.0 / 32.0,
                                 side * 12.0 / 32.0};
  for (int j = 0; j < 3; ++j) {
    double theta = rng.next_double() * std::numbers::pi;
    double phase = rng.next_double() * 2.0 * std::numbers::pi;
    double amp = label == 0 ? 0.04 + 0.03 * rng.next_double()
                            : 0.06 + 0.04 * rng.next_double();
    add_grating(img, side, wavelengths[j], theta, phase, amp);
  }
  for (double& v : img) v = std::clamp(v, 0.0, 1.0);
  return Tensor({static_cast<std::size_t>(side), static_cast<std::size_t>(side)},
                std::move(img));
}

}  // namespace

LabeledDataset synth_two_class_images(int n_per_class, int side,
                                      RngStream stream) {
  if (n_per_class < 1) throw std::invalid_argument("n_per_class must be >= 1");
  if (side < 8 || !is_power_of_two(side)) {
    throw std::invalid_argument("side must be a power of two >= 8");
  }
  std::vector<Tensor> inputs;
  std::vector<int> labels;
  inputs.reserve(2 * static_cast<std::size_t>(n_per_class));
  labels.reserve(2 * static_cast<std::size_t>(n_per_class));
  for (int label = 0; label < 2; ++label) {
    for (int i = 0; i < n_per_class; ++i) {
      std::uint64_t image_index =
          static_cast<std::uint64_t>(label) * n_per_class + i;
      inputs.push_back(make_image(side, label, stream.substream(image_index)));
      labels.push_back(label);
    }
  }
  return LabeledDataset(std::move(inputs), std::move(labels), 2,
                        "synthetic-two-class-" + std::to_string(side));
}

}  // namespace mixres::core
