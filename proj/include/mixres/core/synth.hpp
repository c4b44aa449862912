#pragma once

#include "mixres/core/dataset.hpp"
#include "mixres/core/rng.hpp"

namespace mixres::core {

/// Two classes of side x side single-channel images in [0, 1]. Class 0 is
/// smooth Gaussian blobs; class 1 adds oriented sinusoidal texture at three
/// spatial scales (wavelengths side * {3, 6, 12} / 32), so the classes
/// separate on frequency content and each removed detail band strips part
/// of the class signal. side must be a power of two >= 8.
LabeledDataset synth_two_class_images(int n_per_class, int side,
                                      RngStream stream);

}  // namespace mixres::core
