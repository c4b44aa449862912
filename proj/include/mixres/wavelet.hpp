#pragma once

#include <array>
#include <string>
#include <vector>

#include "mixres/core/tensor.hpp"

namespace mixres::wavelet {

struct Db2Filters {
  std::array<double, 4> lowpass;
  std::array<double, 4> highpass;  // highpass[k] = (-1)^k * lowpass[3-k]
};

/// Daubechies-2 analysis pair. Synthesis uses the same coefficients
/// (orthogonal transform, inverse = transpose).
Db2Filters db2_filters();

/// Non-redundant periodized multilevel transform. details are stored
/// coarsest-first [d_J, ..., d_1]; for 2D inputs each entry packs the three
/// orientation sub-bands of one level into a single {3, r, c} tensor.
struct WaveletDecomposition {
  core::Tensor approx;
  std::vector<core::Tensor> details;
  int levels = 0;
  std::vector<std::size_t> original_shape;
  std::string mode = "periodized";

  std::size_t total_coefficients() const;
};

WaveletDecomposition dwt_forward(const core::Tensor& x, int levels);
core::Tensor dwt_inverse(const WaveletDecomposition& d);

/// x_h = x_l + x_r with x_l the reconstruction after zeroing the
/// levels_removed finest detail bands and x_r the reconstruction of those
/// bands alone. levels_removed == 0 short-circuits to an exact copy.
struct ResolutionTriple {
  core::Tensor x_h;
  core::Tensor x_l;
  core::Tensor x_r;
  int levels_removed = 0;
};

ResolutionTriple make_triple(const core::Tensor& x, int levels,
                             int levels_removed);

}  // namespace mixres::wavelet
