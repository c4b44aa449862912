#include "mixres/wavelet.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mixres::wavelet {

namespace {

constexpr int kTap = 4;

void check_axes(const core::Tensor& x, int levels) {
  if (levels < 1) throw std::invalid_argument("levels must be >= 1");
  if (x.rank() != 1 && x.rank() != 2) {
    throw std::invalid_argument("dwt supports rank 1 or 2 tensors");
  }
  std::size_t divisor = std::size_t{1} << levels;
  for (std::size_t axis = 0; axis < x.rank(); ++axis) {
    std::size_t len = x.shape()[axis];
    if (len % divisor != 0) {
      throw std::invalid_argument("axis " + std::to_string(axis) +
                                  " not divisible by " + std::to_string(divisor));
    }
    std::size_t max_levels = 0;
    while ((std::size_t{1} << (max_levels + 1)) <= len) ++max_levels;
    if (static_cast<std::size_t>(levels) > max_levels) {
      throw std::invalid_argument("levels exceed log2 of axis " +
                                  std::to_string(axis));
    }
  }
}

// One periodized analysis step: x (length n, even) -> approx, detail (n/2).
void analyze_1d(const double* x, std::size_t n, double* approx, double* detail) {
  const Db2Filters f = db2_filters();
  std::size_t half = n / 2;
  for (std::size_t i = 0; i < half; ++i) {
    double sa = 0.0;
    double sd = 0.0;
    for (int k = 0; k < kTap; ++k) {
      double v = x[(2 * i + k) % n];
      sa += f.lowpass[k] * v;
      sd += f.highpass[k] * v;
    }
    approx[i] = sa;
    detail[i] = sd;
  }
}

// Transpose of analyze_1d: perfect reconstruction.
void synthesize_1d(const double* approx, const double* detail, std::size_t n,
                   double* x) {
  const Db2Filters f = db2_filters();
  std::size_t half = n / 2;
  for (std::size_t i = 0; i < n; ++i) x[i] = 0.0;
  for (std::size_t i = 0; i < half; ++i) {
    for (int k = 0; k < kTap; ++k) {
      x[(2 * i + k) % n] += approx[i] * f.lowpass[k] + detail[i] * f.highpass[k];
    }
  }
}

// One separable 2D level: rows then columns. Outputs four r/2 x c/2 blocks.
void analyze_2d(const std::vector<double>& x, std::size_t r, std::size_t c,
                std::vector<double>& ll, std::vector<double>& lh,
                std::vector<double>& hl, std::vector<double>& hh) {
  std::size_t hr = r / 2;
  std::size_t hc = c / 2;
  // Row pass: each row becomes [approx | detail].
  std::vector<double> rowpass(r * c);
  std::vector<double> buf_a(hc), buf_d(hc);
  for (std::size_t i = 0; i < r; ++i) {
    analyze_1d(x.data() + i * c, c, buf_a.data(), buf_d.data());
    for (std::size_t j = 0; j < hc; ++j) {
      rowpass[i * c + j] = buf_a[j];
      rowpass[i * c + hc + j] = buf_d[j];
    }
  }
  // Column pass.
  ll.assign(hr * hc, 0.0);
  lh.assign(hr * hc, 0.0);
  hl.assign(hr * hc, 0.0);
  hh.assign(hr * hc, 0.0);
  std::vector<double> col(r), ca(hr), cd(hr);
  for (std::size_t j = 0; j < c; ++j) {
    for (std::size_t i = 0; i < r; ++i) col[i] = rowpass[i * c + j];
    analyze_1d(col.data(), r, ca.data(), cd.data());
    for (std::size_t i = 0; i < hr; ++i) {
      if (j < hc) {
        ll[i * hc + j] = ca[i];
        hl[i * hc + j] = cd[i];
      } else {
        lh[i * hc + (j - hc)] = ca[i];
        hh[i * hc + (j - hc)] = cd[i];
      }
    }
  }
}

void synthesize_2d(const std::vector<double>& ll, const std::vector<double>& lh,
                   const std::vector<double>& hl, const std::vector<double>& hh,
                   std::size_t r, std::size_t c, std::vector<double>& x) {
  std::size_t hr = r / 2;
  std::size_t hc = c / 2;
  std::vector<double> rowpass(r * c);
  std::vector<double> ca(hr), cd(hr), col(r);
  for (std::size_t j = 0; j < c; ++j) {
    for (std::size_t i = 0; i < hr; ++i) {
      if (j < hc) {
        ca[i] = ll[i * hc + j];
        cd[i] = hl[i * hc + j];
      } else {
        ca[i] = lh[i * hc + (j - hc)];
        cd[i] = hh[i * hc + (j - hc)];
      }
    }
    synthesize_1d(ca.data(), cd.data(), r, col.data());
    for (std::size_t i = 0; i < r; ++i) rowpass[i * c + j] = col[i];
  }
  x.assign(r * c, 0.0);
  std::vector<double> ra(hc), rd(hc);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < hc; ++j) {
      ra[j] = rowpass[i * c + j];
      rd[j] = rowpass[i * c + hc + j];
    }
    synthesize_1d(ra.data(), rd.data(), c, x.data() + i * c);
  }
}

WaveletDecomposition zero_like(const WaveletDecomposition& d) {
  WaveletDecomposition out = d;
  out.approx = core::Tensor::zeros(d.approx.shape());
  for (auto& band : out.details) band = core::Tensor::zeros(band.shape());
  return out;
}

}  // namespace

Db2Filters db2_filters() {
  const double s3 = std::sqrt(3.0);
  const double norm = 4.0 * std::sqrt(2.0);
  Db2Filters f;
  f.lowpass = {(1.0 + s3) / norm, (3.0 + s3) / norm, (3.0 - s3) / norm,
               (1.0 - s3) / norm};
  for (int k = 0; k < kTap; ++k) {
    f.highpass[k] = (k % 2 == 0 ? 1.0 : -1.0) * f.lowpass[kTap - 1 - k];
  }
  return f;
}

std::size_t WaveletDecomposition::total_coefficients() const {
  std::size_t n = approx.size();
  for (const auto& band : details) n += band.size();
  return n;
}

WaveletDecomposition dwt_forward(const core::Tensor& x, int levels) {
  check_axes(x, levels);
  WaveletDecomposition out;
  out.levels = levels;
  out.original_shape = x.shape();

  std::vector<core::Tensor> finest_first;
  if (x.rank() == 1) {
    std::vector<double> cur = x.data();
    for (int lev = 0; lev < levels; ++lev) {
      std::size_t n = cur.size();
      std::vector<double> a(n / 2), d(n / 2);
      analyze_1d(cur.data(), n, a.data(), d.data());
      finest_first.emplace_back(std::vector<std::size_t>{n / 2}, std::move(d));
      cur = std::move(a);
    }
    std::size_t approx_len = cur.size();
    out.approx = core::Tensor({approx_len}, std::move(cur));
  } else {
    std::vector<double> cur = x.data();
    std::size_t r = x.shape()[0];
    std::size_t c = x.shape()[1];
    for (int lev = 0; lev < levels; ++lev) {
      std::vector<double> ll, lh, hl, hh;
      analyze_2d(cur, r, c, ll, lh, hl, hh);
      r /= 2;
      c /= 2;
      std::vector<double> band;
      band.reserve(3 * r * c);
      band.insert(band.end(), lh.begin(), lh.end());
      band.insert(band.end(), hl.begin(), hl.end());
      band.insert(band.end(), hh.begin(), hh.end());
      finest_first.emplace_back(std::vector<std::size_t>{3, r, c},
                                std::move(band));
      cur = std::move(ll);
    }
    out.approx = core::Tensor({r, c}, std::move(cur));
  }
  out.details.assign(finest_first.rbegin(), finest_first.rend());
  return out;
}

core::Tensor dwt_inverse(const WaveletDecomposition& d) {
  if (d.levels < 1 || d.details.size() != static_cast<std::size_t>(d.levels)) {
    throw std::invalid_argument("decomposition holds wrong number of bands");
  }
  if (d.original_shape.size() == 1) {
    std::size_t n = d.original_shape[0];
    std::size_t coarsest = n >> d.levels;
    if (d.approx.rank() != 1 || d.approx.size() != coarsest) {
      throw std::invalid_argument("approx band shape inconsistent");
    }
    std::vector<double> cur = d.approx.data();
    for (int lev = 0; lev < d.levels; ++lev) {
      const core::Tensor& band = d.details[lev];  // coarsest-first
      if (band.rank() != 1 || band.size() != cur.size()) {
        throw std::invalid_argument("detail band " + std::to_string(lev) +
                                    " shape inconsistent");
      }
      std::vector<double> next(cur.size() * 2);
      synthesize_1d(cur.data(), band.data().data(), next.size(), next.data());
      cur = std::move(next);
    }
    return core::Tensor({n}, std::move(cur));
  }

  std::size_t rows = d.original_shape[0];
  std::size_t cols = d.original_shape[1];
  std::size_t r = rows >> d.levels;
  std::size_t c = cols >> d.levels;
  if (d.approx.rank() != 2 || d.approx.shape()[0] != r ||
      d.approx.shape()[1] != c) {
    throw std::invalid_argument("approx band shape inconsistent");
  }
  std::vector<double> cur = d.approx.data();
  for (int lev = 0; lev < d.levels; ++lev) {
    const core::Tensor& band = d.details[lev];
    if (band.rank() != 3 || band.shape()[0] != 3 || band.shape()[1] != r ||
        band.shape()[2] != c) {
      throw std::invalid_argument("detail band " + std::to_string(lev) +
                                  " shape inconsistent");
    }
    std::size_t quad = r * c;
    std::vector<double> lh(band.data().begin(), band.data().begin() + quad);
    std::vector<double> hl(band.data().begin() + quad,
                           band.data().begin() + 2 * quad);
    std::vector<double> hh(band.data().begin() + 2 * quad, band.data().end());
    std::vector<double> next;
    synthesize_2d(cur, lh, hl, hh, r * 2, c * 2, next);
    cur = std::move(next);
    r *= 2;
    c *= 2;
  }
  return core::Tensor({rows, cols}, std::move(cur));
}

ResolutionTriple make_triple(const core::Tensor& x, int levels,
                             int levels_removed) {
  if (levels_removed < 0 || levels_removed > levels) {
    throw std::invalid_argument("levels_removed must lie in [0, levels]");
  }
  if (levels_removed == 0) {
    // Exact identity keeps x_l bit-equal to x_h.
    return ResolutionTriple{x, x, core::Tensor::zeros(x.shape()), 0};
  }
  WaveletDecomposition full = dwt_forward(x, levels);
  WaveletDecomposition low = full;
  WaveletDecomposition res = zero_like(full);
  // details are coarsest-first; the finest k bands sit at the tail.
  for (int j = 0; j < levels_removed; ++j) {
    std::size_t idx = full.details.size() - 1 - j;
    low.details[idx] = core::Tensor::zeros(full.details[idx].shape());
    res.details[idx] = full.details[idx];
  }
  ResolutionTriple triple;
  triple.x_h = x;
  triple.x_l = dwt_inverse(low);
  triple.x_r = dwt_inverse(res);
  triple.levels_removed = levels_removed;
  return triple;
}

}  // namespace mixres::wavelet
