#include "mixres/trainer.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <tuple>

#include "mixres/core/parallel.hpp"
#include "mixres/core/stats.hpp"
#include "mixres/gibbs.hpp"
#include "mixres/wavelet.hpp"

namespace mixres::trainer {

namespace {

bool power_of_two_ratio(int from, int to, int* k_out) {
  if (to > from || to < 1 || from % to != 0) return false;
  int ratio = from / to;
  int k = 0;
  while (ratio > 1) {
    if (ratio % 2 != 0) return false;
    ratio /= 2;
    ++k;
  }
  *k_out = k;
  return true;
}

// One periodized lowpass analysis step (decimating by 2).
std::vector<double> lowpass_step(const std::vector<double>& x,
                                 const std::vector<double>& h) {
  std::size_t n = x.size();
  std::size_t half = n / 2;
  std::vector<double> a(half, 0.0);
  for (std::size_t i = 0; i < half; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) s += h[k] * x[(2 * i + k) % n];
    a[i] = s;
  }
  return a;
}

// Transpose of lowpass_step (zero detail branch).
std::vector<double> lowpass_upstep(const std::vector<double>& a,
                                   const std::vector<double>& h) {
  std::size_t n = a.size() * 2;
  std::vector<double> x(n, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < h.size(); ++k) x[(2 * i + k) % n] += a[i] * h[k];
  }
  return x;
}

std::vector<double> filter_for(DownsampleMode mode) {
  if (mode == DownsampleMode::Haar) {
    double v = 1.0 / std::sqrt(2.0);
    return {v, v};
  }
  auto f = wavelet::db2_filters();
  return {f.lowpass.begin(), f.lowpass.end()};
}

std::vector<double> area_resample_1d(const std::vector<double>& x, int target) {
  const int n = static_cast<int>(x.size());
  std::vector<double> out(target, 0.0);
  const double ratio = static_cast<double>(n) / target;
  for (int i = 0; i < target; ++i) {
    double lo = i * ratio;
    double hi = (i + 1) * ratio;
    double acc = 0.0;
    for (int j = static_cast<int>(std::floor(lo)); j < n && j < hi; ++j) {
      double overlap = std::min<double>(hi, j + 1) - std::max<double>(lo, j);
      if (overlap > 0) acc += overlap * x[j];
    }
    out[i] = acc / ratio;
  }
  return out;
}

std::vector<double> area_upsample_1d(const std::vector<double>& x, int target) {
  const int n = static_cast<int>(x.size());
  std::vector<double> out(target);
  for (int i = 0; i < target; ++i) {
    int src = static_cast<int>((static_cast<long long>(i) * n) / target);
    out[i] = x[std::min(src, n - 1)];
  }
  return out;
}

std::vector<double> get_row(const core::Tensor& t, std::size_t i) {
  std::size_t c = t.shape()[1];
  return {t.data().begin() + i * c, t.data().begin() + (i + 1) * c};
}

core::Tensor apply_separable(
    const core::Tensor& x,
    const std::function<std::vector<double>(const std::vector<double>&)>& op_1d) {
  std::size_t rows = x.shape()[0];
  std::vector<std::vector<double>> row_out(rows);
  for (std::size_t i = 0; i < rows; ++i) row_out[i] = op_1d(get_row(x, i));
  std::size_t mid_cols = row_out[0].size();
  std::vector<double> col(rows);
  std::vector<std::vector<double>> col_out(mid_cols);
  for (std::size_t j = 0; j < mid_cols; ++j) {
    for (std::size_t i = 0; i < rows; ++i) col[i] = row_out[i][j];
    col_out[j] = op_1d(col);
  }
  std::size_t out_rows = col_out[0].size();
  std::vector<double> data(out_rows * mid_cols);
  for (std::size_t i = 0; i < out_rows; ++i) {
    for (std::size_t j = 0; j < mid_cols; ++j) {
      data[i * mid_cols + j] = col_out[j][i];
    }
  }
  return core::Tensor({out_rows, mid_cols}, std::move(data));
}

}  // namespace

DownsampleMode downsample_mode_from_name(const std::string& name) {
  if (name == "dwt") return DownsampleMode::Dwt;
  if (name == "haar") return DownsampleMode::Haar;
  if (name == "area") return DownsampleMode::Area;
  throw std::invalid_argument("unknown downsample mode: " + name);
}

std::string downsample_mode_name(DownsampleMode mode) {
  switch (mode) {
    case DownsampleMode::Dwt: return "dwt";
    case DownsampleMode::Haar: return "haar";
    case DownsampleMode::Area: return "area";
  }
  return "unknown";
}

core::Tensor downsample(const core::Tensor& x, int target_side,
                        DownsampleMode mode) {
  if (x.rank() != 1 && x.rank() != 2) {
    throw std::invalid_argument("downsample supports rank 1 or 2 tensors");
  }
  int side = static_cast<int>(x.shape()[0]);
  if (x.rank() == 2 && x.shape()[0] != x.shape()[1]) {
    throw std::invalid_argument("downsample expects square images");
  }
  if (target_side > side) throw std::invalid_argument("target exceeds source size");
  if (target_side < 1) throw std::invalid_argument("target must be >= 1");
  if (target_side == side) return x;

  int k = 0;
  bool pow2 = power_of_two_ratio(side, target_side, &k);
  if (mode == DownsampleMode::Area || !pow2) {
    if (x.rank() == 1) {
      return core::Tensor({static_cast<std::size_t>(target_side)},
                          area_resample_1d(x.data(), target_side));
    }
    return apply_separable(x, [&](const std::vector<double>& v) {
      return area_resample_1d(v, target_side);
    });
  }

  std::vector<double> h = filter_for(mode);
  // Per-axis DC gain is sqrt(2) per level; divide it out to keep means.
  double rescale = std::pow(std::sqrt(2.0), -static_cast<double>(k) * x.rank());
  if (x.rank() == 1) {
    std::vector<double> cur = x.data();
    for (int lev = 0; lev < k; ++lev) cur = lowpass_step(cur, h);
    for (double& v : cur) v *= rescale;
    return core::Tensor({static_cast<std::size_t>(target_side)}, std::move(cur));
  }
  core::Tensor cur = x;
  for (int lev = 0; lev < k; ++lev) {
    cur = apply_separable(
        cur, [&](const std::vector<double>& v) { return lowpass_step(v, h); });
  }
  for (double& v : cur.data()) v *= rescale;
  return cur;
}

core::Tensor upsample(const core::Tensor& x, int target_side,
                      DownsampleMode mode) {
  if (x.rank() != 1 && x.rank() != 2) {
    throw std::invalid_argument("upsample supports rank 1 or 2 tensors");
  }
  int side = static_cast<int>(x.shape()[0]);
  if (x.rank() == 2 && x.shape()[0] != x.shape()[1]) {
    throw std::invalid_argument("upsample expects square images");
  }
  if (target_side < side) throw std::invalid_argument("target below source size");
  if (target_side == side) return x;

  int k = 0;
  bool pow2 = power_of_two_ratio(target_side, side, &k);
  if (mode == DownsampleMode::Area || !pow2) {
    if (x.rank() == 1) {
      return core::Tensor({static_cast<std::size_t>(target_side)},
                          area_upsample_1d(x.data(), target_side));
    }
    return apply_separable(x, [&](const std::vector<double>& v) {
      return area_upsample_1d(v, target_side);
    });
  }

  std::vector<double> h = filter_for(mode);
  double rescale = std::pow(std::sqrt(2.0), static_cast<double>(k) * x.rank());
  if (x.rank() == 1) {
    std::vector<double> cur = x.data();
    for (double& v : cur) v *= rescale;
    for (int lev = 0; lev < k; ++lev) cur = lowpass_upstep(cur, h);
    return core::Tensor({static_cast<std::size_t>(target_side)}, std::move(cur));
  }
  core::Tensor cur = x;
  for (double& v : cur.data()) v *= rescale;
  for (int lev = 0; lev < k; ++lev) {
    cur = apply_separable(
        cur, [&](const std::vector<double>& v) { return lowpass_upstep(v, h); });
  }
  return cur;
}

StorageReport storage_report(int s, int t, double r) {
  if (t > s || t < 1 || s < 1) throw std::invalid_argument("need 1 <= t <= s");
  if (r < 0.0 || r > 1.0) throw std::invalid_argument("r must lie in [0, 1]");
  StorageReport rep;
  double s2 = static_cast<double>(s) * s;
  double t2 = static_cast<double>(t) * t;
  rep.downsampled_fraction = t2 / s2;
  rep.mixed_fraction = (t2 * (1.0 - r) + s2 * r) / s2;
  rep.grid_cells_red =
      static_cast<int>(std::ceil(rep.downsampled_fraction * 100.0));
  rep.grid_cells_yellow =
      static_cast<int>(std::ceil(rep.mixed_fraction * 100.0)) - rep.grid_cells_red;
  return rep;
}

double smooth_l1(double d) {
  double a = std::abs(d);
  return a <= 1.0 ? 0.5 * d * d : a - 0.5;
}

namespace {

struct Whitened {
  Eigen::MatrixXd values;
  Eigen::VectorXd inv_sd;
};

Whitened whiten_rows(const Eigen::MatrixXd& feat) {
  const double eps = 1e-5;
  const double b = static_cast<double>(feat.cols());
  Eigen::VectorXd mu = feat.rowwise().mean();
  Eigen::MatrixXd centered = feat.colwise() - mu;
  Eigen::VectorXd var = centered.array().square().rowwise().sum() / b;
  Whitened w;
  w.inv_sd = (var.array() + eps).sqrt().inverse();
  w.values = w.inv_sd.asDiagonal() * centered;
  return w;
}

}  // namespace

double scale_consistency_loss(const Eigen::MatrixXd& feat_high,
                              const Eigen::MatrixXd& feat_low) {
  if (feat_high.rows() != feat_low.rows() ||
      feat_high.cols() != feat_low.cols()) {
    throw std::invalid_argument("feature dimension mismatch");
  }
  Eigen::MatrixXd wh = whiten_rows(feat_high).values;
  Eigen::MatrixXd wl = whiten_rows(feat_low).values;
  core::KahanSum acc;
  for (Eigen::Index j = 0; j < wh.cols(); ++j) {
    for (Eigen::Index i = 0; i < wh.rows(); ++i) {
      acc.add(smooth_l1(wl(i, j) - wh(i, j)));
    }
  }
  return acc.value() / static_cast<double>(wh.size());
}

ExperimentKind experiment_from_name(const std::string& name) {
  if (name == "subset") return ExperimentKind::Subset;
  if (name == "ratio") return ExperimentKind::Ratio;
  if (name == "downsampled") return ExperimentKind::Downsampled;
  if (name == "size") return ExperimentKind::Size;
  throw std::invalid_argument("unknown experiment: " + name);
}

std::string experiment_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Subset: return "subset";
    case ExperimentKind::Ratio: return "ratio";
    case ExperimentKind::Downsampled: return "downsampled";
    case ExperimentKind::Size: return "size";
  }
  return "unknown";
}

ModelKind model_from_name(const std::string& name) {
  if (name == "mlp") return ModelKind::Mlp;
  if (name == "cnn") return ModelKind::Cnn;
  throw std::invalid_argument("unknown model: " + name);
}

std::string model_name(ModelKind kind) {
  return kind == ModelKind::Mlp ? "mlp" : "cnn";
}

void MixTrainConfig::validate() const {
  if (high_side < 1 || low_side < 1) {
    throw std::invalid_argument("sides must be >= 1");
  }
  if (low_side > high_side) {
    throw std::invalid_argument("low_side must be <= high_side");
  }
  if (!(high_fraction > 0.0 && high_fraction <= 1.0)) {
    throw std::invalid_argument("high_fraction must lie in (0, 1]");
  }
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (warmup_epochs < 0 || warmup_epochs >= epochs) {
    throw std::invalid_argument("warmup_epochs must lie in [0, epochs)");
  }
  if (!(base_lr > 0)) throw std::invalid_argument("base_lr must be > 0");
  if (weight_decay < 0) throw std::invalid_argument("weight_decay must be >= 0");
  if (!(grad_clip_norm > 0)) {
    throw std::invalid_argument("grad_clip_norm must be > 0");
  }
  if (scale_consistency_weight < 0) {
    throw std::invalid_argument("scale_consistency_weight must be >= 0");
  }
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
}

double warmup_cosine_lr(double base_lr, int epoch, int warmup_epochs,
                        int total_epochs) {
  if (epoch < warmup_epochs) {
    return base_lr * static_cast<double>(epoch + 1) / warmup_epochs;
  }
  double progress = static_cast<double>(epoch - warmup_epochs) /
                    std::max(1, total_epochs - warmup_epochs);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

// ---------------------------------------------------------------------------
// Mixed-resolution training. Columns are samples throughout.
// ---------------------------------------------------------------------------

namespace {

struct Pool {
  Eigen::MatrixXd x;  // dim x N
  std::vector<int> y;
  int side = 0;

  int count() const { return static_cast<int>(x.cols()); }
};

struct ParamBlock {
  double* data = nullptr;
  std::size_t size = 0;

  Eigen::Map<Eigen::ArrayXd> map() const {
    return Eigen::Map<Eigen::ArrayXd>(data, static_cast<Eigen::Index>(size));
  }
};

class AdamW {
public:
  void init(const std::vector<ParamBlock>& params) {
    m_.clear();
    v_.clear();
    for (const auto& p : params) {
      m_.push_back(Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(p.size)));
      v_.push_back(Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(p.size)));
    }
    t_ = 0;
  }

  void step(const std::vector<ParamBlock>& params,
            const std::vector<ParamBlock>& grads, double lr, double wd) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++t_;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto p = params[i].map();
      auto g = grads[i].map();
      m_[i] = beta1 * m_[i] + (1 - beta1) * g;
      v_[i] = beta2 * v_[i] + (1 - beta2) * g * g;
      p -= lr * wd * p;  // decoupled decay
      p -= lr * (m_[i] / bc1) / ((v_[i] / bc2).sqrt() + eps);
    }
  }

private:
  std::vector<Eigen::ArrayXd> m_, v_;
  long t_ = 0;
};

void clip_grads(const std::vector<ParamBlock>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += (g.map() * g.map()).sum();
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    double scale = max_norm / norm;
    for (const auto& g : grads) g.map() *= scale;
  }
}

// --- MLP path -------------------------------------------------------------

// Low-resolution inputs are embedded onto the high-resolution grid by the
// fixed upsample operator at data prep, so every learned weight is shared
// across resolutions and high-resolution evaluation exercises exactly the
// network the low branch trained.
class MlpMixModel {
public:
  MlpMixModel(int input_dim, int num_classes, core::RngStream init_rng) {
    gibbs::MlpArchitecture arch =
        gibbs::make_mlp_arch(input_dim, 3, 64, num_classes);
    for (int l = 0; l < arch.num_layers(); ++l) {
      int in = arch.layer_widths[l];
      int out = arch.layer_widths[l + 1];
      double sd = 1.0 / std::sqrt(static_cast<double>(in));
      Eigen::MatrixXd w(out, in);
      for (int i = 0; i < out; ++i) {
        for (int j = 0; j < in; ++j) w(i, j) = sd * init_rng.next_gaussian();
      }
      params_.weights.push_back(std::move(w));
      params_.biases.push_back(Eigen::VectorXd::Zero(out));
      grad_weights_.push_back(Eigen::MatrixXd::Zero(out, in));
      grad_biases_.push_back(Eigen::VectorXd::Zero(out));
    }
    adamw_.init(param_blocks());
  }

  struct Cache {
    gibbs::BatchCache inner;
  };

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, int /*side*/,
                          Cache& cache) const {
    return gibbs::forward_batch(params_, x, &cache.inner);
  }

  Eigen::MatrixXd features(const Cache& cache) const {
    return cache.inner.activations.back();
  }

  void zero_grads() {
    for (auto& w : grad_weights_) w.setZero();
    for (auto& b : grad_biases_) b.setZero();
  }

  void backward(const Cache& cache, const Eigen::MatrixXd& dlogits) {
    gibbs::MlpGrads local;
    gibbs::backward_batch(params_, cache.inner, dlogits, local);
    for (std::size_t l = 0; l < local.weights.size(); ++l) {
      grad_weights_[l] += local.weights[l];
      grad_biases_[l] += local.biases[l];
    }
  }

  void backward_features(const Cache& cache, const Eigen::MatrixXd& dfeat) {
    std::size_t layers = params_.weights.size();
    Eigen::MatrixXd delta =
        dfeat.array() *
        (cache.inner.preacts[layers - 2].array() > 0.0).cast<double>();
    for (std::size_t l = layers - 1; l-- > 0;) {
      grad_weights_[l] += delta * cache.inner.activations[l].transpose();
      grad_biases_[l] += delta.rowwise().sum();
      if (l > 0) {
        Eigen::MatrixXd prev = params_.weights[l].transpose() * delta;
        delta = prev.array() *
                (cache.inner.preacts[l - 1].array() > 0.0).cast<double>();
      }
    }
  }

  void apply(double lr, double wd, double clip) {
    std::vector<ParamBlock> grads = grad_blocks();
    clip_grads(grads, clip);
    adamw_.step(param_blocks(), grads, lr, wd);
  }

  Eigen::MatrixXd logits(const Eigen::MatrixXd& x, int /*side*/) const {
    return gibbs::forward_batch(params_, x);
  }

private:
  std::vector<ParamBlock> param_blocks() {
    std::vector<ParamBlock> out;
    for (std::size_t l = 0; l < params_.weights.size(); ++l) {
      out.push_back({params_.weights[l].data(),
                     static_cast<std::size_t>(params_.weights[l].size())});
      out.push_back({params_.biases[l].data(),
                     static_cast<std::size_t>(params_.biases[l].size())});
    }
    return out;
  }
  std::vector<ParamBlock> grad_blocks() {
    std::vector<ParamBlock> out;
    for (std::size_t l = 0; l < grad_weights_.size(); ++l) {
      out.push_back({grad_weights_[l].data(),
                     static_cast<std::size_t>(grad_weights_[l].size())});
      out.push_back({grad_biases_[l].data(),
                     static_cast<std::size_t>(grad_biases_[l].size())});
    }
    return out;
  }

  gibbs::MlpParams params_;
  std::vector<Eigen::MatrixXd> grad_weights_;
  std::vector<Eigen::VectorXd> grad_biases_;
  AdamW adamw_;
};

// --- CNN path ---------------------------------------------------------------

// conv3x3(1->8) ReLU, avgpool2, conv3x3(8->16) ReLU, adaptive avgpool to
// 4x4, linear classifier. Adaptive pooling makes the trunk resolution
// independent, so both branches share all weights at native resolution.
struct Planes {
  int batch = 0, channels = 0, side = 0;
  std::vector<double> v;

  void resize(int b, int c, int s) {
    batch = b;
    channels = c;
    side = s;
    v.assign(static_cast<std::size_t>(b) * c * s * s, 0.0);
  }
  double& at(int b, int c, int y, int x) {
    return v[((static_cast<std::size_t>(b) * channels + c) * side + y) * side + x];
  }
  double at(int b, int c, int y, int x) const {
    return v[((static_cast<std::size_t>(b) * channels + c) * side + y) * side + x];
  }
};

constexpr int kConv1Out = 8;
constexpr int kConv2Out = 16;
constexpr int kPoolGrid = 4;
constexpr int kFeatDim = kConv2Out * kPoolGrid * kPoolGrid;

class CnnMixModel {
public:
  CnnMixModel(int /*input_dim*/, int num_classes, core::RngStream init_rng)
      : num_classes_(num_classes) {
    auto init = [&](Eigen::VectorXd& w, int n, int fan_in) {
      w.resize(n);
      double sd = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (int i = 0; i < n; ++i) w(i) = sd * init_rng.next_gaussian();
    };
    init(conv1_w_, kConv1Out * 1 * 9, 9);
    conv1_b_ = Eigen::VectorXd::Zero(kConv1Out);
    init(conv2_w_, kConv2Out * kConv1Out * 9, kConv1Out * 9);
    conv2_b_ = Eigen::VectorXd::Zero(kConv2Out);
    fc_w_.resize(num_classes, kFeatDim);
    double sd = 1.0 / std::sqrt(static_cast<double>(kFeatDim));
    for (int i = 0; i < num_classes; ++i) {
      for (int j = 0; j < kFeatDim; ++j) fc_w_(i, j) = sd * init_rng.next_gaussian();
    }
    fc_b_ = Eigen::VectorXd::Zero(num_classes);

    g_conv1_w_ = Eigen::VectorXd::Zero(conv1_w_.size());
    g_conv1_b_ = Eigen::VectorXd::Zero(conv1_b_.size());
    g_conv2_w_ = Eigen::VectorXd::Zero(conv2_w_.size());
    g_conv2_b_ = Eigen::VectorXd::Zero(conv2_b_.size());
    g_fc_w_ = Eigen::MatrixXd::Zero(fc_w_.rows(), fc_w_.cols());
    g_fc_b_ = Eigen::VectorXd::Zero(fc_b_.size());
    adamw_.init(param_blocks());
  }

  struct Cache {
    Planes input, z1, a1, p1, z2, a2;
    Eigen::MatrixXd pooled;  // kFeatDim x B
    int side = 0;
  };

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, int side,
                          Cache& cache) const {
    const int batch = static_cast<int>(x.cols());
    if (side * side != x.rows()) {
      throw std::invalid_argument("cnn batch side mismatch");
    }
    if (side < 2) throw std::invalid_argument("cnn needs side >= 2");
    cache.side = side;
    cache.input.resize(batch, 1, side);
    for (int b = 0; b < batch; ++b) {
      for (int i = 0; i < side * side; ++i) {
        cache.input.v[static_cast<std::size_t>(b) * side * side + i] = x(i, b);
      }
    }
    conv3x3_forward(cache.input, conv1_w_, conv1_b_, kConv1Out, cache.z1);
    relu_forward(cache.z1, cache.a1);
    avgpool2_forward(cache.a1, cache.p1);
    conv3x3_forward(cache.p1, conv2_w_, conv2_b_, kConv2Out, cache.z2);
    relu_forward(cache.z2, cache.a2);
    adaptive_pool_forward(cache.a2, cache.pooled);
    return (fc_w_ * cache.pooled).colwise() + fc_b_;
  }

  Eigen::MatrixXd features(const Cache& cache) const { return cache.pooled; }

  void zero_grads() {
    g_conv1_w_.setZero();
    g_conv1_b_.setZero();
    g_conv2_w_.setZero();
    g_conv2_b_.setZero();
    g_fc_w_.setZero();
    g_fc_b_.setZero();
  }

  void backward(const Cache& cache, const Eigen::MatrixXd& dlogits) {
    g_fc_w_ += dlogits * cache.pooled.transpose();
    g_fc_b_ += dlogits.rowwise().sum();
    Eigen::MatrixXd dpooled = fc_w_.transpose() * dlogits;
    backward_from_pooled(cache, dpooled);
  }

  void backward_features(const Cache& cache, const Eigen::MatrixXd& dfeat) {
    backward_from_pooled(cache, dfeat);
  }

  void apply(double lr, double wd, double clip) {
    std::vector<ParamBlock> grads = grad_blocks();
    clip_grads(grads, clip);
    adamw_.step(param_blocks(), grads, lr, wd);
  }

  Eigen::MatrixXd logits(const Eigen::MatrixXd& x, int side) const {
    Cache cache;
    return forward(x, side, cache);
  }

private:
  void backward_from_pooled(const Cache& cache, const Eigen::MatrixXd& dpooled) {
    Planes da2;
    adaptive_pool_backward(cache.a2, dpooled, da2);
    Planes dz2;
    relu_backward(cache.z2, da2, dz2);
    Planes dp1;
    conv3x3_backward(cache.p1, conv2_w_, kConv2Out, dz2, g_conv2_w_, g_conv2_b_,
                     &dp1);
    Planes da1;
    avgpool2_backward(cache.a1, dp1, da1);
    Planes dz1;
    relu_backward(cache.z1, da1, dz1);
    conv3x3_backward(cache.input, conv1_w_, kConv1Out, dz1, g_conv1_w_,
                     g_conv1_b_, nullptr);
  }

  static void conv3x3_forward(const Planes& in, const Eigen::VectorXd& w,
                              const Eigen::VectorXd& b, int out_channels,
                              Planes& out) {
    const int s = in.side;
    out.resize(in.batch, out_channels, s);
    for (int bi = 0; bi < in.batch; ++bi) {
      for (int o = 0; o < out_channels; ++o) {
        for (int y = 0; y < s; ++y) {
          for (int x = 0; x < s; ++x) {
            double acc = b(o);
            for (int c = 0; c < in.channels; ++c) {
              for (int ky = 0; ky < 3; ++ky) {
                int iy = y + ky - 1;
                if (iy < 0 || iy >= s) continue;
                for (int kx = 0; kx < 3; ++kx) {
                  int ix = x + kx - 1;
                  if (ix < 0 || ix >= s) continue;
                  acc += w((o * in.channels + c) * 9 + ky * 3 + kx) *
                         in.at(bi, c, iy, ix);
                }
              }
            }
            out.at(bi, o, y, x) = acc;
          }
        }
      }
    }
  }

  static void conv3x3_backward(const Planes& in, const Eigen::VectorXd& w,
                               int out_channels, const Planes& dout,
                               Eigen::VectorXd& dw, Eigen::VectorXd& db,
                               Planes* din) {
    const int s = in.side;
    if (din) din->resize(in.batch, in.channels, s);
    for (int bi = 0; bi < in.batch; ++bi) {
      for (int o = 0; o < out_channels; ++o) {
        for (int y = 0; y < s; ++y) {
          for (int x = 0; x < s; ++x) {
            double d = dout.at(bi, o, y, x);
            if (d == 0.0) continue;
            db(o) += d;
            for (int c = 0; c < in.channels; ++c) {
              for (int ky = 0; ky < 3; ++ky) {
                int iy = y + ky - 1;
                if (iy < 0 || iy >= s) continue;
                for (int kx = 0; kx < 3; ++kx) {
                  int ix = x + kx - 1;
                  if (ix < 0 || ix >= s) continue;
                  dw((o * in.channels + c) * 9 + ky * 3 + kx) +=
                      d * in.at(bi, c, iy, ix);
                  if (din) {
                    din->at(bi, c, iy, ix) +=
                        d * w((o * in.channels + c) * 9 + ky * 3 + kx);
                  }
                }
              }
            }
          }
        }
      }
    }
  }

  static void relu_forward(const Planes& z, Planes& a) {
    a = z;
    for (double& v : a.v) v = v > 0.0 ? v : 0.0;
  }

  static void relu_backward(const Planes& z, const Planes& da, Planes& dz) {
    dz = da;
    for (std::size_t i = 0; i < dz.v.size(); ++i) {
      if (z.v[i] <= 0.0) dz.v[i] = 0.0;
    }
  }

  static void avgpool2_forward(const Planes& in, Planes& out) {
    const int s = in.side / 2;
    out.resize(in.batch, in.channels, s);
    for (int b = 0; b < in.batch; ++b) {
      for (int c = 0; c < in.channels; ++c) {
        for (int y = 0; y < s; ++y) {
          for (int x = 0; x < s; ++x) {
            out.at(b, c, y, x) =
                0.25 * (in.at(b, c, 2 * y, 2 * x) + in.at(b, c, 2 * y, 2 * x + 1) +
                        in.at(b, c, 2 * y + 1, 2 * x) +
                        in.at(b, c, 2 * y + 1, 2 * x + 1));
          }
        }
      }
    }
  }

  static void avgpool2_backward(const Planes& in, const Planes& dout,
                                Planes& din) {
    din.resize(in.batch, in.channels, in.side);
    const int s = in.side / 2;
    for (int b = 0; b < in.batch; ++b) {
      for (int c = 0; c < in.channels; ++c) {
        for (int y = 0; y < s; ++y) {
          for (int x = 0; x < s; ++x) {
            double d = 0.25 * dout.at(b, c, y, x);
            din.at(b, c, 2 * y, 2 * x) += d;
            din.at(b, c, 2 * y, 2 * x + 1) += d;
            din.at(b, c, 2 * y + 1, 2 * x) += d;
            din.at(b, c, 2 * y + 1, 2 * x + 1) += d;
          }
        }
      }
    }
  }

  // Region [floor(i*H/G), ceil((i+1)*H/G)) per output cell; works for H < G.
  static void pool_region(int i, int extent, int grid, int* begin, int* end) {
    *begin = (i * extent) / grid;
    *end = ((i + 1) * extent + grid - 1) / grid;
    if (*end <= *begin) *end = *begin + 1;
  }

  static void adaptive_pool_forward(const Planes& in, Eigen::MatrixXd& pooled) {
    pooled.resize(kFeatDim, in.batch);
    for (int b = 0; b < in.batch; ++b) {
      for (int c = 0; c < in.channels; ++c) {
        for (int gy = 0; gy < kPoolGrid; ++gy) {
          int y0, y1;
          pool_region(gy, in.side, kPoolGrid, &y0, &y1);
          for (int gx = 0; gx < kPoolGrid; ++gx) {
            int x0, x1;
            pool_region(gx, in.side, kPoolGrid, &x0, &x1);
            double acc = 0.0;
            for (int y = y0; y < y1; ++y) {
              for (int x = x0; x < x1; ++x) acc += in.at(b, c, y, x);
            }
            pooled((c * kPoolGrid + gy) * kPoolGrid + gx, b) =
                acc / ((y1 - y0) * (x1 - x0));
          }
        }
      }
    }
  }

  static void adaptive_pool_backward(const Planes& in,
                                     const Eigen::MatrixXd& dpooled,
                                     Planes& din) {
    din.resize(in.batch, in.channels, in.side);
    for (int b = 0; b < in.batch; ++b) {
      for (int c = 0; c < in.channels; ++c) {
        for (int gy = 0; gy < kPoolGrid; ++gy) {
          int y0, y1;
          pool_region(gy, in.side, kPoolGrid, &y0, &y1);
          for (int gx = 0; gx < kPoolGrid; ++gx) {
            int x0, x1;
            pool_region(gx, in.side, kPoolGrid, &x0, &x1);
            double d = dpooled((c * kPoolGrid + gy) * kPoolGrid + gx, b) /
                       ((y1 - y0) * (x1 - x0));
            for (int y = y0; y < y1; ++y) {
              for (int x = x0; x < x1; ++x) din.at(b, c, y, x) += d;
            }
          }
        }
      }
    }
  }

  std::vector<ParamBlock> param_blocks() {
    return {{conv1_w_.data(), static_cast<std::size_t>(conv1_w_.size())},
            {conv1_b_.data(), static_cast<std::size_t>(conv1_b_.size())},
            {conv2_w_.data(), static_cast<std::size_t>(conv2_w_.size())},
            {conv2_b_.data(), static_cast<std::size_t>(conv2_b_.size())},
            {fc_w_.data(), static_cast<std::size_t>(fc_w_.size())},
            {fc_b_.data(), static_cast<std::size_t>(fc_b_.size())}};
  }
  std::vector<ParamBlock> grad_blocks() {
    return {{g_conv1_w_.data(), static_cast<std::size_t>(g_conv1_w_.size())},
            {g_conv1_b_.data(), static_cast<std::size_t>(g_conv1_b_.size())},
            {g_conv2_w_.data(), static_cast<std::size_t>(g_conv2_w_.size())},
            {g_conv2_b_.data(), static_cast<std::size_t>(g_conv2_b_.size())},
            {g_fc_w_.data(), static_cast<std::size_t>(g_fc_w_.size())},
            {g_fc_b_.data(), static_cast<std::size_t>(g_fc_b_.size())}};
  }

  int num_classes_;
  Eigen::VectorXd conv1_w_, conv1_b_, conv2_w_, conv2_b_;
  Eigen::MatrixXd fc_w_;
  Eigen::VectorXd fc_b_;
  Eigen::VectorXd g_conv1_w_, g_conv1_b_, g_conv2_w_, g_conv2_b_;
  Eigen::MatrixXd g_fc_w_;
  Eigen::VectorXd g_fc_b_;
  AdamW adamw_;
};

// --- Replicate training -----------------------------------------------------

struct PreparedData {
  Pool high;
  Pool low;
  Pool test;  // always high resolution
  int num_classes = 0;
};

Eigen::VectorXd flatten_tensor(const core::Tensor& t) {
  return Eigen::Map<const Eigen::VectorXd>(t.data().data(),
                                           static_cast<Eigen::Index>(t.size()));
}

PreparedData prepare_replicate_data(const MixTrainConfig& cfg,
                                    const core::LabeledDataset& data,
                                    core::RngStream& stream) {
  const int n = static_cast<int>(data.size());
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  core::RngStream split_rng = stream.substream(0);
  split_rng.shuffle(order);

  int n_test = std::max(1, n / 4);
  int n_train = n - n_test;
  if (n_train < 2) throw std::invalid_argument("dataset too small to split");

  double r = cfg.experiment == ExperimentKind::Size ? 0.1 : cfg.high_fraction;
  int n_high = 0;
  bool merge_low = cfg.low_side == cfg.high_side;
  switch (cfg.experiment) {
    case ExperimentKind::Subset:
      n_high = static_cast<int>(std::ceil(r * n_train));
      break;
    case ExperimentKind::Downsampled:
      n_high = 0;
      break;
    case ExperimentKind::Ratio:
    case ExperimentKind::Size:
      n_high = static_cast<int>(std::ceil(r * n_train));
      break;
  }
  n_high = std::min(n_high, n_train);

  bool keep_rest_low = cfg.experiment == ExperimentKind::Ratio ||
                       cfg.experiment == ExperimentKind::Size ||
                       cfg.experiment == ExperimentKind::Downsampled;

  std::vector<int> test_idx(order.begin(), order.begin() + n_test);
  std::vector<int> high_idx;
  std::vector<int> low_idx;
  for (int i = 0; i < n_train; ++i) {
    int idx = order[n_test + i];
    if (i < n_high) {
      high_idx.push_back(idx);
    } else if (keep_rest_low) {
      if (merge_low) {
        high_idx.push_back(idx);  // same resolution: one pool
      } else {
        low_idx.push_back(idx);
      }
    }
  }

  const bool mlp = cfg.model == ModelKind::Mlp;
  const core::Tensor& first = data.inputs().front();
  if (static_cast<int>(first.shape()[0]) != cfg.high_side) {
    throw std::invalid_argument("dataset resolution does not match high_side");
  }
  const int high_dim = static_cast<int>(first.size());
  const int low_dim_native = first.rank() == 2
                                 ? cfg.low_side * cfg.low_side
                                 : cfg.low_side;

  PreparedData out;
  out.num_classes = data.num_classes();

  auto fill_high = [&](const std::vector<int>& idx, Pool& pool) {
    pool.side = cfg.high_side;
    pool.x.resize(high_dim, static_cast<Eigen::Index>(idx.size()));
    pool.y.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      pool.x.col(static_cast<Eigen::Index>(i)) =
          flatten_tensor(data.inputs()[idx[i]]);
      pool.y[i] = data.labels()[idx[i]];
    }
  };
  fill_high(high_idx, out.high);
  fill_high(test_idx, out.test);

  out.low.side = mlp ? cfg.high_side : cfg.low_side;
  out.low.x.resize(mlp ? high_dim : low_dim_native,
                   static_cast<Eigen::Index>(low_idx.size()));
  out.low.y.resize(low_idx.size());
  for (std::size_t i = 0; i < low_idx.size(); ++i) {
    core::Tensor small =
        downsample(data.inputs()[low_idx[i]], cfg.low_side, cfg.downsample_mode);
    core::Tensor stored =
        mlp ? upsample(small, cfg.high_side, cfg.downsample_mode) : small;
    out.low.x.col(static_cast<Eigen::Index>(i)) = flatten_tensor(stored);
    out.low.y[i] = data.labels()[low_idx[i]];
  }
  return out;
}

double accuracy(const Eigen::MatrixXd& logits, const std::vector<int>& y) {
  int correct = 0;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    Eigen::Index arg = 0;
    logits.col(c).maxCoeff(&arg);
    if (static_cast<int>(arg) == y[static_cast<std::size_t>(c)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.cols());
}

template <class Model>
ReplicateResult train_replicate(const MixTrainConfig& cfg,
                                const PreparedData& data, int replicate,
                                core::RngStream stream) {
  Model model(static_cast<int>(data.high.x.rows()), data.num_classes,
              stream.substream(1));

  const int nh = data.high.count();
  const int nl = data.low.count();
  schedule::ScheduleConfig sched;
  sched.kind = cfg.schedule_kind;
  double low_share = (nh + nl) > 0
                         ? static_cast<double>(nl) / static_cast<double>(nh + nl)
                         : 0.0;
  sched.ratio_low = cfg.ratio_low_override >= 0.0 ? cfg.ratio_low_override
                                                  : low_share;

  ReplicateResult result;
  result.replicate = replicate;

  typename Model::Cache cache, low_cache;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr = warmup_cosine_lr(cfg.base_lr, epoch, cfg.warmup_epochs, cfg.epochs);
    auto plan = schedule::batch_plan(nh, nl, cfg.batch_size,
                                     stream.substream(1000 + epoch));
    int n_high_batches = 0, n_low_batches = 0;
    for (const auto& b : plan) (b.high_res ? n_high_batches : n_low_batches)++;

    double w_low = schedule::low_weight(sched, epoch, cfg.epochs);
    double w_high = 1.0;
    if (cfg.schedule_kind != schedule::ScheduleKind::Equal && cfg.rescale &&
        n_low_batches > 0 && n_high_batches > 0) {
      std::tie(w_low, w_high) =
          schedule::rescale_weights(w_low, w_high, n_low_batches, n_high_batches);
    }
    if (n_low_batches == 0) w_high = 1.0;
    if (n_high_batches == 0) w_low = 1.0;  // single-branch training

    core::KahanSum epoch_loss;
    for (const auto& batch : plan) {
      const Pool& pool = batch.high_res ? data.high : data.low;
      const double weight = batch.high_res ? w_high : w_low;
      Eigen::MatrixXd xb(pool.x.rows(),
                         static_cast<Eigen::Index>(batch.indices.size()));
      std::vector<int> yb(batch.indices.size());
      for (std::size_t i = 0; i < batch.indices.size(); ++i) {
        xb.col(static_cast<Eigen::Index>(i)) = pool.x.col(batch.indices[i]);
        yb[i] = pool.y[batch.indices[i]];
      }

      model.zero_grads();
      Eigen::MatrixXd logits = model.forward(xb, pool.side, cache);
      Eigen::MatrixXd dlogits;
      double ce = gibbs::ce_loss_batch(logits, yb, &dlogits);
      if (!std::isfinite(ce)) {
        throw std::runtime_error("replicate " + std::to_string(replicate) +
                                 " diverged at epoch " + std::to_string(epoch));
      }
      dlogits *= weight;
      model.backward(cache, dlogits);
      epoch_loss.add(weight * ce);

      if (batch.high_res && cfg.scale_consistency_weight > 0.0 &&
          xb.cols() >= 2) {
        // Re-pass the same samples after downsampling; the high features act
        // as the (detached) target.
        Eigen::MatrixXd xlow(data.low.x.rows(), xb.cols());
        for (Eigen::Index i = 0; i < xb.cols(); ++i) {
          std::vector<double> raw(xb.col(i).data(),
                                  xb.col(i).data() + xb.rows());
          core::Tensor img =
              pool.side * pool.side == static_cast<int>(raw.size())
                  ? core::Tensor({static_cast<std::size_t>(pool.side),
                                  static_cast<std::size_t>(pool.side)},
                                 std::move(raw))
                  : core::Tensor({static_cast<std::size_t>(raw.size())},
                                 std::move(raw));
          core::Tensor small = downsample(img, cfg.low_side, cfg.downsample_mode);
          core::Tensor stored =
              cfg.model == ModelKind::Mlp
                  ? upsample(small, cfg.high_side, cfg.downsample_mode)
                  : small;
          xlow.col(i) = flatten_tensor(stored);
        }
        int low_side = cfg.model == ModelKind::Mlp ? cfg.high_side : cfg.low_side;
        model.forward(xlow, low_side, low_cache);
        Eigen::MatrixXd fh = model.features(cache);
        Eigen::MatrixXd fl = model.features(low_cache);
        Whitened wh = whiten_rows(fh);
        Whitened wl = whiten_rows(fl);
        double sc = 0.0;
        Eigen::MatrixXd dfl(fl.rows(), fl.cols());
        double denom = static_cast<double>(fl.size());
        for (Eigen::Index j = 0; j < fl.cols(); ++j) {
          for (Eigen::Index i = 0; i < fl.rows(); ++i) {
            double d = wl.values(i, j) - wh.values(i, j);
            sc += smooth_l1(d);
            double dh = std::abs(d) <= 1.0 ? d : (d > 0 ? 1.0 : -1.0);
            // Whitening statistics treated as constants.
            dfl(i, j) = cfg.scale_consistency_weight * dh * wl.inv_sd(i) / denom;
          }
        }
        epoch_loss.add(cfg.scale_consistency_weight * sc / denom);
        model.backward_features(low_cache, dfl);
      }

      model.apply(lr, cfg.weight_decay, cfg.grad_clip_norm);
    }

    result.epoch_train_loss.push_back(
        plan.empty() ? 0.0 : epoch_loss.value() / static_cast<double>(plan.size()));
    result.epoch_w_low.push_back(w_low);
    result.epoch_w_high.push_back(w_high);
    result.epoch_lr.push_back(lr);
  }

  // Evaluation: high-resolution test inputs only.
  if (data.test.side != cfg.high_side) {
    throw std::logic_error("test loader produced non-high-resolution inputs");
  }
  Eigen::MatrixXd logits = model.logits(data.test.x, data.test.side);
  result.test_accuracy = accuracy(logits, data.test.y);
  return result;
}

}  // namespace

ExperimentResult run_experiment(const MixTrainConfig& cfg,
                                const core::LabeledDataset& data,
                                int replicates) {
  cfg.validate();
  if (replicates < 1) throw std::invalid_argument("replicates must be >= 1");
  if (cfg.model == ModelKind::Cnn && data.inputs().front().rank() != 2) {
    throw std::invalid_argument("cnn path needs rank-2 image inputs");
  }

  ExperimentResult result;
  result.config = cfg;
  result.replicates.resize(replicates);
  core::parallel_for(static_cast<std::size_t>(replicates), [&](std::size_t i) {
    core::RngStream stream(cfg.seed, i);
    PreparedData prepared = prepare_replicate_data(cfg, data, stream);
    if (cfg.model == ModelKind::Mlp) {
      result.replicates[i] = train_replicate<MlpMixModel>(
          cfg, prepared, static_cast<int>(i), stream);
    } else {
      result.replicates[i] = train_replicate<CnnMixModel>(
          cfg, prepared, static_cast<int>(i), stream);
    }
  });

  std::vector<double> accs;
  for (const auto& rep : result.replicates) accs.push_back(rep.test_accuracy);
  result.test_accuracy_mean = core::mean(accs);
  result.test_accuracy_std =
      accs.size() > 1 ? std::sqrt(core::variance(accs)) : 0.0;
  result.storage = storage_report(cfg.high_side, cfg.low_side,
                                  cfg.experiment == ExperimentKind::Size
                                      ? 0.1
                                      : cfg.high_fraction);
  return result;
}

}  // namespace mixres::trainer
