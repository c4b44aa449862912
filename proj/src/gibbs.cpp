#include "mixres/gibbs.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "mixres/core/io.hpp"
#include "mixres/core/parallel.hpp"
#include "mixres/core/stats.hpp"

namespace mixres::gibbs {

using json = nlohmann::json;

void MlpArchitecture::validate() const {
  if (layer_widths.size() < 2) {
    throw std::invalid_argument("architecture needs >= 2 layer widths");
  }
  for (int w : layer_widths) {
    if (w < 1) throw std::invalid_argument("layer widths must be >= 1");
  }
}

MlpArchitecture make_mlp_arch(int input_dim, int depth, int hidden,
                              int num_classes) {
  if (depth < 1) throw std::invalid_argument("depth must be >= 1");
  MlpArchitecture arch;
  arch.layer_widths.push_back(input_dim);
  for (int i = 0; i < depth - 1; ++i) arch.layer_widths.push_back(hidden);
  arch.layer_widths.push_back(num_classes);
  arch.validate();
  return arch;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    n += static_cast<std::size_t>(weights[l].size()) +
         static_cast<std::size_t>(biases[l].size());
  }
  return n;
}

std::vector<double> MlpParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const Eigen::MatrixXd& w = weights[l];
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) flat.push_back(w(i, j));
    }
    const Eigen::VectorXd& b = biases[l];
    flat.insert(flat.end(), b.data(), b.data() + b.size());
  }
  return flat;
}

MlpParams MlpParams::unflatten(const MlpArchitecture& arch,
                               const std::vector<double>& flat) {
  arch.validate();
  MlpParams p;
  std::size_t pos = 0;
  for (int l = 0; l < arch.num_layers(); ++l) {
    int in = arch.layer_widths[l];
    int out = arch.layer_widths[l + 1];
    Eigen::MatrixXd w(out, in);
    for (int i = 0; i < out; ++i) {
      for (int j = 0; j < in; ++j) w(i, j) = flat.at(pos++);
    }
    Eigen::VectorXd b(out);
    for (int i = 0; i < out; ++i) b(i) = flat.at(pos++);
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  if (pos != flat.size()) {
    throw std::invalid_argument("flattened parameter size mismatch");
  }
  return p;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be > 0");
  if (weight_decay < 0) throw std::invalid_argument("weight_decay must be >= 0");
  if (batch_size < 0) throw std::invalid_argument("batch_size must be >= 0");
  if (!(init_scale > 0)) throw std::invalid_argument("init_scale must be > 0");
}

// ---------------------------------------------------------------------------
// Pointwise evaluation
// ---------------------------------------------------------------------------

namespace {

void check_point(const MlpParams& p, const Eigen::VectorXd& x, int y) {
  if (p.weights.empty()) throw std::invalid_argument("empty parameters");
  if (x.size() != p.weights.front().cols()) {
    throw std::invalid_argument("input dimension mismatch");
  }
  if (y < 0 || y >= p.weights.back().rows()) {
    throw std::invalid_argument("label out of range");
  }
}

// Forward for one sample keeping pre-activations for the backward pass.
void forward_point(const MlpParams& p, const Eigen::VectorXd& x,
                   std::vector<Eigen::VectorXd>& preacts,
                   std::vector<Eigen::VectorXd>& acts) {
  std::size_t layers = p.weights.size();
  preacts.resize(layers);
  acts.assign(1, x);
  acts.reserve(layers + 1);
  for (std::size_t l = 0; l < layers; ++l) {
    preacts[l] = p.weights[l] * acts.back() + p.biases[l];
    if (l + 1 < layers) {
      acts.push_back(preacts[l].cwiseMax(0.0));
    } else {
      acts.push_back(preacts[l]);
    }
  }
}

double ce_from_logits(const Eigen::VectorXd& logits, int y,
                      Eigen::VectorXd* softmax_out = nullptr) {
  double shift = logits.maxCoeff();
  Eigen::VectorXd exps = (logits.array() - shift).exp();
  double z = exps.sum();
  if (softmax_out) *softmax_out = exps / z;
  return std::log(z) + shift - logits(y);
}

bool has_zero_preact(const MlpParams& p, const Eigen::VectorXd& x) {
  std::vector<Eigen::VectorXd> preacts, acts;
  forward_point(p, x, preacts, acts);
  for (std::size_t l = 0; l + 1 < p.weights.size(); ++l) {
    for (Eigen::Index i = 0; i < preacts[l].size(); ++i) {
      if (preacts[l](i) == 0.0) return true;
    }
  }
  return false;
}

}  // namespace

double loss(const MlpParams& p, const Eigen::VectorXd& x, int y) {
  check_point(p, x, y);
  std::vector<Eigen::VectorXd> preacts, acts;
  forward_point(p, x, preacts, acts);
  double value = ce_from_logits(acts.back(), y);
  return value < 0.0 ? 0.0 : value;  // guards -0.0 and rounding dust
}

Eigen::VectorXd input_gradient(const MlpParams& p, const Eigen::VectorXd& x,
                               int y) {
  check_point(p, x, y);
  std::vector<Eigen::VectorXd> preacts, acts;
  forward_point(p, x, preacts, acts);
  Eigen::VectorXd softmax;
  ce_from_logits(acts.back(), y, &softmax);
  Eigen::VectorXd delta = softmax;
  delta(y) -= 1.0;
  for (std::size_t l = p.weights.size(); l-- > 0;) {
    Eigen::VectorXd prev = p.weights[l].transpose() * delta;
    if (l == 0) return prev;
    // ReLU derivative: 1 for strictly positive pre-activation, else 0.
    delta = prev.array() * (preacts[l - 1].array() > 0.0).cast<double>();
  }
  return Eigen::VectorXd();  // unreachable
}

Eigen::MatrixXd input_hessian(const MlpParams& p, const Eigen::VectorXd& x,
                              int y) {
  check_point(p, x, y);
  if (x.size() > 64) throw std::invalid_argument("hessian guard: dim > 64");
  Eigen::VectorXd x0 = x;
  if (has_zero_preact(p, x0)) {
    x0.array() += 1e-9;
  }
  const double h = 1e-4;
  const Eigen::Index d = x0.size();
  Eigen::MatrixXd hess(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    Eigen::VectorXd xp = x0;
    Eigen::VectorXd xm = x0;
    xp(j) += h;
    xm(j) -= h;
    hess.col(j) = (input_gradient(p, xp, y) - input_gradient(p, xm, y)) / (2 * h);
  }
  return 0.5 * (hess + hess.transpose());
}

double input_quadratic_form(const MlpParams& p, const Eigen::VectorXd& x, int y,
                            const Eigen::VectorXd& dir) {
  check_point(p, x, y);
  if (dir.size() != x.size()) {
    throw std::invalid_argument("direction dimension mismatch");
  }
  double norm = dir.norm();
  if (norm == 0.0) return 0.0;
  Eigen::VectorXd unit = dir / norm;
  Eigen::VectorXd x0 = x;
  if (has_zero_preact(p, x0)) {
    x0.array() += 1e-9;
  }
  const double h = 1e-4;
  Eigen::VectorXd gp = input_gradient(p, x0 + h * unit, y);
  Eigen::VectorXd gm = input_gradient(p, x0 - h * unit, y);
  return norm * norm * unit.dot(gp - gm) / (2 * h);
}

// ---------------------------------------------------------------------------
// Batch forward/backward
// ---------------------------------------------------------------------------

Eigen::MatrixXd forward_batch(const MlpParams& p, const Eigen::MatrixXd& x,
                              BatchCache* cache) {
  if (x.rows() != p.weights.front().cols()) {
    throw std::invalid_argument("batch input dimension mismatch");
  }
  std::size_t layers = p.weights.size();
  if (cache) {
    cache->activations.assign(1, x);
    cache->preacts.clear();
  }
  Eigen::MatrixXd cur = x;
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = (p.weights[l] * cur).colwise() + p.biases[l];
    if (cache) cache->preacts.push_back(z);
    if (l + 1 < layers) {
      cur = z.cwiseMax(0.0);
      if (cache) cache->activations.push_back(cur);
    } else {
      cur = std::move(z);
    }
  }
  return cur;
}

double ce_loss_batch(const Eigen::MatrixXd& logits, const std::vector<int>& y,
                     Eigen::MatrixXd* dlogits) {
  const Eigen::Index batch = logits.cols();
  if (static_cast<Eigen::Index>(y.size()) != batch) {
    throw std::invalid_argument("label count mismatch");
  }
  if (dlogits) dlogits->resize(logits.rows(), batch);
  core::KahanSum total;
  for (Eigen::Index c = 0; c < batch; ++c) {
    double shift = logits.col(c).maxCoeff();
    Eigen::VectorXd exps = (logits.col(c).array() - shift).exp();
    double z = exps.sum();
    total.add(std::log(z) + shift - logits(y[c], c));
    if (dlogits) {
      dlogits->col(c) = exps / z;
      (*dlogits)(y[c], c) -= 1.0;
    }
  }
  if (dlogits) *dlogits /= static_cast<double>(batch);
  return total.value() / static_cast<double>(batch);
}

void backward_batch(const MlpParams& p, const BatchCache& cache,
                    const Eigen::MatrixXd& dlogits, MlpGrads& grads,
                    Eigen::MatrixXd* dinput) {
  std::size_t layers = p.weights.size();
  grads.weights.resize(layers);
  grads.biases.resize(layers);
  Eigen::MatrixXd delta = dlogits;
  for (std::size_t l = layers; l-- > 0;) {
    grads.weights[l].noalias() = delta * cache.activations[l].transpose();
    grads.biases[l] = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd prev = p.weights[l].transpose() * delta;
      delta = prev.array() * (cache.preacts[l - 1].array() > 0.0).cast<double>();
    } else if (dinput) {
      dinput->noalias() = p.weights[0].transpose() * delta;
    }
  }
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

struct AdamState {
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  long step = 0;

  explicit AdamState(const MlpParams& p) {
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
      mw.push_back(Eigen::MatrixXd::Zero(p.weights[l].rows(), p.weights[l].cols()));
      vw.push_back(Eigen::MatrixXd::Zero(p.weights[l].rows(), p.weights[l].cols()));
      mb.push_back(Eigen::VectorXd::Zero(p.biases[l].size()));
      vb.push_back(Eigen::VectorXd::Zero(p.biases[l].size()));
    }
  }
};

void apply_update(MlpParams& p, const MlpGrads& grads, const TrainConfig& cfg,
                  AdamState* adam) {
  const double lr = cfg.learning_rate;
  if (cfg.optimizer == Optimizer::GradientDescent) {
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
      p.weights[l] -= lr * (grads.weights[l] + cfg.weight_decay * p.weights[l]);
      p.biases[l] -= lr * grads.biases[l];
    }
    return;
  }
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  adam->step += 1;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(adam->step));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(adam->step));
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    Eigen::MatrixXd gw = grads.weights[l] + cfg.weight_decay * p.weights[l];
    adam->mw[l] = beta1 * adam->mw[l] + (1 - beta1) * gw;
    adam->vw[l] = beta2 * adam->vw[l] + (1 - beta2) * gw.cwiseProduct(gw);
    p.weights[l].array() -= lr * (adam->mw[l].array() / bc1) /
                            ((adam->vw[l].array() / bc2).sqrt() + eps);
    const Eigen::VectorXd& gb = grads.biases[l];
    adam->mb[l] = beta1 * adam->mb[l] + (1 - beta1) * gb;
    adam->vb[l] = beta2 * adam->vb[l] + (1 - beta2) * gb.cwiseProduct(gb);
    p.biases[l].array() -= lr * (adam->mb[l].array() / bc1) /
                           ((adam->vb[l].array() / bc2).sqrt() + eps);
  }
}

MlpParams random_init(const MlpArchitecture& arch, double init_scale,
                      core::RngStream& rng) {
  MlpParams p;
  for (int l = 0; l < arch.num_layers(); ++l) {
    int in = arch.layer_widths[l];
    int out = arch.layer_widths[l + 1];
    double std_dev = init_scale / std::sqrt(static_cast<double>(in));
    Eigen::MatrixXd w(out, in);
    for (int i = 0; i < out; ++i) {
      for (int j = 0; j < in; ++j) w(i, j) = std_dev * rng.next_gaussian();
    }
    p.weights.push_back(std::move(w));
    p.biases.push_back(Eigen::VectorXd::Zero(out));
  }
  return p;
}

}  // namespace

Eigen::MatrixXd dataset_to_columns(const core::LabeledDataset& data) {
  const core::Tensor& first = data.inputs().front();
  if (first.rank() != 1) {
    throw std::invalid_argument("training data must hold rank-1 inputs");
  }
  Eigen::MatrixXd x(first.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& v = data.inputs()[i].data();
    x.col(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  return x;
}

core::LabeledDataset augment_dataset(const core::LabeledDataset& base,
                                     const Eigen::VectorXd& x, int y,
                                     const std::string& name) {
  std::vector<core::Tensor> inputs = base.inputs();
  std::vector<int> labels = base.labels();
  inputs.emplace_back(std::vector<std::size_t>{static_cast<std::size_t>(x.size())},
                      std::vector<double>(x.data(), x.data() + x.size()));
  labels.push_back(y);
  return core::LabeledDataset(std::move(inputs), std::move(labels),
                              base.num_classes(), name);
}

MlpParams train_member(const core::LabeledDataset& data,
                       const MlpArchitecture& arch, const TrainConfig& cfg,
                       core::RngStream stream) {
  arch.validate();
  cfg.validate();
  if (data.size() == 0) throw std::invalid_argument("empty training data");
  if (arch.output_dim() < data.num_classes()) {
    throw std::invalid_argument("architecture emits fewer logits than classes");
  }

  Eigen::MatrixXd x_all = dataset_to_columns(data);
  if (x_all.rows() != arch.input_dim()) {
    throw std::invalid_argument("training data dimension mismatch");
  }
  const std::vector<int>& y_all = data.labels();

  core::RngStream init_rng = stream.substream(0);
  core::RngStream shuffle_rng = stream.substream(1);
  MlpParams params = random_init(arch, cfg.init_scale, init_rng);
  AdamState adam(params);

  const int n = static_cast<int>(data.size());
  const bool full_batch = cfg.batch_size == 0 || cfg.batch_size >= n;
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;

  BatchCache cache;
  MlpGrads grads;
  Eigen::MatrixXd dlogits;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    if (full_batch) {
      Eigen::MatrixXd logits = forward_batch(params, x_all, &cache);
      epoch_loss = ce_loss_batch(logits, y_all, &dlogits);
      if (!std::isfinite(epoch_loss)) {
        throw std::runtime_error("non-finite training loss at epoch " +
                                 std::to_string(epoch));
      }
      backward_batch(params, cache, dlogits, grads);
      apply_update(params, grads, cfg, &adam);
    } else {
      shuffle_rng.shuffle(order);
      core::KahanSum loss_sum;
      int batches = 0;
      for (int start = 0; start < n; start += cfg.batch_size) {
        int count = std::min(cfg.batch_size, n - start);
        Eigen::MatrixXd xb(x_all.rows(), count);
        std::vector<int> yb(count);
        for (int i = 0; i < count; ++i) {
          xb.col(i) = x_all.col(order[start + i]);
          yb[i] = y_all[order[start + i]];
        }
        Eigen::MatrixXd logits = forward_batch(params, xb, &cache);
        double batch_loss = ce_loss_batch(logits, yb, &dlogits);
        if (!std::isfinite(batch_loss)) {
          throw std::runtime_error("non-finite training loss at epoch " +
                                   std::to_string(epoch));
        }
        backward_batch(params, cache, dlogits, grads);
        apply_update(params, grads, cfg, &adam);
        loss_sum.add(batch_loss);
        ++batches;
      }
      epoch_loss = loss_sum.value() / batches;
      (void)epoch_loss;
    }
  }
  return params;
}

PosteriorEnsemble sample_posterior(const core::LabeledDataset& data,
                                   const MlpArchitecture& arch,
                                   const TrainConfig& cfg, int ensemble_size,
                                   std::uint64_t master_seed) {
  if (ensemble_size < 2) throw std::invalid_argument("ensemble size must be >= 2");
  PosteriorEnsemble e;
  e.dataset_hash = data.content_hash();
  e.arch = arch;
  e.config = cfg;
  e.master_seed = master_seed;
  e.members.resize(ensemble_size);
  core::parallel_for(static_cast<std::size_t>(ensemble_size), [&](std::size_t i) {
    try {
      e.members[i] = train_member(data, arch, cfg,
                                  core::RngStream(master_seed, i));
    } catch (const std::exception& ex) {
      throw std::runtime_error("member " + std::to_string(i) + ": " + ex.what());
    }
  });
  return e;
}

MomentDiagnostics moment_diagnostics(const PosteriorEnsemble& e,
                                     const Eigen::VectorXd& x, int y) {
  std::vector<double> losses = member_losses(e, x, y);
  MomentDiagnostics d;
  d.mean_loss = core::mean(losses);
  core::KahanSum second;
  for (double v : losses) second.add(v * v);
  d.second_moment = second.value() / static_cast<double>(losses.size());
  d.max_loss = core::max_value(losses);
  return d;
}

std::vector<double> member_losses(const PosteriorEnsemble& e,
                                  const Eigen::VectorXd& x, int y) {
  std::vector<double> out(e.members.size());
  core::parallel_for(e.members.size(),
                     [&](std::size_t i) { out[i] = loss(e.members[i], x, y); });
  return out;
}

Eigen::MatrixXd member_input_gradients(const PosteriorEnsemble& e,
                                       const Eigen::VectorXd& x, int y) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(e.members.size()), x.size());
  core::parallel_for(e.members.size(), [&](std::size_t i) {
    out.row(static_cast<Eigen::Index>(i)) =
        input_gradient(e.members[i], x, y).transpose();
  });
  return out;
}

std::vector<double> member_quadratic_forms(const PosteriorEnsemble& e,
                                           const Eigen::VectorXd& x, int y,
                                           const Eigen::VectorXd& dir) {
  std::vector<double> out(e.members.size());
  core::parallel_for(e.members.size(), [&](std::size_t i) {
    out[i] = input_quadratic_form(e.members[i], x, y, dir);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

std::string member_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "member_%05d.mrt1", index);
  return buf;
}

}  // namespace

void save_ensemble(const PosteriorEnsemble& e, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["format"] = "mixres-ensemble-v1";
  manifest["arch"] = e.arch.layer_widths;
  manifest["config"] = {
      {"epochs", e.config.epochs},
      {"learning_rate", e.config.learning_rate},
      {"optimizer", e.config.optimizer == Optimizer::Adam ? "adam" : "gd"},
      {"batch_size", e.config.batch_size},
      {"weight_decay", e.config.weight_decay},
      {"init_scale", e.config.init_scale},
  };
  manifest["master_seed"] = e.master_seed;
  manifest["dataset_hash"] = e.dataset_hash;
  manifest["members"] = e.size();
  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write ensemble manifest");
  out << manifest.dump(2) << "\n";

  for (int i = 0; i < e.size(); ++i) {
    std::vector<double> flat = e.members[i].flatten();
    std::size_t count = flat.size();
    core::write_tensor(core::Tensor({count}, std::move(flat)),
                       dir / member_file_name(i));
  }
}

PosteriorEnsemble load_ensemble(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("cannot read ensemble manifest");
  json manifest = json::parse(in);
  PosteriorEnsemble e;
  e.arch.layer_widths = manifest.at("arch").get<std::vector<int>>();
  const json& cfg = manifest.at("config");
  e.config.epochs = cfg.at("epochs").get<int>();
  e.config.learning_rate = cfg.at("learning_rate").get<double>();
  e.config.optimizer = cfg.at("optimizer").get<std::string>() == "adam"
                           ? Optimizer::Adam
                           : Optimizer::GradientDescent;
  e.config.batch_size = cfg.at("batch_size").get<int>();
  e.config.weight_decay = cfg.at("weight_decay").get<double>();
  e.config.init_scale = cfg.at("init_scale").get<double>();
  e.master_seed = manifest.at("master_seed").get<std::uint64_t>();
  e.dataset_hash = manifest.at("dataset_hash").get<std::uint64_t>();
  int count = manifest.at("members").get<int>();
  e.members.reserve(count);
  for (int i = 0; i < count; ++i) {
    core::Tensor flat = core::read_tensor(dir / member_file_name(i));
    e.members.push_back(MlpParams::unflatten(e.arch, flat.data()));
  }
  return e;
}

}  // namespace mixres::gibbs
