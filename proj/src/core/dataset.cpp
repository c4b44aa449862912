#include "mixres/core/dataset.hpp"

#include <cmath>
#include <stdexcept>

#include "mixres/core/io.hpp"

namespace mixres::core {

namespace {

std::uint64_t hash_contents(const std::vector<Tensor>& inputs,
                            const std::vector<int>& labels, int num_classes) {
  std::vector<std::uint8_t> bytes;
  append_u32_le(bytes, static_cast<std::uint32_t>(inputs.size()));
  for (const Tensor& t : inputs) {
    std::vector<std::uint8_t> tb = tensor_bytes(t);
    bytes.insert(bytes.end(), tb.begin(), tb.end());
  }
  for (int label : labels) {
    append_u32_le(bytes, static_cast<std::uint32_t>(label));
  }
  append_u32_le(bytes, static_cast<std::uint32_t>(num_classes));
  return fnv1a64(bytes);
}

}  // namespace

LabeledDataset::LabeledDataset(std::vector<Tensor> inputs,
                               std::vector<int> labels, int num_classes,
                               std::string name)
    : inputs_(std::move(inputs)),
      labels_(std::move(labels)),
      num_classes_(num_classes),
      name_(std::move(name)) {
  if (inputs_.empty()) throw std::invalid_argument("dataset must be non-empty");
  if (inputs_.size() != labels_.size()) {
    throw std::invalid_argument("dataset inputs/labels length mismatch");
  }
  if (num_classes_ < 2) throw std::invalid_argument("dataset needs >= 2 classes");
  for (const Tensor& t : inputs_) {
    if (!t.same_shape(inputs_.front())) {
      throw std::invalid_argument("dataset inputs must share one shape");
    }
  }
  for (int label : labels_) {
    if (label < 0 || label >= num_classes_) {
      throw std::invalid_argument("label out of range [0, num_classes)");
    }
  }
  content_hash_ = hash_contents(inputs_, labels_, num_classes_);
}

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const Tensor& first = ds.inputs().front();
  std::vector<std::size_t> stacked_shape;
  stacked_shape.push_back(ds.size());
  stacked_shape.insert(stacked_shape.end(), first.shape().begin(),
                       first.shape().end());
  std::vector<double> stacked;
  stacked.reserve(ds.size() * first.size());
  for (const Tensor& t : ds.inputs()) {
    stacked.insert(stacked.end(), t.data().begin(), t.data().end());
  }
  write_tensor(Tensor(std::move(stacked_shape), std::move(stacked)),
               dir / "inputs.mrt1");

  std::vector<double> labels(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    labels[i] = static_cast<double>(ds.labels()[i]);
  }
  write_tensor(Tensor({ds.size()}, std::move(labels)), dir / "labels.mrt1");
}

LabeledDataset load_dataset(const std::filesystem::path& dir) {
  Tensor stacked = read_tensor(dir / "inputs.mrt1");
  Tensor label_tensor = read_tensor(dir / "labels.mrt1");
  if (stacked.rank() < 2) {
    throw std::runtime_error("inputs.mrt1 must have rank >= 2 (N, ...)");
  }
  if (label_tensor.rank() != 1 || label_tensor.size() != stacked.shape()[0]) {
    throw std::runtime_error("labels.mrt1 must be rank 1 with length N");
  }
  std::size_t n = stacked.shape()[0];
  std::vector<std::size_t> item_shape(stacked.shape().begin() + 1,
                                      stacked.shape().end());
  std::size_t item_size = shape_numel(item_shape);

  std::vector<Tensor> inputs;
  inputs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> item(stacked.data().begin() + i * item_size,
                             stacked.data().begin() + (i + 1) * item_size);
    inputs.emplace_back(item_shape, std::move(item));
  }
  std::vector<int> labels(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double v = label_tensor(i);
    if (v != std::floor(v) || v < 0) {
      throw std::runtime_error("labels.mrt1 entries must be non-negative integers");
    }
    labels[i] = static_cast<int>(v);
    max_label = std::max(max_label, labels[i]);
  }
  int num_classes = std::max(2, max_label + 1);
  return LabeledDataset(std::move(inputs), std::move(labels), num_classes,
                        dir.filename().string());
}

}  // namespace mixres::core
