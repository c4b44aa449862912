#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mixres/core/tensor.hpp"

namespace mixres::core {

/// Labeled inputs of uniform shape with class indices in [0, num_classes).
/// The content hash is a pure function of (inputs, labels); the name is
/// display-only and excluded.
class LabeledDataset {
public:
  LabeledDataset(std::vector<Tensor> inputs, std::vector<int> labels,
                 int num_classes, std::string name);

  const std::vector<Tensor>& inputs() const { return inputs_; }
  const std::vector<int>& labels() const { return labels_; }
  int num_classes() const { return num_classes_; }
  const std::string& name() const { return name_; }
  std::uint64_t content_hash() const { return content_hash_; }
  std::size_t size() const { return inputs_.size(); }

private:
  std::vector<Tensor> inputs_;
  std::vector<int> labels_;
  int num_classes_ = 0;
  std::string name_;
  std::uint64_t content_hash_ = 0;
};

/// Directory layout: inputs.mrt1 (rank = 1 + input rank, first dim = N)
/// and labels.mrt1 (rank 1, doubles holding integral values).
void save_dataset(const LabeledDataset& ds, const std::filesystem::path& dir);
LabeledDataset load_dataset(const std::filesystem::path& dir);

}  // namespace mixres::core
