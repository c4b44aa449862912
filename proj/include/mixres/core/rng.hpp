#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace mixres::core {

/// Mixes two 64-bit values into one with full avalanche. Used to derive
/// ensemble master seeds and substream ids.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// Counter-based random stream: draw i is a pure function of
/// (master_seed, stream_id, i), so distinct stream ids are independent and
/// parallel consumers never share state.
class RngStream {
public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64();
  std::uint64_t next_below(std::uint64_t bound);  // uniform in [0, bound)
  double next_double();                           // uniform in [0, 1)
  double next_gaussian();                         // standard normal

  /// Independent stream derived from this one; does not advance the parent.
  RngStream substream(std::uint64_t salt) const;

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[next_below(i)]);
    }
  }

private:
  std::uint64_t master_seed_ = 0;
  std::uint64_t stream_id_ = 0;
  std::uint64_t key1_ = 0;
  std::uint64_t key2_ = 0;
  std::uint64_t counter_ = 0;
  double spare_gaussian_ = 0.0;
  bool has_spare_gaussian_ = false;
};

}  // namespace mixres::core
