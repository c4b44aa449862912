#include "mixres/core/rng.hpp"

#include <cmath>
#include <numbers>

namespace mixres::core {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t splitmix_fin(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix_fin(splitmix_fin(a + kGolden) ^ (b + kGolden));
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
    : master_seed_(master_seed), stream_id_(stream_id) {
  key1_ = splitmix_fin(master_seed ^ kGolden);
  key2_ = splitmix_fin(stream_id + key1_);
}

std::uint64_t RngStream::next_u64() {
  std::uint64_t z = counter_++ * kGolden;
  return splitmix_fin(splitmix_fin(z ^ key2_) + key1_);
}

std::uint64_t RngStream::next_below(std::uint64_t bound) {
  return bound <= 1 ? 0 : next_u64() % bound;
}

double RngStream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_gaussian() {
  if (has_spare_gaussian_) {
    has_spare_gaussian_ = false;
    return spare_gaussian_;
  }
  // Box-Muller; u shifted into (0, 1] so log(u) stays finite.
  double u = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  double v = next_double();
  double radius = std::sqrt(-2.0 * std::log(u));
  double angle = 2.0 * std::numbers::pi * v;
  spare_gaussian_ = radius * std::sin(angle);
  has_spare_gaussian_ = true;
  return radius * std::cos(angle);
}

RngStream RngStream::substream(std::uint64_t salt) const {
  return RngStream(master_seed_, mix_seed(stream_id_, salt));
}

}  // namespace mixres::core
