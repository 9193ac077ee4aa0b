#pragma once

// Keyed, splittable random streams.
//
// A stream is identified by (root_seed, stream_id). Child streams are derived
// purely from the parent identity and a (tag, index) key, so any component can
// obtain its own reproducible stream without touching shared state. The
// generator is SplitMix64 seeded from a hash of the identity.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace rfattn {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Purpose tags for derived streams.
enum class StreamTag : std::uint64_t {
  kWeights = 1,
  kTrainData = 2,
  kTestData = 3,
  kTarget = 4,
  kMonteCarlo = 5,
  kPairs = 6,
  kModel = 7,
  kSeedIndex = 8,
  kSampleSize = 9,
  kUser = 100,
};

class RngStream {
 public:
  explicit RngStream(std::uint64_t root_seed, std::uint64_t stream_id = 0) noexcept
      : root_seed_(root_seed),
        stream_id_(stream_id),
        state_(detail::mix64(root_seed ^ detail::mix64(stream_id + detail::kGolden))) {}

  [[nodiscard]] std::uint64_t root_seed() const noexcept { return root_seed_; }
  [[nodiscard]] std::uint64_t stream_id() const noexcept { return stream_id_; }

  /// Child stream keyed by (tag, index). Depends only on this stream's identity,
  /// never on how much of it has been consumed.
  [[nodiscard]] RngStream derive(StreamTag tag, std::uint64_t index) const noexcept {
    const auto t = static_cast<std::uint64_t>(tag);
    std::uint64_t id = detail::mix64(stream_id_ + detail::kGolden * (t + 1));
    id = detail::mix64(id ^ detail::mix64(index + 0x632be59bd9b4e019ULL * (t + 7)));
    return RngStream(root_seed_, id);
  }

  std::uint64_t next_u64() noexcept {
    state_ += detail::kGolden;
    return detail::mix64(state_);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1).
  double uniform_open() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_open()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::uint64_t root_seed_;
  std::uint64_t stream_id_;
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rfattn
