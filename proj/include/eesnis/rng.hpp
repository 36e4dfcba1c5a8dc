// Deterministic pseudo-random stream management.
//
// One master seed fans out into any number of substreams keyed by a 64-bit
// stream id. The substream key is a strong avalanche mix of (master_seed,
// stream_id), so distinct ids give statistically independent, non-overlapping
// sequences and the whole experiment is reproducible from a single integer.
//
// The generator is xoshiro256++ (public domain, Blackman & Vigna) seeded via
// splitmix64, both re-implemented here so that sequences are bit-identical
// across platforms and standard-library versions.

#ifndef EESNIS_RNG_HPP
#define EESNIS_RNG_HPP

#include <cstdint>
#include <limits>

namespace eesnis {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// splitmix64 finalizer; full-avalanche 64-bit mix.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

inline constexpr std::uint64_t rotl64(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

/// Derives the 64-bit substream key for (master_seed, stream_id).
inline constexpr std::uint64_t substream_key(std::uint64_t master_seed,
                                             std::uint64_t stream_id) {
  const std::uint64_t a = detail::mix64(master_seed + detail::kGolden);
  const std::uint64_t b = detail::mix64(stream_id + 0x8CB92BA72F3D8DD7ULL);
  return detail::mix64(a ^ detail::rotl64(b, 17));
}

/// A single-owner deterministic generator. Satisfies
/// std::uniform_random_bit_generator.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream() : RandomStream(0, 0) {}

  RandomStream(std::uint64_t master_seed, std::uint64_t stream_id)
      : key_(substream_key(master_seed, stream_id)), stream_id_(stream_id) {
    // Expand the key into the xoshiro state with splitmix64.
    std::uint64_t x = key_;
    for (auto& s : state_) {
      x += detail::kGolden;
      s = detail::mix64(x);
    }
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  // xoshiro256++ step.
  result_type operator()() {
    const std::uint64_t result = detail::rotl64(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl64(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1), 53 random bits.
  double uniform01() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform double in the open interval (0, 1); safe for quantile transforms.
  double uniform_open01() {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53 + 0x1.0p-54;
  }

  /// Child stream keyed off this stream's identity; does not consume or
  /// perturb the parent state. spawn(k) != spawn(j) for k != j.
  RandomStream spawn(std::uint64_t k) const { return RandomStream(key_, k); }

  std::uint64_t key() const { return key_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  std::uint64_t state_[4];
  std::uint64_t key_;
  std::uint64_t stream_id_;
};

/// Deterministic substream derivation: distinct (master_seed, stream_id)
/// pairs give unrelated streams.
inline RandomStream derive_stream(std::uint64_t master_seed, std::uint64_t stream_id) {
  return RandomStream(master_seed, stream_id);
}

}  // namespace eesnis

#endif  // EESNIS_RNG_HPP
