#ifndef SDESIM_RNG_HPP
#define SDESIM_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace sdesim {

// Counter-based standard-normal stream (Philox4x32-10).
//
// Every draw is a pure function of (seed, stream_id, draw index), so a
// stream can be reconstructed at any point and replayed bit-for-bit, and
// samples advanced on different threads or in different batch partitions
// see exactly the sequence they would see alone. Streams with distinct
// stream_id are independent by the block-cipher construction.
//
// Salmon et al., "Parallel random numbers: as easy as 1, 2, 3" (SC 2011).
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  RngStream(uint64_t seed, uint64_t stream_id)
      : seed_(seed), stream_(stream_id), counter_(0) {}

  uint64_t seed() const { return seed_; }
  uint64_t stream_id() const { return stream_; }

  // Index of the next normal draw. (seed, stream_id, counter) pins the value.
  uint64_t counter() const { return counter_; }
  void set_counter(uint64_t c) { counter_ = c; }
  void skip(uint64_t n) { counter_ += n; }

  // Next standard-normal draw; advances the counter by one.
  double normal() { return normal_at(counter_++); }

  void fill_normal(std::span<double> out) {
    for (double& v : out) v = normal();
  }

  // Draw at an absolute index without touching the stream position.
  double normal_at(uint64_t idx) const {
    const uint64_t block = idx >> 1;
    if (block != cached_block_ || !cache_valid_) {
      const std::array<uint32_t, 4> words = philox_block(block);
      box_muller(words, cached_pair_);
      cached_block_ = block;
      cache_valid_ = true;
    }
    return cached_pair_[idx & 1];
  }

  // Uniform draw on [0,1) at the current counter; advances by one. Shares
  // the counter space with normal draws (both are pure in the draw index).
  double uniform() { return uniform_at(counter_++); }

  double uniform_at(uint64_t idx) const {
    const std::array<uint32_t, 4> w = philox_block(idx >> 1);
    const uint64_t bits = (idx & 1)
                              ? (static_cast<uint64_t>(w[3]) << 32) | w[2]
                              : (static_cast<uint64_t>(w[1]) << 32) | w[0];
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

  // Uniformly distributed sign, consuming one draw.
  double sign() { return normal() < 0.0 ? -1.0 : 1.0; }

 private:
  static constexpr uint32_t kWeylA = 0x9E3779B9u;
  static constexpr uint32_t kWeylB = 0xBB67AE85u;
  static constexpr uint32_t kMulA = 0xD2511F53u;
  static constexpr uint32_t kMulB = 0xCD9E8D57u;

  static void mul_hilo(uint32_t a, uint32_t b, uint32_t& lo, uint32_t& hi) {
    const uint64_t p = static_cast<uint64_t>(a) * b;
    lo = static_cast<uint32_t>(p);
    hi = static_cast<uint32_t>(p >> 32);
  }

  static void round(std::array<uint32_t, 4>& ctr, const std::array<uint32_t, 2>& key) {
    uint32_t lo0, hi0, lo1, hi1;
    mul_hilo(kMulA, ctr[0], lo0, hi0);
    mul_hilo(kMulB, ctr[2], lo1, hi1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }

  std::array<uint32_t, 4> philox_block(uint64_t block) const {
    std::array<uint32_t, 4> ctr = {
        static_cast<uint32_t>(block), static_cast<uint32_t>(block >> 32),
        static_cast<uint32_t>(stream_), static_cast<uint32_t>(stream_ >> 32)};
    std::array<uint32_t, 2> key = {static_cast<uint32_t>(seed_),
                                   static_cast<uint32_t>(seed_ >> 32)};
    for (int i = 0; i < 10; ++i) {
      round(ctr, key);
      key[0] += kWeylA;
      key[1] += kWeylB;
    }
    return ctr;
  }

  static void box_muller(const std::array<uint32_t, 4>& w, double pair[2]) {
    const uint64_t bits0 = (static_cast<uint64_t>(w[1]) << 32) | w[0];
    const uint64_t bits1 = (static_cast<uint64_t>(w[3]) << 32) | w[2];
    // u1 in (0,1] keeps the log finite; u2 in [0,1).
    const double u1 = static_cast<double>((bits0 >> 11) + 1) * 0x1.0p-53;
    const double u2 = static_cast<double>(bits1 >> 11) * 0x1.0p-53;
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    pair[0] = radius * std::cos(angle);
    pair[1] = radius * std::sin(angle);
  }

  uint64_t seed_;
  uint64_t stream_;
  uint64_t counter_;
  mutable uint64_t cached_block_ = 0;
  mutable bool cache_valid_ = false;
  mutable double cached_pair_[2] = {0.0, 0.0};
};

// Stream ids below 2^32 belong to batch samples (stream_id = stream_base +
// sample index). Auxiliary consumers (reference draws, random projections)
// take ids above this mark so they never collide with a sample's stream.
inline constexpr uint64_t kAuxStreamBase = uint64_t{1} << 32;

}  // namespace sdesim

#endif  // SDESIM_RNG_HPP
