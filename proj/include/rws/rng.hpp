#pragma once
#include <array>
#include <cstdint>

namespace rws {

// Counter-derived random streams built on xoshiro256** with splitmix64 seeding.
// Every stream is identified by (seed, stream_id); substream(i) derives a child
// id by hashing, so any part of a computation can be given its own statistically
// independent stream without coordinating draw counts. That is what makes runs
// bit-identical regardless of worker count or evaluation order, and it is why
// we do not use std:: engines/distributions (their output is not specified
// bit-for-bit across standard libraries).

inline std::uint64_t splitmix64_next(std::uint64_t& s) {
  std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Hash-combine two 64-bit values into a child stream id.
inline std::uint64_t fold_ids(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a * 0x9e3779b97f4a7c15ULL + 0x3c6ef372fe94f82bULL;
  s ^= b + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
  return splitmix64_next(s);
}

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : seed_(seed), id_(stream_id) {
    std::uint64_t s = fold_ids(seed, stream_id);
    for (auto& w : state_) w = splitmix64_next(s);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform double in [0, 1), 53 random bits.
  double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  // Integer in [0, n), n >= 1. Unbiased via rejection on the top range.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  // Child stream: independent of the parent's draw position.
  RngStream substream(std::uint64_t index) const {
    return RngStream(seed_, fold_ids(id_, index));
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return id_; }
  const std::array<std::uint64_t, 4>& state() const { return state_; }
  void set_state(const std::array<std::uint64_t, 4>& s) { state_ = s; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t seed_;
  std::uint64_t id_;
  std::array<std::uint64_t, 4> state_;
};

// Named top-level channels hanging off the run's root stream. Keeping them in
// one enum prevents accidental reuse of a channel id for two purposes.
enum class StreamChannel : std::uint64_t {
  InitP = 1,
  InitQ = 2,
  Epochs = 3,
  Validation = 4,
  Eval = 5,
  Sampling = 6,
  Analysis = 7,
  Data = 8,
};

inline RngStream channel(const RngStream& root, StreamChannel c) {
  return root.substream(static_cast<std::uint64_t>(c));
}

}  // namespace rws
