#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace nuts_gauss {

template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <typename S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

using Index = Eigen::Index;

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Uniform on [0,1) from a 64-bit key, using the top 53 bits.
inline double unit_from_bits(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Seeded random stream identified by (seed, stream id). Substreams are
/// derived from the identifiers alone, so deriving one never perturbs the
/// parent's sequence. Copies replay the same draws, which is what the
/// synchronous couplings rely on.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : seed_(seed), stream_id_(stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id),
                      static_cast<std::uint32_t>(stream_id >> 32), 0x6e757473u};
    engine_.seed(seq);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  /// Independent stream keyed by (seed, stream id, tag).
  RandomStream substream(std::uint64_t tag) const {
    return RandomStream(seed_, splitmix64(stream_id_ ^ splitmix64(tag + 0x51ed270b27b1f3a5ULL)));
  }

  /// Child stream keyed by the next raw draw; advances this stream by one.
  RandomStream fork() { return RandomStream(seed_, next_u64()); }

  std::uint64_t next_u64() { return engine_(); }

  double uniform01() { return unit_from_bits(engine_()); }

  bool bit() { return uniform01() < 0.5; }

  double standard_normal() { return normal_(engine_); }

  template <typename S = double>
  Vec<S> standard_normal(Index n) {
    Vec<S> out(n);
    for (Index i = 0; i < n; ++i) out[i] = static_cast<S>(normal_(engine_));
    return out;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace nuts_gauss
