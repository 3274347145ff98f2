#pragma once

#include <cstdint>
#include <random>

namespace herald {

/// Mixes a 64-bit state (splitmix64). Used to derive independent stream
/// seeds from (master_seed, index, channel) tuples.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Deterministic random stream with hand-rolled samplers.
///
/// std::mt19937_64 is fully specified by the standard, but the std
/// distributions are not; every distribution here is implemented from
/// uniform draws so identical (seed, call sequence) pairs give identical
/// results on any platform. Campaign outputs are byte-stable because of
/// this.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  /// Stream for one shot. `channel` separates independent sub-streams
  /// (0 = physical process, 1 = detection) so that changing detection
  /// parameters never alters the physical realization.
  static RngStream derive(std::uint64_t master_seed, std::uint64_t index,
                          std::uint64_t channel) {
    std::uint64_t s = master_seed;
    splitmix64(s);
    s ^= 0xA0761D6478BD642FULL * (index + 1);
    splitmix64(s);
    s ^= 0xE7037ED1A0B428DBULL * (channel + 1);
    return RngStream(splitmix64(s));
  }

  /// Uniform in [0, 1).
  double uniform() {
    return (gen_() >> 11) * 0x1.0p-53;
  }

  /// Raw 64-bit output; used to derive seeds for sub-streams.
  std::uint64_t raw() { return gen_(); }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Exponential with the given rate (mean 1/rate).
  double exponential(double rate);

  /// Exponential with rate, conditioned on being < span. Falls back to
  /// uniform when rate*span is negligible.
  double truncated_exponential(double rate, double span);

  /// Sum of k exponentials: Erlang(k, rate).
  double erlang(int k, double rate);

  /// Bose-Einstein (geometric on {0,1,...}) with the given mean.
  std::int64_t bose_einstein(double mean);

  std::int64_t binomial(std::int64_t n, double p);

  std::int64_t poisson(double mean);

 private:
  std::int64_t poisson_knuth(double mean);
  std::mt19937_64 gen_;
};

}  // namespace herald
