#pragma once

#include <cmath>
#include <cstdint>

namespace branchlab {

/// Counter-based random stream: output i is a stateless hash of
/// (key, i), so replicas can be generated on any thread in any order and
/// still reproduce bit-for-bit.  The mixer is the SplitMix64 finalizer over
/// a Weyl sequence, which is the standard SplitMix64 generator.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  /// Independent stream for one replica of an ensemble.
  static CounterRng for_replica(std::uint64_t base_seed, std::uint64_t replica) {
    return CounterRng(mix(mix(base_seed ^ 0x9e3779b97f4a7c15ULL) + mix(replica + 1)));
  }

  std::uint64_t next_u64() {
    ++draws_;
    counter_ += 0x9e3779b97f4a7c15ULL;
    return mix(key_ ^ counter_);
  }

  /// Uniform in the open interval (0,1); never returns an endpoint.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  /// Standard normal via Box-Muller; always consumes two uniforms.
  double normal() {
    const double u = uniform();
    const double v = uniform();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586476925286766559 * v);
  }

  /// Exact Poisson sample.  Knuth's product method for small means; larger
  /// means are split into independent small-mean summands, which stays exact.
  std::uint64_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    std::uint64_t total = 0;
    while (mean > 30.0) {
      total += poisson_knuth(30.0);
      mean -= 30.0;
    }
    return total + poisson_knuth(mean);
  }

  std::uint64_t draws() const { return draws_; }
  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t poisson_knuth(double mean) {
    const double limit = std::exp(-mean);
    std::uint64_t k = 0;
    double p = uniform();
    while (p > limit) {
      ++k;
      p *= uniform();
    }
    return k;
  }

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::uint64_t draws_ = 0;
};

}  // namespace branchlab
