#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace asysvrg {

using Rng = std::mt19937_64;

/// Independent sampling stream for (seed, worker, epoch). Every solver path
/// draws instance indices from this, so equal triples give equal sequences.
inline Rng worker_stream(std::uint64_t seed, std::uint64_t worker, std::uint64_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(worker), static_cast<std::uint32_t>(epoch),
                    static_cast<std::uint32_t>(epoch >> 32), 0x5eedU};
  return Rng(seq);
}

/// Uniform index in [0, n), with replacement.
class IndexSampler {
 public:
  explicit IndexSampler(std::size_t n) : dist_(0, n - 1) {}
  std::size_t operator()(Rng& rng) { return dist_(rng); }

 private:
  std::uniform_int_distribution<std::size_t> dist_;
};

}  // namespace asysvrg
