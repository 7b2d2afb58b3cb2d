#ifndef TOFNER_RNG_HPP
#define TOFNER_RNG_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace tof {

// splitmix64 finalizer
std::uint64_t mix64(std::uint64_t x);

// Derives an independent stream seed from a base seed and a stream index or
// label. Stages and per-sentence work use derived seeds so results do not
// depend on execution order.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t seed, const std::string& label);

// Deterministic generator with hand-rolled transforms for every draw; output
// does not depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix64(seed ^ 0x9e3779b97f4a7c15ULL)) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  // [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double normal(double mean = 0.0, double stddev = 1.0);

  // [0, n); n must be > 0
  std::size_t uniform_index(std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = uniform_index(i + 1);
      std::swap(v[i], v[j]);
    }
  }

  // n distinct indices from [0, size), in random order.
  std::vector<std::size_t> sample_indices(std::size_t size, std::size_t n);

 private:
  std::uint64_t state_;
};

}  // namespace tof

#endif  // TOFNER_RNG_HPP
