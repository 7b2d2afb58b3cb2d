#include "tofner/rng.hpp"

#include <cmath>

#include "tofner/util.hpp"

namespace tof {

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

std::uint64_t derive_seed(std::uint64_t seed, const std::string& label) {
  return derive_seed(seed, fnv1a64(label));
}

double Rng::normal(double mean, double stddev) {
  // Box-Muller without a cached spare; two uniforms per draw.
  double u1 = uniform();
  double u2 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  return mean + stddev * r * std::cos(2.0 * M_PI * u2);
}

std::size_t Rng::uniform_index(std::size_t n) {
  if (n == 0) fail(ErrorKind::kContract, "uniform_index requires n > 0");
  // Rejection sampling to avoid modulo bias.
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return static_cast<std::size_t>(x % n);
}

std::vector<std::size_t> Rng::sample_indices(std::size_t size, std::size_t n) {
  if (n > size) fail(ErrorKind::kContract, "sample_indices: n exceeds population size");
  std::vector<std::size_t> pool(size);
  for (std::size_t i = 0; i < size; ++i) pool[i] = i;
  // Partial Fisher-Yates: the first n slots end up with the sample.
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + uniform_index(size - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(n);
  return pool;
}

}  // namespace tof
