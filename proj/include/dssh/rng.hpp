#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace dssh {

// splitmix64 finalizer, used to derive independent substream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                                    std::uint64_t c = 0) {
  return mix64(mix64(mix64(mix64(seed) ^ a) ^ b) ^ c);
}

// Explicit random stream. A "frozen" stream returns 0 for every standard
// normal draw, which turns reparameterized samplers into their medians.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  static Rng frozen() {
    Rng r(0);
    r.frozen_ = true;
    return r;
  }

  static Rng substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                       std::uint64_t c = 0) {
    return Rng(derive_seed(seed, a, b, c));
  }

  double normal() {
    if (frozen_) return 0.0;
    return normal_(engine_);
  }
  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(engine_); }
  double gamma(double shape, double scale) {
    return std::gamma_distribution<double>(shape, scale)(engine_);
  }
  std::uint64_t next_u64() { return engine_(); }
  std::mt19937_64& engine() { return engine_; }
  bool is_frozen() const { return frozen_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  bool frozen_ = false;
};

// One stream per batch row, so a row's noise does not depend on how rows are
// grouped into batches or shards.
using RowRngs = std::vector<Rng>;

}  // namespace dssh
