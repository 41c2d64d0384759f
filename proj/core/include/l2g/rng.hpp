#pragma once

#include <cstdint>

namespace l2g {

// splitmix64 step; used to expand seeds.
std::uint64_t splitmix64(std::uint64_t& state);

// Seed of the independent stream `index` derived from a base seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

// xoshiro256** seeded by four splitmix64 outputs of the seed.
//
// Derived draws are fixed so streams reproduce across implementations:
//   uniform()      = (next() >> 11) * 2^-53            in [0, 1)
//   below(n)       = high 64 bits of next() * n         in [0, n)
//   range(lo, hi)  = lo + below(hi - lo + 1)            in [lo, hi]
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t below(std::uint64_t n);
  int range(int lo, int hi);
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t s_[4];
};

}  // namespace l2g
