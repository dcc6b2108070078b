#pragma once

#include <array>
#include <cstdint>

#include "ncsr/tensor.hpp"

namespace ncsr {

/// xoshiro256** seeded through splitmix64. Uniform doubles take the top 53
/// bits; normals use Box-Muller, so draws are identical on every platform.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0);

  uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  /// Uniform integer on [0, bound).
  uint64_t below(uint64_t bound);
  /// Standard normal. Each call consumes two uniforms.
  double normal();

  /// Independent stream keyed by `key`; the parent state is not advanced.
  Rng derive(uint64_t key) const;

  std::array<uint64_t, 4> state() const { return s_; }
  void set_state(const std::array<uint64_t, 4>& s) { s_ = s; }

 private:
  std::array<uint64_t, 4> s_{};
};

uint64_t splitmix64(uint64_t& x);

/// I.i.d. N(0, sigma^2). sigma == 0 yields exact zeros.
Tensor gaussian(Rng& rng, Shape shape, double sigma);
/// I.i.d. U[lo, hi).
Tensor uniform(Rng& rng, Shape shape, double lo, double hi);

}  // namespace ncsr
