#pragma once

#include <cstdint>
#include <random>

namespace bayeshield {

//! Seeded generator used by every synthetic generator.
//!
//! The engine is std::mt19937_64, whose output sequence is fixed by the C++
//! standard. The standard library's distributions are not (their algorithms
//! vary between implementations), so the two draws below are spelled out:
//!
//!   uniform(): top 53 bits of one engine output, times 2^-53, in [0, 1).
//!   normal():  Marsaglia polar method on 2u-1 pairs; the second variate of
//!              each accepted pair is cached and returned by the next call.
class Rng
{
public:
  explicit Rng(std::uint64_t seed)
    : engine_(seed)
  {
  }

  double uniform();
  double normal();

private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

} // namespace bayeshield
