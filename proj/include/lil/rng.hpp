#pragma once

#include <cstdint>
#include <random>

namespace lil {

// One splitmix64 step. Also the avalanche hash used to derive per-path seeds:
// statistically independent streams from (master_seed, path_index) without any
// coordination between threads, so ensemble results cannot depend on thread
// count or scheduling.
std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t path_seed(std::uint64_t master_seed, std::uint64_t path_index);

// Random source for one path. All variates are generated from raw engine
// words with fixed arithmetic (no std::*_distribution, whose mapping is
// implementation-defined), so a (seed, call sequence) pair reproduces bit
// for bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Strictly inside (0,1): safe under log().
  double uniform() {
    return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1p-53;
  }

  double exponential() { return -std::log(uniform()); }

  // Box-Muller; always consumes exactly two engine words.
  double normal();

  // Symmetric stable draw with characteristic function exp(-|xi|^beta),
  // beta in (0,2]. Chambers-Mallows-Stuck, with the beta = 1 (Cauchy) and
  // beta = 2 (Gaussian, variance 2) cases taken directly to avoid the
  // singular branches of the generic formula.
  double stable_symmetric(double beta);

  // Positive stable draw with Laplace transform exp(-u^gamma), gamma in (0,1)
  // (Kanter's representation).
  double stable_positive(double gamma);

 private:
  std::mt19937_64 eng_;
};

}  // namespace lil
