#include "lil/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lil {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t path_seed(std::uint64_t master_seed, std::uint64_t path_index) {
  // two avalanche rounds over the pair; index+1 so path 0 is not the raw master
  std::uint64_t s = master_seed ^ (0x9e3779b97f4a7c15ULL * (path_index + 1));
  std::uint64_t h = splitmix64(s);
  h ^= splitmix64(s);
  return h;
}

double Rng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::stable_symmetric(double beta) {
  if (!(beta > 0.0) || beta > 2.0)
    throw std::domain_error("stable_symmetric: beta must lie in (0,2]");
  if (beta == 2.0) return std::numbers::sqrt2 * normal();  // cf exp(-xi^2)
  if (beta == 1.0)
    return std::tan(std::numbers::pi * (uniform() - 0.5));  // cf exp(-|xi|)
  const double u = std::numbers::pi * (uniform() - 0.5);
  const double w = exponential();
  const double bu = beta * u;
  return std::sin(bu) / std::pow(std::cos(u), 1.0 / beta) *
         std::pow(std::cos(u - bu) / w, (1.0 - beta) / beta);
}

double Rng::stable_positive(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::domain_error("stable_positive: gamma must lie in (0,1)");
  const double th = std::numbers::pi * uniform();
  const double w = exponential();
  const double a =
      std::pow(std::pow(std::sin(gamma * th), gamma) *
                   std::pow(std::sin((1.0 - gamma) * th), 1.0 - gamma) /
                   std::sin(th),
               1.0 / (1.0 - gamma));
  return std::pow(a / w, (1.0 - gamma) / gamma);
}

}  // namespace lil
