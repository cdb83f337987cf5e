#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "lil/process.hpp"
#include "lil/rng.hpp"
#include "lil/stats.hpp"

using namespace lil;

TEST_CASE("path seeds avalanche and stay deterministic") {
  CHECK(path_seed(1, 0) == path_seed(1, 0));
  CHECK(path_seed(1, 0) != path_seed(1, 1));
  CHECK(path_seed(1, 0) != path_seed(2, 0));
  // adjacent indices should differ in many bits, not just the low ones
  const std::uint64_t x = path_seed(9, 7) ^ path_seed(9, 8);
  CHECK(__builtin_popcountll(x) > 16);
}

TEST_CASE("rng streams are reproducible and in range") {
  Rng a(5), b(5);
  for (int i = 0; i < 64; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  CHECK(a.exponential() == b.exponential());
  CHECK(a.normal() == b.normal());
}

TEST_CASE("gaussian draws have the right first two moments") {
  Rng rng(11);
  const int n = 200000;
  double s = 0, ss = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    ss += z * z;
  }
  const double mean = s / n;
  const double var = ss / n - mean * mean;
  CHECK(std::abs(mean) < 3.0 / std::sqrt(double(n)));
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("stable sampler hits the cauchy closed form") {
  // beta = 1, scale 1 has characteristic function e^{-|xi|}: standard
  // Cauchy with cdf 1/2 + atan(x)/pi
  Rng rng(17);
  const int n = 200000;
  ArrayXd draws(n);
  for (int i = 0; i < n; ++i) draws[i] = sample_stable_increment(1.0, 1.0, rng);
  std::sort(draws.begin(), draws.end());
  const double ks = stats::ks_distance_sorted(
      draws, [](double x) { return 0.5 + std::atan(x) / M_PI; });
  CHECK(ks < 0.01);
}

TEST_CASE("stable sampler hits the gaussian closed form") {
  // beta = 2, scale 1 has characteristic function e^{-xi^2}: N(0, 2)
  Rng rng(19);
  const int n = 200000;
  ArrayXd draws(n);
  for (int i = 0; i < n; ++i) draws[i] = sample_stable_increment(2.0, 1.0, rng);
  std::sort(draws.begin(), draws.end());
  const double ks = stats::ks_distance_sorted(
      draws, [](double x) { return 0.5 * (1.0 + std::erf(x / 2.0)); });
  CHECK(ks < 0.01);
}

TEST_CASE("positive stable draws power the subordinator") {
  Rng rng(23);
  double mn = 1e300;
  for (int i = 0; i < 20000; ++i)
    mn = std::min(mn, rng.stable_positive(0.7));
  CHECK(mn > 0.0);
}

TEST_CASE("subordinated bm is the stable law in distribution") {
  // Brownian motion run by an independent gamma-stable clock has symbol
  // |xi|^{2 gamma}; one unit-time increment must match StableLevy(1.5)
  const auto sub = ProcessSpec::subordinated_bm(0.75);
  const auto stab = ProcessSpec::stable(1.5);
  CHECK(sub.diagonal_index() == doctest::Approx(1.5));
  CHECK(sub.symbol(2.0) == doctest::Approx(std::pow(2.0, 1.5)).epsilon(1e-12));

  const TimeGrid grid = make_grid(1.0, 1);
  const int n = 40000;
  ArrayXd a(n), b(n);
  for (int i = 0; i < n; ++i) {
    a[i] = simulate_path(sub, grid, path_seed(101, i)).positions[1];
    b[i] = simulate_path(stab, grid, path_seed(202, i)).positions[1];
  }
  CHECK(stats::two_sample_ks(a, b) < 0.015);
}

TEST_CASE("mixture symbol adds its components") {
  const auto mix = ProcessSpec::stable_mixture({{0.5, 1.0}, {0.5, 1.5}});
  const double xi = 3.0;
  CHECK(mix.symbol(xi) ==
        doctest::Approx(0.5 * 3.0 + 0.5 * std::pow(3.0, 1.5)).epsilon(1e-13));
  CHECK(mix.diagonal_index() == doctest::Approx(1.5));
  CHECK(mix.minimal_index() == doctest::Approx(1.0));
}

TEST_CASE("natural scales follow the process indices") {
  const auto stab = ProcessSpec::stable(1.5);
  const NaturalScales ns = natural_scale_functions(stab);
  CHECK(ns.volume.kind() == ScaleKind::Power);
  CHECK(ns.volume.exponent() == doctest::Approx(1.0));
  CHECK(ns.time_scale.exponent() == doctest::Approx(1.5));

  const auto mix = ProcessSpec::stable_mixture({{0.5, 1.0}, {0.5, 1.5}});
  const NaturalScales nm = natural_scale_functions(mix);
  CHECK(nm.time_scale.kind() == ScaleKind::InverseMixture);
}

TEST_CASE("paths are reproducible and start at the configured point") {
  const auto spec = ProcessSpec::stable(1.5, 2.5);
  const TimeGrid grid = make_grid(0.5, 64);
  const PathSample p1 = simulate_path(spec, grid, 77);
  const PathSample p2 = simulate_path(spec, grid, 77);
  const PathSample p3 = simulate_path(spec, grid, 78);
  CHECK(p1.positions[0] == 2.5);
  CHECK((p1.positions == p2.positions).all());
  CHECK(!(p1.positions == p3.positions).all());
  CHECK(p1.positions.size() == 65);
}

TEST_CASE("running sup is the prefix max of centered distances") {
  const auto spec = ProcessSpec::stable(1.2, -1.0);
  const TimeGrid grid = make_grid(0.25, 40);
  const PathSample path = simulate_path(spec, grid, 5);
  const ArrayXd sup = running_sup(path);
  double m = 0;
  for (Eigen::Index i = 0; i < path.positions.size(); ++i) {
    m = std::max(m, std::abs(path.positions[i] - path.positions[0]));
    CHECK(sup[i] == m);
  }
}

TEST_CASE("first exit time censors at the horizon") {
  const auto spec = ProcessSpec::stable(1.5);
  const TimeGrid grid = make_grid(0.1, 100);
  const PathSample path = simulate_path(spec, grid, 9);

  const ExitTime far = first_exit_time(path, 1e9);
  CHECK(far.censored);
  CHECK(far.time == doctest::Approx(grid.horizon()));

  const ExitTime near = first_exit_time(path, 1e-9);
  CHECK(!near.censored);
  // recompute the first crossing index directly
  Eigen::Index k = 0;
  while (std::abs(path.positions[k] - path.positions[0]) <= 1e-9) ++k;
  CHECK(near.time == doctest::Approx(grid.t(k)));
}

TEST_CASE("ensemble paths regenerate bit-identically") {
  const auto spec = ProcessSpec::stable(1.7);
  const PathEnsemble ens = build_ensemble(spec, make_grid(0.5, 32), 10, 42);
  CHECK(ens.seed_of(3) == path_seed(42, 3));
  const PathSample a = ens.path(3);
  const PathSample b = ens.path(3);
  CHECK((a.positions == b.positions).all());
  CHECK(a.seed == path_seed(42, 3));
}

TEST_CASE("path dumps round trip bit-exactly") {
  const auto spec = ProcessSpec::stable(1.5);
  const TimeGrid grid = make_grid(0.125, 200);
  const PathSample path = simulate_path(spec, grid, 31415);
  const std::string file =
      (std::filesystem::temp_directory_path() / "roundtrip.lilp").string();
  write_path_dump(path, file);
  const PathDump dump = read_path_dump(file);
  CHECK(dump.seed == path.seed);
  CHECK(dump.grid.dt == grid.dt);
  CHECK(dump.grid.n_steps == grid.n_steps);
  CHECK((dump.positions == path.positions).all());
  std::filesystem::remove(file);
}

TEST_CASE("grid arithmetic") {
  const TimeGrid g = make_grid(0.25, 8);
  CHECK(g.horizon() == doctest::Approx(2.0));
  CHECK(g.t(3) == doctest::Approx(0.75));
  CHECK_THROWS(make_grid(-1.0, 8));
  CHECK_THROWS(make_grid(0.1, 0));
}
