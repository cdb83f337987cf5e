#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "lil/lil_experiments.hpp"
#include "lil/occupation.hpp"
#include "lil/process.hpp"
#include "lil/rng.hpp"

using namespace lil;

namespace {

PathSample handmade_path(std::vector<double> xs, double dt) {
  PathSample p;
  p.spec = ProcessSpec::stable(1.5, xs.front());
  p.grid = make_grid(dt, static_cast<std::int64_t>(xs.size()) - 1);
  p.positions = Eigen::Map<const ArrayXd>(xs.data(),
                                          static_cast<Eigen::Index>(xs.size()));
  return p;
}

}  // namespace

TEST_CASE("cell occupancy counts left endpoints in start-centered cells") {
  // cells of half width 1/2 centered so that the start 0 is a midpoint:
  // [-0.5, 0.5), [0.5, 1.5), ... Left endpoints 0, 0.4, 1.2 deposit; the
  // final point -0.3 does not.
  const PathSample p = handmade_path({0.0, 0.4, 1.2, -0.3}, 0.25);
  const CellOccupancy occ = occupancy_of(p, 0.5);
  CHECK(occ.total() == 3);
  CHECK(occ.max_count() == 2);
  CHECK(occ.cells_visited() == 2);
  CHECK(occ.sup_local_time(0.25) == doctest::Approx(2 * 0.25 / 1.0));
  CHECK(occ.range() == doctest::Approx(2.0));

  const auto prof = occ.profile();
  CHECK(prof.counts.sum() == 3);
  CHECK(prof.centers.size() == prof.counts.size());
}

TEST_CASE("pigeonhole ties sup local time to the range exactly") {
  const auto spec = ProcessSpec::stable(1.3);
  const TimeGrid grid = make_grid(0.01, 5000);
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const PathSample path = simulate_path(spec, grid, seed);
    const CellOccupancy occ = occupancy_of(path, 0.05);
    // max_count * visited >= total holds in integers, so
    // L*(t) R(t) >= t survives the float conversion
    CHECK(occ.max_count() * occ.cells_visited() >= occ.total());
    const LsupRangeIdentity id = lsup_range_identity_check(path, 0.05);
    CHECK(id.holds);
    CHECK(id.product >= id.elapsed * (1.0 - 1e-12));
  }
}

TEST_CASE("local time counts the band around a level") {
  const PathSample p = handmade_path({0.0, 0.3, -0.2, 0.9, 0.05}, 0.5);
  // band |x - 0| <= 0.25 catches 0, -0.2 among the first four points
  CHECK(local_time(p, 0.0, 0.25) == doctest::Approx(2 * 0.5 / 0.5));
  const ArrayXd curve = local_time_curve(p, 0.0, 0.25);
  CHECK(curve.size() == p.positions.size());
  CHECK(curve[0] == 0.0);  // no time elapsed yet
  for (Eigen::Index i = 1; i < curve.size(); ++i)
    CHECK(curve[i] >= curve[i - 1]);
  CHECK(curve[curve.size() - 1] == doctest::Approx(local_time(p, 0.0, 0.25)));
}

TEST_CASE("occupation measure integrates step functions") {
  const auto spec = ProcessSpec::stable(1.5);
  const PathSample path = simulate_path(spec, make_grid(0.005, 20000), 99);
  StepFunction f;
  f.breaks = {-1.0, 0.0, 2.0};
  f.values = {0.0, 2.0, -1.0, 0.5};
  // cells aligned with the breaks make the two sides agree exactly;
  // a generic bandwidth only up to the mass of the straddling cells
  const OccupationIdentity aligned = occupation_identity_check(path, f, 0.25);
  CHECK(aligned.rel_gap < 1e-12);
  const OccupationIdentity generic = occupation_identity_check(path, f, 0.07);
  CHECK(generic.rel_gap < 0.2);
  CHECK(std::abs(generic.time_integral - aligned.time_integral) < 1e-12);
}

TEST_CASE("kac moments match frozen and closed-form values") {
  // diagonal closed form at t = 1, beta = 3/2
  CHECK(kac_moment_exact(1.5, 0, 0, 1.0, 1) ==
        doctest::Approx(0.862058254356493).epsilon(1e-12));
  CHECK(kac_moment_exact(1.5, 0, 0, 1.0, 2) ==
        doctest::Approx(1.312867753994041).epsilon(1e-12));
  CHECK(kac_moment_exact(1.5, 0, 0, 1.0, 3) ==
        doctest::Approx(2.737067942824892).epsilon(1e-12));
  // brownian anchors: 1/sqrt(pi) and 1/2
  CHECK(kac_moment_exact(2.0, 0, 0, 1.0, 1) ==
        doctest::Approx(1.0 / std::sqrt(M_PI)).epsilon(1e-12));
  CHECK(kac_moment_exact(2.0, 0, 0, 1.0, 2) ==
        doctest::Approx(0.5).epsilon(1e-12));
  // off-diagonal start, frozen against a separate quadrature
  CHECK(kac_moment_exact(1.5, 0.0, 0.7, 1.0, 1) ==
        doctest::Approx(0.244095262398863).epsilon(1e-9));
  CHECK(kac_moment_exact(1.5, 0.7, 0.0, 1.0, 1) ==
        doctest::Approx(0.244095262398863).epsilon(1e-9));  // symmetric
}

TEST_CASE("kac first moment rebuilt from gamma functions") {
  // the time-ordered integral of the diagonal kernel c t^{-1/b}
  // (c = Gamma(1 + 1/b)/pi) telescopes through the beta function to
  // m_n(0, 0, t) = n! c^n Gamma(a)^n / Gamma(n a + 1) t^{n a}, a = 1 - 1/b;
  // recomputed here straight from the gamma function
  for (double b : {1.2, 1.5, 1.9}) {
    const double a = 1.0 - 1.0 / b;
    const double c = std::tgamma(1.0 + 1.0 / b) / M_PI;
    const double m1 = c * std::tgamma(a) / std::tgamma(a + 1.0);
    const double m2 =
        2.0 * c * c * std::pow(std::tgamma(a), 2) / std::tgamma(2.0 * a + 1.0);
    CHECK(kac_moment_exact(b, 0, 0, 1.0, 1) ==
          doctest::Approx(m1).epsilon(1e-12));
    CHECK(kac_moment_exact(b, 0, 0, 1.0, 2) ==
          doctest::Approx(m2).epsilon(1e-12));
    CHECK(kac_moment_exact(b, 0, 0, 3.0, 1) ==
          doctest::Approx(m1 * std::pow(3.0, a)).epsilon(1e-12));
  }
  CHECK_THROWS(kac_moment_exact(0.9, 0, 0, 1.0, 1));  // no local time
  CHECK_THROWS(kac_moment_exact(1.5, 0, 0, 1.0, 4));  // n out of range
}

TEST_CASE("kac moments respect the factorial product bound") {
  for (double b : {1.5, 2.0}) {
    for (int n : {2, 3}) {
      const KacBound kb = kac_product_bound_check(b, 0.0, 0.0, 1.0, n);
      CHECK(kb.holds);
      CHECK(kb.moment <= kb.product_bound);
    }
  }
  const KacBound bm = kac_product_bound_check(2.0, 0.0, 0.0, 1.0, 2);
  CHECK(bm.moment == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(bm.product_bound == doctest::Approx(2.0 / M_PI).epsilon(1e-12));
}

TEST_CASE("monte carlo local time converges to the exact first moment") {
  const auto spec = ProcessSpec::stable(1.5);
  const McLocalTime mc =
      mc_local_time(spec, 0.0, 1.0, 1e-3, {0.1, 0.05}, 20000, 12345);
  const double exact = kac_moment_exact(1.5, 0, 0, 1.0, 1);
  CHECK(mc.mean.size() == 2);
  // the band average under-counts (the kernel peaks at the level), more so
  // at wider bands; extrapolating in eps^{b-1} removes the deficit
  CHECK(mc.mean[0] < mc.mean[1]);
  CHECK(mc.richardson > mc.mean[1]);
  CHECK(std::abs(mc.richardson - exact) / exact < 0.05);
  CHECK(mc.sem[0] > 0);
}

TEST_CASE("local time upper tail decays exponentially in the scaled variable") {
  const auto spec = ProcessSpec::stable(1.5);
  const LocalTimeTail lt =
      local_time_tail_check(spec, 1.0, 1e-3, 0.05, 20000, 10, 50, 77);
  CHECK(lt.fit.slope < 0.0);
  CHECK(lt.fit.r2 > 0.9);
  CHECK(lt.min_exceedances >= 50);
  CHECK(lt.u.size() == lt.exceedance.size());
  for (std::size_t i = 1; i < lt.exceedance.size(); ++i)
    CHECK(lt.exceedance[i] <= lt.exceedance[i - 1]);
}

TEST_CASE("garsia modulus bound holds on held-out level pairs") {
  const auto spec = ProcessSpec::stable(1.5);
  const PathEnsemble ens =
      build_ensemble(spec, make_grid(1.0 / 128.0, 64 * 128), 24, 5);
  const NaturalScales sc = natural_scale_functions(spec);
  const double eps = default_bandwidth(spec, 1.0 / 128.0);
  const GarsiaCheck gc = garsia_modulus(ens, eps, 400, 8 * eps, 4.0, 10,
                                        sc.volume, sc.time_scale);
  CHECK(gc.holdout_pairs > 1000);
  CHECK(gc.violation_rate <= 0.02);
  CHECK(gc.c1 > 0);
  // the modulus exponent sits near half the gap between the scale powers
  CHECK(gc.modulus_fit.slope == doctest::Approx(0.25).epsilon(0.6));
}

TEST_CASE("discounted local time matches the smoothed resolvent") {
  const auto spec = ProcessSpec::stable(1.5);
  const ResolventIdentity r = resolvent_local_identity_check(
      spec, 1.0, 1.0, 0.05, 0.005, 20.0, 4000, 31);
  CHECK(r.smoothed_reference > 0);
  CHECK(r.mc_sem > 0);
  // remaining gap: monte carlo noise plus the O(dt) startup bias
  CHECK(std::abs(r.rel_gap) <
        3.0 * r.mc_sem / r.smoothed_reference + 0.02);
}
