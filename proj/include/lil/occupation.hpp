#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "lil/process.hpp"
#include "lil/scale.hpp"
#include "lil/stats.hpp"

namespace lil {

using Eigen::ArrayXd;

// Occupation counts over the tiling of the line by half-open cells
// [origin + 2 eps k, origin + 2 eps (k+1)). One pass over the grid points of
// a path gives, from the same accumulator, the sup-local-time proxy
// (max count * dt / 2 eps), the range proxy (visited cells * 2 eps) and the
// full local-time profile. Backed by a dense vector that grows to the
// visited span.
class CellOccupancy {
 public:
  explicit CellOccupancy(double eps, double origin = 0.0);
  void add(double x);

  std::int64_t max_count() const { return max_count_; }
  std::int64_t cells_visited() const { return visited_; }
  std::int64_t total() const { return total_; }
  double half_width() const { return eps_; }

  double sup_local_time(double dt) const {
    return double(max_count_) * dt / (2 * eps_);
  }
  double range() const { return double(visited_) * 2 * eps_; }

  // Profile over the full visited span (zero-count interior cells included):
  // centers[i] is the cell midpoint, counts[i] the occupation count.
  struct Profile {
    ArrayXd centers;
    Eigen::ArrayX<std::int64_t> counts;
  };
  Profile profile() const;

 private:
  std::int64_t cell_of(double x) const;
  void ensure(std::int64_t index);

  double eps_;
  double origin_;
  std::int64_t min_index_ = 0;
  std::vector<std::int64_t> counts_;
  std::int64_t max_count_ = 0;
  std::int64_t visited_ = 0;
  std::int64_t total_ = 0;
};

// Occupancy of a sampled path: every left grid endpoint X_0 .. X_{n-1}
// deposits dt of occupation into its cell.
CellOccupancy occupancy_of(const PathSample& path, double eps);

// Local time estimate at a level: (dt / 2 eps) #{ j < n : |X_j - level| <= eps }.
double local_time(const PathSample& path, double level, double eps);
// Same, cumulatively at every grid time.
ArrayXd local_time_curve(const PathSample& path, double level, double eps);

// L*(t) R(t) >= t: with shared cells this is the pigeonhole inequality
// max_count * visited >= total, exact in integers.
struct LsupRangeIdentity {
  double sup_local_time = 0;
  double range = 0;
  double product = 0;
  double elapsed = 0;
  bool holds = false;
};
LsupRangeIdentity lsup_range_identity_check(const PathSample& path, double eps);

// Piecewise constant test function for the occupation identity.
struct StepFunction {
  std::vector<double> breaks;   // ascending
  std::vector<double> values;   // size breaks.size() + 1
  double operator()(double x) const;
};

// int_0^t f(X_s) ds = int f(x) l(x, t) dx, discretized on both sides: the
// left side exactly on the grid, the right side from cell counts with f
// sampled at cell centers. The two disagree only where f varies inside a
// cell near one of its breakpoints.
struct OccupationIdentity {
  double time_integral = 0;
  double space_integral = 0;
  double rel_gap = 0;
};
OccupationIdentity occupation_identity_check(const PathSample& path,
                                             const StepFunction& f,
                                             double eps);

// Moments E[ l(y, t)^n ] of the local time at y for a single stable process
// of index beta > 1 started at x, through the time-ordered representation:
// the diagonal case telescopes to a closed form, the off-diagonal case is
// one kernel quadrature against the closed-form inner factor. n in {1,2,3}.
double kac_moment_exact(double beta, double x, double y, double t, int n);

// m_n against the bound n! m_1(x,y) m_1(y,y)^{n-1}.
struct KacBound {
  double moment = 0;
  double product_bound = 0;
  bool holds = false;
};
KacBound kac_product_bound_check(double beta, double x, double y, double t,
                                 int n);

// Monte Carlo first moment of the local time at a level, with the
// eps-smoothing bias removed by Richardson extrapolation at exponent
// diagonal_index - 1 (the cusp order of the exact first moment).
struct McLocalTime {
  std::vector<double> eps;
  std::vector<double> mean;
  std::vector<double> sem;
  double richardson = 0;
  double bias_exponent = 0;
};
McLocalTime mc_local_time(const ProcessSpec& spec, double level, double t,
                          double dt, std::vector<double> epsilons,
                          std::int64_t n_paths, std::uint64_t master_seed);

// Upper tail of l(0, t): for a stable of index b > 1 the exceedance
// probability decays like exp(-c u^{b/(b-1)}), so log P(L > u) against
// u^{b/(b-1)} should be linear with negative slope. Fitted over quantile
// levels that keep at least min_exceed exceedances each.
struct LocalTimeTail {
  stats::LinearFit fit;      // log exceedance fraction vs u^{b/(b-1)}
  double u_lo = 0, u_hi = 0;
  std::int64_t min_exceedances = 0;
  int n_levels = 0;
  std::vector<double> u;           // fitted threshold levels
  std::vector<double> exceedance;  // empirical exceedance fraction at each
};
LocalTimeTail local_time_tail_check(const ProcessSpec& spec, double t,
                                    double dt, double eps,
                                    std::int64_t n_paths, int n_levels,
                                    std::int64_t min_exceed,
                                    std::uint64_t master_seed);

// Continuity-lemma audit of local-time profiles. For each path the
// energy
//   Gamma = sum_{i != j} ( e^{ |l(x_i)-l(x_j)| / U(|x_i-x_j|) } - 1 ) s^2,
// with U(r) = sqrt(phi(r)/V(r)) and s the sample spacing, yields the bound
//   |l(x)-l(y)| <= c1 * B(Gamma, |x-y|),
//   B(G, d) = int_0^d log(1 + G/u^2) U(u)/u du.
// c1 is calibrated as the max ratio over pairs of even parity
// (path + i + j), then audited on the odd pairs; the empirical modulus
// omega(h) (median over paths of the largest |l(x)-l(y)| with |x-y| <= h)
// is fitted in log-log to expose its growth exponent.
struct GarsiaCheck {
  double c1 = 0;
  std::int64_t calibration_pairs = 0;
  std::int64_t holdout_pairs = 0;
  std::int64_t violations = 0;
  double violation_rate = 0;
  stats::LinearFit modulus_fit;
  ArrayXd h_grid;
  ArrayXd omega;  // median modulus at each h
};
GarsiaCheck garsia_modulus(const PathEnsemble& ensemble, double eps,
                           int max_profile_points, double h_min, double h_max,
                           int n_h, const ScaleFunction& volume,
                           const ScaleFunction& time_scale);

// E int_0^inf e^{-lambda s} dl(level, s) equals the lambda-resolvent
// smoothed over the eps band. Both sides are produced for the same band, so
// the smoothing bias cancels and only Monte Carlo and grid error remain.
struct ResolventIdentity {
  double mc_value = 0;
  double mc_sem = 0;
  double smoothed_reference = 0;
  double rel_gap = 0;
};
ResolventIdentity resolvent_local_identity_check(
    const ProcessSpec& spec, double level, double lambda, double eps,
    double dt, double horizon, std::int64_t n_paths,
    std::uint64_t master_seed);

}  // namespace lil
