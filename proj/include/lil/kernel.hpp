#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "lil/process.hpp"
#include "lil/stats.hpp"

namespace lil {

// Transition density p(t, x) of the symmetric Levy process, by Fourier
// inversion: p(t,x) = (1/pi) int_0^inf exp(-t psi(xi)) cos(x xi) dxi.
//
// The integral is evaluated with half-period panels between the cosine
// zeros (Gauss-Legendre on each, alternating tail summed by repeated
// averaging), a dyadically refined head panel to absorb the |xi|^beta kink
// at zero, and an exact contour shift for a pure |xi|^2 symbol, where
// real-axis quadrature cannot resolve the e^{-x^2/4t} scale of the answer.
// Relative accuracy is ~1e-10 over the parameter ranges exercised here.
double heat_kernel(const ProcessSpec& spec, double t, double x);

// Total-mass diagnostic: integrates p(t, .) over [-cutoff, cutoff] and adds
// the analytic tail of the expansion of exp(-t psi) in fractional powers
// (orders 1..6; order 7 supplies the error gauge and drives the adaptive
// choice of cutoff). A correct kernel returns mass == 1 to ~1e-9.
struct MassCheck {
  double mass = 0;
  double quadrature_part = 0;
  double tail_correction = 0;
  double cutoff = 0;
  double tail_error_estimate = 0;
};
MassCheck mass_check(const ProcessSpec& spec, double t);

// Relative Chapman-Kolmogorov residual
//   | int p(s,y) p(t-s, x-y) dy - p(t,x) | / p(t,x).
double chapman_kolmogorov_residual(const ProcessSpec& spec, double s, double t,
                                   double x);

// Two-sided comparison of p(t,x) against the jump-type bound
//   h(t,x) = min( 1 / V(phi^{-1}(t)),  t / (V(x) phi(x)) )
// over a probe grid t in times, x = u * phi^{-1}(t) with u log-spaced in
// (0, u_max]. c_lower and c_upper are the extreme observed ratios p/h; a
// bound of this shape holds iff they stay within fixed positive constants
// as the probe range widens.
struct HkeFit {
  double c_lower = 0;
  double c_upper = 0;
  double u_max = 0;
  int n_probes = 0;
  double ratio() const { return c_upper / c_lower; }
};
HkeFit hke_fit(const ProcessSpec& spec, const std::vector<double>& times,
               double u_max, int probes_per_time = 40);

// lambda-resolvent density u^lambda(x) = int_0^inf e^{-lambda t} p(t,x) dt,
// evaluated in frequency form (1/pi) int_0^inf cos(x xi)/(lambda+psi) dxi.
// On the diagonal it is finite iff the symbol grows faster than |xi| at
// infinity; the divergent case is classified analytically, not by overflow.
struct ResolventValue {
  double value = 0;
  bool finite = true;
};
ResolventValue resolvent(const ProcessSpec& spec, double x, double lambda);

// Same quantity integrated in the time domain (quadrature over t of
// heat_kernel, with the t -> 0 singularity removed by substitution on the
// diagonal). Independent of the frequency-form code path; used to cross
// check it.
double resolvent_time_domain(const ProcessSpec& spec, double x, double lambda);

// Tabulated CDF of X_t built from the kernel: cumulative quadrature on a
// uniform grid over [0, x_max] (cubic Hermite between nodes, the kernel
// itself supplying the slopes) and the fractional-power expansion for the
// tail beyond x_max. Good to ~1e-8 absolute, fast enough to evaluate at
// millions of sample points.
class KernelCdf {
 public:
  KernelCdf(const ProcessSpec& spec, double t, double x_max, int n_intervals);
  double operator()(double x) const;
  // P(|X_t| > x), valid for x >= x_max * 0.9.
  double tail_mass(double x) const;

 private:
  double h_;
  double x_max_;
  bool gaussian_ = false;
  double gauss_scale_ = 0;                  // 2 sqrt(W t) for a pure |xi|^2 symbol
  std::vector<double> p_;                   // kernel at nodes
  std::vector<double> cum_;                 // integral of kernel over [0, node]
  std::vector<std::array<double, 2>> tail_; // (coefficient, exponent) pairs
};

// Histogram of X at a fixed grid index across an ensemble. Counts are
// integers, accumulated per thread and merged in index order, so the result
// is independent of the number of threads.
stats::Histogram empirical_kernel(const PathEnsemble& ensemble,
                                  std::int64_t step_index, double lo,
                                  double hi, int n_bins);

// Monte Carlo estimate of the kernel of the process killed outside
// [-radius, radius]: paths started at each entry of `starts` are killed on
// first exit, survivors at the horizon are binned over [bin_lo, bin_hi].
// counts(i, j) is the number of paths from starts[i] alive at the horizon
// with position in bin j; positivity of the killed kernel on a cell is
// certified by a Wilson lower bound on counts / paths_per_start.
struct DirichletKernelEstimate {
  double radius = 0;
  double horizon = 0;
  double dt = 0;
  std::vector<double> starts;
  double bin_lo = 0;
  double bin_hi = 0;
  int n_bins = 0;
  std::int64_t paths_per_start = 0;
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts;
  std::vector<std::int64_t> survived;
};
DirichletKernelEstimate dirichlet_kernel_estimate(
    const ProcessSpec& spec, double radius, double horizon, double dt,
    const std::vector<double>& starts, double bin_lo, double bin_hi,
    int n_bins, std::int64_t paths_per_start, std::uint64_t master_seed);

// Log-log fit of |p(t, x0 + h) - p(t, x0)| against h over log-spaced h in
// [h_min, h_max]: an empirical spatial regularity exponent of the kernel.
stats::LinearFit holder_exponent(const ProcessSpec& spec, double t, double x0,
                                 double h_min, double h_max, int n_probes);

}  // namespace lil
