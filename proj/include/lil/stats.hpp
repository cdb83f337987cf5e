#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

namespace lil::stats {

using Eigen::ArrayXd;

// Ordinary least squares of y against x, plus the diagnostics the fit
// consumers here actually look at.
struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r2 = 0;
  double max_abs_resid = 0;
  int n = 0;
};

LinearFit linear_fit(const ArrayXd& x, const ArrayXd& y);

// p-quantile with linear interpolation between order statistics. Sorts a copy.
double quantile(ArrayXd values, double p);
double median(const ArrayXd& values);

// sup_x |F_n(x) - cdf(x)| for an already sorted sample.
double ks_distance_sorted(const ArrayXd& sorted_sample,
                          const std::function<double(double)>& cdf);

// Two-sample Kolmogorov-Smirnov distance. Sorts copies.
double two_sample_ks(ArrayXd a, ArrayXd b);

// Wilson lower confidence bound for a binomial proportion at z sigmas.
double wilson_lower(std::int64_t count, std::int64_t n, double z);

// Fixed uniform-bin histogram with integer counts (integer so that merges
// and replays are exactly order-independent).
struct Histogram {
  double lo = 0;
  double hi = 1;
  int n_bins = 0;
  std::vector<std::int64_t> counts;
  std::int64_t total = 0;     // includes out-of-range samples
  std::int64_t in_range = 0;

  Histogram(double lo_, double hi_, int n_bins_);
  void add(double x);
  void merge(const Histogram& other);
  double bin_width() const { return (hi - lo) / n_bins; }
  double bin_center(int i) const { return lo + (i + 0.5) * bin_width(); }
  // Density estimate normalized by total samples (sub-probability if some
  // mass fell out of range or was killed upstream).
  double density(int i) const;
  double density_stderr(int i) const;
};

}  // namespace lil::stats
