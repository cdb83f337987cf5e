#include "lil/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lil::stats {

LinearFit linear_fit(const ArrayXd& x, const ArrayXd& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::domain_error("linear_fit: need two series of equal length >= 2");
  const int n = static_cast<int>(x.size());
  Eigen::MatrixXd design(n, 2);
  design.col(0).setOnes();
  design.col(1) = x.matrix();
  Eigen::Vector2d coef = design.colPivHouseholderQr().solve(y.matrix());
  LinearFit fit;
  fit.intercept = coef(0);
  fit.slope = coef(1);
  fit.n = n;
  ArrayXd resid = y - (coef(0) + coef(1) * x);
  fit.max_abs_resid = resid.abs().maxCoeff();
  const double ss_res = (resid * resid).sum();
  const double ss_tot = (y - y.mean()).square().sum();
  fit.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

double quantile(ArrayXd values, double p) {
  if (values.size() == 0) throw std::domain_error("quantile: empty sample");
  if (p < 0 || p > 1) throw std::domain_error("quantile: p outside [0,1]");
  std::sort(values.data(), values.data() + values.size());
  const double pos = p * (values.size() - 1);
  const auto i = static_cast<Eigen::Index>(pos);
  if (i + 1 >= values.size()) return values(values.size() - 1);
  const double frac = pos - static_cast<double>(i);
  return values(i) * (1 - frac) + values(i + 1) * frac;
}

double median(const ArrayXd& values) { return quantile(values, 0.5); }

double ks_distance_sorted(const ArrayXd& s,
                          const std::function<double(double)>& cdf) {
  const auto n = s.size();
  if (n == 0) throw std::domain_error("ks_distance: empty sample");
  double d = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double f = cdf(s(i));
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
  }
  return d;
}

double two_sample_ks(ArrayXd a, ArrayXd b) {
  if (a.size() == 0 || b.size() == 0)
    throw std::domain_error("two_sample_ks: empty sample");
  std::sort(a.data(), a.data() + a.size());
  std::sort(b.data(), b.data() + b.size());
  Eigen::Index i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    if (a(i) <= b(j))
      ++i;
    else
      ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() -
                             static_cast<double>(j) / b.size()));
  }
  return d;
}

double wilson_lower(std::int64_t count, std::int64_t n, double z) {
  if (n <= 0 || count < 0 || count > n)
    throw std::domain_error("wilson_lower: bad counts");
  const double p = static_cast<double>(count) / n;
  const double z2 = z * z;
  const double denom = 1 + z2 / n;
  const double center = p + z2 / (2 * n);
  const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4.0 * n * n));
  const double lo = (center - half) / denom;
  return std::max(0.0, lo);
}

Histogram::Histogram(double lo_, double hi_, int n_bins_)
    : lo(lo_), hi(hi_), n_bins(n_bins_) {
  if (!(hi > lo) || n_bins <= 0)
    throw std::domain_error("Histogram: need hi > lo and n_bins > 0");
  counts.assign(static_cast<size_t>(n_bins), 0);
}

void Histogram::add(double x) {
  ++total;
  if (x < lo || x >= hi) return;
  auto i = static_cast<int>((x - lo) / bin_width());
  if (i >= n_bins) i = n_bins - 1;  // x == hi - tiny rounding up
  ++counts[static_cast<size_t>(i)];
  ++in_range;
}

void Histogram::merge(const Histogram& other) {
  if (other.n_bins != n_bins || other.lo != lo || other.hi != hi)
    throw std::domain_error("Histogram::merge: incompatible layout");
  for (int i = 0; i < n_bins; ++i) counts[i] += other.counts[i];
  total += other.total;
  in_range += other.in_range;
}

double Histogram::density(int i) const {
  if (total == 0) return 0;
  return static_cast<double>(counts[static_cast<size_t>(i)]) /
         (static_cast<double>(total) * bin_width());
}

double Histogram::density_stderr(int i) const {
  if (total == 0) return 0;
  const double c = static_cast<double>(counts[static_cast<size_t>(i)]);
  const double n = static_cast<double>(total);
  // binomial per-bin count variance c(1 - c/n)
  return std::sqrt(std::max(c * (1.0 - c / n), 1.0)) / (n * bin_width());
}

}  // namespace lil::stats
