#include "lil/kernel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "lil/detail/gauss.hpp"
#include "lil/errors.hpp"

namespace lil {

namespace {

using std::numbers::pi;

// Flattened symbol psi(xi) = sum w_i xi^{b_i} (xi >= 0), whatever the
// process kind. Subordinated BM collapses to the single index 2 gamma.
struct Symbol {
  std::vector<MixtureComponent> comp;
  double beta_min = 2;
  double beta_max = 0;
  double weight_sum = 0;
  bool pure_gaussian = true;

  double operator()(double xi) const {
    double s = 0;
    for (const auto& c : comp) s += c.weight * std::pow(xi, c.index);
    return s;
  }
  double derivative(double xi) const {
    double s = 0;
    for (const auto& c : comp)
      s += c.weight * c.index * std::pow(xi, c.index - 1);
    return s;
  }
};

Symbol make_symbol(const ProcessSpec& spec) {
  Symbol s;
  switch (spec.kind) {
    case ProcessKind::StableLevy:
      s.comp = {{1.0, spec.beta}};
      break;
    case ProcessKind::StableMixtureLevy:
      s.comp = spec.components;
      break;
    case ProcessKind::SubordinatedBM:
      s.comp = {{1.0, 2.0 * spec.gamma}};
      break;
  }
  for (const auto& c : s.comp) {
    s.beta_min = std::min(s.beta_min, c.index);
    s.beta_max = std::max(s.beta_max, c.index);
    s.weight_sum += c.weight;
    if (c.index != 2.0) s.pure_gaussian = false;
  }
  return s;
}

// Solves psi(xi) = y. Newton in log-log coordinates: there the residual is
// increasing and convex (its slope is a psi-weighted mean of the indices),
// so the iteration is globally safe.
double symbol_inverse(const Symbol& psi, double y) {
  if (psi.comp.size() == 1)
    return std::pow(y / psi.comp[0].weight, 1.0 / psi.comp[0].index);
  const double ly = std::log(y);
  double l = (ly - std::log(psi.weight_sum)) / psi.beta_max;
  for (int it = 0; it < 60; ++it) {
    const double xi = std::exp(l);
    const double v = psi(xi);
    const double slope = xi * psi.derivative(xi) / v;
    const double step = (std::log(v) - ly) / slope;
    l -= step;
    if (std::abs(step) < 1e-14) break;
  }
  return std::exp(l);
}

// Integral over [0, b] of g, where g may have a fractional-power kink at 0
// (from |xi|^beta with beta < 2) but is smooth relative to the scale of
// each dyadic subpanel. Summed smallest panel first.
template <class F>
double head_integral(F&& g, double b, int levels = 18) {
  double s = quad::gl<16>(g, 0.0, b * std::ldexp(1.0, -levels));
  for (int k = levels; k >= 1; --k)
    s += quad::gl<16>(g, b * std::ldexp(1.0, -k), b * std::ldexp(1.0, -(k - 1)));
  return s;
}

template <class F>
double split_panel(F&& g, double a, double b, int n_split) {
  if (n_split <= 1) return quad::gl<16>(g, a, b);
  double s = 0;
  const double w = (b - a) / n_split;
  for (int i = 0; i < n_split; ++i)
    s += quad::gl<16>(g, a + i * w, a + (i + 1) * w);
  return s;
}

// Limit of the alternating tail by repeated averaging of its partial sums.
double averaged_tail(std::vector<double> partial) {
  for (std::size_t m = partial.size() - 1; m >= 1; --m)
    for (std::size_t j = 0; j < m; ++j)
      partial[j] = 0.5 * (partial[j] + partial[j + 1]);
  return partial[0];
}

constexpr int kDirectPanels = 48;
constexpr int kAveragedPanels = 40;

// int_0^inf f(xi) cos(x xi) dxi for positive decreasing f, x > 0, with half
// period panels between the cosine zeros. log_f drives the subdivision of
// panels over which f drops steeply; beyond xi_cut the remaining integral
// is negligible (pass +inf for algebraic decay and let the averaging do the
// truncation).
template <class F, class LogF>
double cosine_transform_osc(F&& f, LogF&& log_f, double x, double xi_cut) {
  const auto g = [&](double xi) { return f(xi) * std::cos(x * xi); };
  const auto zero = [&](int m) { return (m + 0.5) * pi / x; };
  const auto panel = [&](int m) {
    const double a = zero(m - 1), b = zero(m);
    const double drop = log_f(a) - log_f(b);
    const int ns = drop > 2 ? std::min(16, int(std::ceil(drop / 2))) : 1;
    return split_panel(g, a, b, ns);
  };

  double direct = head_integral(g, zero(0));
  int m = 1;
  for (; m <= kDirectPanels; ++m) {
    direct += panel(m);
    if (zero(m - 1) > xi_cut) return direct;
  }
  std::vector<double> partial;
  partial.reserve(kAveragedPanels);
  double run = 0;
  for (int j = 0; j < kAveragedPanels; ++j, ++m) {
    run += panel(m);
    partial.push_back(run);
    if (zero(m - 1) > xi_cut) return direct + run;
  }
  return direct + averaged_tail(std::move(partial));
}

// Non-oscillatory evaluation of (1/pi) int f cos(x xi) over [0, cutoff
// region]: panels between the knots t psi = 2j. Valid when x * cutoff stays
// below about one period.
template <class F>
double cosine_transform_smooth(F&& f, const Symbol& psi, double t, double x) {
  const auto g = [&](double xi) { return f(xi) * std::cos(x * xi); };
  double s = head_integral(g, symbol_inverse(psi, 2.0 / t));
  for (int j = 2; j <= 23; ++j)
    s += quad::gl<16>(g, symbol_inverse(psi, 2.0 * (j - 1) / t),
                      symbol_inverse(psi, 2.0 * j / t));
  return s;
}

double heat_kernel_sym(const Symbol& psi, double t, double x) {
  x = std::abs(x);
  if (psi.pure_gaussian) {
    // psi = W xi^2. Shifting the contour by ix/(2Wt) makes the integrand a
    // pure Gaussian in the new variable; the imaginary leg contributes
    // nothing to the real part. The e^{-x^2/4Wt} scale of the answer is
    // then an exact prefactor instead of a cancellation burden.
    const double W = psi.weight_sum;
    const double pref = std::exp(-x * x / (4.0 * W * t));
    const auto f = [&](double v) { return std::exp(-W * t * v * v); };
    double s = head_integral(f, std::sqrt(2.0 / (W * t)));
    for (int j = 2; j <= 23; ++j)
      s += quad::gl<16>(f, std::sqrt(2.0 * (j - 1) / (W * t)),
                        std::sqrt(2.0 * j / (W * t)));
    return pref * s / pi;
  }
  const auto f = [&](double xi) { return std::exp(-t * psi(xi)); };
  const double cut = symbol_inverse(psi, 46.0 / t);
  if (x * cut <= 2 * pi) return cosine_transform_smooth(f, psi, t, x) / pi;
  const auto log_f = [&](double xi) { return -t * psi(xi); };
  return cosine_transform_osc(f, log_f, x, cut) / pi;
}

// One term of exp(-t psi) - 1 expanded in fractional powers of xi:
// coef * xi^exponent, produced at the given order in psi.
struct ExpansionTerm {
  int order;
  double coef;
  double exponent;
};

std::vector<ExpansionTerm> symbol_expansion(const Symbol& psi, double t,
                                            int max_order) {
  using Poly = std::vector<std::array<double, 2>>;  // (coef, exponent)
  const auto mul = [](const Poly& a, const Poly& b) {
    Poly r;
    for (const auto& u : a)
      for (const auto& v : b) {
        const double c = u[0] * v[0];
        const double e = u[1] + v[1];
        bool merged = false;
        for (auto& w : r)
          if (std::abs(w[1] - e) < 1e-9) {
            w[0] += c;
            merged = true;
            break;
          }
        if (!merged) r.push_back({c, e});
      }
    return r;
  };

  Poly base;
  for (const auto& c : psi.comp) base.push_back({c.weight, c.index});
  Poly power = base;
  std::vector<ExpansionTerm> out;
  double factorial = 1;
  for (int k = 1; k <= max_order; ++k) {
    factorial *= k;
    const double coef = (k % 2 ? -1.0 : 1.0) * std::pow(t, k) / factorial;
    for (const auto& m : power) out.push_back({k, coef * m[0], m[1]});
    if (k < max_order) power = mul(power, base);
  }
  return out;
}

// 2 int_X^inf of the density tail generated by the monomial c xi^s inside
// the inversion integral. Even integer exponents contribute no power tail.
double monomial_tail_mass(double c, double s, double X) {
  const double sn = std::sin(pi * s / 2);
  if (std::abs(sn) < 1e-12) return 0;
  return -(2.0 / pi) * c * std::tgamma(s + 1.0) * sn * std::pow(X, -s) / s;
}

constexpr int kTailOrder = 6;  // orders kept in tail corrections
constexpr int kGaugeOrder = 7; // first omitted order, used as error gauge

double expansion_tail_mass(const std::vector<ExpansionTerm>& terms, double X,
                           int max_order) {
  double s = 0;
  for (const auto& m : terms)
    if (m.order <= max_order) s += monomial_tail_mass(m.coef, m.exponent, X);
  return s;
}

double expansion_gauge(const std::vector<ExpansionTerm>& terms, double X) {
  double s = 0;
  for (const auto& m : terms)
    if (m.order == kGaugeOrder)
      s += std::abs(monomial_tail_mass(m.coef, m.exponent, X));
  return s;
}

void validate_time(double t) {
  if (!(t > 0) || !std::isfinite(t))
    throw std::domain_error("time must be positive finite");
}

}  // namespace

double heat_kernel(const ProcessSpec& spec, double t, double x) {
  validate_time(t);
  if (!std::isfinite(x)) throw std::domain_error("position must be finite");
  return heat_kernel_sym(make_symbol(spec), t, x);
}

MassCheck mass_check(const ProcessSpec& spec, double t) {
  validate_time(t);
  const Symbol psi = make_symbol(spec);
  MassCheck out;

  const auto px = [&](double x) { return heat_kernel_sym(psi, t, x); };
  const auto body_integral = [&](double x0, double X) {
    double s = quad::gl<24>(px, 0.0, x0);
    double a = x0;
    while (a < X) {
      const double b = std::min(2 * a, X);
      s += quad::gl<24>(px, a, b);
      a = b;
    }
    return 2 * s;
  };

  if (psi.pure_gaussian) {
    const double sc = 2.0 * std::sqrt(psi.weight_sum * t);
    out.cutoff = 6.0 * sc;
    out.quadrature_part = body_integral(sc, out.cutoff);
    out.tail_correction = std::erfc(out.cutoff / sc);
    out.tail_error_estimate = 0;
    out.mass = out.quadrature_part + out.tail_correction;
    return out;
  }

  const auto terms = symbol_expansion(psi, t, kGaugeOrder);
  const double x0 = 1.0 / symbol_inverse(psi, 1.0 / t);  // bulk spatial scale
  double X = 8 * x0;
  int guard = 0;
  while (expansion_gauge(terms, X) > 1e-10) {
    X *= 2;
    if (++guard > 60)
      throw NumericError("mass_check: tail cutoff failed to stabilize");
  }
  out.cutoff = X;
  out.quadrature_part = body_integral(x0, X);
  out.tail_correction = expansion_tail_mass(terms, X, kTailOrder);
  out.tail_error_estimate = expansion_gauge(terms, X);
  out.mass = out.quadrature_part + out.tail_correction;
  return out;
}

double chapman_kolmogorov_residual(const ProcessSpec& spec, double s, double t,
                                   double x) {
  validate_time(t);
  if (!(s > 0 && s < t))
    throw std::domain_error("intermediate time must lie in (0, t)");
  const Symbol psi = make_symbol(spec);
  const double direct = heat_kernel_sym(psi, t, x);

  const double a1 = 1.0 / symbol_inverse(psi, 1.0 / s);
  const double a2 = 1.0 / symbol_inverse(psi, 1.0 / (t - s));
  const auto g = [&](double y) {
    return heat_kernel_sym(psi, s, y) * heat_kernel_sym(psi, t - s, x - y);
  };

  // adaptive cutoff: both factors integrate to one, and each is unimodal,
  // so the missing mass is at most p(s, Y) + p(t-s, Y - |x|)
  double Y = 4 * (a1 + a2) + 2 * std::abs(x);
  int guard = 0;
  while (heat_kernel_sym(psi, s, Y) + heat_kernel_sym(psi, t - s, Y - std::abs(x)) >
         1e-9 * direct) {
    Y *= 2;
    if (++guard > 40)
      throw NumericError("chapman_kolmogorov: cutoff failed to stabilize");
  }

  std::vector<double> pts{-Y, Y, 0.0, x};
  const auto add_geometric = [&](double center, double scale) {
    for (double w = scale / 4; w < 2 * Y; w *= 2) {
      pts.push_back(center - w);
      pts.push_back(center + w);
    }
  };
  add_geometric(0.0, a1);
  add_geometric(x, a2);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::remove_if(pts.begin(), pts.end(),
                           [&](double p) { return p < -Y || p > Y; }),
            pts.end());

  double conv = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (pts[i] - pts[i - 1] > 1e-12 * Y)
      conv += quad::gl<16>(g, pts[i - 1], pts[i]);
  return std::abs(conv - direct) / direct;
}

HkeFit hke_fit(const ProcessSpec& spec, const std::vector<double>& times,
               double u_max, int probes_per_time) {
  if (times.empty()) throw std::invalid_argument("hke_fit: no probe times");
  if (!(u_max > 0.1)) throw std::domain_error("hke_fit: u_max too small");
  const NaturalScales ns = natural_scale_functions(spec);
  const Symbol psi = make_symbol(spec);

  HkeFit fit;
  fit.c_lower = std::numeric_limits<double>::infinity();
  fit.c_upper = 0;
  fit.u_max = u_max;
  const double u_min = 0.05;
  for (double t : times) {
    validate_time(t);
    const double r = inverse_scale(ns.time_scale, t);
    const auto visit = [&](double ratio) {
      fit.c_lower = std::min(fit.c_lower, ratio);
      fit.c_upper = std::max(fit.c_upper, ratio);
      ++fit.n_probes;
    };
    visit(heat_kernel_sym(psi, t, 0) * ns.volume(r));
    for (int i = 0; i < probes_per_time; ++i) {
      const double u =
          u_min * std::pow(u_max / u_min, double(i) / (probes_per_time - 1));
      const double x = u * r;
      const double bound =
          std::min(1.0 / ns.volume(r), t / (ns.volume(x) * ns.time_scale(x)));
      visit(heat_kernel_sym(psi, t, x) / bound);
    }
  }
  return fit;
}

ResolventValue resolvent(const ProcessSpec& spec, double x, double lambda) {
  if (!(lambda > 0) || !std::isfinite(lambda))
    throw std::domain_error("resolvent: lambda must be positive finite");
  const Symbol psi = make_symbol(spec);
  x = std::abs(x);
  const auto f = [&](double xi) { return 1.0 / (lambda + psi(xi)); };

  if (x == 0) {
    // finite iff int^inf dxi/psi converges, i.e. the top index exceeds 1;
    // classified here rather than left to quadrature blowup
    if (psi.beta_max <= 1)
      return {std::numeric_limits<double>::infinity(), false};
    const double xi0 = symbol_inverse(psi, lambda);
    double s = head_integral(f, xi0);
    double a = xi0;
    double prev = 0, last = 0;
    for (int k = 0; k < 80; ++k) {
      prev = last;
      last = quad::gl<16>(f, a, 2 * a);
      s += last;
      a *= 2;
    }
    // octave integrals end up geometric with ratio -> 2^{1 - beta_max}
    const double rho = last / prev;
    if (!(rho < 1))
      throw NumericError("resolvent: tail decay did not stabilize");
    return {(s + last * rho / (1 - rho)) / pi, true};
  }

  const auto log_f = [&](double xi) { return -std::log(lambda + psi(xi)); };
  const double value = cosine_transform_osc(
      f, log_f, x, std::numeric_limits<double>::infinity());
  return {value / pi, true};
}

double resolvent_time_domain(const ProcessSpec& spec, double x, double lambda) {
  if (!(lambda > 0) || !std::isfinite(lambda))
    throw std::domain_error("resolvent: lambda must be positive finite");
  const Symbol psi = make_symbol(spec);
  x = std::abs(x);
  const auto g = [&](double t) {
    return heat_kernel_sym(psi, t, x) * std::exp(-lambda * t);
  };
  const double T1 = 1.0 / lambda;
  double s = 0;
  if (x == 0) {
    const double b = psi.beta_max;  // small-t diagonal blowup index
    if (b <= 1) return std::numeric_limits<double>::infinity();
    // t = u^q flattens the t^{-1/b} singularity exactly
    const double q = b / (b - 1);
    const auto gu = [&](double u) {
      const double t = std::pow(u, q);
      return g(t) * q * std::pow(u, q - 1);
    };
    s += head_integral(gu, std::pow(T1, 1 / q), 14);
  } else {
    s += head_integral(g, T1, 14);
  }
  for (int j = 2; j <= 46; ++j)
    s += quad::gl<16>(g, (j - 1) * T1, j * T1);
  return s;
}

KernelCdf::KernelCdf(const ProcessSpec& spec, double t, double x_max,
                     int n_intervals) {
  validate_time(t);
  if (!(x_max > 0) || n_intervals < 16)
    throw std::domain_error("kernel cdf: bad table parameters");
  const Symbol psi = make_symbol(spec);
  h_ = x_max / n_intervals;
  x_max_ = x_max;

  if (psi.pure_gaussian) {
    gaussian_ = true;
    gauss_scale_ = 2.0 * std::sqrt(psi.weight_sum * t);
  } else {
    for (const auto& m : symbol_expansion(psi, t, kTailOrder)) {
      const double sn = std::sin(pi * m.exponent / 2);
      if (std::abs(sn) < 1e-12) continue;
      tail_.push_back({-(2.0 / pi) * m.coef * std::tgamma(m.exponent + 1.0) *
                           sn / m.exponent,
                       m.exponent});
    }
  }

  p_.resize(n_intervals + 1);
  cum_.resize(n_intervals + 1);
  const auto px = [&](double x) { return heat_kernel_sym(psi, t, x); };
  p_[0] = px(0);
  cum_[0] = 0;
  for (int k = 1; k <= n_intervals; ++k) {
    p_[k] = px(k * h_);
    cum_[k] = cum_[k - 1] + quad::gl<16>(px, (k - 1) * h_, k * h_);
  }

  // the body quadrature and the tail expansion must meet at the cut
  const double resid = std::abs((0.5 - cum_.back()) - 0.5 * tail_mass(x_max_));
  if (resid > 2e-7)
    throw NumericError("kernel cdf: body and tail disagree at the cutoff by " +
                       std::to_string(resid));
}

double KernelCdf::tail_mass(double x) const {
  if (gaussian_) return std::erfc(x / gauss_scale_);
  double s = 0;
  for (const auto& [coef, expo] : tail_) s += coef * std::pow(x, -expo);
  return s;
}

double KernelCdf::operator()(double x) const {
  const double a = std::abs(x);
  double half;  // P(0 < X <= a)
  if (a >= x_max_) {
    half = 0.5 - 0.5 * tail_mass(a);
  } else {
    const auto k = std::min<std::size_t>(std::size_t(a / h_), p_.size() - 2);
    const double u = (a - k * h_) / h_;
    // cubic Hermite in the cumulative, with the kernel values as slopes
    const double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
    const double h10 = u * (1 - u) * (1 - u);
    const double h01 = u * u * (3 - 2 * u);
    const double h11 = u * u * (u - 1);
    half = h00 * cum_[k] + h10 * h_ * p_[k] + h01 * cum_[k + 1] +
           h11 * h_ * p_[k + 1];
  }
  return x >= 0 ? 0.5 + half : 0.5 - half;
}

stats::Histogram empirical_kernel(const PathEnsemble& ensemble,
                                  std::int64_t step_index, double lo,
                                  double hi, int n_bins) {
  if (step_index < 1 || step_index > ensemble.grid().n_steps)
    throw std::out_of_range("empirical_kernel: step index outside grid");
  stats::Histogram hist(lo, hi, n_bins);
  const ProcessSpec& spec = ensemble.spec();
  const IncrementSampler step(spec, ensemble.grid().dt);
  const std::int64_t n = ensemble.n_paths();

#pragma omp parallel
  {
    stats::Histogram local(lo, hi, n_bins);
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      Rng rng(ensemble.seed_of(i));
      double x = spec.start;
      for (std::int64_t j = 0; j < step_index; ++j) x += step(rng);
      local.add(x - spec.start);
    }
#pragma omp critical
    hist.merge(local);  // integer counts: merge order cannot matter
  }
  return hist;
}

DirichletKernelEstimate dirichlet_kernel_estimate(
    const ProcessSpec& spec, double radius, double horizon, double dt,
    const std::vector<double>& starts, double bin_lo, double bin_hi,
    int n_bins, std::int64_t paths_per_start, std::uint64_t master_seed) {
  if (!(radius > 0)) throw std::domain_error("killed kernel: radius > 0");
  validate_time(horizon);
  if (!(dt > 0) || dt > horizon)
    throw std::domain_error("killed kernel: need 0 < dt <= horizon");
  if (starts.empty() || n_bins < 1 || paths_per_start < 1)
    throw std::invalid_argument("killed kernel: empty probe plan");
  for (double s0 : starts)
    if (std::abs(s0) >= radius)
      throw std::domain_error("killed kernel: starts must lie inside the ball");

  DirichletKernelEstimate est;
  est.radius = radius;
  est.dt = dt;
  const std::int64_t n_steps = std::llround(horizon / dt);
  est.horizon = n_steps * dt;
  est.starts = starts;
  est.bin_lo = bin_lo;
  est.bin_hi = bin_hi;
  est.n_bins = n_bins;
  est.paths_per_start = paths_per_start;
  est.counts.setZero(std::int64_t(starts.size()), n_bins);
  est.survived.assign(starts.size(), 0);

  const IncrementSampler step(spec, dt);
  const double bin_w = (bin_hi - bin_lo) / n_bins;

  for (std::size_t si = 0; si < starts.size(); ++si) {
    const double x0 = starts[si];
    std::int64_t surv = 0;
    std::vector<std::int64_t> cell(n_bins, 0);
#pragma omp parallel
    {
      std::int64_t surv_loc = 0;
      std::vector<std::int64_t> cell_loc(n_bins, 0);
#pragma omp for schedule(static)
      for (std::int64_t j = 0; j < paths_per_start; ++j) {
        Rng rng(path_seed(master_seed,
                          std::uint64_t(si) * paths_per_start + j));
        double x = x0;
        bool alive = true;
        for (std::int64_t k = 0; k < n_steps; ++k) {
          x += step(rng);
          if (std::abs(x) > radius) {
            alive = false;
            break;
          }
        }
        if (alive) {
          ++surv_loc;
          if (x >= bin_lo && x < bin_hi) {
            const int b = std::min(n_bins - 1, int((x - bin_lo) / bin_w));
            ++cell_loc[b];
          }
        }
      }
#pragma omp critical
      {
        surv += surv_loc;
        for (int b = 0; b < n_bins; ++b) cell[b] += cell_loc[b];
      }
    }
    est.survived[si] = surv;
    for (int b = 0; b < n_bins; ++b) est.counts(std::int64_t(si), b) = cell[b];
  }
  return est;
}

stats::LinearFit holder_exponent(const ProcessSpec& spec, double t, double x0,
                                 double h_min, double h_max, int n_probes) {
  validate_time(t);
  if (!(h_min > 0 && h_max > h_min) || n_probes < 4)
    throw std::domain_error("holder_exponent: bad probe range");
  const Symbol psi = make_symbol(spec);
  const double base = heat_kernel_sym(psi, t, x0);
  Eigen::ArrayXd lx(n_probes), ly(n_probes);
  for (int i = 0; i < n_probes; ++i) {
    const double h =
        h_min * std::pow(h_max / h_min, double(i) / (n_probes - 1));
    const double d = std::abs(heat_kernel_sym(psi, t, x0 + h) - base);
    lx[i] = std::log(h);
    ly[i] = std::log(std::max(d, 1e-300));
  }
  return stats::linear_fit(lx, ly);
}

}  // namespace lil
