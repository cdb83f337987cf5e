#include "lil/occupation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "lil/detail/gauss.hpp"
#include "lil/errors.hpp"
#include "lil/kernel.hpp"

namespace lil {

namespace {

void check_eps(double eps) {
  if (!(eps > 0) || !std::isfinite(eps))
    throw std::domain_error("band half-width eps must be positive finite");
}

}  // namespace

CellOccupancy::CellOccupancy(double eps, double origin)
    : eps_(eps), origin_(origin) {
  check_eps(eps);
}

std::int64_t CellOccupancy::cell_of(double x) const {
  return std::int64_t(std::floor((x - origin_) / (2 * eps_)));
}

void CellOccupancy::ensure(std::int64_t index) {
  if (counts_.empty()) {
    min_index_ = index;
    counts_.assign(1, 0);
    return;
  }
  if (index < min_index_) {
    counts_.insert(counts_.begin(), std::size_t(min_index_ - index), 0);
    min_index_ = index;
  } else if (index >= min_index_ + std::int64_t(counts_.size())) {
    counts_.resize(std::size_t(index - min_index_ + 1), 0);
  }
}

void CellOccupancy::add(double x) {
  const std::int64_t idx = cell_of(x);
  ensure(idx);
  auto& c = counts_[std::size_t(idx - min_index_)];
  if (c == 0) ++visited_;
  ++c;
  ++total_;
  max_count_ = std::max(max_count_, c);
}

CellOccupancy::Profile CellOccupancy::profile() const {
  Profile p;
  const auto n = Eigen::Index(counts_.size());
  p.centers.resize(n);
  p.counts.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    p.centers[i] = origin_ + 2 * eps_ * (double(min_index_ + i) + 0.5);
    p.counts[i] = counts_[std::size_t(i)];
  }
  return p;
}

CellOccupancy occupancy_of(const PathSample& path, double eps) {
  CellOccupancy occ(eps, path.spec.start);
  // left endpoints: step j covers [t_j, t_{j+1}) at position X_{t_j}
  for (std::int64_t j = 0; j < path.grid.n_steps; ++j)
    occ.add(path.positions[j]);
  return occ;
}

double local_time(const PathSample& path, double level, double eps) {
  check_eps(eps);
  std::int64_t hits = 0;
  for (std::int64_t j = 0; j < path.grid.n_steps; ++j)
    if (std::abs(path.positions[j] - level) <= eps) ++hits;
  return double(hits) * path.grid.dt / (2 * eps);
}

ArrayXd local_time_curve(const PathSample& path, double level, double eps) {
  check_eps(eps);
  ArrayXd out(path.grid.n_steps + 1);
  out[0] = 0;
  std::int64_t hits = 0;
  for (std::int64_t j = 0; j < path.grid.n_steps; ++j) {
    if (std::abs(path.positions[j] - level) <= eps) ++hits;
    out[j + 1] = double(hits) * path.grid.dt / (2 * eps);
  }
  return out;
}

LsupRangeIdentity lsup_range_identity_check(const PathSample& path,
                                            double eps) {
  const CellOccupancy occ = occupancy_of(path, eps);
  LsupRangeIdentity out;
  out.sup_local_time = occ.sup_local_time(path.grid.dt);
  out.range = occ.range();
  out.product = out.sup_local_time * out.range;
  out.elapsed = double(path.grid.n_steps) * path.grid.dt;
  // max_count * visited >= total holds exactly in integers; the float
  // product can only lose a few ulps of that margin
  out.holds = out.product >= out.elapsed * (1 - 1e-12);
  return out;
}

double StepFunction::operator()(double x) const {
  const auto it = std::upper_bound(breaks.begin(), breaks.end(), x);
  return values[std::size_t(it - breaks.begin())];
}

OccupationIdentity occupation_identity_check(const PathSample& path,
                                             const StepFunction& f,
                                             double eps) {
  if (f.values.size() != f.breaks.size() + 1 || f.breaks.empty())
    throw std::invalid_argument("occupation identity: malformed step function");
  if (!std::is_sorted(f.breaks.begin(), f.breaks.end()))
    throw std::invalid_argument("occupation identity: breakpoints not sorted");

  OccupationIdentity out;
  const double dt = path.grid.dt;
  for (std::int64_t j = 0; j < path.grid.n_steps; ++j)
    out.time_integral += f(path.positions[j]) * dt;

  const auto prof = occupancy_of(path, eps).profile();
  for (Eigen::Index i = 0; i < prof.centers.size(); ++i)
    out.space_integral += f(prof.centers[i]) * double(prof.counts[i]) * dt;

  const double scale =
      std::max(std::abs(out.time_integral), std::abs(out.space_integral));
  out.rel_gap = scale > 0
                    ? std::abs(out.time_integral - out.space_integral) / scale
                    : 0.0;
  return out;
}

namespace {

double beta_fn(double x, double y) {
  return std::exp(std::lgamma(x) + std::lgamma(y) - std::lgamma(x + y));
}

}  // namespace

// Time-ordered representation: m_n = n! over the ordered visit times, which
// telescopes through F_0 = 1, F_k(tau) = int_0^tau p(g,0) F_{k-1}(tau-g) dg.
// With p(g,0) = c_b g^{-1/b} each F_k is d_k tau^{k(1-1/b)} and the
// convolution is a Beta integral, so the diagonal moments close exactly.
double kac_moment_exact(double beta, double x, double y, double t, int n) {
  if (!(beta > 1 && beta <= 2))
    throw std::domain_error("kac moments: index must lie in (1, 2]");
  if (!(t > 0)) throw std::domain_error("kac moments: t must be positive");
  if (n < 1 || n > 3)
    throw std::domain_error("kac moments: order must be 1, 2 or 3");

  const double cb = std::tgamma(1 + 1 / beta) / std::numbers::pi;
  const double a = 1 - 1 / beta;
  std::array<double, 4> d;
  d[0] = 1;
  for (int k = 1; k <= 3; ++k)
    d[k] = cb * d[k - 1] * beta_fn(a, (k - 1) * a + 1);

  double factorial = 1;
  for (int k = 2; k <= n; ++k) factorial *= k;

  const double z = y - x;
  if (z == 0) return factorial * d[n] * std::pow(t, n * a);

  // m_n = n! int_0^t p(g, z) F_{n-1}(t - g) dg; the (t-g)^{(n-1)a} kink at
  // g = t is absorbed by dyadic refinement after the change w = t - g
  const ProcessSpec spec = ProcessSpec::stable(beta);
  const auto near0 = [&](double g) {
    return heat_kernel(spec, g, z) * d[n - 1] * std::pow(t - g, (n - 1) * a);
  };
  const auto near_t = [&](double w) {
    return heat_kernel(spec, t - w, z) * d[n - 1] * std::pow(w, (n - 1) * a);
  };
  const auto dyadic = [](auto&& g, double b_, int levels) {
    double s = quad::gl<16>(g, 0.0, b_ * std::ldexp(1.0, -levels));
    for (int k = levels; k >= 1; --k)
      s += quad::gl<16>(g, b_ * std::ldexp(1.0, -k),
                        b_ * std::ldexp(1.0, -(k - 1)));
    return s;
  };
  const double integral = dyadic(near0, t / 2, 14) + dyadic(near_t, t / 2, 14);
  return factorial * integral;
}

KacBound kac_product_bound_check(double beta, double x, double y, double t,
                                 int n) {
  KacBound out;
  out.moment = kac_moment_exact(beta, x, y, t, n);
  double factorial = 1;
  for (int k = 2; k <= n; ++k) factorial *= k;
  const double m1_xy = kac_moment_exact(beta, x, y, t, 1);
  const double m1_yy = kac_moment_exact(beta, y, y, t, 1);
  out.product_bound = factorial * m1_xy * std::pow(m1_yy, n - 1);
  out.holds = out.moment <= out.product_bound * (1 + 1e-9);
  return out;
}

McLocalTime mc_local_time(const ProcessSpec& spec, double level, double t,
                          double dt, std::vector<double> epsilons,
                          std::int64_t n_paths, std::uint64_t master_seed) {
  if (epsilons.size() < 2)
    throw std::invalid_argument("mc_local_time: need at least two bands");
  std::sort(epsilons.begin(), epsilons.end(), std::greater<>());
  for (double e : epsilons) check_eps(e);
  if (!(dt > 0) || !(t > dt)) throw std::domain_error("mc_local_time: bad grid");

  const std::int64_t n_steps = std::llround(t / dt);
  const std::size_t ne = epsilons.size();
  const IncrementSampler step(spec, dt);

  // per-path estimates, one row slot per path: thread-count invariant
  Eigen::MatrixXd est(n_paths, Eigen::Index(ne));
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n_paths; ++i) {
    Rng rng(path_seed(master_seed, std::uint64_t(i)));
    std::vector<std::int64_t> hits(ne, 0);
    double x = spec.start;
    for (std::int64_t j = 0; j < n_steps; ++j) {
      const double dist = std::abs(x - level);
      for (std::size_t k = 0; k < ne; ++k)
        if (dist <= epsilons[k]) ++hits[k];
      x += step(rng);
    }
    for (std::size_t k = 0; k < ne; ++k)
      est(i, Eigen::Index(k)) = double(hits[k]) * dt / (2 * epsilons[k]);
  }

  McLocalTime out;
  out.eps = epsilons;
  out.mean.resize(ne);
  out.sem.resize(ne);
  for (std::size_t k = 0; k < ne; ++k) {
    const auto col = est.col(Eigen::Index(k));
    out.mean[k] = col.mean();
    const double var =
        (col.array() - out.mean[k]).square().sum() / double(n_paths - 1);
    out.sem[k] = std::sqrt(var / double(n_paths));
  }

  // E l_eps = L + C eps^q with q the cusp order of the exact first moment
  out.bias_exponent = spec.diagonal_index() - 1;
  if (!(out.bias_exponent > 0))
    throw std::domain_error(
        "mc_local_time: extrapolation needs diagonal index above 1");
  const double r = std::pow(epsilons[1] / epsilons[0], out.bias_exponent);
  out.richardson = (out.mean[1] - r * out.mean[0]) / (1 - r);
  return out;
}

LocalTimeTail local_time_tail_check(const ProcessSpec& spec, double t,
                                    double dt, double eps,
                                    std::int64_t n_paths, int n_levels,
                                    std::int64_t min_exceed,
                                    std::uint64_t master_seed) {
  check_eps(eps);
  if (n_levels < 4 || min_exceed < 1 || n_paths < 4 * min_exceed)
    throw std::invalid_argument("local_time_tail_check: degenerate plan");
  const double b = spec.diagonal_index();
  if (!(b > 1))
    throw std::domain_error("local_time_tail_check: needs index above 1");

  const std::int64_t n_steps = std::llround(t / dt);
  const IncrementSampler step(spec, dt);
  ArrayXd values(n_paths);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n_paths; ++i) {
    Rng rng(path_seed(master_seed, std::uint64_t(i)));
    std::int64_t hits = 0;
    double x = spec.start;
    for (std::int64_t j = 0; j < n_steps; ++j) {
      if (std::abs(x - spec.start) <= eps) ++hits;
      x += step(rng);
    }
    values[i] = double(hits) * dt / (2 * eps);
  }

  ArrayXd sorted = values;
  std::sort(sorted.data(), sorted.data() + sorted.size());
  const double q_exp = b / (b - 1);

  // thresholds from the median out to the largest level keeping min_exceed
  const double u_lo = stats::median(sorted);
  const double u_hi = sorted[sorted.size() - min_exceed];
  if (!(u_hi > u_lo))
    throw StatError("local_time_tail_check: no usable tail range");
  LocalTimeTail out;
  out.u_lo = u_lo;
  out.u_hi = u_hi;
  out.n_levels = n_levels;
  out.min_exceedances = min_exceed;

  ArrayXd xs(n_levels), ys(n_levels);
  out.u.resize(n_levels);
  out.exceedance.resize(n_levels);
  for (int k = 0; k < n_levels; ++k) {
    const double u =
        u_lo * std::pow(u_hi / u_lo, double(k) / (n_levels - 1));
    const auto first =
        std::lower_bound(sorted.data(), sorted.data() + sorted.size(), u);
    const auto exceed = (sorted.data() + sorted.size()) - first;
    out.u[k] = u;
    out.exceedance[k] = double(exceed) / double(n_paths);
    xs[k] = std::pow(u, q_exp);
    ys[k] = std::log(out.exceedance[k]);
  }
  out.fit = stats::linear_fit(xs, ys);
  return out;
}

GarsiaCheck garsia_modulus(const PathEnsemble& ensemble, double eps,
                           int max_profile_points, double h_min, double h_max,
                           int n_h, const ScaleFunction& volume,
                           const ScaleFunction& time_scale) {
  check_eps(eps);
  if (max_profile_points < 16 || n_h < 4 || !(h_min > 0) || !(h_max > h_min))
    throw std::invalid_argument("garsia_modulus: degenerate plan");

  const auto U = [&](double r) {
    return std::sqrt(time_scale(r) / volume(r));
  };
  // B(G, d) = int_0^d log1p(G / u^2) U(u)/u du, tabulated per path on a log
  // grid of d and interpolated log-linearly in d
  const auto bound_integral = [&](double G, double d) {
    const auto g = [&](double u) {
      return std::log1p(G / (u * u)) * U(u) / u;
    };
    double s = quad::gl<16>(g, 0.0, d * std::ldexp(1.0, -40));
    for (int k = 40; k >= 1; --k)
      s += quad::gl<16>(g, d * std::ldexp(1.0, -k), d * std::ldexp(1.0, -(k - 1)));
    return s;
  };

  GarsiaCheck out;
  out.h_grid.resize(n_h);
  for (int k = 0; k < n_h; ++k)
    out.h_grid[k] = h_min * std::pow(h_max / h_min, double(k) / (n_h - 1));

  struct Pair {
    double dl;
    double bound;  // B(Gamma_path, d) for this pair's own path
    bool calibration;
  };

  std::vector<ArrayXd> omega_rows;
  std::vector<Pair> pool;

  for (std::int64_t pidx = 0; pidx < ensemble.n_paths(); ++pidx) {
    const PathSample path = ensemble.path(pidx);
    const auto prof = occupancy_of(path, eps).profile();
    const Eigen::Index len = prof.centers.size();
    const Eigen::Index stride =
        std::max<Eigen::Index>(1, (len + max_profile_points - 1) / max_profile_points);
    std::vector<double> xs, ls;
    for (Eigen::Index i = 0; i < len; i += stride) {
      xs.push_back(prof.centers[i]);
      ls.push_back(double(prof.counts[i]) * path.grid.dt / (2 * eps));
    }
    const double spacing = 2 * eps * double(stride);

    struct RawPair {
      double d, dl;
      bool calibration;
    };
    std::vector<RawPair> pairs;
    double gamma = 0;  // pathwise pair energy
    for (std::size_t i = 0; i < xs.size(); ++i)
      for (std::size_t j = i + 1; j < xs.size(); ++j) {
        const double d = xs[j] - xs[i];
        const double arg = std::abs(ls[i] - ls[j]) / U(d);
        if (arg > 600)
          throw NumericError("garsia_modulus: pair energy overflow; rescale");
        gamma += 2 * std::expm1(arg) * spacing * spacing;
        pairs.push_back({d, std::abs(ls[i] - ls[j]),
                         (std::uint64_t(pidx) + i + j) % 2 == 0});
      }
    if (pairs.empty()) continue;

    // per-path modulus on the shared h grid
    std::sort(pairs.begin(), pairs.end(),
              [](const RawPair& a, const RawPair& b) { return a.d < b.d; });
    ArrayXd om(n_h);
    double running = 0;
    std::size_t at = 0;
    for (int k = 0; k < n_h; ++k) {
      while (at < pairs.size() && pairs[at].d <= out.h_grid[k]) {
        running = std::max(running, pairs[at].dl);
        ++at;
      }
      om[k] = running;
    }
    omega_rows.push_back(std::move(om));

    // bound table for this path's Gamma over its observed distance range
    const double d_lo = pairs.front().d, d_hi = pairs.back().d;
    constexpr int nb = 48;
    std::array<double, nb> bv;
    const double l0 = std::log(d_lo);
    const double lstep = (std::log(d_hi) - l0) / (nb - 1);
    for (int k = 0; k < nb; ++k)
      bv[std::size_t(k)] = bound_integral(gamma, std::exp(l0 + k * lstep));
    const auto bound_at = [&](double d) {
      const double w_all = (std::log(d) - l0) / lstep;
      const int k = std::clamp(int(w_all), 0, nb - 2);
      const double w = w_all - k;
      return std::exp((1 - w) * std::log(bv[std::size_t(k)]) +
                      w * std::log(bv[std::size_t(k + 1)]));
    };
    for (const auto& p : pairs)
      pool.push_back({p.dl, bound_at(p.d), p.calibration});
  }

  // global calibration on the even pairs, then the audit on the odd ones
  double c1 = 0;
  for (const auto& p : pool)
    if (p.calibration) {
      ++out.calibration_pairs;
      c1 = std::max(c1, p.dl / p.bound);
    }
  for (const auto& p : pool)
    if (!p.calibration) {
      ++out.holdout_pairs;
      if (p.dl > c1 * p.bound) ++out.violations;
    }
  out.c1 = c1;
  out.violation_rate =
      out.holdout_pairs ? double(out.violations) / double(out.holdout_pairs) : 0;

  // median modulus across paths, fitted in log-log over the h grid
  out.omega.resize(n_h);
  for (int k = 0; k < n_h; ++k) {
    ArrayXd col(Eigen::Index(omega_rows.size()));
    for (std::size_t r = 0; r < omega_rows.size(); ++r)
      col[Eigen::Index(r)] = omega_rows[r][k];
    out.omega[k] = stats::median(col);
  }
  ArrayXd lx(n_h), ly(n_h);
  int used = 0;
  for (int k = 0; k < n_h; ++k)
    if (out.omega[k] > 0) {
      lx[used] = std::log(out.h_grid[k]);
      ly[used] = std::log(out.omega[k]);
      ++used;
    }
  if (used < 4) throw StatError("garsia_modulus: modulus grid degenerate");
  out.modulus_fit = stats::linear_fit(lx.head(used), ly.head(used));
  return out;
}

ResolventIdentity resolvent_local_identity_check(
    const ProcessSpec& spec, double level, double lambda, double eps,
    double dt, double horizon, std::int64_t n_paths,
    std::uint64_t master_seed) {
  check_eps(eps);
  if (!(lambda > 0) || !(dt > 0) || !(horizon > dt))
    throw std::domain_error("resolvent identity: bad plan");

  const std::int64_t n_steps = std::llround(horizon / dt);
  const IncrementSampler step(spec, dt);
  ArrayXd per_path(n_paths);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n_paths; ++i) {
    Rng rng(path_seed(master_seed, std::uint64_t(i)));
    double x = spec.start;
    double acc = 0;
    for (std::int64_t j = 0; j < n_steps; ++j) {
      if (std::abs(x - level) <= eps)
        acc += std::exp(-lambda * double(j) * dt);
      x += step(rng);
    }
    per_path[i] = acc * dt / (2 * eps);
  }

  ResolventIdentity out;
  out.mc_value = per_path.mean();
  out.mc_sem = std::sqrt((per_path - out.mc_value).square().sum() /
                         double(n_paths - 1) / double(n_paths));

  // smoothed reference: (1/2eps) int over the band of u^lambda(y - start),
  // split at the cusp y = start if the band covers it
  const auto u_of = [&](double y) {
    return resolvent(spec, y - spec.start, lambda).value;
  };
  const double lo = level - eps, hi = level + eps;
  const auto dyadic_toward = [&](double from, double to) {
    // integral over [from, to] refined toward `from` (cusp side)
    const double span = to - from;
    const auto g = [&](double s) { return u_of(from + s); };
    double acc = quad::gl<16>(g, 0.0, span * std::ldexp(1.0, -24));
    for (int k = 24; k >= 1; --k)
      acc += quad::gl<16>(g, span * std::ldexp(1.0, -k),
                          span * std::ldexp(1.0, -(k - 1)));
    return acc;
  };
  double ref = 0;
  if (lo < spec.start && spec.start < hi) {
    const auto gneg = [&](double s) { return u_of(spec.start - s); };
    double acc = quad::gl<16>(gneg, 0.0, (spec.start - lo) * std::ldexp(1.0, -24));
    for (int k = 24; k >= 1; --k)
      acc += quad::gl<16>(gneg, (spec.start - lo) * std::ldexp(1.0, -k),
                          (spec.start - lo) * std::ldexp(1.0, -(k - 1)));
    ref = acc + dyadic_toward(spec.start, hi);
  } else {
    ref = dyadic_toward(lo, hi);  // refinement side is harmless without cusp
  }
  out.smoothed_reference = ref / (2 * eps);
  out.rel_gap = std::abs(out.mc_value - out.smoothed_reference) /
                out.smoothed_reference;
  return out;
}

}  // namespace lil
