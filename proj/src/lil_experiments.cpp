#include "lil/lil_experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lil/errors.hpp"
#include "lil/occupation.hpp"

namespace lil {

namespace {

// Snap ladder times to grid indices (at least one step, never past the
// horizon). Ladders may walk down as well as up, so the capture loop gets
// the indices in ascending order together with the column each one feeds.
struct CaptureOrder {
  std::vector<std::int64_t> index;  // ascending
  std::vector<int> column;
  std::int64_t last() const { return index.back(); }
};

CaptureOrder capture_order(const TimeGrid& grid,
                           const std::vector<double>& times) {
  if (times.empty()) throw StatError("empty ladder");
  std::vector<std::int64_t> idx(times.size());
  for (std::size_t j = 0; j < times.size(); ++j) {
    if (!(times[j] > 0)) throw StatError("ladder times must be positive");
    std::int64_t i = std::llround(times[j] / grid.dt);
    if (i < 1) i = 1;
    if (i > grid.n_steps)
      throw StatError("ladder time " + std::to_string(times[j]) +
                      " lies beyond the path horizon " +
                      std::to_string(grid.horizon()));
    idx[j] = i;
  }
  std::vector<int> order(idx.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return idx[a] < idx[b]; });
  CaptureOrder co;
  co.index.reserve(idx.size());
  co.column.reserve(idx.size());
  for (int c : order) {
    co.index.push_back(idx[c]);
    co.column.push_back(c);
  }
  return co;
}

bool liminf_kind(RateKind kind) {
  switch (kind) {
    case RateKind::ChungSmall:
    case RateKind::ChungLarge:
    case RateKind::LocalLiminf:
    case RateKind::RangeLiminf:
      return true;
    case RateKind::LocalLimsup:
    case RateKind::RangeLimsup:
      return false;
    case RateKind::SupQuantile:
      break;
  }
  throw StatError("rate kind has no liminf/limsup convention");
}

}  // namespace

std::vector<double> DyadicLadder::times() const {
  if (!(t0 > 0) || !(ratio > 0) || ratio == 1 || count < 1)
    throw StatError("ladder needs t0 > 0, ratio positive and != 1, count >= 1");
  std::vector<double> out(count);
  for (int k = 0; k < count; ++k) out[k] = t0 * std::pow(ratio, k);
  return out;
}

DyadicLadder DyadicLadder::refined() const {
  return DyadicLadder{t0, std::sqrt(ratio), 2 * count - 1};
}

double default_bandwidth(const ProcessSpec& spec, double dt) {
  return 0.5 * std::pow(dt, 1.0 / spec.diagonal_index());
}

SupCollection collect_running_sup(const PathEnsemble& ensemble,
                                  const DyadicLadder& ladder) {
  const TimeGrid& grid = ensemble.grid();
  const auto co = capture_order(grid, ladder.times());
  const int n_times = static_cast<int>(co.index.size());
  const std::int64_t n_paths = ensemble.n_paths();
  const std::int64_t last = co.last();

  SupCollection out;
  out.times.resize(n_times);
  for (int j = 0; j < n_times; ++j) out.times[co.column[j]] = grid.t(co.index[j]);
  out.values.resize(n_paths, n_times);

  const IncrementSampler step(ensemble.spec(), grid.dt);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n_paths; ++i) {
    Rng rng(ensemble.seed_of(i));
    double x = 0;  // relative to the start, which cancels in |X_t - X_0|
    double sup = 0;
    std::size_t next = 0;
    for (std::int64_t k = 1; k <= last; ++k) {
      x += step(rng);
      const double a = std::fabs(x);
      if (a > sup) sup = a;
      while (next < co.index.size() && co.index[next] == k) {
        out.values(i, co.column[next]) = sup;
        ++next;
      }
    }
  }
  return out;
}

namespace {

// Shared core: eps_ordered[m] is the bandwidth of the m-th capture in
// ascending index order. One accumulator per rung; rung m stops receiving
// deposits once captured, so the total deposit work is sum_m index[m],
// about twice the single-accumulator cost on a geometric ladder.
OccupationCollection collect_occupation_impl(const PathEnsemble& ensemble,
                                             const CaptureOrder& co,
                                             const std::vector<double>& eps_ordered) {
  const TimeGrid& grid = ensemble.grid();
  const int n_times = static_cast<int>(co.index.size());
  const std::int64_t n_paths = ensemble.n_paths();
  const std::int64_t last = co.last();
  const double start = ensemble.spec().start;

  OccupationCollection out;
  out.eps.resize(n_times);
  out.times.resize(n_times);
  for (int j = 0; j < n_times; ++j) {
    out.times[co.column[j]] = grid.t(co.index[j]);
    out.eps[co.column[j]] = eps_ordered[j];
  }
  out.sup_local_time.resize(n_paths, n_times);
  out.range.resize(n_paths, n_times);

  const IncrementSampler step(ensemble.spec(), grid.dt);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n_paths; ++i) {
    Rng rng(ensemble.seed_of(i));
    std::vector<CellOccupancy> occ;
    occ.reserve(n_times);
    for (int m = 0; m < n_times; ++m) occ.emplace_back(eps_ordered[m], start);
    double x = start;
    std::size_t next = 0;
    // left endpoints: after k+1 deposits the occupation covers [0, (k+1) dt)
    for (std::int64_t k = 0; k < last; ++k) {
      for (std::size_t m = next; m < occ.size(); ++m) occ[m].add(x);
      x += step(rng);
      while (next < co.index.size() && co.index[next] == k + 1) {
        out.sup_local_time(i, co.column[next]) = occ[next].sup_local_time(grid.dt);
        out.range(i, co.column[next]) = occ[next].range();
        ++next;
      }
    }
  }
  return out;
}

}  // namespace

OccupationCollection collect_occupation(const PathEnsemble& ensemble,
                                        const DyadicLadder& ladder,
                                        double eps) {
  if (!(eps > 0)) throw StatError("bandwidth must be positive");
  const auto co = capture_order(ensemble.grid(), ladder.times());
  return collect_occupation_impl(
      ensemble, co, std::vector<double>(co.index.size(), eps));
}

OccupationCollection collect_occupation_scaled(const PathEnsemble& ensemble,
                                               const DyadicLadder& ladder,
                                               double bandwidth_fraction) {
  if (!(bandwidth_fraction > 0))
    throw StatError("bandwidth fraction must be positive");
  const TimeGrid& grid = ensemble.grid();
  const auto co = capture_order(grid, ladder.times());
  const auto scales = natural_scale_functions(ensemble.spec());
  std::vector<double> eps(co.index.size());
  for (std::size_t m = 0; m < co.index.size(); ++m)
    eps[m] = bandwidth_fraction *
             inverse_scale(scales.time_scale, grid.t(co.index[m]));
  return collect_occupation_impl(ensemble, co, eps);
}

namespace {

std::vector<int> thin_index(std::size_t n, int stride, int offset) {
  if (stride < 1) throw StatError("thin stride must be >= 1");
  if (offset < 0 || static_cast<std::size_t>(offset) >= n)
    throw StatError("thin offset out of range");
  std::vector<int> keep;
  for (std::size_t j = static_cast<std::size_t>(offset); j < n;
       j += static_cast<std::size_t>(stride))
    keep.push_back(static_cast<int>(j));
  return keep;
}

}  // namespace

SupCollection thin_columns(const SupCollection& c, int stride, int offset) {
  const auto keep = thin_index(c.times.size(), stride, offset);
  SupCollection out;
  out.values.resize(c.values.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    out.times.push_back(c.times[static_cast<std::size_t>(keep[j])]);
    out.values.col(static_cast<Eigen::Index>(j)) = c.values.col(keep[j]);
  }
  return out;
}

OccupationCollection thin_columns(const OccupationCollection& c, int stride,
                                  int offset) {
  const auto keep = thin_index(c.times.size(), stride, offset);
  OccupationCollection out;
  out.sup_local_time.resize(c.sup_local_time.rows(),
                            static_cast<Eigen::Index>(keep.size()));
  out.range.resize(c.range.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    const auto src = static_cast<std::size_t>(keep[j]);
    out.times.push_back(c.times[src]);
    out.eps.push_back(c.eps[src]);
    out.sup_local_time.col(static_cast<Eigen::Index>(j)) =
        c.sup_local_time.col(keep[j]);
    out.range.col(static_cast<Eigen::Index>(j)) = c.range.col(keep[j]);
  }
  return out;
}

RegressionReport quantile_scaling(const std::vector<double>& times,
                                  const Eigen::MatrixXd& values, double q) {
  if (!(q > 0 && q < 1)) throw StatError("quantile level must be inside (0,1)");
  const int n = static_cast<int>(times.size());
  if (values.cols() != n) throw StatError("times/values shape mismatch");
  if (n < 2) throw StatError("need at least two ladder times for a fit");

  RegressionReport rep;
  rep.q = q;
  rep.times = times;
  rep.quantile_values.resize(n);
  ArrayXd lt(n), lq(n);
  for (int j = 0; j < n; ++j) {
    const double v = stats::quantile(values.col(j), q);
    if (!(v > 0))
      throw StatError("degenerate quantile at t = " + std::to_string(times[j]));
    rep.quantile_values[j] = v;
    lt[j] = std::log(times[j]);
    lq[j] = std::log(v);
  }
  rep.fit = stats::linear_fit(lt, lq);
  return rep;
}

RegressionReport quantile_scaling(const PathEnsemble& ensemble,
                                  PathFunctional functional,
                                  const DyadicLadder& ladder, double q,
                                  double bandwidth_fraction) {
  if (functional == PathFunctional::RunningSup) {
    const auto sups = collect_running_sup(ensemble, ladder);
    auto rep = quantile_scaling(sups.times, sups.values, q);
    rep.description = "running sup";
    return rep;
  }
  if (bandwidth_fraction <= 0) bandwidth_fraction = 0.1;
  const auto occ = collect_occupation_scaled(ensemble, ladder, bandwidth_fraction);
  const bool sup_lt = functional == PathFunctional::SupLocalTime;
  auto rep = quantile_scaling(occ.times, sup_lt ? occ.sup_local_time : occ.range, q);
  rep.description = sup_lt ? "sup local time" : "range";
  return rep;
}

LilStatistic lil_statistic(RateKind kind, const std::vector<double>& times,
                           const Eigen::MatrixXd& values,
                           const ScaleFunction& volume,
                           const ScaleFunction& time_scale) {
  const bool take_min = liminf_kind(kind);
  const int n = static_cast<int>(times.size());
  if (values.cols() != n) throw StatError("times/values shape mismatch");
  if (n < 1) throw StatError("empty ladder");

  ArrayXd rate(n);
  for (int j = 0; j < n; ++j)
    rate[j] = lil_rate(kind, times[j], volume, time_scale);

  LilStatistic st;
  st.kind = kind;
  st.per_path.resize(values.rows());
  for (std::int64_t i = 0; i < values.rows(); ++i) {
    double ext = values(i, 0) / rate[0];
    for (int j = 1; j < n; ++j) {
      const double v = values(i, j) / rate[j];
      if (take_min ? (v < ext) : (v > ext)) ext = v;
    }
    st.per_path[i] = ext;
  }
  st.median = stats::median(st.per_path);
  st.lower_quartile = stats::quantile(st.per_path, 0.25);
  st.upper_quartile = stats::quantile(st.per_path, 0.75);
  return st;
}

LilStatistic chung_statistic(const SupCollection& sups,
                             const ScaleFunction& volume,
                             const ScaleFunction& time_scale, ChungMode mode) {
  const RateKind kind = mode == ChungMode::SmallTime ? RateKind::ChungSmall
                                                     : RateKind::ChungLarge;
  return lil_statistic(kind, sups.times, sups.values, volume, time_scale);
}

LilStatistic local_time_limsup_statistic(const OccupationCollection& occ,
                                         const ScaleFunction& volume,
                                         const ScaleFunction& time_scale) {
  return lil_statistic(RateKind::LocalLimsup, occ.times, occ.sup_local_time,
                       volume, time_scale);
}

LilStatistic local_time_liminf_statistic(const OccupationCollection& occ,
                                         const ScaleFunction& volume,
                                         const ScaleFunction& time_scale) {
  return lil_statistic(RateKind::LocalLiminf, occ.times, occ.sup_local_time,
                       volume, time_scale);
}

RangeLilStatistics range_lil_statistics(const OccupationCollection& occ,
                                        const ScaleFunction& volume,
                                        const ScaleFunction& time_scale) {
  return RangeLilStatistics{
      lil_statistic(RateKind::RangeLimsup, occ.times, occ.range, volume,
                    time_scale),
      lil_statistic(RateKind::RangeLiminf, occ.times, occ.range, volume,
                    time_scale)};
}

ConfinementCurve confinement_curve(const ProcessSpec& spec,
                                   const ScaleFunction& time_scale,
                                   double radius, int n_max, double dt,
                                   std::int64_t trials, std::uint64_t seed,
                                   double c0) {
  if (!(radius > 0) || n_max < 1 || !(dt > 0) || trials < 1 || !(c0 > 0))
    throw StatError("bad confinement parameters");
  const std::int64_t steps_per_block =
      std::max<std::int64_t>(1, std::llround(c0 * eval_scale(time_scale, radius) / dt));
  const std::int64_t last = steps_per_block * n_max;

  std::vector<std::int64_t> exit_step(trials);
  const IncrementSampler step(spec, dt);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t tr = 0; tr < trials; ++tr) {
    Rng rng(path_seed(seed, static_cast<std::uint64_t>(tr)));
    double x = 0;
    std::int64_t es = -1;  // -1: still confined at the horizon
    for (std::int64_t k = 1; k <= last; ++k) {
      x += step(rng);
      if (std::fabs(x) > radius) {
        es = k;
        break;
      }
    }
    exit_step[tr] = es;
  }

  ConfinementCurve out;
  out.radius = radius;
  out.block_time = static_cast<double>(steps_per_block) * dt;
  out.trials = trials;
  out.survivors.assign(n_max + 1, 0);
  out.survivors[0] = trials;
  for (std::int64_t tr = 0; tr < trials; ++tr) {
    const std::int64_t es = exit_step[tr];
    // survived level n iff no grid point up to n blocks left the ball
    const std::int64_t top =
        es < 0 ? n_max
               : std::min<std::int64_t>(n_max, (es - 1) / steps_per_block);
    for (std::int64_t n = 1; n <= top; ++n) ++out.survivors[n];
  }
  out.probability.resize(n_max + 1);
  for (int n = 0; n <= n_max; ++n)
    out.probability[n] =
        static_cast<double>(out.survivors[n]) / static_cast<double>(trials);

  std::vector<double> xs, ys;
  for (int n = 1; n <= n_max; ++n) {
    if (out.survivors[n] <= 0) break;
    xs.push_back(n);
    ys.push_back(std::log(out.probability[n]));
  }
  if (xs.size() < 2)
    throw StatError("confinement decays too fast to fit; shrink n_max or c0");
  out.fit = stats::linear_fit(Eigen::Map<const ArrayXd>(xs.data(), xs.size()),
                              Eigen::Map<const ArrayXd>(ys.data(), ys.size()));
  out.n_fitted = static_cast<int>(xs.size());
  out.decay_ratio = std::exp(out.fit.slope);
  return out;
}

ExitTailCurve exit_tail_curve(const ProcessSpec& spec,
                              const ScaleFunction& time_scale, double radius,
                              const std::vector<double>& probe_times,
                              double dt, std::int64_t trials,
                              std::uint64_t seed) {
  if (!(radius > 0) || probe_times.empty() || !(dt > 0) || trials < 1)
    throw StatError("bad exit tail parameters");
  const double phi_r = eval_scale(time_scale, radius);
  std::vector<std::int64_t> probe_idx(probe_times.size());
  for (std::size_t j = 0; j < probe_times.size(); ++j) {
    if (!(probe_times[j] > 0) || probe_times[j] >= phi_r)
      throw StatError("probe times must lie inside (0, phi(r))");
    if (j > 0 && probe_times[j] <= probe_times[j - 1])
      throw StatError("probe times must be ascending");
    probe_idx[j] = std::max<std::int64_t>(1, std::llround(probe_times[j] / dt));
  }
  const std::int64_t last = probe_idx.back();

  std::vector<std::int64_t> exit_step(trials);
  const IncrementSampler step(spec, dt);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t tr = 0; tr < trials; ++tr) {
    Rng rng(path_seed(seed, static_cast<std::uint64_t>(tr)));
    double x = 0;
    std::int64_t es = -1;
    for (std::int64_t k = 1; k <= last; ++k) {
      x += step(rng);
      if (std::fabs(x) > radius) {
        es = k;
        break;
      }
    }
    exit_step[tr] = es;
  }

  ExitTailCurve out;
  out.radius = radius;
  out.trials = trials;
  out.times.resize(probe_idx.size());
  out.exited.assign(probe_idx.size(), 0);
  out.probability.resize(probe_idx.size());
  for (std::size_t j = 0; j < probe_idx.size(); ++j)
    out.times[j] = static_cast<double>(probe_idx[j]) * dt;
  for (std::int64_t tr = 0; tr < trials; ++tr) {
    const std::int64_t es = exit_step[tr];
    if (es < 0) continue;
    for (std::size_t j = 0; j < probe_idx.size(); ++j)
      if (es <= probe_idx[j]) ++out.exited[j];
  }

  std::vector<double> xs, ys;
  for (std::size_t j = 0; j < probe_idx.size(); ++j) {
    out.probability[j] =
        static_cast<double>(out.exited[j]) / static_cast<double>(trials);
    if (out.exited[j] > 0) {
      xs.push_back(std::log(out.times[j]));
      ys.push_back(std::log(out.probability[j]));
    } else {
      ++out.n_excluded;
    }
  }
  if (xs.size() < 2) throw StatError("too few probes saw any exit");
  out.fit = stats::linear_fit(Eigen::Map<const ArrayXd>(xs.data(), xs.size()),
                              Eigen::Map<const ArrayXd>(ys.data(), ys.size()));
  return out;
}

UlilTable ulil_hypothesis_check(const std::vector<double>& times,
                                const Eigen::MatrixXd& values,
                                const ScaleFunction& rate,
                                const std::vector<double>& b_grid) {
  const int n = static_cast<int>(times.size());
  if (values.cols() != n) throw StatError("times/values shape mismatch");
  ArrayXd r(n);
  for (int j = 0; j < n; ++j) r[j] = eval_scale(rate, times[j]);

  UlilTable out;
  out.b = b_grid;
  out.sup_exceedance.resize(b_grid.size());
  const double paths = static_cast<double>(values.rows());
  for (std::size_t m = 0; m < b_grid.size(); ++m) {
    double worst = 0;
    for (int j = 0; j < n; ++j) {
      const double level = b_grid[m] * r[j];
      const std::int64_t count = (values.col(j).array() >= level).count();
      worst = std::max(worst, static_cast<double>(count) / paths);
    }
    out.sup_exceedance[m] = worst;
  }
  return out;
}

PathConsistency integral_test_path_consistency(const SupCollection& sups,
                                               const ScaleFunction& curve,
                                               IntegralVerdict verdict,
                                               int start_index) {
  const int n = static_cast<int>(sups.times.size());
  if (start_index < 0 || start_index >= n)
    throw StatError("start index outside the ladder");
  ArrayXd level(n);
  for (int j = start_index; j < n; ++j)
    level[j] = eval_scale(curve, sups.times[j]);

  std::int64_t dominated = 0;
  for (std::int64_t i = 0; i < sups.values.rows(); ++i) {
    bool below = true;
    for (int j = start_index; j < n && below; ++j)
      below = sups.values(i, j) <= level[j];
    dominated += below;
  }
  PathConsistency out;
  out.fraction =
      static_cast<double>(dominated) / static_cast<double>(sups.values.rows());
  out.start_index = start_index;
  out.verdict = verdict;
  return out;
}

}  // namespace lil
