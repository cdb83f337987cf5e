#include "lil/scale.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "lil/detail/gauss.hpp"
#include "lil/errors.hpp"

namespace lil {

namespace {

void check_components(const std::vector<MixtureComponent>& comps) {
  if (comps.empty())
    throw std::domain_error("mixture scale: need at least one component");
  for (const auto& c : comps) {
    if (!(c.weight > 0) || !std::isfinite(c.weight))
      throw std::domain_error("mixture scale: weights must be positive");
    if (!(c.index > 0) || !std::isfinite(c.index))
      throw std::domain_error("mixture scale: indices must be positive");
  }
}

}  // namespace

ScaleFunction ScaleFunction::power(double exponent) {
  if (!(exponent > 0) || !std::isfinite(exponent))
    throw std::domain_error("power scale: exponent must be positive");
  ScaleFunction f;
  f.kind_ = ScaleKind::Power;
  f.exponent_ = exponent;
  return f;
}

ScaleFunction ScaleFunction::stable_mixture(std::vector<MixtureComponent> comps) {
  check_components(comps);
  ScaleFunction f;
  f.kind_ = ScaleKind::StableMixture;
  f.comps_ = std::move(comps);
  return f;
}

ScaleFunction ScaleFunction::inverse_mixture(std::vector<MixtureComponent> comps) {
  check_components(comps);
  ScaleFunction f;
  f.kind_ = ScaleKind::InverseMixture;
  f.comps_ = std::move(comps);
  return f;
}

ScaleFunction ScaleFunction::tabulated(std::vector<std::array<double, 2>> knots) {
  if (knots.size() < 2)
    throw std::domain_error("tabulated scale: need at least two knots");
  for (size_t i = 0; i < knots.size(); ++i) {
    if (!(knots[i][0] > 0) || !(knots[i][1] > 0))
      throw std::domain_error("tabulated scale: knots must be positive");
    if (i > 0 && (knots[i][0] <= knots[i - 1][0] || knots[i][1] <= knots[i - 1][1]))
      throw std::domain_error(
          "tabulated scale: knots must be strictly increasing in r and value");
  }
  ScaleFunction f;
  f.kind_ = ScaleKind::Tabulated;
  f.knots_ = std::move(knots);
  f.logknots_.reserve(f.knots_.size());
  for (const auto& k : f.knots_)
    f.logknots_.push_back({std::log(k[0]), std::log(k[1])});
  return f;
}

double ScaleFunction::operator()(double r) const {
  if (!(r > 0) || !std::isfinite(r))
    throw std::domain_error("scale function: argument must be positive finite");
  switch (kind_) {
    case ScaleKind::Power:
      return std::pow(r, exponent_);
    case ScaleKind::StableMixture: {
      double s = 0;
      for (const auto& c : comps_) s += c.weight * std::pow(r, c.index);
      return s;
    }
    case ScaleKind::InverseMixture: {
      double s = 0;
      for (const auto& c : comps_) s += c.weight * std::pow(r, -c.index);
      return 1.0 / s;
    }
    case ScaleKind::Tabulated: {
      if (r < knots_.front()[0] || r > knots_.back()[0])
        throw ExtrapolationError(
            "tabulated scale evaluated at r = " + std::to_string(r) +
            " outside table [" + std::to_string(knots_.front()[0]) + ", " +
            std::to_string(knots_.back()[0]) + "]");
      const double lr = std::log(r);
      auto it = std::lower_bound(
          logknots_.begin(), logknots_.end(), lr,
          [](const std::array<double, 2>& k, double v) { return k[0] < v; });
      if (it == logknots_.begin()) return knots_.front()[1];
      if (it == logknots_.end()) return knots_.back()[1];
      const auto& k1 = *it;
      const auto& k0 = *(it - 1);
      const double tfrac = (lr - k0[0]) / (k1[0] - k0[0]);
      return std::exp(k0[1] + tfrac * (k1[1] - k0[1]));
    }
  }
  throw std::logic_error("scale function: unknown kind");
}

double ScaleFunction::exponent() const {
  if (kind_ != ScaleKind::Power)
    throw std::domain_error("exponent() only defined for Power scales");
  return exponent_;
}

const std::vector<MixtureComponent>& ScaleFunction::components() const {
  if (kind_ != ScaleKind::StableMixture && kind_ != ScaleKind::InverseMixture)
    throw std::domain_error("components() only defined for mixture scales");
  return comps_;
}

const std::vector<std::array<double, 2>>& ScaleFunction::knots() const {
  if (kind_ != ScaleKind::Tabulated)
    throw std::domain_error("knots() only defined for tabulated scales");
  return knots_;
}

double ScaleFunction::domain_min() const {
  return kind_ == ScaleKind::Tabulated ? knots_.front()[0] : 0.0;
}

double ScaleFunction::domain_max() const {
  return kind_ == ScaleKind::Tabulated
             ? knots_.back()[0]
             : std::numeric_limits<double>::infinity();
}

double eval_scale(const ScaleFunction& f, double r) { return f(r); }

double inverse_scale(const ScaleFunction& f, double y, double rel_tol) {
  if (!(y > 0) || !std::isfinite(y))
    throw std::domain_error("inverse_scale: target must be positive finite");
  if (!(rel_tol > 0) || rel_tol >= 1)
    throw std::domain_error("inverse_scale: rel_tol must lie in (0,1)");

  double lo, hi;
  if (f.kind() == ScaleKind::Tabulated) {
    const auto& kn = f.knots();
    if (y < kn.front()[1] || y > kn.back()[1])
      throw ExtrapolationError("inverse_scale: target outside tabulated range");
    lo = kn.front()[0];
    hi = kn.back()[0];
  } else {
    // expand a bracket geometrically from r = 1
    lo = hi = 1.0;
    int guard = 0;
    while (f(hi) < y) {
      hi *= 4.0;
      if (++guard > 600 || !std::isfinite(f(hi)))
        throw NumericError("inverse_scale: failed to bracket target above");
    }
    guard = 0;
    while (f(lo) > y) {
      lo *= 0.25;
      if (++guard > 600 || lo < std::numeric_limits<double>::min())
        throw NumericError("inverse_scale: failed to bracket target below");
    }
  }

  double mid = std::sqrt(lo * hi);
  for (int it = 0; it < 200; ++it) {
    mid = std::sqrt(lo * hi);
    const double fm = f(mid);
    if (fm < y)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= rel_tol * lo && std::abs(fm - y) <= rel_tol * y) return mid;
  }
  if (std::abs(f(mid) - y) <= 2 * rel_tol * y) return mid;
  throw NumericError("inverse_scale: bisection failed to converge");
}

DoublingExponents doubling_exponents(const ScaleFunction& f, double r_min,
                                     double r_max, int n_probe) {
  if (!(r_min > 0) || !(r_max > 2 * r_min))
    throw std::domain_error("doubling_exponents: need 0 < r_min < r_max/2");
  if (n_probe < 2) throw std::domain_error("doubling_exponents: n_probe >= 2");
  // probe pairs (r, 2r) with both ends inside [r_min, r_max]
  const double la = std::log(r_min);
  const double lb = std::log(r_max / 2);
  double lower = std::numeric_limits<double>::infinity();
  double upper = -lower;
  for (int i = 0; i < n_probe; ++i) {
    const double r =
        std::exp(la + (lb - la) * (n_probe == 1 ? 0.0 : double(i) / (n_probe - 1)));
    const double s = std::log2(f(2 * r) / f(r));
    lower = std::min(lower, s);
    upper = std::max(upper, s);
  }
  return {lower, upper};
}

namespace {

double loglog_large(double t) {
  if (!(t > std::exp(1.0)))
    throw std::domain_error("lil_rate: large-time kinds need t > e");
  return std::log(std::log(t));
}

double loglog_small(double t) {
  if (!(t > 0) || !(t < std::exp(-1.0)))
    throw std::domain_error("lil_rate: ChungSmall needs t in (0, 1/e)");
  return std::log(-std::log(t));
}

}  // namespace

double lil_rate(RateKind kind, double t, const ScaleFunction& volume,
                const ScaleFunction& time_scale) {
  switch (kind) {
    case RateKind::SupQuantile:
      if (!(t > 0)) throw std::domain_error("lil_rate: t must be positive");
      return inverse_scale(time_scale, t);
    case RateKind::ChungSmall:
      return inverse_scale(time_scale, t / loglog_small(t));
    case RateKind::ChungLarge:
      return inverse_scale(time_scale, t / loglog_large(t));
    case RateKind::LocalLimsup: {
      const double llt = loglog_large(t);
      return t / volume(inverse_scale(time_scale, t / llt));
    }
    case RateKind::LocalLiminf: {
      const double llt = loglog_large(t);
      return (t / llt) / volume(inverse_scale(time_scale, t / llt));
    }
    case RateKind::RangeLimsup: {
      const double llt = loglog_large(t);
      return volume(inverse_scale(time_scale, t / llt)) * llt;
    }
    case RateKind::RangeLiminf: {
      const double llt = loglog_large(t);
      return volume(inverse_scale(time_scale, t / llt));
    }
  }
  throw std::logic_error("lil_rate: unknown kind");
}

std::string rate_kind_name(RateKind kind) {
  switch (kind) {
    case RateKind::ChungSmall: return "chung_small";
    case RateKind::ChungLarge: return "chung_large";
    case RateKind::LocalLimsup: return "local_limsup";
    case RateKind::LocalLiminf: return "local_liminf";
    case RateKind::RangeLimsup: return "range_limsup";
    case RateKind::RangeLiminf: return "range_liminf";
    case RateKind::SupQuantile: return "sup_quantile";
  }
  return "?";
}

std::string verdict_name(IntegralVerdict v) {
  switch (v) {
    case IntegralVerdict::Converges: return "Converges";
    case IntegralVerdict::Diverges: return "Diverges";
    case IntegralVerdict::Inconclusive: return "Inconclusive";
  }
  return "?";
}

IntegralTestResult integral_test(const ScaleFunction& phi,
                                 const ScaleFunction& curve, Endpoint endpoint,
                                 const IntegralTestConfig& cfg) {
  if (cfg.k_max < 8) throw std::domain_error("integral_test: k_max too small");

  const auto integrand = [&](double t) { return 1.0 / phi(curve(t)); };
  // integrate one dyadic level in log t: both endpoint directions reduce to
  // [a, 2a] and the integrand is smooth and positive there
  const auto level_integral = [&](int k) {
    const double a = endpoint == Endpoint::Zero ? std::ldexp(1.0, -(k + 1))
                                                : std::ldexp(1.0, k);
    const double la = std::log(a);
    const double lb = la + std::numbers::ln2;
    return quad::gl<16>(
        [&](double s) {
          const double t = std::exp(s);
          return integrand(t) * t;
        },
        la, lb);
  };

  // Tabulated curves are only evaluable on their knot span. Classification
  // is about the endpoint, so octaves outside the span on the far side are
  // skipped; the span must still reach deep enough toward the endpoint to
  // cover every probed level.
  int k_start = 0;
  if (endpoint == Endpoint::Zero) {
    const double hi = curve.domain_max();
    if (std::isfinite(hi) && hi < 1.0)
      k_start = static_cast<int>(std::ceil(-std::log2(hi)));
  } else {
    const double lo = curve.domain_min();
    if (lo > 1.0) k_start = static_cast<int>(std::ceil(std::log2(lo)));
  }
  if (k_start < 0) k_start = 0;
  if (k_start >= cfg.k_max - 8)
    throw std::domain_error("integral_test: curve domain leaves too few levels");

  std::vector<double> dj;
  dj.reserve(static_cast<size_t>(cfg.k_max - k_start));
  double total = 0;
  IntegralTestResult res;
  res.decay_exponent = std::numeric_limits<double>::quiet_NaN();

  for (int k = k_start; k < cfg.k_max; ++k) {
    const double inc = level_integral(k);
    if (!std::isfinite(inc) || inc < 0)
      throw NumericError("integral_test: non-finite level integral");
    dj.push_back(inc);
    total += inc;
    res.levels_used = static_cast<int>(dj.size());
    res.partial_integral = total;

    if (total > cfg.divergence_threshold) {
      res.verdict = IntegralVerdict::Diverges;
      res.tail_estimate = 0;
      res.reason = "partial integral exceeded divergence threshold";
      return res;
    }

    // geometric fast path: several consecutive strongly contracting levels
    // and a negligible extrapolated geometric tail
    if (k >= 8) {
      bool geometric = true;
      double worst = 0;
      for (int j = k - 5; j <= k; ++j) {
        const double ratio = dj[j] / dj[j - 1];
        worst = std::max(worst, ratio);
        if (!(ratio <= cfg.geometric_ratio)) {
          geometric = false;
          break;
        }
      }
      if (geometric) {
        const double tail = dj.back() * worst / (1 - worst);
        if (tail <= cfg.rel_tol * (total + tail)) {
          res.verdict = IntegralVerdict::Converges;
          res.tail_estimate = tail;
          res.reason = "geometric decay of dyadic increments";
          return res;
        }
      }
    }
  }

  // slow decay: estimate q from dJ_k ~ k^-q over the second half of levels,
  // with k the true octave depth (matters when k_start clipped the front)
  const std::size_t p0 = dj.size() / 2;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t p = p0; p < dj.size(); ++p) {
    if (!(dj[p] > 0)) continue;
    const double x = std::log(static_cast<double>(k_start + p + 1));
    const double y = -std::log(dj[p]);
    sx += x; sy += y; sxx += x * x; sxy += x * y;
    ++n;
  }
  if (n < 4) {
    res.verdict = IntegralVerdict::Inconclusive;
    res.tail_estimate = 0;
    res.reason = "increments vanished; no decay estimate possible";
    return res;
  }
  const double q = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  res.decay_exponent = q;
  if (q > 1 + cfg.exponent_margin) {
    // tail ~ sum_{k>K} c k^-q ~ dJ_K * K / (q-1)
    res.verdict = IntegralVerdict::Converges;
    res.tail_estimate =
        dj.back() * static_cast<double>(k_start + static_cast<int>(dj.size())) /
        (q - 1);
    res.reason = "increment decay exponent above 1";
  } else if (q < 1 - cfg.exponent_margin) {
    res.verdict = IntegralVerdict::Diverges;
    res.tail_estimate = 0;
    res.reason = "increment decay exponent below 1";
  } else {
    res.verdict = IntegralVerdict::Inconclusive;
    res.tail_estimate = 0;
    res.reason = "increment decay exponent within the boundary band";
  }
  return res;
}

}  // namespace lil
