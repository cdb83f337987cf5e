#include "lil/process.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "lil/errors.hpp"

namespace lil {

ProcessSpec ProcessSpec::stable(double beta, double start) {
  if (!(beta > 0.0 && beta <= 2.0))
    throw std::domain_error("stable index must lie in (0, 2]");
  ProcessSpec s;
  s.kind = ProcessKind::StableLevy;
  s.beta = beta;
  s.start = start;
  return s;
}

ProcessSpec ProcessSpec::stable_mixture(std::vector<MixtureComponent> comps,
                                        double start) {
  if (comps.empty())
    throw std::invalid_argument("mixture needs at least one component");
  for (const auto& c : comps) {
    if (!(c.weight > 0.0))
      throw std::invalid_argument("mixture weights must be positive");
    if (!(c.index > 0.0 && c.index <= 2.0))
      throw std::domain_error("mixture indices must lie in (0, 2]");
  }
  ProcessSpec s;
  s.kind = ProcessKind::StableMixtureLevy;
  s.components = std::move(comps);
  s.start = start;
  return s;
}

ProcessSpec ProcessSpec::subordinated_bm(double gamma, double start) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::domain_error("subordinator index must lie in (0, 1)");
  ProcessSpec s;
  s.kind = ProcessKind::SubordinatedBM;
  s.gamma = gamma;
  s.start = start;
  return s;
}

double ProcessSpec::symbol(double xi) const {
  const double a = std::abs(xi);
  switch (kind) {
    case ProcessKind::StableLevy:
      return std::pow(a, beta);
    case ProcessKind::StableMixtureLevy: {
      double s = 0;
      for (const auto& c : components) s += c.weight * std::pow(a, c.index);
      return s;
    }
    case ProcessKind::SubordinatedBM:
      return std::pow(a, 2.0 * gamma);
  }
  return 0;
}

double ProcessSpec::diagonal_index() const {
  switch (kind) {
    case ProcessKind::StableLevy:
      return beta;
    case ProcessKind::StableMixtureLevy: {
      double m = 0;
      for (const auto& c : components) m = std::max(m, c.index);
      return m;
    }
    case ProcessKind::SubordinatedBM:
      return 2.0 * gamma;
  }
  return 0;
}

double ProcessSpec::minimal_index() const {
  switch (kind) {
    case ProcessKind::StableLevy:
      return beta;
    case ProcessKind::StableMixtureLevy: {
      double m = 2.0;
      for (const auto& c : components) m = std::min(m, c.index);
      return m;
    }
    case ProcessKind::SubordinatedBM:
      return 2.0 * gamma;
  }
  return 0;
}

std::string ProcessSpec::name() const {
  switch (kind) {
    case ProcessKind::StableLevy:
      return "stable(" + std::to_string(beta) + ")";
    case ProcessKind::StableMixtureLevy: {
      std::string s = "mixture(";
      for (std::size_t i = 0; i < components.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(components[i].weight) + "*" +
             std::to_string(components[i].index);
      }
      return s + ")";
    }
    case ProcessKind::SubordinatedBM:
      return "subordinated_bm(" + std::to_string(gamma) + ")";
  }
  return "?";
}

NaturalScales natural_scale_functions(const ProcessSpec& spec) {
  auto phi = [&]() -> ScaleFunction {
    switch (spec.kind) {
      case ProcessKind::StableMixtureLevy:
        // The independent sum jumps like the *most active* component at
        // every scale, so phi is the harmonic-type combination
        // (sum w_i r^{-b_i})^{-1}, not sum w_i r^{b_i}: near 0 it behaves
        // like r^{b_max}/w, at infinity like r^{b_min}/w, matching
        // p(t,0) ~ 1/phi^{-1}(t) across both regimes.
        return ScaleFunction::inverse_mixture(spec.components);
      case ProcessKind::SubordinatedBM:
        return ScaleFunction::power(2.0 * spec.gamma);
      case ProcessKind::StableLevy:
      default:
        return ScaleFunction::power(spec.beta);
    }
  }();
  return NaturalScales{ScaleFunction::power(1.0), std::move(phi)};
}

TimeGrid make_grid(double dt, std::int64_t n_steps) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (n_steps < 1) throw std::invalid_argument("need at least one step");
  return TimeGrid{dt, n_steps};
}

double sample_stable_increment(double beta, double scale, Rng& rng) {
  return scale * rng.stable_symmetric(beta);
}

IncrementSampler::IncrementSampler(const ProcessSpec& spec, double dt)
    : kind_(spec.kind), dt_(dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  switch (spec.kind) {
    case ProcessKind::StableLevy:
      comp_.emplace_back(spec.beta, std::pow(dt, 1.0 / spec.beta));
      break;
    case ProcessKind::StableMixtureLevy:
      // Increment of the independent sum over dt: each component contributes
      // a stable draw at scale (w_i dt)^{1/b_i}. A one-component mixture
      // therefore consumes the identical random stream as the single kind.
      for (const auto& c : spec.components)
        comp_.emplace_back(c.index, std::pow(c.weight * dt, 1.0 / c.index));
      break;
    case ProcessKind::SubordinatedBM:
      gamma_ = spec.gamma;
      sub_time_scale_ = std::pow(dt, 1.0 / spec.gamma);
      break;
  }
}

double IncrementSampler::operator()(Rng& rng) const {
  if (kind_ == ProcessKind::SubordinatedBM) {
    // S_dt ~ dt^{1/gamma} * (standard positive gamma-stable), then a BM
    // increment with variance 2 S_dt to match the symbol-|xi|^2 convention.
    const double s = sub_time_scale_ * rng.stable_positive(gamma_);
    return std::sqrt(2.0 * s) * rng.normal();
  }
  double dx = 0;
  for (const auto& [beta, scale] : comp_) dx += scale * rng.stable_symmetric(beta);
  return dx;
}

PathSample simulate_path(const ProcessSpec& spec, const TimeGrid& grid,
                         std::uint64_t seed) {
  PathSample out;
  out.spec = spec;
  out.grid = grid;
  out.seed = seed;
  out.positions.resize(grid.n_steps + 1);
  IncrementSampler step(spec, grid.dt);
  Rng rng(seed);
  double x = spec.start;
  out.positions[0] = x;
  for (std::int64_t i = 1; i <= grid.n_steps; ++i) {
    x += step(rng);
    out.positions[i] = x;
  }
  return out;
}

ArrayXd running_sup(const PathSample& path) {
  const auto& p = path.positions;
  ArrayXd out(p.size());
  const double x0 = p[0];
  double m = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    m = std::max(m, std::abs(p[i] - x0));
    out[i] = m;
  }
  return out;
}

ExitTime first_exit_time(const PathSample& path, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("radius must be positive");
  const auto& p = path.positions;
  const double x0 = p[0];
  for (Eigen::Index i = 1; i < p.size(); ++i) {
    if (std::abs(p[i] - x0) > radius)
      return ExitTime{path.grid.t(i), false};
  }
  return ExitTime{path.grid.horizon(), true};
}

PathEnsemble::PathEnsemble(ProcessSpec spec, TimeGrid grid,
                           std::int64_t n_paths, std::uint64_t master_seed)
    : spec_(std::move(spec)),
      grid_(grid),
      n_paths_(n_paths),
      master_seed_(master_seed) {
  if (n_paths < 1) throw std::invalid_argument("need at least one path");
}

std::uint64_t PathEnsemble::seed_of(std::int64_t i) const {
  return path_seed(master_seed_, static_cast<std::uint64_t>(i));
}

PathSample PathEnsemble::path(std::int64_t i) const {
  if (i < 0 || i >= n_paths_)
    throw std::out_of_range("path index out of range");
  return simulate_path(spec_, grid_, seed_of(i));
}

PathEnsemble build_ensemble(const ProcessSpec& spec, const TimeGrid& grid,
                            std::int64_t n_paths, std::uint64_t master_seed) {
  return PathEnsemble(spec, grid, n_paths, master_seed);
}

namespace {

constexpr char kMagic[4] = {'L', 'I', 'L', 'P'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& f, T v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::ifstream& f) {
  T v;
  f.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

}  // namespace

void write_path_dump(const PathSample& path, const std::string& file) {
  std::ofstream f(file, std::ios::binary);
  if (!f) throw IoError("cannot open " + file + " for writing");
  f.write(kMagic, 4);
  put(f, kVersion);
  put(f, static_cast<std::uint64_t>(path.grid.n_steps));
  put(f, path.grid.dt);
  put(f, path.seed);
  f.write(reinterpret_cast<const char*>(path.positions.data()),
          static_cast<std::streamsize>(path.positions.size() * sizeof(double)));
  if (!f) throw IoError("short write to " + file);
}

PathDump read_path_dump(const std::string& file) {
  std::ifstream f(file, std::ios::binary);
  if (!f) throw IoError("cannot open " + file);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError(file + " is not a path dump");
  const auto version = get<std::uint32_t>(f);
  if (version != kVersion)
    throw IoError("unsupported path dump version " + std::to_string(version));
  PathDump d;
  const auto n_steps = get<std::uint64_t>(f);
  d.grid.dt = get<double>(f);
  d.grid.n_steps = static_cast<std::int64_t>(n_steps);
  d.seed = get<std::uint64_t>(f);
  d.positions.resize(d.grid.n_steps + 1);
  f.read(reinterpret_cast<char*>(d.positions.data()),
         static_cast<std::streamsize>(d.positions.size() * sizeof(double)));
  if (!f) throw IoError("truncated path dump " + file);
  return d;
}

}  // namespace lil
