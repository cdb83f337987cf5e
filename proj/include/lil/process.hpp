#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lil/rng.hpp"
#include "lil/scale.hpp"

namespace lil {

using Eigen::ArrayXd;

// The three simulable process families, all symmetric Levy processes on R:
//   StableLevy(beta):        symbol |xi|^beta,             beta in (0,2]
//   StableMixtureLevy(w,b):  symbol sum_i w_i |xi|^{b_i}   (independent sum)
//   SubordinatedBM(gamma):   Brownian motion with symbol |xi|^2 run by an
//                            independent gamma-stable subordinator with
//                            Laplace transform exp(-t u^gamma); the result
//                            has symbol exactly |xi|^{2 gamma}.
enum class ProcessKind { StableLevy, StableMixtureLevy, SubordinatedBM };

struct ProcessSpec {
  ProcessKind kind = ProcessKind::StableLevy;
  double beta = 1.5;                        // StableLevy
  std::vector<MixtureComponent> components; // StableMixtureLevy
  double gamma = 0.75;                      // SubordinatedBM
  double start = 0.0;

  static ProcessSpec stable(double beta, double start = 0.0);
  static ProcessSpec stable_mixture(std::vector<MixtureComponent> comps,
                                    double start = 0.0);
  static ProcessSpec subordinated_bm(double gamma, double start = 0.0);

  // Levy symbol psi(xi) >= 0.
  double symbol(double xi) const;
  // b such that p(t,0) ~ t^{-1/b} as t -> 0: beta for a single stable,
  // the largest index for a mixture, 2 gamma for subordinated BM.
  double diagonal_index() const;
  // smallest index: governs large-time spread
  double minimal_index() const;
  std::string name() const;
};

// Volume and time scale naturally attached to the process, up to bounded
// constants: V(r) = r always; phi = r^beta for a single stable, r^{2 gamma}
// for subordinated BM, and the *inverse* mixture (sum w_i r^{-b_i})^{-1} for
// the independent stable sum, whose jump density is sum w_i c_i |h|^{-1-b_i}.
struct NaturalScales {
  ScaleFunction volume;
  ScaleFunction time_scale;
};
NaturalScales natural_scale_functions(const ProcessSpec& spec);

// Uniform grid 0, dt, 2dt, ..., n_steps*dt.
struct TimeGrid {
  double dt = 0;
  std::int64_t n_steps = 0;
  double t(std::int64_t i) const { return dt * static_cast<double>(i); }
  double horizon() const { return t(n_steps); }
};
TimeGrid make_grid(double dt, std::int64_t n_steps);

// Draws one increment of X over a step dt; all per-step constants are
// precomputed. One IncrementSampler + one Rng is the whole simulation state
// of a path, which is what the streaming collectors rely on.
class IncrementSampler {
 public:
  IncrementSampler(const ProcessSpec& spec, double dt);
  double operator()(Rng& rng) const;
  double dt() const { return dt_; }

 private:
  ProcessKind kind_;
  double dt_;
  double gamma_ = 0;
  double sub_time_scale_ = 0;                 // dt^{1/gamma}
  std::vector<std::pair<double, double>> comp_;  // (beta_i, scale_i)
};

// One draw with characteristic function exp(-scale^beta |xi|^beta).
double sample_stable_increment(double beta, double scale, Rng& rng);

struct PathSample {
  ProcessSpec spec;
  TimeGrid grid;
  std::uint64_t seed = 0;
  ArrayXd positions;  // n_steps + 1 values, positions[0] == spec.start
};

PathSample simulate_path(const ProcessSpec& spec, const TimeGrid& grid,
                         std::uint64_t seed);

// sup_{j <= k} |X_j - X_0| at every grid index.
ArrayXd running_sup(const PathSample& path);

// First grid time with |X - X_0| > radius; censored at the horizon.
struct ExitTime {
  double time;
  bool censored;
};
ExitTime first_exit_time(const PathSample& path, double radius);

// A deterministic recipe for n paths: path i is regenerated on demand from
// path_seed(master_seed, i), so ensembles of any size are never resident.
class PathEnsemble {
 public:
  PathEnsemble(ProcessSpec spec, TimeGrid grid, std::int64_t n_paths,
               std::uint64_t master_seed);
  const ProcessSpec& spec() const { return spec_; }
  const TimeGrid& grid() const { return grid_; }
  std::int64_t n_paths() const { return n_paths_; }
  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t seed_of(std::int64_t i) const;
  PathSample path(std::int64_t i) const;

 private:
  ProcessSpec spec_;
  TimeGrid grid_;
  std::int64_t n_paths_;
  std::uint64_t master_seed_;
};

PathEnsemble build_ensemble(const ProcessSpec& spec, const TimeGrid& grid,
                            std::int64_t n_paths, std::uint64_t master_seed);

// Binary path dump, little-endian: "LILP", u32 version, u64 n_steps, f64 dt,
// u64 seed, then n_steps+1 position doubles. Consumed by the replay mode.
void write_path_dump(const PathSample& path, const std::string& file);
struct PathDump {
  TimeGrid grid;
  std::uint64_t seed;
  ArrayXd positions;
};
PathDump read_path_dump(const std::string& file);

}  // namespace lil
