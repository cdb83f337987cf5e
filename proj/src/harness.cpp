#include "lil/harness.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "lil/errors.hpp"
#include "lil/kernel.hpp"
#include "lil/occupation.hpp"
#include "lil/stats.hpp"

namespace lil {

namespace fs = std::filesystem;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const char* what) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw IoError(std::string(what) + ": unknown key \"" + item.key() +
                    "\"");
  }
}

}  // namespace

json scale_to_json(const ScaleFunction& f) {
  json j;
  switch (f.kind()) {
    case ScaleKind::Power:
      j["kind"] = "power";
      j["exponent"] = f.exponent();
      break;
    case ScaleKind::StableMixture:
    case ScaleKind::InverseMixture: {
      j["kind"] = f.kind() == ScaleKind::StableMixture ? "stable_mixture"
                                                       : "inverse_mixture";
      json comps = json::array();
      for (const auto& c : f.components())
        comps.push_back(json{{"index", c.index}, {"weight", c.weight}});
      j["components"] = std::move(comps);
      break;
    }
    case ScaleKind::Tabulated: {
      j["kind"] = "tabulated";
      json knots = json::array();
      for (const auto& k : f.knots()) knots.push_back(json::array({k[0], k[1]}));
      j["knots"] = std::move(knots);
      break;
    }
  }
  return j;
}

ScaleFunction scale_from_json(const json& j) {
  if (!j.is_object()) throw IoError("scale: expected a JSON object");
  const std::string kind = j.value("kind", std::string());
  if (kind == "power") {
    check_keys(j, {"kind", "exponent"}, "scale");
    return ScaleFunction::power(j.at("exponent").get<double>());
  }
  if (kind == "stable_mixture" || kind == "inverse_mixture") {
    check_keys(j, {"kind", "components"}, "scale");
    std::vector<MixtureComponent> comps;
    for (const auto& c : j.at("components")) {
      check_keys(c, {"index", "weight"}, "scale component");
      comps.push_back({c.at("weight").get<double>(),
                       c.at("index").get<double>()});
    }
    return kind == "stable_mixture"
               ? ScaleFunction::stable_mixture(std::move(comps))
               : ScaleFunction::inverse_mixture(std::move(comps));
  }
  if (kind == "tabulated") {
    check_keys(j, {"kind", "knots"}, "scale");
    std::vector<std::array<double, 2>> knots;
    for (const auto& k : j.at("knots")) {
      if (!k.is_array() || k.size() != 2)
        throw IoError("scale: tabulated knot must be a [r, value] pair");
      knots.push_back({k[0].get<double>(), k[1].get<double>()});
    }
    return ScaleFunction::tabulated(std::move(knots));
  }
  throw IoError("scale: unknown kind \"" + kind + "\"");
}

json process_to_json(const ProcessSpec& spec) {
  json j;
  switch (spec.kind) {
    case ProcessKind::StableLevy:
      j["kind"] = "stable";
      j["beta"] = spec.beta;
      break;
    case ProcessKind::StableMixtureLevy: {
      j["kind"] = "stable_mixture";
      json comps = json::array();
      for (const auto& c : spec.components)
        comps.push_back(json{{"index", c.index}, {"weight", c.weight}});
      j["components"] = std::move(comps);
      break;
    }
    case ProcessKind::SubordinatedBM:
      j["kind"] = "subordinated_bm";
      j["gamma"] = spec.gamma;
      break;
  }
  j["start"] = spec.start;
  return j;
}

ProcessSpec process_from_json(const json& j) {
  if (!j.is_object()) throw IoError("process: expected a JSON object");
  const std::string kind = j.value("kind", std::string());
  const double start = j.value("start", 0.0);
  if (kind == "stable") {
    check_keys(j, {"kind", "beta", "start"}, "process");
    return ProcessSpec::stable(j.at("beta").get<double>(), start);
  }
  if (kind == "stable_mixture") {
    check_keys(j, {"kind", "components", "start"}, "process");
    std::vector<MixtureComponent> comps;
    for (const auto& c : j.at("components")) {
      check_keys(c, {"index", "weight"}, "process component");
      comps.push_back({c.at("weight").get<double>(),
                       c.at("index").get<double>()});
    }
    return ProcessSpec::stable_mixture(std::move(comps), start);
  }
  if (kind == "subordinated_bm") {
    check_keys(j, {"kind", "gamma", "start"}, "process");
    return ProcessSpec::subordinated_bm(j.at("gamma").get<double>(), start);
  }
  throw IoError("process: unknown kind \"" + kind + "\"");
}

NaturalScales ExperimentConfig::scales() const {
  NaturalScales out = natural_scale_functions(spec);
  if (volume) out.volume = *volume;
  if (time_scale) out.time_scale = *time_scale;
  return out;
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw IoError("config: expected a JSON object");
  check_keys(j,
             {"experiment", "process", "volume", "time_scale", "dt", "ladder",
              "n_paths", "master_seed", "out_dir", "threads", "params"},
             "config");
  ExperimentConfig c;
  if (!j.contains("experiment") || !j["experiment"].is_string())
    throw IoError("config: \"experiment\" must be a string");
  c.experiment = j["experiment"].get<std::string>();
  if (j.contains("process")) c.spec = process_from_json(j["process"]);
  if (j.contains("volume") && !j["volume"].is_null())
    c.volume = scale_from_json(j["volume"]);
  if (j.contains("time_scale") && !j["time_scale"].is_null())
    c.time_scale = scale_from_json(j["time_scale"]);
  c.dt = j.value("dt", c.dt);
  if (!(c.dt > 0)) throw IoError("config: dt must be positive");
  if (j.contains("ladder")) {
    const json& l = j["ladder"];
    check_keys(l, {"t0", "ratio", "count"}, "ladder");
    c.ladder.t0 = l.value("t0", c.ladder.t0);
    c.ladder.ratio = l.value("ratio", c.ladder.ratio);
    c.ladder.count = l.value("count", c.ladder.count);
    if (!(c.ladder.t0 > 0) || !(c.ladder.ratio > 1) || c.ladder.count < 2)
      throw IoError("config: ladder needs t0 > 0, ratio > 1, count >= 2");
  }
  c.n_paths = j.value("n_paths", c.n_paths);
  if (c.n_paths < 1) throw IoError("config: n_paths must be >= 1");
  c.master_seed = j.value("master_seed", c.master_seed);
  c.out_dir = j.value("out_dir", c.out_dir);
  c.threads = j.value("threads", c.threads);
  if (j.contains("params")) {
    if (!j["params"].is_object())
      throw IoError("config: params must be an object");
    c.params = j["params"];
  }
  return c;
}

json config_to_json(const ExperimentConfig& config) {
  // Canonical form: every field present, the scale pair resolved. An empty
  // scale slot means the natural one, which is a function of the process
  // alone, so resolving keeps two spellings of the same run on one hash.
  const NaturalScales sc = config.scales();
  json j;
  j["experiment"] = config.experiment;
  j["process"] = process_to_json(config.spec);
  j["volume"] = scale_to_json(sc.volume);
  j["time_scale"] = scale_to_json(sc.time_scale);
  j["dt"] = config.dt;
  j["ladder"] = json{{"t0", config.ladder.t0},
                     {"ratio", config.ladder.ratio},
                     {"count", config.ladder.count}};
  j["n_paths"] = config.n_paths;
  j["master_seed"] = config.master_seed;
  j["out_dir"] = config.out_dir;
  j["threads"] = config.threads;
  j["params"] = config.params;
  return j;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

json hash_view(const ExperimentConfig& config) {
  json j = config_to_json(config);
  j.erase("out_dir");
  j.erase("threads");
  return j;
}

std::string hex16(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::uint64_t config_hash(const ExperimentConfig& config) {
  return fnv1a64(hash_view(config).dump());
}

std::uint64_t family_hash(const ExperimentConfig& config) {
  json j = hash_view(config);
  j["master_seed"] = 0;
  return fnv1a64(j.dump());
}

json record_to_json(const ResultRecord& record) {
  json j;
  j["experiment"] = record.experiment;
  j["config_hash"] = hex16(record.config_hash);
  j["family_hash"] = hex16(record.family_hash);
  j["config"] = record.config;
  j["metrics"] = record.metrics;
  j["pass"] = record.pass;
  j["failures"] = record.failures;
  j["started_at"] = record.started_at;
  j["wall_seconds"] = record.wall_seconds;
  return j;
}

ResultRecord record_from_json(const json& j) {
  ResultRecord r;
  r.experiment = j.at("experiment").get<std::string>();
  r.config_hash =
      std::strtoull(j.at("config_hash").get<std::string>().c_str(), nullptr, 16);
  r.family_hash =
      std::strtoull(j.at("family_hash").get<std::string>().c_str(), nullptr, 16);
  r.config = j.at("config");
  r.metrics = j.at("metrics");
  r.pass = j.at("pass").get<bool>();
  r.failures = j.at("failures").get<std::vector<std::string>>();
  r.started_at = j.value("started_at", std::string());
  r.wall_seconds = j.value("wall_seconds", 0.0);
  return r;
}

const std::vector<ExperimentInfo>& experiment_registry() {
  static const std::vector<ExperimentInfo> reg = {
      {"kernel-verify",
       "transition density against the Cauchy and Gaussian closed forms, "
       "total mass 1, and the Chapman-Kolmogorov identity"},
      {"hke-fit",
       "two-sided kernel bound min(1/V(phi^{-1}(t)), t/(V(x) phi(x))): "
       "extreme ratio constants and their drift under probe widening"},
      {"exit-tails",
       "small-time exit probability P(tau_{B(0,r)} <= t): log-log slope 1, "
       "the one-big-jump regime"},
      {"confinement",
       "probability of staying in a ball over n consecutive time blocks of "
       "length c0 phi(r): geometric decay in n"},
      {"local-time-moments",
       "local time moments at a point: closed-form anchors, Monte Carlo "
       "first moment with Richardson bias removal, n! m1 bound on m2"},
      {"tails",
       "upper tail of the local time at the origin at fixed t: linear log "
       "survival against u^{b/(b-1)}"},
      {"garsia",
       "spatial regularity of local-time profiles: energy-based modulus "
       "bound calibrated on half the level pairs, audited on the rest"},
      {"lil-paths",
       "running-sup scaling: median quantile exponent 1/b and Chung-type "
       "normalized statistics under ladder refinement"},
      {"lil-localtime",
       "sup-local-time scaling: median exponent 1 - 1/b and normalized "
       "limsup/liminf statistics"},
      {"lil-range",
       "range scaling: median exponent 1/b and normalized limsup/liminf "
       "statistics"},
      {"integral-test",
       "integral classifier on boundary curves with known verdicts, plus "
       "path-consistency fractions for an upper and a lower curve"},
      {"resolvent-identity",
       "expected discounted local time against the band-smoothed resolvent "
       "density"},
  };
  return reg;
}

namespace {

// ---- run_experiment plumbing ----

class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".lil_lock") {
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0)
      throw IoError("output directory is locked by another run: " +
                    path_.string());
    const std::string pid = std::to_string(::getpid()) + "\n";
    if (::write(fd_, pid.data(), pid.size()) < 0) {
      // lock file exists either way; the pid note is best-effort
    }
  }
  ~DirLock() {
    if (fd_ >= 0) {
      ::close(fd_);
      std::error_code ec;
      fs::remove(path_, ec);
    }
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

std::string now_iso8601_utc() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// CSV sink; every numeric cell is written with full round-trip precision.
class Csv {
 public:
  Csv(const fs::path& file, const std::string& header) : out_(file) {
    if (!out_) throw IoError("cannot open " + file.string());
    out_ << header << '\n';
  }
  Csv& cell(double v) {
    sep();
    out_ << fmt(v);
    return *this;
  }
  Csv& cell(std::int64_t v) {
    sep();
    out_ << v;
    return *this;
  }
  Csv& cell(const std::string& v) {
    sep();
    out_ << v;
    return *this;
  }
  void endrow() {
    out_ << '\n';
    first_ = true;
  }

 private:
  void sep() {
    if (!first_) out_ << ',';
    first_ = false;
  }
  std::ofstream out_;
  bool first_ = true;
};

// Experiment-specific knobs are popped one by one; leftovers are a config
// error, so a typo in a knob name cannot silently run the defaults.
class Params {
 public:
  explicit Params(json p) : p_(std::move(p)) {}
  double num(const char* key, double def) {
    if (!p_.contains(key)) return def;
    if (!p_[key].is_number())
      throw IoError(std::string("param \"") + key + "\" must be a number");
    const double v = p_[key].get<double>();
    p_.erase(key);
    return v;
  }
  std::int64_t integer(const char* key, std::int64_t def) {
    if (!p_.contains(key)) return def;
    if (!p_[key].is_number_integer())
      throw IoError(std::string("param \"") + key + "\" must be an integer");
    const std::int64_t v = p_[key].get<std::int64_t>();
    p_.erase(key);
    return v;
  }
  void done(const char* experiment) const {
    if (p_.empty()) return;
    std::string keys;
    for (const auto& item : p_.items()) {
      if (!keys.empty()) keys += ", ";
      keys += item.key();
    }
    throw IoError(std::string(experiment) + ": unknown params: " + keys);
  }

 private:
  json p_;
};

struct Gates {
  json metrics = json::object();
  std::vector<std::string> failures;
  void metric(const std::string& name, double v) { metrics[name] = v; }
  void metric(const std::string& name, std::int64_t v) { metrics[name] = v; }
  void metric(const std::string& name, const std::string& v) {
    metrics[name] = v;
  }
  void require(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

std::vector<double> log_spaced(double lo, double hi, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] =
        lo * std::pow(hi / lo, n == 1 ? 0.0 : double(i) / double(n - 1));
  return out;
}

TimeGrid grid_for_ladder(const DyadicLadder& ladder, double dt) {
  const auto times = ladder.times();
  const double horizon = times.back();
  return make_grid(dt, static_cast<std::int64_t>(std::llround(horizon / dt)));
}

double median_per_path_slope(const std::vector<double>& times,
                             const Eigen::MatrixXd& values) {
  const auto n = static_cast<Eigen::Index>(times.size());
  ArrayXd lt(n);
  for (Eigen::Index j = 0; j < n; ++j)
    lt[j] = std::log(times[static_cast<std::size_t>(j)]);
  ArrayXd slopes(values.rows());
  ArrayXd ly(n);
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < n; ++j)
      ly[j] = std::log(std::max(values(i, j), 1e-300));
    slopes[i] = stats::linear_fit(lt, ly).slope;
  }
  return stats::median(slopes);
}

// Exact per-path sanity: over one normalized sequence, the min over rungs
// can never exceed the max. A violation means NaN or corrupted ordering.
std::int64_t minmax_violations(RateKind kind, const std::vector<double>& times,
                               const Eigen::MatrixXd& values,
                               const ScaleFunction& volume,
                               const ScaleFunction& time_scale) {
  const auto n = static_cast<Eigen::Index>(times.size());
  ArrayXd rate(n);
  for (Eigen::Index j = 0; j < n; ++j)
    rate[j] = lil_rate(kind, times[static_cast<std::size_t>(j)], volume,
                       time_scale);
  std::int64_t bad = 0;
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    double mn = std::numeric_limits<double>::infinity();
    double mx = -mn;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double r = values(i, j) / rate[j];
      mn = std::min(mn, r);
      mx = std::max(mx, r);
    }
    if (!(mn <= mx) || !std::isfinite(mn) || !std::isfinite(mx)) ++bad;
  }
  return bad;
}

// Refinement direction counts. A statistic over the refined ladder is taken
// over a superset of rungs, so a per-path min can only fall and a max only
// rise; these violations must be exactly zero.
std::int64_t superset_violations(const ArrayXd& fine, const ArrayXd& coarse,
                                 bool is_min) {
  std::int64_t bad = 0;
  for (Eigen::Index i = 0; i < fine.size(); ++i) {
    if (is_min ? fine[i] > coarse[i] : fine[i] < coarse[i]) ++bad;
  }
  return bad;
}

bool finite_positive(double v) { return std::isfinite(v) && v > 0; }

void stat_block(Gates& g, const std::string& prefix, const LilStatistic& fine,
                const LilStatistic& coarse, bool is_min, double shift_max) {
  g.metric(prefix + "_median", coarse.median);
  g.metric(prefix + "_q25", coarse.lower_quartile);
  g.metric(prefix + "_q75", coarse.upper_quartile);
  g.metric(prefix + "_median_refined", fine.median);
  const double shift = std::abs(fine.median / coarse.median - 1.0);
  g.metric(prefix + "_refine_shift", shift);
  const std::int64_t bad =
      superset_violations(fine.per_path, coarse.per_path, is_min);
  g.metric(prefix + "_refine_violations", bad);
  g.require(finite_positive(coarse.median),
            prefix + ": median not positive finite");
  g.require(shift <= shift_max, prefix + ": median moved " + fmt(shift) +
                                    " under refinement (max " +
                                    fmt(shift_max) + ")");
  g.require(bad == 0, prefix + ": refinement monotonicity violated on " +
                          std::to_string(bad) + " paths");
}

}  // namespace

namespace {

// ---- runners ----
//
// Every tolerance that decides pass/fail is a named local pinned here (or a
// param default), never an inline magic number, so a red run can be traced
// to one line.

void run_kernel_verify(const ExperimentConfig& c, const fs::path& out,
                       Gates& g) {
  Params p(c.params);
  const double closed_form_tol = p.num("closed_form_tol", 1e-8);
  const double mass_tol = p.num("mass_tol", 1e-6);
  const double ck_tol = p.num("ck_tol", 1e-5);
  p.done("kernel-verify");

  Csv csv(out / "kernel_checks.csv", "check,family,t,x,value,reference,error");

  const std::vector<double> t_grid = {0.1, 0.31622776601683794, 1.0,
                                      3.1622776601683795, 10.0};
  const ProcessSpec cauchy = ProcessSpec::stable(1.0);
  const ProcessSpec gauss = ProcessSpec::stable(2.0);
  double worst_cauchy = 0, worst_gauss = 0;
  for (double t : t_grid) {
    for (double x = 0.0; x <= 10.0 + 1e-12; x += 0.5) {
      const double pc = heat_kernel(cauchy, t, x);
      const double rc = t / (M_PI * (t * t + x * x));
      const double ec = std::abs(pc - rc) / rc;
      worst_cauchy = std::max(worst_cauchy, ec);
      csv.cell("closed_form").cell("cauchy").cell(t).cell(x).cell(pc).cell(rc);
      csv.cell(ec);
      csv.endrow();

      const double pg = heat_kernel(gauss, t, x);
      const double rg = std::exp(-x * x / (4.0 * t)) / std::sqrt(4.0 * M_PI * t);
      const double eg = std::abs(pg - rg) / rg;
      worst_gauss = std::max(worst_gauss, eg);
      csv.cell("closed_form").cell("gaussian").cell(t).cell(x).cell(pg).cell(rg);
      csv.cell(eg);
      csv.endrow();
    }
  }
  g.metric("max_rel_err_cauchy", worst_cauchy);
  g.metric("max_rel_err_gaussian", worst_gauss);
  g.require(worst_cauchy <= closed_form_tol,
            "cauchy closed form off by " + fmt(worst_cauchy));
  g.require(worst_gauss <= closed_form_tol,
            "gaussian closed form off by " + fmt(worst_gauss));

  const std::vector<ProcessSpec> mass_specs = {
      ProcessSpec::stable(0.8), ProcessSpec::stable(1.0),
      ProcessSpec::stable(1.5), ProcessSpec::stable(2.0),
      ProcessSpec::stable_mixture({{0.5, 1.0}, {0.5, 1.5}})};
  double worst_mass = 0;
  for (const auto& spec : mass_specs) {
    for (double t : {0.1, 1.0, 10.0}) {
      const MassCheck mc = mass_check(spec, t);
      const double err = std::abs(mc.mass - 1.0);
      worst_mass = std::max(worst_mass, err);
      csv.cell("mass").cell(spec.name()).cell(t).cell(0.0).cell(mc.mass);
      csv.cell(1.0).cell(err);
      csv.endrow();
    }
  }
  g.metric("max_mass_err", worst_mass);
  g.require(worst_mass <= mass_tol, "mass check off by " + fmt(worst_mass));

  double worst_ck = 0;
  for (double beta : {1.0, 1.5}) {
    const ProcessSpec spec = ProcessSpec::stable(beta);
    for (double x : {0.0, 1.0, 5.0}) {
      const double resid = chapman_kolmogorov_residual(spec, 0.5, 1.0, x);
      worst_ck = std::max(worst_ck, resid);
      csv.cell("chapman_kolmogorov").cell(spec.name()).cell(1.0).cell(x);
      csv.cell(resid).cell(0.0).cell(resid);
      csv.endrow();
    }
  }
  g.metric("max_ck_resid", worst_ck);
  g.require(worst_ck <= ck_tol,
            "chapman-kolmogorov residual " + fmt(worst_ck));
}

void run_hke_fit(const ExperimentConfig& c, const fs::path& out, Gates& g) {
  Params p(c.params);
  const double t_min = p.num("t_min", 0.1);
  const double t_max = p.num("t_max", 10.0);
  const int n_times = static_cast<int>(p.integer("n_times", 7));
  const double u_max = p.num("u_max", 20.0);
  const double widen = p.num("widen", 2.0);
  const int probes = static_cast<int>(p.integer("probes_per_time", 40));
  const double ratio_max = p.num("ratio_max", 50.0);
  const double drift_max = p.num("drift_max", 0.10);
  p.done("hke-fit");

  const auto times = log_spaced(t_min, t_max, n_times);
  const HkeFit base = hke_fit(c.spec, times, u_max, probes);
  const HkeFit wide = hke_fit(c.spec, times, u_max * widen, probes);
  const double drift = std::max(std::abs(wide.c_upper / base.c_upper - 1.0),
                                std::abs(wide.c_lower / base.c_lower - 1.0));

  Csv csv(out / "hke_fit.csv", "u_max,c_lower,c_upper,ratio,n_probes");
  for (const HkeFit* f : {&base, &wide}) {
    csv.cell(f->u_max).cell(f->c_lower).cell(f->c_upper).cell(f->ratio());
    csv.cell(static_cast<std::int64_t>(f->n_probes));
    csv.endrow();
  }

  g.metric("c_lower", base.c_lower);
  g.metric("c_upper", base.c_upper);
  g.metric("ratio", base.ratio());
  g.metric("c_lower_wide", wide.c_lower);
  g.metric("c_upper_wide", wide.c_upper);
  g.metric("constant_drift", drift);
  g.require(finite_positive(base.c_lower), "lower constant not positive");
  g.require(base.ratio() <= ratio_max,
            "constant ratio " + fmt(base.ratio()) + " above " + fmt(ratio_max));
  g.require(drift <= drift_max,
            "constants drifted " + fmt(drift) + " under probe widening");
}

void run_exit_tails(const ExperimentConfig& c, const fs::path& out, Gates& g) {
  Params p(c.params);
  const double radius = p.num("radius", 1.0);
  const double probe_lo = p.num("probe_lo_frac", 0.003);
  const double probe_hi = p.num("probe_hi_frac", 0.06);
  const int n_probes = static_cast<int>(p.integer("n_probes", 10));
  const double dt_frac = p.num("dt_frac", 1.0 / 4096.0);
  const double slope_tol = p.num("slope_tol", 0.15);
  const double r2_min = p.num("r2_min", 0.9);
  p.done("exit-tails");

  const NaturalScales sc = c.scales();
  const double phir = eval_scale(sc.time_scale, radius);
  const auto probes = log_spaced(probe_lo * phir, probe_hi * phir, n_probes);
  const ExitTailCurve curve =
      exit_tail_curve(c.spec, sc.time_scale, radius, probes, dt_frac * phir,
                      c.n_paths, c.master_seed);

  Csv csv(out / "exit_tails.csv", "t,exited,probability");
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    csv.cell(curve.times[i]).cell(curve.exited[i]).cell(curve.probability[i]);
    csv.endrow();
  }

  g.metric("slope", curve.fit.slope);
  g.metric("r2", curve.fit.r2);
  g.metric("n_excluded", static_cast<std::int64_t>(curve.n_excluded));
  g.metric("exits_at_min_probe", curve.exited.front());
  g.require(curve.fit.r2 >= r2_min, "exit tail fit r2 " + fmt(curve.fit.r2));
  if (c.spec.minimal_index() < 2.0) {
    // one-big-jump regime: P(tau <= t) ~ c t for small t
    g.require(std::abs(curve.fit.slope - 1.0) <= slope_tol,
              "exit tail slope " + fmt(curve.fit.slope) + " not within " +
                  fmt(slope_tol) + " of 1");
  }
}

void run_confinement(const ExperimentConfig& c, const fs::path& out,
                     Gates& g) {
  Params p(c.params);
  const double radius = p.num("radius", 1.0);
  const double c0 = p.num("c0", 0.5);
  const int n_max = static_cast<int>(p.integer("n_max", 8));
  const double dt = p.num("dt", 1.0 / 128.0);
  const double r2_min = p.num("r2_min", 0.95);
  p.done("confinement");

  const NaturalScales sc = c.scales();
  const ConfinementCurve cc = confinement_curve(
      c.spec, sc.time_scale, radius, n_max, dt, c.n_paths, c.master_seed, c0);

  Csv csv(out / "confinement.csv", "n,survivors,probability");
  for (std::size_t n = 0; n < cc.survivors.size(); ++n) {
    csv.cell(static_cast<std::int64_t>(n)).cell(cc.survivors[n]);
    csv.cell(cc.probability[n]);
    csv.endrow();
  }

  g.metric("decay_ratio", cc.decay_ratio);
  g.metric("r2", cc.fit.r2);
  g.metric("n_fitted", static_cast<std::int64_t>(cc.n_fitted));
  g.metric("block_time", cc.block_time);
  g.metric("survivors_last",
           cc.survivors.empty() ? 0 : cc.survivors.back());
  g.require(cc.n_fitted >= 4, "too few decaying levels survived the horizon");
  g.require(cc.fit.r2 >= r2_min, "confinement fit r2 " + fmt(cc.fit.r2));
  g.require(cc.decay_ratio > 0.0 && cc.decay_ratio < 1.0,
            "block survival ratio " + fmt(cc.decay_ratio) + " not in (0,1)");
}

void run_local_time_moments(const ExperimentConfig& c, const fs::path& out,
                            Gates& g) {
  Params p(c.params);
  const double t = p.num("t", 1.0);
  const double mc_dt = p.num("mc_dt", 1e-3);
  const double mc_eps = p.num("mc_eps", 0.05);
  const double mc_tol = p.num("mc_tol", 0.03);
  const double anchor_tol = p.num("anchor_tol", 1e-3);
  p.done("local-time-moments");

  // Brownian anchors at t = 1: m1 = 1/sqrt(pi), m2 = 1/2.
  const double m1_bm = kac_moment_exact(2.0, 0.0, 0.0, 1.0, 1);
  const double m2_bm = kac_moment_exact(2.0, 0.0, 0.0, 1.0, 2);
  g.metric("m1_bm", m1_bm);
  g.metric("m2_bm", m2_bm);
  g.require(std::abs(m1_bm * std::sqrt(M_PI) - 1.0) <= anchor_tol,
            "brownian m1 anchor off: " + fmt(m1_bm));
  g.require(std::abs(2.0 * m2_bm - 1.0) <= anchor_tol,
            "brownian m2 anchor off: " + fmt(m2_bm));

  const KacBound kb_bm = kac_product_bound_check(2.0, 0.0, 0.0, t, 2);
  g.metric("m2_bm_product_bound", kb_bm.product_bound);
  g.require(kb_bm.holds, "brownian m2 exceeds the n! m1^n bound");

  if (c.spec.kind == ProcessKind::StableLevy && c.spec.beta > 1.0 &&
      c.spec.beta < 2.0) {
    const double beta = c.spec.beta;
    const KacBound kb = kac_product_bound_check(beta, 0.0, 0.0, t, 2);
    g.metric("m2_product_ratio", kb.moment / kb.product_bound);
    g.require(kb.holds, "m2 exceeds the n! m1^n bound");

    const double exact = kac_moment_exact(beta, 0.0, 0.0, t, 1);
    const McLocalTime mc =
        mc_local_time(c.spec, 0.0, t, mc_dt, {mc_eps, mc_eps / 2}, c.n_paths,
                      c.master_seed);
    const double rel = std::abs(mc.richardson - exact) / exact;
    g.metric("m1_exact", exact);
    g.metric("m1_mc", mc.richardson);
    g.metric("m1_mc_rel_err", rel);
    g.require(rel <= mc_tol, "monte carlo m1 off by " + fmt(rel));

    Csv csv(out / "local_time_moments.csv", "eps,mean,sem");
    for (std::size_t i = 0; i < mc.eps.size(); ++i) {
      csv.cell(mc.eps[i]).cell(mc.mean[i]).cell(mc.sem[i]);
      csv.endrow();
    }
    csv.cell(0.0).cell(mc.richardson).cell(0.0);
    csv.endrow();
  }
}

void run_tails(const ExperimentConfig& c, const fs::path& out, Gates& g) {
  Params p(c.params);
  const double t = p.num("t", 1.0);
  const double dt = p.num("dt", 1e-3);
  const double eps = p.num("eps", 0.05);
  const int n_levels = static_cast<int>(p.integer("n_levels", 12));
  const std::int64_t min_exceed = p.integer("min_exceed", 50);
  const double r2_min = p.num("r2_min", 0.9);
  p.done("tails");

  const LocalTimeTail lt = local_time_tail_check(
      c.spec, t, dt, eps, c.n_paths, n_levels, min_exceed, c.master_seed);

  Csv csv(out / "local_time_tail.csv", "u,exceedance");
  for (std::size_t i = 0; i < lt.u.size(); ++i) {
    csv.cell(lt.u[i]).cell(lt.exceedance[i]);
    csv.endrow();
  }

  g.metric("slope", lt.fit.slope);
  g.metric("r2", lt.fit.r2);
  g.metric("u_lo", lt.u_lo);
  g.metric("u_hi", lt.u_hi);
  g.metric("min_exceedances", lt.min_exceedances);
  g.require(lt.fit.slope < 0.0, "tail slope not negative");
  g.require(lt.fit.r2 >= r2_min, "tail fit r2 " + fmt(lt.fit.r2));
}

void run_garsia(const ExperimentConfig& c, const fs::path& out, Gates& g) {
  Params p(c.params);
  const double horizon = p.num("horizon", 64.0);
  const double eps_in = p.num("eps", 0.0);  // 0: bandwidth matched to dt
  const int max_profile_points = static_cast<int>(p.integer("profile_points", 400));
  const int n_h = static_cast<int>(p.integer("n_h", 12));
  const double h_max = p.num("h_max", 4.0);
  const double viol_max = p.num("violation_max", 0.01);
  const double slope_band = p.num("slope_band", 0.10);
  p.done("garsia");

  const double eps =
      eps_in > 0 ? eps_in : default_bandwidth(c.spec, c.dt);
  const double h_min = 8.0 * eps;
  const TimeGrid grid = make_grid(
      c.dt, static_cast<std::int64_t>(std::llround(horizon / c.dt)));
  const PathEnsemble ens =
      build_ensemble(c.spec, grid, c.n_paths, c.master_seed);
  const NaturalScales sc = c.scales();
  const GarsiaCheck gc = garsia_modulus(ens, eps, max_profile_points, h_min,
                                        h_max, n_h, sc.volume, sc.time_scale);

  Csv csv(out / "garsia_modulus.csv", "h,omega_median");
  for (Eigen::Index i = 0; i < gc.h_grid.size(); ++i) {
    csv.cell(gc.h_grid[i]).cell(gc.omega[i]);
    csv.endrow();
  }

  g.metric("c1", gc.c1);
  g.metric("violation_rate", gc.violation_rate);
  g.metric("holdout_pairs", gc.holdout_pairs);
  g.metric("modulus_slope", gc.modulus_fit.slope);
  g.metric("modulus_r2", gc.modulus_fit.r2);
  g.require(gc.holdout_pairs > 0, "no held-out level pairs to audit");
  g.require(gc.violation_rate <= viol_max,
            "held-out modulus violations at rate " + fmt(gc.violation_rate));
  if (sc.volume.kind() == ScaleKind::Power &&
      sc.time_scale.kind() == ScaleKind::Power) {
    // square-root of the gap between time and volume growth
    const double theory =
        0.5 * (sc.time_scale.exponent() - sc.volume.exponent());
    g.metric("modulus_slope_theory", theory);
    g.require(std::abs(gc.modulus_fit.slope - theory) <= slope_band,
              "modulus exponent " + fmt(gc.modulus_fit.slope) +
                  " not within " + fmt(slope_band) + " of " + fmt(theory));
  }
}

void run_lil_paths(const ExperimentConfig& c, const fs::path& out, Gates& g) {
  Params p(c.params);
  const double q = p.num("quantile", 0.5);
  const double slope_tol = p.num("slope_tol", 0.02);
  const double shift_max = p.num("shift_max", 0.30);
  const double ulil_pass_level = p.num("ulil_pass_level", 0.05);
  p.done("lil-paths");

  const NaturalScales sc = c.scales();
  const DyadicLadder fine = c.ladder.refined();
  const TimeGrid grid = grid_for_ladder(c.ladder, c.dt);
  const PathEnsemble ens =
      build_ensemble(c.spec, grid, c.n_paths, c.master_seed);

  const SupCollection fine_sup = collect_running_sup(ens, fine);
  const SupCollection sup = thin_columns(fine_sup, 2, 0);

  const RegressionReport reg = quantile_scaling(sup.times, sup.values, q);
  g.metric("quantile_slope", reg.fit.slope);
  g.metric("quantile_r2", reg.fit.r2);
  g.metric("per_path_slope_median",
           median_per_path_slope(sup.times, sup.values));
  if (sc.time_scale.kind() == ScaleKind::Power) {
    const double theory = 1.0 / sc.time_scale.exponent();
    g.metric("slope_theory", theory);
    g.require(std::abs(reg.fit.slope - theory) <= slope_tol,
              "sup quantile slope " + fmt(reg.fit.slope) + " not within " +
                  fmt(slope_tol) + " of " + fmt(theory));
  }

  const LilStatistic chung_fine =
      chung_statistic(fine_sup, sc.volume, sc.time_scale, ChungMode::LargeTime);
  const LilStatistic chung =
      chung_statistic(sup, sc.volume, sc.time_scale, ChungMode::LargeTime);
  stat_block(g, "chung", chung_fine, chung, /*is_min=*/true, shift_max);
  g.metric("chung_minmax_violations",
           minmax_violations(RateKind::ChungLarge, sup.times, sup.values,
                             sc.volume, sc.time_scale));
  g.require(minmax_violations(RateKind::ChungLarge, sup.times, sup.values,
                              sc.volume, sc.time_scale) == 0,
            "per-path min exceeded max on the chung rate");

  Csv csv(out / "lil_paths.csv", "t,quantile_sup,rate");
  for (std::size_t j = 0; j < reg.times.size(); ++j) {
    csv.cell(reg.times[j]).cell(reg.quantile_values[j]);
    csv.cell(lil_rate(RateKind::SupQuantile, reg.times[j], sc.volume,
                      sc.time_scale));
    csv.endrow();
  }

  if (sc.time_scale.kind() == ScaleKind::Power) {
    const ScaleFunction rate =
        ScaleFunction::power(1.0 / sc.time_scale.exponent());
    const UlilTable ut = ulil_hypothesis_check(
        sup.times, sup.values, rate, {1.0, 2.0, 4.0, 8.0, 12.0, 20.0});
    Csv ucsv(out / "ulil_table.csv", "b,sup_exceedance");
    for (std::size_t i = 0; i < ut.b.size(); ++i) {
      ucsv.cell(ut.b[i]).cell(ut.sup_exceedance[i]);
      ucsv.endrow();
    }
    g.metric("ulil_exceedance_b20", ut.sup_exceedance.back());
    g.require(ut.sup_exceedance.back() < ulil_pass_level,
              "sup exceedance still " + fmt(ut.sup_exceedance.back()) +
                  " at threshold 20");
  }
}

void run_lil_localtime(const ExperimentConfig& c, const fs::path& out,
                       Gates& g) {
  Params p(c.params);
  const double q = p.num("quantile", 0.5);
  const double bw = p.num("bandwidth_fraction", 0.1);
  const double slope_tol = p.num("slope_tol", 0.05);
  const double shift_max = p.num("shift_max", 0.30);
  p.done("lil-localtime");

  const double b = c.spec.diagonal_index();
  if (b <= 1.0)
    throw CoverageError(
        "local time needs a diagonal index above 1; got " + fmt(b));

  const NaturalScales sc = c.scales();
  const DyadicLadder fine = c.ladder.refined();
  const TimeGrid grid = grid_for_ladder(c.ladder, c.dt);
  const PathEnsemble ens =
      build_ensemble(c.spec, grid, c.n_paths, c.master_seed);

  const OccupationCollection fine_occ = collect_occupation_scaled(ens, fine, bw);
  const OccupationCollection occ = thin_columns(fine_occ, 2, 0);

  const RegressionReport reg =
      quantile_scaling(occ.times, occ.sup_local_time, q);
  g.metric("quantile_slope", reg.fit.slope);
  g.metric("quantile_r2", reg.fit.r2);
  g.metric("per_path_slope_median",
           median_per_path_slope(occ.times, occ.sup_local_time));
  if (sc.time_scale.kind() == ScaleKind::Power &&
      sc.volume.kind() == ScaleKind::Power) {
    const double theory = 1.0 - sc.volume.exponent() / sc.time_scale.exponent();
    g.metric("slope_theory", theory);
    g.require(std::abs(reg.fit.slope - theory) <= slope_tol,
              "sup local time slope " + fmt(reg.fit.slope) + " not within " +
                  fmt(slope_tol) + " of " + fmt(theory));
  }

  const LilStatistic up_f =
      local_time_limsup_statistic(fine_occ, sc.volume, sc.time_scale);
  const LilStatistic up =
      local_time_limsup_statistic(occ, sc.volume, sc.time_scale);
  const LilStatistic lo_f =
      local_time_liminf_statistic(fine_occ, sc.volume, sc.time_scale);
  const LilStatistic lo =
      local_time_liminf_statistic(occ, sc.volume, sc.time_scale);
  stat_block(g, "limsup", up_f, up, /*is_min=*/false, shift_max);
  stat_block(g, "liminf", lo_f, lo, /*is_min=*/true, shift_max);
  for (RateKind k : {RateKind::LocalLimsup, RateKind::LocalLiminf}) {
    g.require(minmax_violations(k, occ.times, occ.sup_local_time, sc.volume,
                                sc.time_scale) == 0,
              "per-path min exceeded max on rate " + rate_kind_name(k));
  }

  Csv csv(out / "lil_localtime.csv", "t,eps,quantile_sup_local_time");
  for (std::size_t j = 0; j < reg.times.size(); ++j) {
    csv.cell(reg.times[j]).cell(occ.eps[j]).cell(reg.quantile_values[j]);
    csv.endrow();
  }
}

void run_lil_range(const ExperimentConfig& c, const fs::path& out, Gates& g) {
  Params p(c.params);
  const double q = p.num("quantile", 0.5);
  const double bw = p.num("bandwidth_fraction", 0.1);
  const double slope_tol = p.num("slope_tol", 0.05);
  const double shift_max = p.num("shift_max", 0.30);
  p.done("lil-range");

  const NaturalScales sc = c.scales();
  const DyadicLadder fine = c.ladder.refined();
  const TimeGrid grid = grid_for_ladder(c.ladder, c.dt);
  const PathEnsemble ens =
      build_ensemble(c.spec, grid, c.n_paths, c.master_seed);

  const OccupationCollection fine_occ = collect_occupation_scaled(ens, fine, bw);
  const OccupationCollection occ = thin_columns(fine_occ, 2, 0);

  const RegressionReport reg = quantile_scaling(occ.times, occ.range, q);
  g.metric("quantile_slope", reg.fit.slope);
  g.metric("quantile_r2", reg.fit.r2);
  g.metric("per_path_slope_median",
           median_per_path_slope(occ.times, occ.range));
  if (sc.time_scale.kind() == ScaleKind::Power &&
      sc.volume.kind() == ScaleKind::Power) {
    const double theory = sc.volume.exponent() / sc.time_scale.exponent();
    g.metric("slope_theory", theory);
    g.require(std::abs(reg.fit.slope - theory) <= slope_tol,
              "range slope " + fmt(reg.fit.slope) + " not within " +
                  fmt(slope_tol) + " of " + fmt(theory));
  }

  const RangeLilStatistics fine_st =
      range_lil_statistics(fine_occ, sc.volume, sc.time_scale);
  const RangeLilStatistics st = range_lil_statistics(occ, sc.volume, sc.time_scale);
  stat_block(g, "limsup", fine_st.limsup, st.limsup, /*is_min=*/false,
             shift_max);
  stat_block(g, "liminf", fine_st.liminf, st.liminf, /*is_min=*/true,
             shift_max);
  for (RateKind k : {RateKind::RangeLimsup, RateKind::RangeLiminf}) {
    g.require(minmax_violations(k, occ.times, occ.range, sc.volume,
                                sc.time_scale) == 0,
              "per-path min exceeded max on rate " + rate_kind_name(k));
  }

  Csv csv(out / "lil_range.csv", "t,eps,quantile_range");
  for (std::size_t j = 0; j < reg.times.size(); ++j) {
    csv.cell(reg.times[j]).cell(occ.eps[j]).cell(reg.quantile_values[j]);
    csv.endrow();
  }
}

void run_integral_test(const ExperimentConfig& c, const fs::path& out,
                       Gates& g) {
  Params p(c.params);
  const double conv_scale = p.num("upper_curve_scale", 100.0);
  const double div_scale = p.num("lower_curve_scale", 0.01);
  const double frac_conv_min = p.num("upper_fraction_min", 0.95);
  const double frac_div_max = p.num("lower_fraction_max", 0.2);
  p.done("integral-test");

  // Three small-time boundary curves with known verdicts against
  // phi(r) = r^{3/2} (so phi^{-1}(t) = t^{2/3}):
  //   t^{4/3}               inside the integrable regime     -> Diverges
  //   t^{2/3} log(e/t)^{4/3} the critical log refinement      -> Converges
  //   t^{2/3}                below every sub-diffusive curve  -> Diverges
  const ScaleFunction phi = ScaleFunction::power(1.5);
  const ScaleFunction curve_a = ScaleFunction::power(4.0 / 3.0);
  std::vector<std::array<double, 2>> knots;
  const int n_knots = 521;
  for (int i = 0; i < n_knots; ++i) {
    const double t =
        1e-19 * std::pow(0.36 / 1e-19, double(i) / double(n_knots - 1));
    knots.push_back(
        {t, std::cbrt(t * t) * std::pow(std::log(M_E / t), 4.0 / 3.0)});
  }
  const ScaleFunction curve_b = ScaleFunction::tabulated(std::move(knots));
  const ScaleFunction curve_c = ScaleFunction::power(2.0 / 3.0);

  const IntegralTestResult ra = integral_test(phi, curve_a, Endpoint::Zero);
  const IntegralTestResult rb = integral_test(phi, curve_b, Endpoint::Zero);
  const IntegralTestResult rc = integral_test(phi, curve_c, Endpoint::Zero);
  g.metric("verdict_above", verdict_name(ra.verdict));
  g.metric("verdict_critical", verdict_name(rb.verdict));
  g.metric("verdict_below", verdict_name(rc.verdict));
  g.metric("critical_decay_exponent", rb.decay_exponent);
  g.require(ra.verdict == IntegralVerdict::Diverges,
            "t^{4/3} curve: expected divergence, got " +
                verdict_name(ra.verdict));
  g.require(rb.verdict == IntegralVerdict::Converges,
            "critical log curve: expected convergence, got " +
                verdict_name(rb.verdict));
  g.require(rc.verdict == IntegralVerdict::Diverges,
            "t^{2/3} curve: expected divergence, got " +
                verdict_name(rc.verdict));

  // Path consistency at large time for beta = 3/2: compare the running sup
  // against one curve far above the t^{2/3} (log t)^{4/3} boundary and one
  // far below it.
  const TimeGrid grid = grid_for_ladder(c.ladder, c.dt);
  const PathEnsemble ens =
      build_ensemble(c.spec, grid, c.n_paths, c.master_seed);
  const SupCollection sup = collect_running_sup(ens, c.ladder);

  auto curve_at_rungs = [&](double scale, bool with_log) {
    std::vector<std::array<double, 2>> k;
    for (double t : sup.times) {
      const double v = scale * std::cbrt(t * t) *
                       (with_log ? std::pow(std::log(t), 4.0 / 3.0) : 1.0);
      k.push_back({t, v});
    }
    return ScaleFunction::tabulated(std::move(k));
  };
  const PathConsistency upper = integral_test_path_consistency(
      sup, curve_at_rungs(conv_scale, true), IntegralVerdict::Converges, 0);
  const PathConsistency lower = integral_test_path_consistency(
      sup, curve_at_rungs(div_scale, false), IntegralVerdict::Diverges, 0);
  g.metric("upper_curve_fraction_below", upper.fraction);
  g.metric("lower_curve_fraction_below", lower.fraction);
  g.require(upper.fraction >= frac_conv_min,
            "only " + fmt(upper.fraction) + " of paths stay below the upper "
            "curve");
  g.require(lower.fraction <= frac_div_max,
            fmt(lower.fraction) + " of paths stay below the lower curve");

  Csv csv(out / "integral_test.csv",
          "endpoint,curve,verdict,levels_used,decay_exponent");
  const char* names[] = {"power_4_3", "critical_log", "power_2_3"};
  const IntegralTestResult* results[] = {&ra, &rb, &rc};
  for (int i = 0; i < 3; ++i) {
    csv.cell("zero").cell(names[i]).cell(verdict_name(results[i]->verdict));
    csv.cell(static_cast<std::int64_t>(results[i]->levels_used));
    csv.cell(results[i]->decay_exponent);
    csv.endrow();
  }
}

void run_resolvent_identity(const ExperimentConfig& c, const fs::path& out,
                            Gates& g) {
  Params p(c.params);
  const double lambda = p.num("lambda", 1.0);
  const double eps = p.num("eps", 0.05);
  const double dt = p.num("dt", 0.002);
  const double horizon = p.num("horizon", 20.0);
  const double tol_origin = p.num("tol_origin", 0.04);
  const double tol_off = p.num("tol_off", 0.03);
  const double off_level = p.num("off_level", 1.0);
  p.done("resolvent-identity");

  const ResolventIdentity r0 = resolvent_local_identity_check(
      c.spec, 0.0, lambda, eps, dt, horizon, c.n_paths, c.master_seed);
  const ResolventIdentity r1 = resolvent_local_identity_check(
      c.spec, off_level, lambda, eps, dt, horizon, c.n_paths, c.master_seed);

  Csv csv(out / "resolvent_identity.csv",
          "level,mc_value,mc_sem,smoothed_reference,rel_gap");
  csv.cell(0.0).cell(r0.mc_value).cell(r0.mc_sem).cell(r0.smoothed_reference);
  csv.cell(r0.rel_gap);
  csv.endrow();
  csv.cell(off_level).cell(r1.mc_value).cell(r1.mc_sem);
  csv.cell(r1.smoothed_reference).cell(r1.rel_gap);
  csv.endrow();

  g.metric("rel_gap_origin", r0.rel_gap);
  g.metric("rel_gap_off", r1.rel_gap);
  g.metric("mc_sem_origin", r0.mc_sem);
  // The discrete occupation sum sees the starting point for a full step, a
  // positive O(dt/eps) bias; the tolerances assume dt small against eps.
  g.require(std::abs(r0.rel_gap) <= tol_origin,
            "origin gap " + fmt(r0.rel_gap) + " above " + fmt(tol_origin));
  g.require(std::abs(r1.rel_gap) <= tol_off,
            "off-origin gap " + fmt(r1.rel_gap) + " above " + fmt(tol_off));
}

void dispatch(const ExperimentConfig& c, const fs::path& out, Gates& g) {
  if (c.experiment == "kernel-verify") return run_kernel_verify(c, out, g);
  if (c.experiment == "hke-fit") return run_hke_fit(c, out, g);
  if (c.experiment == "exit-tails") return run_exit_tails(c, out, g);
  if (c.experiment == "confinement") return run_confinement(c, out, g);
  if (c.experiment == "local-time-moments")
    return run_local_time_moments(c, out, g);
  if (c.experiment == "tails") return run_tails(c, out, g);
  if (c.experiment == "garsia") return run_garsia(c, out, g);
  if (c.experiment == "lil-paths") return run_lil_paths(c, out, g);
  if (c.experiment == "lil-localtime") return run_lil_localtime(c, out, g);
  if (c.experiment == "lil-range") return run_lil_range(c, out, g);
  if (c.experiment == "integral-test") return run_integral_test(c, out, g);
  if (c.experiment == "resolvent-identity")
    return run_resolvent_identity(c, out, g);
  throw IoError("unknown experiment \"" + c.experiment + "\"");
}

}  // namespace

ResultRecord run_experiment(const ExperimentConfig& config) {
  bool known = false;
  for (const auto& info : experiment_registry())
    if (info.name == config.experiment) known = true;
  if (!known)
    throw IoError("unknown experiment \"" + config.experiment + "\"");

  const fs::path out = config.out_dir;
  fs::create_directories(out);
  DirLock lock(out);

  int threads = config.threads;
  if (threads <= 0) {
    if (const char* env = std::getenv("LIL_LAB_THREADS"); env && *env)
      threads = std::atoi(env);
  }
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#endif

  ResultRecord rec;
  rec.experiment = config.experiment;
  rec.config = config_to_json(config);
  rec.config_hash = config_hash(config);
  rec.family_hash = family_hash(config);
  rec.started_at = now_iso8601_utc();

  const auto t0 = std::chrono::steady_clock::now();
  Gates g;
  dispatch(config, out, g);
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  rec.metrics = std::move(g.metrics);
  rec.failures = std::move(g.failures);
  rec.pass = rec.failures.empty();

  std::ofstream rf(out / "results.json");
  if (!rf) throw IoError("cannot write " + (out / "results.json").string());
  rf << record_to_json(rec).dump(2) << '\n';
  return rec;
}

namespace {

std::string short_metric(const json& v) {
  if (v.is_number_float()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v.get<double>());
    return buf;
  }
  return v.dump();
}

}  // namespace

std::string report(const std::string& records_dir) {
  std::vector<ResultRecord> recs;
  if (fs::exists(records_dir)) {
    for (const auto& entry : fs::recursive_directory_iterator(records_dir)) {
      if (!entry.is_regular_file() ||
          entry.path().filename() != "results.json")
        continue;
      std::ifstream in(entry.path());
      json j;
      try {
        j = json::parse(in);
      } catch (const json::parse_error& e) {
        throw IoError("unreadable record " + entry.path().string() + ": " +
                      e.what());
      }
      recs.push_back(record_from_json(j));
    }
  }
  if (recs.empty()) return "no records under " + records_dir + "\n";

  // Determinism audit: one config hash must map to one metrics object.
  std::map<std::uint64_t, std::string> seen;
  for (const auto& r : recs) {
    const std::string m = r.metrics.dump();
    auto [it, fresh] = seen.emplace(r.config_hash, m);
    if (!fresh && it->second != m)
      throw IoError("records disagree for config " + hex16(r.config_hash) +
                    ": identical configs must produce identical metrics");
  }

  std::stable_sort(recs.begin(), recs.end(),
                   [](const ResultRecord& a, const ResultRecord& b) {
                     if (a.experiment != b.experiment)
                       return a.experiment < b.experiment;
                     if (a.family_hash != b.family_hash)
                       return a.family_hash < b.family_hash;
                     return a.config_hash < b.config_hash;
                   });

  std::ostringstream os;
  int passed = 0;
  for (std::size_t i = 0; i < recs.size();) {
    const std::string& exp = recs[i].experiment;
    os << "== " << exp << " ==\n";
    for (const auto& info : experiment_registry())
      if (info.name == exp) os << "   " << info.statement << "\n";
    while (i < recs.size() && recs[i].experiment == exp) {
      // one family = one config up to the seed
      const std::uint64_t fam = recs[i].family_hash;
      std::size_t j = i;
      while (j < recs.size() && recs[j].experiment == exp &&
             recs[j].family_hash == fam)
        ++j;
      if (j - i > 1)
        os << "  family " << hex16(fam) << " (" << (j - i)
           << " seed variants)\n";
      for (std::size_t k = i; k < j; ++k) {
        const auto& r = recs[k];
        passed += r.pass ? 1 : 0;
        os << "  " << (r.pass ? "PASS" : "FAIL") << "  config "
           << hex16(r.config_hash) << "  seed "
           << r.config.value("master_seed", 0ull) << "  ("
           << short_metric(json(r.wall_seconds)) << " s)\n";
        for (const auto& item : r.metrics.items())
          os << "        " << item.key() << " = " << short_metric(item.value())
             << "\n";
        for (const auto& f : r.failures) os << "        failed: " << f << "\n";
      }
      i = j;
    }
  }
  os << recs.size() << " records, " << passed << " passed, "
     << (recs.size() - static_cast<std::size_t>(passed)) << " failed\n";
  return os.str();
}

json replay_dump(const std::string& dump_file, double radius) {
  const PathDump dump = read_path_dump(dump_file);
  PathSample path;
  // The dump does not carry the process family; everything recomputed here
  // is a pathwise functional that does not need it.
  path.spec = ProcessSpec::stable(2.0, dump.positions[0]);
  path.grid = dump.grid;
  path.seed = dump.seed;
  path.positions = dump.positions;

  const ArrayXd sup = running_sup(path);
  const ExitTime exit = first_exit_time(path, radius);
  const double eps = 0.5 * std::sqrt(dump.grid.dt);
  const CellOccupancy occ = occupancy_of(path, eps);

  json j;
  j["file"] = dump_file;
  j["seed"] = dump.seed;
  j["n_steps"] = dump.grid.n_steps;
  j["dt"] = dump.grid.dt;
  j["horizon"] = dump.grid.horizon();
  j["start"] = dump.positions[0];
  j["final_position"] = dump.positions[dump.positions.size() - 1];
  j["running_sup"] = sup[sup.size() - 1];
  j["exit_radius"] = radius;
  j["exit_time"] = exit.time;
  j["exit_censored"] = exit.censored;
  j["bandwidth"] = eps;
  j["sup_local_time"] = occ.sup_local_time(dump.grid.dt);
  j["range"] = occ.range();
  j["cells_visited"] = occ.cells_visited();
  return j;
}

}  // namespace lil
