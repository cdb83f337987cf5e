#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "doctest.h"
#include "lil/errors.hpp"
#include "lil/harness.hpp"
#include "lil/occupation.hpp"
#include "lil/process.hpp"

using namespace lil;
namespace fs = std::filesystem;

namespace {

// Per-process scratch root, wiped at first use so records from an earlier
// execution can never leak into this one's report scans.
const fs::path& test_root() {
  static const fs::path root = [] {
    const fs::path p =
        fs::temp_directory_path() /
        ("lil_harness_test_" + std::to_string(static_cast<long>(::getpid())));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

fs::path fresh_dir(const std::string& leaf) {
  const fs::path p = test_root() / leaf;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json minimal_config(const fs::path& out) {
  json j;
  j["experiment"] = "exit-tails";
  j["n_paths"] = 2000;
  j["out_dir"] = out.string();
  return j;
}

}  // namespace

TEST_CASE("scale serializers round trip every kind") {
  const std::vector<ScaleFunction> fns = {
      ScaleFunction::power(0.7),
      ScaleFunction::stable_mixture({{1.0, 0.4}, {1.7, 0.6}}),
      ScaleFunction::inverse_mixture({{1.0, 0.4}, {1.7, 0.6}}),
      ScaleFunction::tabulated({{0.5, 0.25}, {2.0, 4.0}}),
  };
  for (const auto& f : fns) {
    const json j = scale_to_json(f);
    const ScaleFunction g = scale_from_json(j);
    CHECK(scale_to_json(g) == j);
    CHECK(g(1.0) == f(1.0));
  }
  CHECK_THROWS_AS(scale_from_json(json{{"kind", "banana"}}), IoError);
  CHECK_THROWS_AS(
      scale_from_json(json{{"kind", "power"}, {"exponent", 1.0}, {"zzz", 1}}),
      IoError);
}

TEST_CASE("process serializers round trip every kind") {
  const std::vector<ProcessSpec> specs = {
      ProcessSpec::stable(1.3, 0.5),
      ProcessSpec::stable_mixture({{1.0, 0.5}, {1.8, 0.5}}),
      ProcessSpec::subordinated_bm(0.8),
  };
  for (const auto& s : specs) {
    const json j = process_to_json(s);
    const ProcessSpec t = process_from_json(j);
    CHECK(process_to_json(t) == j);
    CHECK(t.symbol(1.3) == doctest::Approx(s.symbol(1.3)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(process_from_json(json{{"kind", "banana"}}), IoError);
  CHECK_THROWS_AS(
      process_from_json(json{{"kind", "stable"}, {"beta", 1.5}, {"zzz", 1}}),
      IoError);
}

TEST_CASE("configs canonicalize to a fixed point with defaults materialized") {
  json j;
  j["experiment"] = "exit-tails";
  const ExperimentConfig c = config_from_json(j);
  const json canon = config_to_json(c);
  for (const char* key :
       {"experiment", "process", "volume", "time_scale", "dt", "ladder",
        "n_paths", "master_seed", "out_dir", "threads", "params"})
    CHECK(canon.contains(key));
  // reparse of the canonical form reproduces it byte for byte
  const json again = config_to_json(config_from_json(canon));
  CHECK(again.dump() == canon.dump());
  // the natural scales were resolved into explicit functions
  CHECK(!canon["volume"].is_null());
  CHECK(!canon["time_scale"].is_null());
}

TEST_CASE("config hash ignores execution details and resolves scale spellings") {
  json j;
  j["experiment"] = "exit-tails";
  const ExperimentConfig base = config_from_json(j);

  json moved = j;
  moved["out_dir"] = "elsewhere/deep";
  moved["threads"] = 7;
  CHECK(config_hash(config_from_json(moved)) == config_hash(base));

  json slower = j;
  slower["dt"] = 0.25;
  CHECK(config_hash(config_from_json(slower)) != config_hash(base));

  json tweaked = j;
  tweaked["params"] = {{"radius", 2.0}};
  CHECK(config_hash(config_from_json(tweaked)) != config_hash(base));

  // spelling the natural scales out explicitly is the same run
  const json canon = config_to_json(base);
  json spelled = j;
  spelled["volume"] = canon["volume"];
  spelled["time_scale"] = canon["time_scale"];
  CHECK(config_hash(config_from_json(spelled)) == config_hash(base));

  json reseeded = j;
  reseeded["master_seed"] = 99;
  CHECK(config_hash(config_from_json(reseeded)) != config_hash(base));
  CHECK(family_hash(config_from_json(reseeded)) == family_hash(base));
}

TEST_CASE("unknown keys anywhere in a config are rejected") {
  json j;
  j["experiment"] = "exit-tails";
  j["walrus"] = 1;
  CHECK_THROWS_AS(config_from_json(j), IoError);

  json l;
  l["experiment"] = "exit-tails";
  l["ladder"] = {{"t0", 16.0}, {"rung_count", 4}};
  CHECK_THROWS_AS(config_from_json(l), IoError);
}

TEST_CASE("unknown experiments and parameters fail before any work") {
  json j = minimal_config(fresh_dir("bad"));
  j["experiment"] = "no-such-experiment";
  CHECK_THROWS_AS(run_experiment(config_from_json(j)), IoError);

  const fs::path out = fresh_dir("badparam");
  json k = minimal_config(out);
  k["params"] = {{"bogus_knob", 1.0}};
  CHECK_THROWS_AS(run_experiment(config_from_json(k)), IoError);
  CHECK(!fs::exists(out / ".lil_lock"));  // the lock is released on throw
}

TEST_CASE("records round trip through json") {
  ResultRecord r;
  r.experiment = "exit-tails";
  r.config_hash = 0x0123456789abcdefull;
  r.family_hash = 0xfedcba9876543210ull;
  r.config = {{"experiment", "exit-tails"}};
  r.metrics = {{"slope", 1.05}, {"n", 3}};
  r.pass = false;
  r.failures = {"slope out of band"};
  r.started_at = "2026-01-01T00:00:00Z";
  r.wall_seconds = 1.25;
  const ResultRecord s = record_from_json(record_to_json(r));
  CHECK(record_to_json(s).dump() == record_to_json(r).dump());
  CHECK(s.config_hash == r.config_hash);
  CHECK(s.family_hash == r.family_hash);
}

TEST_CASE("the registry names each experiment once with a statement") {
  const auto& reg = experiment_registry();
  CHECK(reg.size() >= 10);
  std::set<std::string> names;
  for (const auto& info : reg) {
    CHECK(!info.statement.empty());
    CHECK(names.insert(info.name).second);
  }
  CHECK(names.count("exit-tails") == 1);
  CHECK(names.count("kernel-verify") == 1);
}

TEST_CASE("a run writes its record, releases the lock, and reproduces") {
  const fs::path out_a = fresh_dir("run_a");
  const ResultRecord ra = run_experiment(config_from_json(minimal_config(out_a)));
  CHECK(fs::exists(out_a / "results.json"));
  CHECK(!fs::exists(out_a / ".lil_lock"));
  CHECK(fs::exists(out_a / "exit_tails.csv"));

  std::ifstream in(out_a / "results.json");
  json stored;
  in >> stored;
  const ResultRecord parsed = record_from_json(stored);
  CHECK(parsed.metrics.dump() == ra.metrics.dump());
  CHECK(parsed.config_hash == config_hash(config_from_json(minimal_config(out_a))));

  // same config, different out_dir and thread budget: identical metrics
  const fs::path out_b = fresh_dir("run_b");
  json jb = minimal_config(out_b);
  jb["threads"] = 4;
  const ResultRecord rb = run_experiment(config_from_json(jb));
  CHECK(rb.config_hash == ra.config_hash);
  CHECK(rb.metrics.dump() == ra.metrics.dump());
  CHECK(rb.failures == ra.failures);
}

TEST_CASE("a foreign lock blocks the run and is left untouched") {
  const fs::path out = fresh_dir("locked");
  { std::ofstream lf(out / ".lil_lock"); lf << "12345\n"; }
  CHECK_THROWS_AS(run_experiment(config_from_json(minimal_config(out))), IoError);
  CHECK(fs::exists(out / ".lil_lock"));
  CHECK(!fs::exists(out / "results.json"));
}

TEST_CASE("reports group seed variants and refuse contradictory records") {
  const fs::path root = test_root();
  const fs::path out_c = fresh_dir("run_c");
  json jc = minimal_config(out_c);
  jc["master_seed"] = 2;
  run_experiment(config_from_json(jc));

  // run_a / run_b / run_c live under root from the earlier cases
  const std::string text = report(root.string());
  CHECK(text.find("exit-tails") != std::string::npos);
  CHECK(text.find("seed variants") != std::string::npos);
  CHECK(text.find("records") != std::string::npos);

  // a tampered copy of one record contradicts its twin
  const fs::path badroot = fresh_dir("conflict");
  fs::create_directories(badroot / "x");
  fs::create_directories(badroot / "y");
  std::ifstream in(out_c / "results.json");
  json rec;
  in >> rec;
  { std::ofstream a(badroot / "x" / "results.json"); a << rec.dump(2); }
  rec["metrics"]["slope"] = 42.0;
  { std::ofstream b(badroot / "y" / "results.json"); b << rec.dump(2); }
  CHECK_THROWS_AS(report((badroot).string()), IoError);
}

TEST_CASE("replay recomputes the summary functionals of a dump") {
  const auto spec = ProcessSpec::stable(1.5);
  const PathSample path = simulate_path(spec, make_grid(0.01, 2000), 7);
  const fs::path file =
      test_root() / "path7.lilp";
  fs::create_directories(file.parent_path());
  write_path_dump(path, file.string());

  const json j = replay_dump(file.string(), 0.5);
  CHECK(j["n_steps"].get<std::int64_t>() == 2000);
  CHECK(j["dt"].get<double>() == 0.01);
  CHECK(j["seed"].get<std::uint64_t>() == 7);
  CHECK(j["start"].get<double>() == path.positions[0]);
  CHECK(j["final_position"].get<double>() ==
        path.positions[path.positions.size() - 1]);

  const ArrayXd sup = running_sup(path);
  CHECK(j["running_sup"].get<double>() == sup[sup.size() - 1]);

  const ExitTime exit = first_exit_time(path, 0.5);
  CHECK(j["exit_time"].get<double>() == exit.time);
  CHECK(j["exit_censored"].get<bool>() == exit.censored);

  const double eps = j["bandwidth"].get<double>();
  CHECK(eps == 0.5 * std::sqrt(0.01));
  const CellOccupancy occ = occupancy_of(path, eps);
  CHECK(j["sup_local_time"].get<double>() == occ.sup_local_time(0.01));
  CHECK(j["range"].get<double>() == occ.range());
  CHECK(j["cells_visited"].get<std::int64_t>() == occ.cells_visited());
}
