#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lil/lil_experiments.hpp"
#include "lil/process.hpp"
#include "lil/scale.hpp"

namespace lil {

using nlohmann::json;

// JSON forms used by config files. Field names are part of the config
// schema and therefore of the hash, so they never change silently.
json scale_to_json(const ScaleFunction& f);
ScaleFunction scale_from_json(const json& j);
json process_to_json(const ProcessSpec& spec);
ProcessSpec process_from_json(const json& j);

// One experiment invocation. Everything that can influence a metric lives
// here; anything absent from the config file takes the default below and is
// materialized into the canonical form, so two files meaning the same run
// hash identically.
struct ExperimentConfig {
  std::string experiment;
  ProcessSpec spec = ProcessSpec::stable(1.5);
  // Empty means the natural scales of the process.
  std::optional<ScaleFunction> volume;
  std::optional<ScaleFunction> time_scale;
  double dt = 0.5;
  DyadicLadder ladder{16, 2, 12};
  std::int64_t n_paths = 1000;
  std::uint64_t master_seed = 1;
  std::string out_dir = "out";
  int threads = 0;  // 0: LIL_LAB_THREADS if set, otherwise the OpenMP default
  json params = json::object();  // experiment-specific knobs

  NaturalScales scales() const;
};

ExperimentConfig config_from_json(const json& j);
json config_to_json(const ExperimentConfig& config);  // canonical form

std::uint64_t fnv1a64(std::string_view bytes);
// Hash of the canonical config with out_dir and threads removed: those are
// execution details that must not change any metric, so runs differing only
// there share a hash and the report's determinism check covers them. The
// family hash additionally zeroes the seed, so seed variants of one
// experiment can be grouped in reports.
std::uint64_t config_hash(const ExperimentConfig& config);
std::uint64_t family_hash(const ExperimentConfig& config);

struct ResultRecord {
  std::string experiment;
  std::uint64_t config_hash = 0;
  std::uint64_t family_hash = 0;
  json config;   // canonical
  json metrics;  // flat name -> value, deterministically ordered
  bool pass = false;
  std::vector<std::string> failures;
  std::string started_at;  // wall-clock metadata, excluded from determinism
  double wall_seconds = 0;
};
json record_to_json(const ResultRecord& record);
ResultRecord record_from_json(const json& j);

// The registry names every runnable experiment and states, in plain
// mathematical language, what it exercises.
struct ExperimentInfo {
  std::string name;
  std::string statement;
};
const std::vector<ExperimentInfo>& experiment_registry();

// Runs one experiment under the output-directory lock: applies the thread
// budget, dispatches by name, writes results.json plus one CSV per metric
// family into out_dir, and returns the record. Tolerances behind pass/fail
// are pinned next to each runner.
ResultRecord run_experiment(const ExperimentConfig& config);

// Consolidated text report over every results.json found below records_dir
// (grouped by experiment, seed variants flagged). Two records with one
// config hash but different metrics are a corruption of the determinism
// contract and raise IoError.
std::string report(const std::string& records_dir);

// Recomputes summary functionals of a dumped path: running sup, occupation
// profile coarse stats, first exit time past the given radius.
json replay_dump(const std::string& dump_file, double radius);

}  // namespace lil
