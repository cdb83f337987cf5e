#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "lil/errors.hpp"
#include "lil/harness.hpp"
#include "lil/process.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "simulation and verification lab for scaling laws of symmetric jump "
      "processes"};
  app.require_subcommand(1);

  std::string config_file;
  std::string out_dir;
  std::string records_dir;
  std::string dump_file;
  std::uint64_t seed = 0;
  std::int64_t n_paths = 0;
  int threads = 0;
  double radius = 1.0;

  auto* run = app.add_subcommand("run", "run one experiment from a JSON config");
  run->add_option("config", config_file, "config file")
      ->required()
      ->check(CLI::ExistingFile);
  auto* opt_seed = run->add_option("--seed", seed, "override master_seed");
  auto* opt_paths =
      run->add_option("--paths", n_paths, "override n_paths")
          ->check(CLI::PositiveNumber);
  auto* opt_threads =
      run->add_option("--threads", threads, "override the thread budget");
  auto* opt_out = run->add_option("--out", out_dir, "override out_dir");

  auto* rep =
      app.add_subcommand("report", "summarize every results.json under a directory");
  rep->add_option("dir", records_dir, "directory to scan")->required();

  std::uint64_t dump_seed = 1;
  std::int64_t dump_steps = 4096;
  std::string dump_out = "path.lilp";
  auto* dmp = app.add_subcommand(
      "dump", "simulate one path of a config's process and write a dump");
  dmp->add_option("config", config_file, "config file (process and dt are used)")
      ->required()
      ->check(CLI::ExistingFile);
  dmp->add_option("--seed", dump_seed, "path seed");
  dmp->add_option("--steps", dump_steps, "grid steps")->check(CLI::PositiveNumber);
  dmp->add_option("--out", dump_out, "output file");

  auto* repl =
      app.add_subcommand("replay", "recompute path functionals from a dump");
  repl->add_option("dump", dump_file, "path dump file")
      ->required()
      ->check(CLI::ExistingFile);
  repl->add_option("--radius", radius, "exit radius")->check(CLI::PositiveNumber);

  auto* list = app.add_subcommand("list", "list runnable experiments");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      std::ifstream in(config_file);
      if (!in) throw lil::IoError("cannot open " + config_file);
      lil::ExperimentConfig cfg = lil::config_from_json(lil::json::parse(in));
      if (opt_seed->count()) cfg.master_seed = seed;
      if (opt_paths->count()) cfg.n_paths = n_paths;
      if (opt_threads->count()) cfg.threads = threads;
      if (opt_out->count()) cfg.out_dir = out_dir;

      const lil::ResultRecord rec = lil::run_experiment(cfg);
      std::printf("%s  %s  (%.1f s, config %016llx)\n",
                  rec.pass ? "PASS" : "FAIL", rec.experiment.c_str(),
                  rec.wall_seconds,
                  static_cast<unsigned long long>(rec.config_hash));
      for (const auto& item : rec.metrics.items())
        std::cout << "  " << item.key() << " = " << item.value().dump()
                  << "\n";
      for (const auto& f : rec.failures)
        std::cout << "  failed: " << f << "\n";
      std::cout << "results in " << cfg.out_dir << "/results.json\n";
      return rec.pass ? 0 : 1;
    }
    if (rep->parsed()) {
      std::cout << lil::report(records_dir);
      return 0;
    }
    if (dmp->parsed()) {
      std::ifstream in(config_file);
      if (!in) throw lil::IoError("cannot open " + config_file);
      const lil::ExperimentConfig cfg =
          lil::config_from_json(lil::json::parse(in));
      const lil::PathSample path = lil::simulate_path(
          cfg.spec, lil::make_grid(cfg.dt, dump_steps), dump_seed);
      lil::write_path_dump(path, dump_out);
      std::printf("wrote %s (%lld steps, dt %g, seed %llu)\n", dump_out.c_str(),
                  static_cast<long long>(dump_steps), cfg.dt,
                  static_cast<unsigned long long>(dump_seed));
      return 0;
    }
    if (repl->parsed()) {
      std::cout << lil::replay_dump(dump_file, radius).dump(2) << "\n";
      return 0;
    }
    if (list->parsed()) {
      for (const auto& info : lil::experiment_registry())
        std::printf("%-20s %s\n", info.name.c_str(), info.statement.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
