// Command-line front end: synth, fit-safety, train, evaluate, benchmark, dump-config.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "safemes/config.hpp"
#include "safemes/harness.hpp"
#include "safemes/safety.hpp"
#include "safemes/timeseries.hpp"

namespace fs = std::filesystem;
using namespace safemes;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> budget;
  std::string shield;
  std::string agent;
  std::string preset;
  std::string out = "out";
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "INI config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "run seed");
  cmd->add_option("--budget", f.budget, "training steps");
  cmd->add_option("--shield", f.shield, "none | safe_fallback | give_safe")
      ->check(CLI::IsMember({"none", "safe_fallback", "give_safe"}));
  cmd->add_option("--agent", f.agent, "td3 | random")->check(CLI::IsMember({"td3", "random"}));
  cmd->add_option("--preset", f.preset, "unsafe | safefallback | givesafe")
      ->check(CLI::IsMember({"unsafe", "safefallback", "givesafe"}));
  cmd->add_option("--out", f.out, "output directory or file");
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig cfg = f.config.empty() ? default_run_config() : load_config(f.config);
  if (f.seed) cfg.harness.seed = *f.seed;
  if (f.budget) cfg.harness.budget = *f.budget;
  if (!f.agent.empty()) cfg.agent = parse_agent(f.agent);
  if (!f.shield.empty()) {
    cfg.shield = parse_shield(f.shield);
    if (f.preset.empty()) cfg.hyper = Td3Hyper::preset(default_preset(cfg.shield));
  }
  if (!f.preset.empty()) cfg.hyper = Td3Hyper::preset(f.preset);
  cfg.validate();
  return cfg;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string metrics_csv(const EpisodeMetrics& m) {
  std::string s =
      "objective,objective_per_step,tolerance,energy_cost_eur,comfort_loss_mwh,n_steps,n_fallbacks,n_retries,"
      "n_unsafe_executed\n";
  s += format_double(m.objective) + ',' + format_double(m.objective_per_step) + ',' + format_double(m.tolerance) +
       ',' + format_double(m.energy_cost) + ',' + format_double(m.comfort_loss) + ',' + std::to_string(m.n_steps) +
       ',' + std::to_string(m.n_fallbacks) + ',' + std::to_string(m.n_retries) + ',' +
       std::to_string(m.n_unsafe_executed) + '\n';
  return s;
}

std::string runtime_line(const RuntimeStats& r) {
  return "min_s,mean_s,std_s,max_s,total_s\n" + format_double(r.min) + ',' + format_double(r.mean) + ',' +
         format_double(r.std) + ',' + format_double(r.max) + ',' + format_double(r.total) + '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shielded reinforcement learning for a multi-energy plant"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace | debug | info | warn | error | off");

  CommonFlags synth_f, fit_f, train_f, eval_f, bench_f, dump_f;

  auto* synth = app.add_subcommand("synth", "write a synthetic exogenous series as CSV");
  add_common(synth, synth_f);
  std::size_t synth_steps = 35040;
  synth->add_option("--steps", synth_steps, "number of 15-minute rows");

  auto* fit = app.add_subcommand("fit-safety", "collect an operation log, fit and save the surrogates");
  add_common(fit, fit_f);

  auto* train = app.add_subcommand("train", "train one cell");
  add_common(train, train_f);
  std::string resume;
  std::int64_t stop_at = -1;
  train->add_option("--resume", resume, "checkpoint to continue from")->check(CLI::ExistingFile);
  train->add_option("--stop-at", stop_at, "pause at this step and write the checkpoint");

  auto* eval = app.add_subcommand("evaluate", "evaluate a checkpoint on the evaluation week");
  add_common(eval, eval_f);
  std::string checkpoint;
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);

  auto* bench = app.add_subcommand("benchmark", "run the shield x agent matrix");
  add_common(bench, bench_f);
  std::optional<int> runs, workers;
  std::vector<std::string> cell_names;
  bench->add_option("--runs", runs, "seeded runs per cell");
  bench->add_option("--workers", workers, "worker threads (0: hardware concurrency)");
  bench->add_option("--cells", cell_names, "subset of cells, e.g. safe_fallback-random");

  auto* dump = app.add_subcommand("dump-config", "print the effective configuration");
  add_common(dump, dump_f);

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*synth) {
      const RunConfig cfg = resolve(synth_f);
      const fs::path out = synth_f.out == "out" ? fs::path("out/series.csv") : fs::path(synth_f.out);
      write_series(synth_profiles(cfg.harness.data_seed, synth_steps), out);
      spdlog::info("wrote {} rows to {}", synth_steps, out.string());
    } else if (*fit) {
      const RunConfig cfg = resolve(fit_f);
      const fs::path dir = fit_f.out;
      fs::create_directories(dir);
      const auto series = cfg.harness.series_path.empty() ? synth_profiles(cfg.harness.data_seed, cfg.harness.series_steps)
                                                          : load_series(cfg.harness.series_path);
      const OperationLog log = collect_log(cfg.plant, series,
                                           noisy_fallback_policy(cfg.plant, cfg.safety.log_noise_std),
                                           cfg.safety.log_steps, cfg.safety.log_seed);
      std::ostringstream log_text;
      write_log(log, log_text);
      write_file(dir / "operation_log.csv", log_text.str());
      const SurrogateSet set = fit_surrogates(log, cfg.safety.holdout_fraction, cfg.plant, cfg.safety.forest);
      save_surrogates(set, dir / "surrogates.json");
      std::string table = "asset,r2,mae_mw,nmae\n";
      for (const auto& [asset, model] : set) {
        const auto& m = model.fit_metrics();
        table += std::string(asset_name(asset)) + ',' + format_double(m.r2) + ',' + format_double(m.mae) + ',' +
                 format_double(m.nmae) + '\n';
      }
      write_file(dir / "fit_metrics.csv", table);
      std::cout << table;
    } else if (*train) {
      RunConfig cfg = resolve(train_f);
      const fs::path dir = train_f.out;
      auto wb = build_workbench(cfg);
      Trainer trainer = resume.empty() ? Trainer(cfg, wb) : Trainer::load(resume, cfg, wb);
      const std::int64_t until = stop_at >= 0 ? std::min(stop_at, cfg.harness.budget) : cfg.harness.budget;
      trainer.run(until);
      trainer.save(dir / "checkpoint.bin");
      std::ostringstream cfg_text;
      write_config(trainer.config(), cfg_text);
      write_file(dir / "config.ini", cfg_text.str());
      write_curves({trainer.curve()}, dir, cfg.harness.plots);
      const auto& c = trainer.counters();
      spdlog::info("step {}: executed {}, unsafe executed {}, fallbacks {}, retries {}, episodes {}", trainer.step(),
                   c.executed, c.unsafe_executed, c.fallbacks, c.retries, c.episodes);
      const auto& last = trainer.evaluations().back();
      std::cout << metrics_csv(last);
    } else if (*eval) {
      RunConfig cfg = resolve(eval_f);
      auto wb = build_workbench(cfg);
      const Trainer trainer = Trainer::load(checkpoint, cfg, wb);
      const EpisodeMetrics m = trainer.evaluate_now();
      const fs::path dir = eval_f.out;
      write_file(dir / "metrics.csv", metrics_csv(m));
      write_file(dir / "runtime.csv", runtime_line(m.step_runtime));
      std::cout << metrics_csv(m);
    } else if (*bench) {
      RunConfig cfg = resolve(bench_f);
      if (runs) cfg.harness.n_runs = *runs;
      if (workers) cfg.harness.workers = *workers;
      cfg.validate();
      std::vector<CellSpec> cells;
      for (const CellSpec& c : default_cells()) {
        if (cell_names.empty() || std::find(cell_names.begin(), cell_names.end(), c.name()) != cell_names.end())
          cells.push_back(c);
      }
      if (cells.empty()) throw Error("no cell matches --cells");
      auto wb = build_workbench(cfg);
      const auto results = benchmark(cfg, cells, wb);
      write_benchmark(results, bench_f.out, cfg.harness.plots);
      std::ifstream table(fs::path(bench_f.out) / "benchmark.csv");
      std::cout << table.rdbuf();
    } else if (*dump) {
      write_config(resolve(dump_f), std::cout);
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
