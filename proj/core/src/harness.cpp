#include "safemes/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

#include "safemes/fallback.hpp"

namespace safemes {

RuntimeStats runtime_report(std::span<const double> seconds) {
  if (seconds.empty()) throw Error("runtime_report: no samples");
  RuntimeStats r;
  r.min = *std::min_element(seconds.begin(), seconds.end());
  r.max = *std::max_element(seconds.begin(), seconds.end());
  for (double s : seconds) r.total += s;
  r.mean = r.total / static_cast<double>(seconds.size());
  double ss = 0.0;
  for (double s : seconds) ss += (s - r.mean) * (s - r.mean);
  r.std = std::sqrt(ss / static_cast<double>(seconds.size()));
  return r;
}

std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.empty()) throw Error("mean_std: no values");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

std::shared_ptr<const Workbench> build_workbench(const RunConfig& cfg) {
  cfg.validate();
  const auto& h = cfg.harness;
  auto wb = std::make_shared<Workbench>();
  wb->plant = cfg.plant;

  auto train = h.series_path.empty() ? synth_profiles(h.data_seed, h.series_steps) : load_series(h.series_path);
  // The evaluation week comes from its own stream so it is never trained on.
  auto eval_source = h.eval_series_path.empty()
                         ? synth_profiles(derive_seed(h.data_seed, 0xE7A1), h.eval_start + h.eval_len)
                         : load_series(h.eval_series_path);
  wb->eval_series = std::make_shared<const ExogenousSeries>(window(eval_source, h.eval_start, h.eval_len));
  wb->norms = ObservationNorms::from_series(train);

  SurrogateSet surrogates;
  if (cfg.safety.surrogates_path.empty()) {
    const OperationLog log = collect_log(cfg.plant, train, noisy_fallback_policy(cfg.plant, cfg.safety.log_noise_std),
                                         cfg.safety.log_steps, cfg.safety.log_seed);
    surrogates = fit_surrogates(log, cfg.safety.holdout_fraction, cfg.plant, cfg.safety.forest);
  } else {
    surrogates = load_surrogates(cfg.safety.surrogates_path);
  }
  const double q_tol = tolerance_from_series(train, cfg.safety.q_tol_fraction);
  wb->safety = std::make_shared<const SafetyLayer>(std::move(surrogates), q_tol);
  wb->train_series = std::make_shared<const ExogenousSeries>(std::move(train));
  return wb;
}

EvalPolicy td3_eval_policy(const Mlp& actor, double retry_sigma, int uniform_after) {
  return [&actor, retry_sigma, uniform_after](const Observation& s, int attempt, Rng& rng) {
    if (uniform_after > 0 && attempt >= uniform_after) return random_action(rng);
    return select_action(actor, s, attempt == 0 ? 0.0 : retry_sigma, rng);
  };
}

EvalPolicy random_eval_policy() {
  return [](const Observation&, int, Rng& rng) { return random_action(rng); };
}

EpisodeMetrics evaluate(const EvalPolicy& policy, const Workbench& wb, const ObservationNorms& norms,
                        ShieldKind shield, const ShieldConfig& shield_cfg, const RewardParams& reward,
                        std::uint64_t eval_seed) {
  using Clock = std::chrono::steady_clock;
  const std::size_t n = wb.eval_series->size();
  if (n != static_cast<std::size_t>(kStepsPerWeek)) {
    spdlog::warn("evaluation series has {} steps, expected {}", n, kStepsPerWeek);
  }
  MesEnv env(wb.eval_series, wb.plant, norms, reward);
  const SafetyLayer& layer = *wb.safety;
  Rng rng(eval_seed);

  EpisodeMetrics m;
  std::vector<ToleranceSample> trace;
  trace.reserve(n);
  m.step_seconds.reserve(n);

  for (std::size_t i = 0; i < n; ++i) {
    const Observation s = env.observe();
    const SafetyFeatures f = env.safety_features();
    const double demand = env.record().thermal_demand_mw;

    int attempt = 0;
    Action executed;
    MesEnv::StepInfo info;
    const ProposeFn propose = [&] { return policy(s, attempt++, rng); };
    const CheckFn check = [&](const Action& a) { return layer.check(a, f, demand).feasible; };
    const EnvStepFn env_step = [&](const Action& a) {
      executed = a;
      info = env.step(a);
      return info.transition;
    };
    const FallbackFn fallback = [&] { return fallback_policy(demand, wb.plant).action; };

    const auto t0 = Clock::now();
    ShieldOutcome out;
    switch (shield) {
      case ShieldKind::kNone: out = unshielded_step(s, propose, env_step); break;
      case ShieldKind::kSafeFallback:
        out = safe_fallback_step(s, propose, env_step, check, fallback, shield_cfg);
        break;
      case ShieldKind::kGiveSafe: out = give_safe_step(s, propose, env_step, check, shield_cfg); break;
    }
    const auto t1 = Clock::now();
    m.step_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());

    if (!check(executed)) ++m.n_unsafe_executed;
    if (out.fallback_used) ++m.n_fallbacks;
    if (shield == ShieldKind::kGiveSafe) m.n_retries += out.rejections;

    m.objective += info.transition.reward;
    m.sum_l_cost += info.terms.l_cost_eur;
    m.sum_l_comfort += info.terms.l_comfort_w;
    trace.push_back({info.outputs.thermal_production(), info.exo.thermal_demand_mw});
  }

  m.n_steps = static_cast<std::int64_t>(n);
  m.objective_per_step = m.objective / static_cast<double>(n);
  m.tolerance = episode_tolerance(trace);
  m.energy_cost = m.sum_l_cost;
  m.comfort_loss = m.sum_l_comfort / 1e6 * kStepHours;
  m.step_runtime = runtime_report(m.step_seconds);
  return m;
}

Trainer::Trainer(const RunConfig& cfg, std::shared_ptr<const Workbench> wb)
    : cfg_(cfg),
      wb_(std::move(wb)),
      norms_(wb_ ? wb_->norms : ObservationNorms{}),
      env_(wb_ ? wb_->train_series : nullptr, wb_ ? wb_->plant : PlantConfig{}, norms_, cfg.harness.reward),
      agent_(cfg.hyper, derive_seed(cfg.harness.seed, 1)) {
  cfg_.validate();
  if (cfg_.shield == ShieldKind::kGiveSafe && cfg_.agent == AgentKind::kTd3 && cfg_.hyper.noise_std == 0.0) {
    spdlog::warn("give_safe with zero exploration noise: the retry loop may exhaust");
  }
}

EpisodeMetrics Trainer::evaluate_now() const {
  const EvalPolicy policy = cfg_.agent == AgentKind::kRandom ? random_eval_policy()
                                                             : td3_eval_policy(agent_.actor(), cfg_.hyper.noise_std,
                                                                               cfg_.hyper.uniform_retry_after);
  return evaluate(policy, *wb_, norms_, cfg_.shield, cfg_.shield_cfg, cfg_.harness.reward,
                  derive_seed(cfg_.harness.seed, 2));
}

void Trainer::record_evaluation() {
  // A random agent does not learn; its evaluation never changes.
  EpisodeMetrics m = (cfg_.agent == AgentKind::kRandom && !evaluations_.empty()) ? evaluations_.front()
                                                                                 : evaluate_now();
  curve_.push_back({step_, m.objective, m.tolerance});
  evaluations_.push_back(std::move(m));
}

void Trainer::run(std::int64_t until_step) {
  if (curve_.empty()) record_evaluation();
  while (step_ < until_step) {
    if (cfg_.agent == AgentKind::kTd3) train_step();
    ++step_;
    if (step_ % cfg_.harness.eval_interval == 0 || step_ == cfg_.harness.budget) record_evaluation();
  }
}

void Trainer::train_step() {
  const Observation s = env_.observe();
  const SafetyFeatures f = env_.safety_features();
  const double demand = env_.record().thermal_demand_mw;
  const SafetyLayer& layer = *wb_->safety;
  const bool warm = step_ < cfg_.hyper.warmup_steps;

  const int uniform_after = cfg_.hyper.uniform_retry_after;
  int attempt = 0;
  const ProposeFn propose = [&] {
    const bool uniform = warm || (uniform_after > 0 && attempt >= uniform_after);
    ++attempt;
    return uniform ? random_action(agent_.rng()) : agent_.explore_action(s);
  };
  const CheckFn check = [&](const Action& a) { return layer.check(a, f, demand).feasible; };
  const EnvStepFn env_step = [&](const Action& a) {
    // Audit: the plant counts every executed action that fails the check.
    if (!check(a)) ++counters_.unsafe_executed;
    ++counters_.executed;
    return env_.step(a).transition;
  };
  const FallbackFn fallback = [&] { return fallback_policy(demand, wb_->plant).action; };

  ShieldOutcome out;
  switch (cfg_.shield) {
    case ShieldKind::kNone:
      out = unshielded_step(s, propose, env_step);
      agent_.store(out.executed);
      break;
    case ShieldKind::kSafeFallback:
      out = safe_fallback_step(s, propose, env_step, check, fallback, cfg_.shield_cfg);
      agent_.store(out.executed);
      for (const auto& t : out.synthetic) agent_.store(t);
      break;
    case ShieldKind::kGiveSafe:
      out = give_safe_step(s, propose, env_step, check, cfg_.shield_cfg);
      for (const auto& t : out.synthetic) agent_.store(t);
      agent_.store(out.executed);
      break;
  }
  if (out.fallback_used) ++counters_.fallbacks;
  if (cfg_.shield == ShieldKind::kGiveSafe) counters_.retries += out.rejections;
  counters_.synthetic += static_cast<std::int64_t>(out.synthetic.size());
  if (out.executed.done) ++counters_.episodes;

  const std::int64_t t = step_ + 1;
  const auto& h = cfg_.hyper;
  if (t > h.warmup_steps && t % h.train_freq == 0 && agent_.ready_to_train()) {
    agent_.update(h.gradient_steps);
    counters_.gradient_steps += h.gradient_steps;
  }
}

namespace {

constexpr char kCheckpointMagic[8] = {'S', 'M', 'E', 'S', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

void write_metrics(BinaryWriter& w, const EpisodeMetrics& m) {
  for (double v : {m.objective, m.objective_per_step, m.tolerance, m.energy_cost, m.comfort_loss, m.sum_l_cost,
                   m.sum_l_comfort}) {
    w.write(v);
  }
  for (std::int64_t v : {m.n_steps, m.n_fallbacks, m.n_retries, m.n_unsafe_executed}) w.write(v);
  w.write(m.step_runtime);
  w.write_pod_vector(m.step_seconds);
}

EpisodeMetrics read_metrics(BinaryReader& r) {
  EpisodeMetrics m;
  for (double* v : {&m.objective, &m.objective_per_step, &m.tolerance, &m.energy_cost, &m.comfort_loss,
                    &m.sum_l_cost, &m.sum_l_comfort}) {
    *v = r.read<double>();
  }
  for (std::int64_t* v : {&m.n_steps, &m.n_fallbacks, &m.n_retries, &m.n_unsafe_executed}) {
    *v = r.read<std::int64_t>();
  }
  m.step_runtime = r.read<RuntimeStats>();
  m.step_seconds = r.read_pod_vector<double>();
  return m;
}

}  // namespace

void Trainer::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint " + tmp.string());
    BinaryWriter w(out);
    w.write(kCheckpointMagic);
    w.write(kCheckpointVersion);
    w.write(static_cast<std::uint32_t>(cfg_.shield));
    w.write(static_cast<std::uint32_t>(cfg_.agent));
    w.write(cfg_.harness.seed);
    w.write(step_);
    w.write(norms_);
    w.write(static_cast<std::uint64_t>(env_.cursor()));
    w.write(env_.state());
    w.write(counters_);
    w.write_pod_vector(curve_);
    w.write<std::uint64_t>(evaluations_.size());
    for (const auto& m : evaluations_) write_metrics(w, m);
    agent_.save(w);
    if (!w.good()) throw Error("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Trainer Trainer::load(const std::filesystem::path& path, RunConfig cfg, std::shared_ptr<const Workbench> wb) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  BinaryReader r(in);
  const auto magic = r.read<std::array<char, 8>>();
  if (!std::equal(magic.begin(), magic.end(), kCheckpointMagic)) throw Error("not a checkpoint: " + path.string());
  if (r.read<std::uint32_t>() != kCheckpointVersion) throw Error("unsupported checkpoint version");
  const auto shield = r.read<std::uint32_t>();
  const auto agent = r.read<std::uint32_t>();
  if (shield > 2 || agent > 1) throw Error("checkpoint header is corrupt");
  cfg.shield = static_cast<ShieldKind>(shield);
  cfg.agent = static_cast<AgentKind>(agent);
  cfg.harness.seed = r.read<std::uint64_t>();
  const auto step = r.read<std::int64_t>();
  const auto norms = r.read<ObservationNorms>();
  norms.validate();
  const auto cursor = r.read<std::uint64_t>();
  const auto state = r.read<PlantState>();
  const auto counters = r.read<TrainCounters>();
  auto curve = r.read_pod_vector<CurvePoint>();
  const auto n_evals = r.read<std::uint64_t>();
  if (n_evals != curve.size()) throw Error("checkpoint curve and evaluations disagree");
  std::vector<EpisodeMetrics> evals;
  for (std::uint64_t i = 0; i < n_evals; ++i) evals.push_back(read_metrics(r));
  Td3Agent loaded = Td3Agent::load(r);
  cfg.hyper = loaded.hyper();

  Trainer t(cfg, wb);
  t.step_ = step;
  t.norms_ = norms;
  t.env_ = MesEnv(wb->train_series, wb->plant, norms, cfg.harness.reward);
  t.env_.restore(static_cast<std::size_t>(cursor), state);
  t.counters_ = counters;
  t.curve_ = std::move(curve);
  t.evaluations_ = std::move(evals);
  t.agent_ = std::move(loaded);
  return t;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

struct CurveStats {
  std::vector<double> steps, obj_mean, obj_std, tol_mean, tol_std;
};

CurveStats curve_stats(const std::vector<std::vector<CurvePoint>>& runs) {
  if (runs.empty()) throw Error("no runs to summarize");
  CurveStats cs;
  const std::size_t n = runs.front().size();
  for (const auto& r : runs) {
    if (r.size() != n) throw Error("runs have different evaluation schedules");
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> obj, tol;
    for (const auto& r : runs) {
      if (r[i].step != runs.front()[i].step) throw Error("runs have different evaluation schedules");
      obj.push_back(r[i].objective);
      tol.push_back(r[i].tolerance);
    }
    const auto [om, os] = mean_std(obj);
    const auto [tm, ts] = mean_std(tol);
    cs.steps.push_back(static_cast<double>(runs.front()[i].step));
    cs.obj_mean.push_back(om);
    cs.obj_std.push_back(os);
    cs.tol_mean.push_back(tm);
    cs.tol_std.push_back(ts);
  }
  return cs;
}

std::string curve_csv(const std::vector<std::vector<CurvePoint>>& runs, const CurveStats& cs, bool objective) {
  std::string out = objective ? "step,objective_mean,objective_std\n" : "step,tolerance_mean,tolerance_std\n";
  for (std::size_t i = 0; i < cs.steps.size(); ++i) {
    out += std::to_string(runs.front()[i].step) + ',';
    out += format_double(objective ? cs.obj_mean[i] : cs.tol_mean[i]) + ',';
    out += format_double(objective ? cs.obj_std[i] : cs.tol_std[i]) + '\n';
  }
  return out;
}

}  // namespace

void write_curves(const std::vector<std::vector<CurvePoint>>& runs, const std::filesystem::path& dir, bool plots) {
  const CurveStats cs = curve_stats(runs);
  write_text(dir / "learning_curve.csv", curve_csv(runs, cs, true));
  write_text(dir / "cost_curve.csv", curve_csv(runs, cs, false));
  if (plots) {
    write_svg_plot(dir / "learning_curve.svg", "Evaluated objective", "objective",
                   {PlotSeries{"objective", cs.steps, cs.obj_mean, cs.obj_std}});
    write_svg_plot(dir / "cost_curve.svg", "Evaluated tolerance", "tolerance",
                   {PlotSeries{"tolerance", cs.steps, cs.tol_mean, cs.tol_std}});
  }
}

std::string CellSpec::name() const {
  const std::string s = shield == ShieldKind::kNone ? "unsafe" : shield_name(shield);
  return s + "-" + agent_name(agent);
}

std::vector<CellSpec> default_cells() {
  std::vector<CellSpec> cells;
  for (ShieldKind s : {ShieldKind::kNone, ShieldKind::kSafeFallback, ShieldKind::kGiveSafe}) {
    for (AgentKind a : {AgentKind::kTd3, AgentKind::kRandom}) cells.push_back({s, a});
  }
  return cells;
}

std::vector<CellResult> benchmark(const RunConfig& cfg, const std::vector<CellSpec>& cells,
                                  std::shared_ptr<const Workbench> wb) {
  cfg.validate();
  if (cells.empty()) throw Error("benchmark: no cells");
  const int n_runs = cfg.harness.n_runs;

  std::vector<CellResult> results(cells.size());
  struct Job {
    std::size_t cell;
    int run;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    results[c].cell = cells[c];
    results[c].runs.resize(static_cast<std::size_t>(n_runs));
    for (int r = 0; r < n_runs; ++r) jobs.push_back({c, r});
  }

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::vector<std::exception_ptr> errors(jobs.size());
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const Job job = jobs[j];
      try {
        const CellSpec& cell = cells[job.cell];
        RunConfig run_cfg = cfg;
        run_cfg.shield = cell.shield;
        run_cfg.agent = cell.agent;
        run_cfg.hyper = Td3Hyper::preset(default_preset(cell.shield));
        run_cfg.harness.seed = cfg.harness.seed + static_cast<std::uint64_t>(job.run);
        Trainer trainer(run_cfg, wb);
        trainer.run(cell.agent == AgentKind::kTd3 ? run_cfg.harness.budget : 0);
        RunResult& out = results[job.cell].runs[static_cast<std::size_t>(job.run)];
        out.seed = run_cfg.harness.seed;
        out.curve = trainer.curve();
        out.initial = trainer.evaluations().front();
        out.final = trainer.evaluations().back();
        out.counters = trainer.counters();
        spdlog::info("benchmark {} run {} done: objective {:.4f}, tolerance {:.4f}", cell.name(), job.run,
                     out.final.objective, out.final.tolerance);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        errors[j] = std::current_exception();
      }
    }
  };

  int n_workers = cfg.harness.workers > 0 ? cfg.harness.workers
                                          : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  n_workers = std::min<int>(n_workers, static_cast<int>(jobs.size()));
  std::vector<std::thread> threads;
  for (int i = 1; i < n_workers; ++i) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (!errors[j]) continue;
    const std::string id = cells[jobs[j].cell].name() + " run " + std::to_string(jobs[j].run);
    try {
      std::rethrow_exception(errors[j]);
    } catch (const std::exception& e) {
      throw Error("benchmark cell " + id + " failed: " + e.what());
    }
  }
  return results;
}

void write_benchmark(const std::vector<CellResult>& results, const std::filesystem::path& dir, bool plots) {
  std::string table =
      "cell,shield,agent,n_runs,objective_mean,objective_std,objective_per_step_mean,tolerance_mean,tolerance_std,"
      "initial_objective_mean,initial_objective_std,initial_tolerance_mean,initial_tolerance_std,energy_cost_mean,"
      "comfort_loss_mwh_mean,fallbacks_mean,retries_mean,train_unsafe_executed,eval_unsafe_executed\n";
  std::string runtime = "cell,n_samples,min_s,mean_s,std_s,max_s,total_s\n";
  std::vector<PlotSeries> obj_plots, tol_plots;

  for (const auto& cell : results) {
    std::vector<double> obj, obj_step, tol, obj0, tol0, cost, comfort, fallbacks, retries, seconds;
    std::int64_t train_unsafe = 0, eval_unsafe = 0;
    std::vector<std::vector<CurvePoint>> curves;
    for (const auto& run : cell.runs) {
      obj.push_back(run.final.objective);
      obj_step.push_back(run.final.objective_per_step);
      tol.push_back(run.final.tolerance);
      obj0.push_back(run.initial.objective);
      tol0.push_back(run.initial.tolerance);
      cost.push_back(run.final.energy_cost);
      comfort.push_back(run.final.comfort_loss);
      fallbacks.push_back(static_cast<double>(run.final.n_fallbacks));
      retries.push_back(static_cast<double>(run.final.n_retries));
      seconds.insert(seconds.end(), run.final.step_seconds.begin(), run.final.step_seconds.end());
      train_unsafe += run.counters.unsafe_executed;
      eval_unsafe += run.final.n_unsafe_executed;
      curves.push_back(run.curve);
    }
    const auto f = [](std::span<const double> v) {
      const auto [m, s] = mean_std(v);
      return format_double(m) + ',' + format_double(s);
    };
    const auto mean_only = [](std::span<const double> v) { return format_double(mean_std(v).first); };
    const std::string name = cell.cell.name();
    table += name + ',' + shield_name(cell.cell.shield) + ',' + agent_name(cell.cell.agent) + ',' +
             std::to_string(cell.runs.size()) + ',' + f(obj) + ',' + mean_only(obj_step) + ',' + f(tol) + ',' +
             f(obj0) + ',' + f(tol0) + ',' + mean_only(cost) + ',' + mean_only(comfort) + ',' +
             mean_only(fallbacks) + ',' + mean_only(retries) + ',' + std::to_string(train_unsafe) + ',' +
             std::to_string(eval_unsafe) + '\n';

    const RuntimeStats rt = runtime_report(seconds);
    runtime += name + ',' + std::to_string(seconds.size()) + ',' + format_double(rt.min) + ',' +
               format_double(rt.mean) + ',' + format_double(rt.std) + ',' + format_double(rt.max) + ',' +
               format_double(rt.total) + '\n';

    write_curves(curves, dir / "cells" / name, false);
    const CurveStats cs = curve_stats(curves);
    obj_plots.push_back({name, cs.steps, cs.obj_mean, cs.obj_std});
    tol_plots.push_back({name, cs.steps, cs.tol_mean, cs.tol_std});
  }

  write_text(dir / "benchmark.csv", table);
  write_text(dir / "runtime.csv", runtime);
  if (plots) {
    write_svg_plot(dir / "learning_curves.svg", "Evaluated objective per cell", "objective", obj_plots);
    write_svg_plot(dir / "cost_curves.svg", "Evaluated tolerance per cell", "tolerance", tol_plots);
  }
}

void write_svg_plot(const std::filesystem::path& path, const std::string& title, const std::string& y_label,
                    const std::vector<PlotSeries>& series) {
  constexpr double kW = 760, kH = 440, kLeft = 80, kRight = 190, kTop = 40, kBottom = 50;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool first = true;
  for (const auto& s : series) {
    if (s.x.size() != s.mean.size() || s.x.size() != s.std.size()) throw Error("plot series sizes differ");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double lo = s.mean[i] - s.std[i], hi = s.mean[i] + s.std[i];
      if (first) {
        x0 = x1 = s.x[i];
        y0 = lo;
        y1 = hi;
        first = false;
      }
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, lo);
      y1 = std::max(y1, hi);
    }
  }
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return std::string(buf);
  };
  auto pt = [&](double x, double y) { return num(px(x)) + ',' + num(py(y)) + ' '; };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kW) + "\" height=\"" + num(kH) +
                    "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(kW / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + title + "</text>\n";
  svg += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
         "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
    svg += "<text x=\"" + num(px(xv)) + "\" y=\"" + num(kH - kBottom + 18) + "\" text-anchor=\"middle\">" +
           num(xv) + "</text>\n";
    svg += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(py(yv) + 4) + "\" text-anchor=\"end\">" + num(yv) +
           "</text>\n";
    svg += "<line x1=\"" + num(kLeft) + "\" x2=\"" + num(kLeft + pw) + "\" y1=\"" + num(py(yv)) + "\" y2=\"" +
           num(py(yv)) + "\" stroke=\"#ddd\"/>\n";
  }
  svg += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kH - 10) + "\" text-anchor=\"middle\">step</text>\n";
  svg += "<text transform=\"translate(18," + num(kTop + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
         y_label + "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kColors[k % std::size(kColors)];
    std::string band, line;
    for (std::size_t i = 0; i < s.x.size(); ++i) band += pt(s.x[i], s.mean[i] + s.std[i]);
    for (std::size_t i = s.x.size(); i-- > 0;) band += pt(s.x[i], s.mean[i] - s.std[i]);
    for (std::size_t i = 0; i < s.x.size(); ++i) line += pt(s.x[i], s.mean[i]);
    svg += std::string("<polygon points=\"") + band + "\" fill=\"" + color + "\" fill-opacity=\"0.15\"/>\n";
    svg += std::string("<polyline points=\"") + line + "\" fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>\n";
    const double ly = kTop + 16 + 18 * static_cast<double>(k);
    svg += "<line x1=\"" + num(kW - kRight + 14) + "\" x2=\"" + num(kW - kRight + 34) + "\" y1=\"" + num(ly - 4) +
           "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + num(kW - kRight + 40) + "\" y=\"" + num(ly) + "\">" + s.label + "</text>\n";
  }
  svg += "</svg>\n";
  write_text(path, svg);
}

}  // namespace safemes
