#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "safemes/agents.hpp"
#include "safemes/config.hpp"
#include "safemes/mdp.hpp"
#include "safemes/safety.hpp"
#include "safemes/shield.hpp"

namespace safemes {

struct RuntimeStats {
  double min = 0.0;
  double mean = 0.0;
  double std = 0.0;  // population
  double max = 0.0;
  double total = 0.0;
};

/// Seconds per step in, summary out. Throws on an empty span.
RuntimeStats runtime_report(std::span<const double> seconds);

struct EpisodeMetrics {
  double objective = 0.0;            // summed reward, shield costs excluded
  double objective_per_step = 0.0;
  double tolerance = 0.0;            // summed |imbalance| over summed demand
  double energy_cost = 0.0;          // EUR, sum of L_cost
  double comfort_loss = 0.0;         // MWh
  double sum_l_cost = 0.0;           // EUR
  double sum_l_comfort = 0.0;        // W, summed per step
  std::int64_t n_steps = 0;
  std::int64_t n_fallbacks = 0;
  std::int64_t n_retries = 0;
  std::int64_t n_unsafe_executed = 0;  // executed actions failing the check
  RuntimeStats step_runtime;
  std::vector<double> step_seconds;
};

/// Immutable per-run resources shared by every worker.
struct Workbench {
  PlantConfig plant;
  std::shared_ptr<const ExogenousSeries> train_series;
  std::shared_ptr<const ExogenousSeries> eval_series;
  ObservationNorms norms;
  std::shared_ptr<const SafetyLayer> safety;
};

/// Loads or synthesizes both series, then loads or fits the surrogates.
std::shared_ptr<const Workbench> build_workbench(const RunConfig& cfg);

/// Action proposer during evaluation. attempt counts retries within a step
/// (0 is the first proposal).
using EvalPolicy = std::function<Action(const Observation& s, int attempt, Rng& rng)>;

/// Deterministic mu(s) first; retries perturb it with N(0, retry_sigma) and
/// switch to uniform draws from attempt uniform_after on (0 = never).
EvalPolicy td3_eval_policy(const Mlp& actor, double retry_sigma, int uniform_after = 0);
EvalPolicy random_eval_policy();

/// One rollout over the evaluation series. Exploration noise is off and
/// every draw comes from an RNG seeded with eval_seed.
EpisodeMetrics evaluate(const EvalPolicy& policy, const Workbench& wb, const ObservationNorms& norms,
                        ShieldKind shield, const ShieldConfig& shield_cfg, const RewardParams& reward,
                        std::uint64_t eval_seed);

struct CurvePoint {
  std::int64_t step = 0;
  double objective = 0.0;
  double tolerance = 0.0;
};

struct TrainCounters {
  std::int64_t executed = 0;
  std::int64_t unsafe_executed = 0;
  std::int64_t fallbacks = 0;
  std::int64_t retries = 0;
  std::int64_t synthetic = 0;
  std::int64_t episodes = 0;
  std::int64_t gradient_steps = 0;
};

/// One training run: environment, agent, shield and evaluation schedule.
class Trainer {
 public:
  Trainer(const RunConfig& cfg, std::shared_ptr<const Workbench> wb);

  /// Trains until `step()` reaches until_step, evaluating at step 0, every
  /// eval_interval steps, and at the budget.
  void run(std::int64_t until_step);

  EpisodeMetrics evaluate_now() const;

  std::int64_t step() const { return step_; }
  const std::vector<CurvePoint>& curve() const { return curve_; }
  const std::vector<EpisodeMetrics>& evaluations() const { return evaluations_; }
  const TrainCounters& counters() const { return counters_; }
  const RunConfig& config() const { return cfg_; }
  const Td3Agent& agent() const { return agent_; }
  const MesEnv& env() const { return env_; }
  const ObservationNorms& norms() const { return norms_; }

  void save(const std::filesystem::path& path) const;
  /// Shield, agent kind and hyper-parameters come from the checkpoint.
  static Trainer load(const std::filesystem::path& path, RunConfig cfg, std::shared_ptr<const Workbench> wb);

 private:
  void train_step();
  void record_evaluation();

  RunConfig cfg_;
  std::shared_ptr<const Workbench> wb_;
  ObservationNorms norms_;
  MesEnv env_;
  Td3Agent agent_;
  std::int64_t step_ = 0;
  TrainCounters counters_;
  std::vector<CurvePoint> curve_;
  std::vector<EpisodeMetrics> evaluations_;
};

/// Writes learning_curve.csv and cost_curve.csv (mean and sample std over
/// runs) into dir. All runs must share the evaluation steps.
void write_curves(const std::vector<std::vector<CurvePoint>>& runs, const std::filesystem::path& dir,
                  bool plots);

struct CellSpec {
  ShieldKind shield = ShieldKind::kNone;
  AgentKind agent = AgentKind::kRandom;
  std::string name() const;
};

std::vector<CellSpec> default_cells();

struct RunResult {
  std::uint64_t seed = 0;
  std::vector<CurvePoint> curve;
  EpisodeMetrics initial;
  EpisodeMetrics final;
  TrainCounters counters;
};

struct CellResult {
  CellSpec cell;
  std::vector<RunResult> runs;
};

/// Runs every cell n_runs times (seeds seed, seed+1, ...) on worker
/// threads. Cell configs use the shield's default preset.
std::vector<CellResult> benchmark(const RunConfig& cfg, const std::vector<CellSpec>& cells,
                                  std::shared_ptr<const Workbench> wb);

/// benchmark.csv (deterministic), runtime.csv and per-cell curves.
void write_benchmark(const std::vector<CellResult>& results, const std::filesystem::path& dir, bool plots);

/// Mean and sample standard deviation (0 for a single value).
std::pair<double, double> mean_std(std::span<const double> values);

/// Self-contained SVG of one or more mean curves with a +-std band.
struct PlotSeries {
  std::string label;
  std::vector<double> x, mean, std;
};
void write_svg_plot(const std::filesystem::path& path, const std::string& title, const std::string& y_label,
                    const std::vector<PlotSeries>& series);

}  // namespace safemes
