// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails. `--quick` shrinks the training
// budgets for a smoke run; the thresholds are unchanged.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "safemes/agents.hpp"
#include "safemes/fallback.hpp"
#include "safemes/harness.hpp"

using namespace safemes;
namespace fs = std::filesystem;

namespace {

// Tolerances, pinned.
constexpr double kTrainTolerance = 0.16;      // criterion 1, every evaluation checkpoint
constexpr double kUnsafeTolerance = 1.0;      // criterion 2, strict lower bound
constexpr double kNmaeMax = 0.02;             // criterion 4, boiler / HP / CHP / BESS
constexpr double kNmaeMaxTess = 0.03;         // criterion 4, TESS
constexpr double kGradRelTol = 1e-4;          // criterion 5
constexpr double kTargetAbsTol = 1e-12;       // criterion 5
constexpr int kShieldSteps = 10000;           // criterion 6
constexpr int kMinImprovedSeeds = 4;          // criterion 7, out of 5
constexpr double kFinalTolerance = 0.15;      // criterion 7
constexpr double kRuntimeCapSeconds = 0.1;    // criterion 9

constexpr std::int64_t kFullBudget = 100000;

struct Verdict {
  int id;
  std::string name;
  bool pass;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RunConfig cell_config(const RunConfig& base, ShieldKind shield, AgentKind agent, std::uint64_t seed,
                      std::int64_t budget) {
  RunConfig cfg = base;
  cfg.shield = shield;
  cfg.agent = agent;
  cfg.hyper = Td3Hyper::preset(default_preset(shield));
  cfg.harness.seed = seed;
  cfg.harness.budget = budget;
  cfg.harness.eval_interval = std::min<std::int64_t>(cfg.harness.eval_interval, budget);
  return cfg;
}

// ------------------------------------------------------------ criteria 1 and 7

struct TrainedRun {
  ShieldKind shield;
  std::uint64_t seed;
  std::int64_t train_unsafe = 0;
  std::int64_t eval_unsafe = 0;
  double max_tolerance = 0.0;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  double final_tolerance = 0.0;
  double seconds = 0.0;
};

TrainedRun train_one(const RunConfig& base, std::shared_ptr<const Workbench> wb, ShieldKind shield,
                     std::uint64_t seed, std::int64_t budget) {
  const RunConfig cfg = cell_config(base, shield, AgentKind::kTd3, seed, budget);
  const auto t0 = std::chrono::steady_clock::now();
  Trainer trainer(cfg, std::move(wb));
  trainer.run(budget);
  TrainedRun r{shield, seed};
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.train_unsafe = trainer.counters().unsafe_executed;
  for (const auto& e : trainer.evaluations()) {
    r.eval_unsafe += e.n_unsafe_executed;
    r.max_tolerance = std::max(r.max_tolerance, e.tolerance);
  }
  r.initial_objective = trainer.evaluations().front().objective;
  r.final_objective = trainer.evaluations().back().objective;
  r.final_tolerance = trainer.evaluations().back().tolerance;
  spdlog::info("{} seed {}: {:.1f} -> {:.1f}, max tolerance {:.4f}, unsafe {}/{}, {:.0f} s", shield_name(shield),
               seed, r.initial_objective, r.final_objective, r.max_tolerance, r.train_unsafe, r.eval_unsafe,
               r.seconds);
  return r;
}

Verdict criterion1(const std::vector<TrainedRun>& runs) {
  bool pass = true;
  std::int64_t unsafe = 0;
  double worst = 0.0, slowest = 0.0;
  for (const auto& r : runs) {
    unsafe += r.train_unsafe + r.eval_unsafe;
    worst = std::max(worst, r.max_tolerance);
    slowest = std::max(slowest, r.seconds);
  }
  pass = unsafe == 0 && worst <= kTrainTolerance && slowest <= 30 * 60;
  return {1, "hard-constraint guarantee", pass,
          std::to_string(runs.size()) + " shielded runs, unsafe executed " + std::to_string(unsafe) +
              ", max eval tolerance " + fmt(worst) + " (<= " + fmt(kTrainTolerance) + "), slowest run " +
              fmt(slowest, 3) + " s"};
}

Verdict criterion7(const std::vector<TrainedRun>& runs) {
  int improved = 0, n = 0;
  double worst_final = 0.0;
  std::string per_seed;
  for (const auto& r : runs) {
    if (r.shield != ShieldKind::kSafeFallback) continue;
    ++n;
    improved += r.final_objective > r.initial_objective ? 1 : 0;
    worst_final = std::max(worst_final, r.final_tolerance);
    per_seed += " " + fmt(r.initial_objective, 5) + "->" + fmt(r.final_objective, 5);
  }
  const bool pass = n == 5 && improved >= kMinImprovedSeeds && worst_final <= kFinalTolerance;
  return {7, "learning progress", pass,
          std::to_string(improved) + "/" + std::to_string(n) + " seeds improved (need " +
              std::to_string(kMinImprovedSeeds) + "), max final tolerance " + fmt(worst_final) + ";" + per_seed};
}

// ------------------------------------------------------------ criteria 2, 3, 9

Verdict criterion2(const std::vector<CellResult>& cells) {
  double min_tol = 1e9;
  for (const auto& c : cells) {
    if (c.cell.shield != ShieldKind::kNone) continue;
    for (const auto& r : c.runs) min_tol = std::min(min_tol, r.initial.tolerance);
  }
  return {2, "unsafe contrast", min_tol > kUnsafeTolerance,
          "lowest unsafe-random step-0 tolerance " + fmt(min_tol) + " (> " + fmt(kUnsafeTolerance) + ")"};
}

std::pair<double, double> initial_objective(const CellResult& c) {
  std::vector<double> v;
  for (const auto& r : c.runs) v.push_back(r.initial.objective);
  return mean_std(v);
}

Verdict criterion3(const std::vector<CellResult>& cells) {
  std::pair<double, double> sf, gs, un;
  for (const auto& c : cells) {
    const auto ms = initial_objective(c);
    if (c.cell.shield == ShieldKind::kSafeFallback) sf = ms;
    if (c.cell.shield == ShieldKind::kGiveSafe) gs = ms;
    if (c.cell.shield == ShieldKind::kNone) un = ms;
  }
  const bool pass = sf.first - sf.second > gs.first + gs.second && gs.first - gs.second > un.first + un.second;
  const auto show = [](const std::pair<double, double>& p) { return fmt(p.first, 5) + " +- " + fmt(p.second, 3); };
  return {3, "initial-utility ordering", pass,
          "safe_fallback " + show(sf) + " > give_safe " + show(gs) + " > unsafe " + show(un)};
}

Verdict criterion9(const std::vector<CellResult>& cells) {
  double un = 0, sf = 0, gs = 0;
  for (const auto& c : cells) {
    std::vector<double> pooled;
    for (const auto& r : c.runs) pooled.insert(pooled.end(), r.final.step_seconds.begin(), r.final.step_seconds.end());
    const double mean = runtime_report(pooled).mean;
    if (c.cell.shield == ShieldKind::kNone) un = mean;
    if (c.cell.shield == ShieldKind::kSafeFallback) sf = mean;
    if (c.cell.shield == ShieldKind::kGiveSafe) gs = mean;
  }
  const bool pass = un <= sf && sf <= gs && gs < kRuntimeCapSeconds;
  return {9, "run-time ordering", pass,
          "mean step seconds unsafe " + fmt(un, 3) + " <= safe_fallback " + fmt(sf, 3) + " <= give_safe " +
              fmt(gs, 3) + " (< " + fmt(kRuntimeCapSeconds) + ")"};
}

// ------------------------------------------------------------ criterion 4

Verdict criterion4(const Workbench& wb) {
  bool pass = true;
  std::string detail;
  for (Asset a : kAllAssets) {
    const double nmae = wb.safety->model(a).fit_metrics().nmae;
    const double cap = a == Asset::kTess ? kNmaeMaxTess : kNmaeMax;
    pass = pass && nmae <= cap;
    detail += std::string(asset_name(a)) + " " + fmt(nmae * 100.0, 3) + "% ";
  }
  return {4, "surrogate quality", pass, detail + "(caps 2%, TESS 3%)"};
}

// ------------------------------------------------------------ criterion 5

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = u(rng);
  return m;
}

// Worst relative disagreement between analytic and fourth-order central
// difference gradients of f over the parameters of net.
double worst_fd_error(Mlp& net, const Eigen::VectorXd& analytic, const std::function<double()>& f) {
  constexpr double h = 1e-4;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < net.n_params(); ++i) {
    const double keep = net.params()(i);
    const auto at = [&](double dx) {
      net.params()(i) = keep + dx;
      return f();
    };
    const double numeric = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
    net.params()(i) = keep;
    if (std::abs(numeric) < 1e-8 && std::abs(analytic(i)) < 1e-8) continue;
    worst = std::max(worst, std::abs(numeric - analytic(i)) / std::max(std::abs(numeric), std::abs(analytic(i))));
  }
  return worst;
}

Verdict criterion5() {
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Mlp actor({9, 16, 16, 5}, OutputActivation::kTanh);
    Mlp critic({14, 16, 16, 1}, OutputActivation::kLinear);
    actor.init_uniform(rng);
    critic.init_uniform(rng);
    const Eigen::MatrixXd s = random_matrix(9, 8, rng);
    const Eigen::MatrixXd a = random_matrix(5, 8, rng);
    const Eigen::RowVectorXd y = random_matrix(1, 8, rng).row(0);
    Eigen::MatrixXd sa(14, 8);
    sa << s, a;

    const OutputLoss mse = [&](const Eigen::MatrixXd& q) {
      const Eigen::RowVectorXd diff = q.row(0) - y;
      Eigen::MatrixXd g = (2.0 / 8.0) * diff;
      return std::make_pair(diff.squaredNorm() / 8.0, g);
    };
    const auto critic_grad = loss_and_grad(critic, sa, mse).grad.params;
    worst = std::max(worst, worst_fd_error(critic, critic_grad, [&] { return mse(critic.forward_batch(sa)).first; }));

    ForwardCache ac, cc;
    Eigen::MatrixXd s_mu(14, 8);
    s_mu << s, actor.forward_batch(s, &ac);
    critic.forward_batch(s_mu, &cc);
    const auto through = critic.backward(cc, Eigen::MatrixXd::Constant(1, 8, -1.0 / 8.0));
    const auto actor_grad = actor.backward(ac, through.input.bottomRows(5)).params;
    worst = std::max(worst, worst_fd_error(actor, actor_grad, [&] {
                       Eigen::MatrixXd in(14, 8);
                       in << s, actor.forward_batch(s);
                       return -critic.forward_batch(in).mean();
                     }));
  }

  // Target by hand: zero-weight nets, critics reduce to their output biases.
  Mlp actor({9, 4, 4, 5}, OutputActivation::kTanh);
  Mlp c1({14, 4, 4, 1}, OutputActivation::kLinear);
  actor.params().setZero();
  c1.params().setZero();
  Mlp c2 = c1;
  c1.bias(2)(0) = -3.25;
  c2.bias(2)(0) = -2.5;
  Eigen::VectorXd r(2), d(2);
  r << -0.8, 0.4;
  d << 0.0, 1.0;
  const Eigen::VectorXd y = td3_targets(actor, c1, c2, Eigen::MatrixXd::Zero(9, 2), r, d,
                                        Eigen::MatrixXd::Constant(5, 2, 0.7), 0.7, 0.5);
  const double target_err = std::abs(y(0) - (-0.8 + 0.7 * -3.25));
  const bool terminal_exact = y(1) == 0.4;

  Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(6, -1.0, 1.0), src = Eigen::VectorXd::Ones(6);
  const Eigen::VectorXd t0 = t;
  polyak_update(t, src, 1.0);
  bool polyak_exact = t == t0;
  polyak_update(t, t0, 0.995);
  polyak_exact = polyak_exact && t == t0;

  const bool pass = worst <= kGradRelTol && target_err <= kTargetAbsTol && terminal_exact && polyak_exact;
  return {5, "TD3 correctness", pass,
          "worst FD relative error " + fmt(worst, 3) + " over 20 nets, target error " + fmt(target_err, 3) +
              ", terminal y=r " + (terminal_exact ? "exact" : "off") + ", polyak " +
              (polyak_exact ? "exact" : "off")};
}

// ------------------------------------------------------------ criterion 6

Verdict criterion6(const Workbench& wb) {
  const PlantConfig plant = wb.plant;
  MesEnv env(wb.train_series, plant, wb.norms, RewardParams{});
  const ShieldConfig cfg;
  Rng rng(606);
  std::int64_t violations = 0, dual = 0, synthetic_gs = 0;

  for (int i = 0; i < kShieldSteps; ++i) {
    const bool use_fallback = i % 2 == 0;
    const Observation s = env.observe();
    const auto features = env.safety_features();
    const double demand = env.record().thermal_demand_mw;
    const auto check = [&](const Action& a) { return wb.safety->check(a, features, demand).feasible; };
    int plant_calls = 0;
    const EnvStepFn step = [&](const Action& a) {
      ++plant_calls;
      if (!check(a)) ++violations;
      return env.step(a).transition;
    };
    const ProposeFn propose = [&] { return random_action(rng); };

    if (use_fallback) {
      const auto fb = [&] { return fallback_policy(demand, plant).action; };
      const auto out = safe_fallback_step(s, propose, step, check, fb, cfg);
      const bool replaced = !(out.executed.a == out.proposed);
      if (out.synthetic.size() != (replaced ? 1u : 0u)) ++violations;
      if (replaced) {
        ++dual;
        const auto& t = out.synthetic[0];
        if (!(t.a == out.proposed) || t.r != out.executed.r - cfg.cost_fallback || !(t.s == s) ||
            !(t.s_next == out.executed.s_next) || t.done != out.executed.done || !t.synthetic)
          ++violations;
      }
    } else {
      const auto out = give_safe_step(s, propose, step, check, cfg);
      synthetic_gs += static_cast<std::int64_t>(out.synthetic.size());
      if (static_cast<int>(out.synthetic.size()) != out.rejections) ++violations;
      for (const auto& t : out.synthetic) {
        if (!(t.s_next == s) || !(t.s == s) || !t.synthetic || check(t.a) || t.r != give_safe_reward(t.a, cfg))
          ++violations;
      }
    }
    if (plant_calls != 1) ++violations;
  }
  return {6, "shield semantics", violations == 0 && dual > 0 && synthetic_gs > 0,
          std::to_string(kShieldSteps) + " plant steps, " + std::to_string(dual) + " dual tuples, " +
              std::to_string(synthetic_gs) + " s'=s tuples, violations " + std::to_string(violations)};
}

// ------------------------------------------------------------ criterion 8

Verdict criterion8(const RunConfig& base, std::shared_ptr<const Workbench> wb, const fs::path& scratch) {
  std::vector<std::string> files;
  bool same = true;
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path dir = scratch / ("rep" + std::to_string(rep));
    fs::remove_all(dir);
    RunConfig cfg = base;
    cfg.harness.budget = 3000;
    cfg.harness.eval_interval = 1000;
    cfg.harness.n_runs = 2;
    cfg.harness.workers = rep + 1;  // thread count must not matter
    cfg.harness.plots = false;
    write_benchmark(benchmark(cfg, default_cells(), wb), dir / "bench", false);

    write_series(synth_profiles(base.harness.data_seed, 2000), dir / "series.csv");

    Trainer t(cell_config(base, ShieldKind::kGiveSafe, AgentKind::kTd3, 3, 2000), wb);
    t.run(2000);
    write_curves({t.curve()}, dir / "train", false);
  }
  for (const auto& entry : fs::recursive_directory_iterator(scratch / "rep0")) {
    if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
    const fs::path rel = fs::relative(entry.path(), scratch / "rep0");
    if (rel.filename() == "runtime.csv") continue;  // wall-clock, reported separately
    files.push_back(rel.string());
    if (slurp(entry.path()) != slurp(scratch / "rep1" / rel)) {
      same = false;
      spdlog::warn("determinism: {} differs", rel.string());
    }
  }
  return {8, "determinism", same && files.size() >= 10,
          std::to_string(files.size()) + " CSV files compared byte for byte across repeated runs"};
}

}  // namespace

int main(int argc, char** argv) {
  bool quick = false;
  for (int i = 1; i < argc; ++i) quick = quick || std::strcmp(argv[i], "--quick") == 0;
  const std::int64_t budget = quick ? 10000 : kFullBudget;
  spdlog::set_level(spdlog::level::info);

  const fs::path scratch = fs::temp_directory_path() / "safemes_acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  RunConfig base = default_run_config();
  base.harness.plots = false;
  base.harness.workers = 1;
  const auto wb = build_workbench(base);

  std::vector<Verdict> verdicts;
  const auto report = [&](Verdict v) {
    std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << v.id << " (" << v.name << "): " << v.detail
              << std::endl;
    verdicts.push_back(std::move(v));
  };

  report(criterion4(*wb));
  report(criterion5());
  report(criterion6(*wb));

  std::vector<CellSpec> random_cells;
  for (const auto& c : default_cells())
    if (c.agent == AgentKind::kRandom) random_cells.push_back(c);
  RunConfig random_cfg = base;
  random_cfg.harness.n_runs = 5;
  random_cfg.harness.budget = budget;
  const auto random_results = benchmark(random_cfg, random_cells, wb);
  report(criterion2(random_results));
  report(criterion3(random_results));
  report(criterion9(random_results));

  report(criterion8(base, wb, scratch));

  std::vector<TrainedRun> runs;
  for (std::uint64_t seed = 1; seed <= 5; ++seed)
    runs.push_back(train_one(base, wb, ShieldKind::kSafeFallback, seed, budget));
  for (std::uint64_t seed = 1; seed <= 3; ++seed)
    runs.push_back(train_one(base, wb, ShieldKind::kGiveSafe, seed, budget));
  std::vector<TrainedRun> first_three;
  for (const auto& r : runs)
    if (r.seed <= 3) first_three.push_back(r);
  report(criterion1(first_three));
  report(criterion7(runs));

  std::sort(verdicts.begin(), verdicts.end(), [](const Verdict& a, const Verdict& b) { return a.id < b.id; });
  std::cout << "\nsummary" << (quick ? " (quick budgets)" : "") << ":\n";
  int failed = 0;
  for (const auto& v : verdicts) {
    std::cout << (v.pass ? "PASS" : "FAIL") << "  " << v.id << " " << v.name << "\n";
    failed += v.pass ? 0 : 1;
  }
  fs::remove_all(scratch);
  return failed == 0 ? 0 : 1;
}
