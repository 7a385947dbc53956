#include "safemes/safety.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "safemes/fallback.hpp"

namespace safemes {

namespace {

constexpr int kSurrogateFormatVersion = 1;

const char* const kLogHeader =
    "action_boiler,action_heat_pump,action_chp,action_tess,action_bess,"
    "feature_ambient_temp_c,feature_soc_tess,feature_soc_bess,"
    "q_boiler,q_heat_pump,q_chp,q_tess,p_bess";

std::pair<double, double> envelope(Asset a, const PlantConfig& c) {
  switch (a) {
    case Asset::kBoiler: return {0.0, c.boiler.q_max()};
    case Asset::kHeatPump: return {0.0, c.heat_pump.q_max()};
    case Asset::kChp: return {0.0, c.chp.q_max()};
    case Asset::kTess: return {c.tess.p_min_signed, c.tess.p_max_signed};
    case Asset::kBess: return {c.bess.p_min_signed, c.bess.p_max_signed};
  }
  return {0.0, 0.0};
}

}  // namespace

const char* asset_name(Asset a) {
  switch (a) {
    case Asset::kBoiler: return "boiler";
    case Asset::kHeatPump: return "heat_pump";
    case Asset::kChp: return "chp";
    case Asset::kTess: return "tess";
    case Asset::kBess: return "bess";
  }
  return "?";
}

Asset asset_from_name(const std::string& name) {
  for (Asset a : kAllAssets) {
    if (name == asset_name(a)) return a;
  }
  throw Error("unknown asset: " + name);
}

std::vector<std::string> surrogate_feature_names(Asset asset) {
  switch (asset) {
    case Asset::kBoiler: return {"action_boiler", "on_boiler", "ambient_temp_c"};
    case Asset::kHeatPump: return {"action_heat_pump", "on_heat_pump", "ambient_temp_c"};
    case Asset::kChp: return {"action_chp", "on_chp", "ambient_temp_c"};
    case Asset::kTess: return {"action_tess", "soc_tess"};
    case Asset::kBess: return {"action_bess", "soc_bess"};
  }
  return {};
}

std::size_t surrogate_features(Asset asset, const Action& action, const SafetyFeatures& f, double off_threshold,
                               std::span<double> out) {
  const double raw = action.values[static_cast<std::size_t>(asset)];
  switch (asset) {
    case Asset::kBoiler:
    case Asset::kHeatPump:
    case Asset::kChp:
      out[0] = raw;
      out[1] = raw >= off_threshold ? 1.0 : 0.0;
      out[2] = f.ambient_temp_c;
      return 3;
    case Asset::kTess:
      out[0] = raw;
      out[1] = f.soc_tess;
      return 2;
    case Asset::kBess:
      out[0] = raw;
      out[1] = f.soc_bess;
      return 2;
  }
  return 0;
}

SurrogateModel::SurrogateModel(Asset asset, RandomForest forest, FitMetrics metrics, double lower, double upper,
                               double off_threshold)
    : asset_(asset),
      feature_names_(surrogate_feature_names(asset)),
      forest_(std::move(forest)),
      metrics_(metrics),
      lower_(lower),
      upper_(upper),
      off_threshold_(off_threshold) {}

double SurrogateModel::predict(const Action& action, const SafetyFeatures& features) const {
  std::array<double, 4> buf{};
  const std::size_t n = surrogate_features(asset_, action, features, off_threshold_, buf);
  return std::clamp(forest_.predict(std::span<const double>(buf.data(), n)), lower_, upper_);
}

constexpr double kLogSweep = 0.6;

LogPolicy noisy_fallback_policy(const PlantConfig& config, double noise_std) {
  return [config, noise_std](const ExogenousRecord& exo, const PlantState&, Rng& rng) {
    Action a = fallback_policy(exo.thermal_demand_mw, config).action;
    // Slow charge/discharge sweeps push both stores into their SOC limits,
    // so the log covers curtailment at full and empty.
    const double t = 2.0 * std::numbers::pi * static_cast<double>(exo.index);
    a[ActionIndex::kTess] += kLogSweep * std::sin(t / 288.0);
    a[ActionIndex::kBess] += kLogSweep * std::sin(t / 200.0);
    std::normal_distribution<double> noise(0.0, noise_std);
    for (double& v : a.values) v = std::clamp(v + noise(rng), -1.0, 1.0);
    return a;
  };
}

OperationLog collect_log(const PlantConfig& config, const ExogenousSeries& series, const LogPolicy& policy,
                         std::size_t n_steps, std::uint64_t seed) {
  if (n_steps < kMinLogRows) {
    throw Error("collect_log: at least " + std::to_string(kMinLogRows) + " steps are required");
  }
  Rng rng(seed);
  PlantState state = reset(config, seed);
  OperationLog log;
  log.rows.reserve(n_steps);
  for (std::size_t k = 0; k < n_steps; ++k) {
    const ExogenousRecord& exo = series[k % series.size()];
    OperationRow row;
    row.action = policy(exo, state, rng);
    row.features = SafetyFeatures{exo.ambient_temp_c, state.soc_tess, state.soc_bess};
    const StepResult r = step(state, row.action, exo, config);
    row.power = {r.outputs.q_boil, r.outputs.q_hp, r.outputs.q_chp, r.outputs.q_tess, r.outputs.p_bess};
    log.rows.push_back(row);
    state = r.state;
  }
  return log;
}

void write_log(const OperationLog& log, std::ostream& out) {
  out << kLogHeader << '\n';
  for (const auto& r : log.rows) {
    for (double v : r.action.values) out << format_double(v) << ',';
    out << format_double(r.features.ambient_temp_c) << ',' << format_double(r.features.soc_tess) << ','
        << format_double(r.features.soc_bess);
    for (double v : r.power) out << ',' << format_double(v);
    out << '\n';
  }
}

OperationLog read_log(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("operation log is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kLogHeader) throw Error("unexpected operation log header");
  OperationLog log;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row_no;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string field;
    try {
      while (std::getline(ss, field, ',')) v.push_back(parse_double(field));
    } catch (const Error& e) {
      throw Error("operation log row " + std::to_string(row_no) + ": " + e.what());
    }
    if (v.size() != 13) throw Error("operation log row " + std::to_string(row_no) + ": expected 13 columns");
    OperationRow r;
    std::copy(v.begin(), v.begin() + 5, r.action.values.begin());
    r.features = SafetyFeatures{v[5], v[6], v[7]};
    std::copy(v.begin() + 8, v.end(), r.power.begin());
    log.rows.push_back(r);
  }
  return log;
}

SurrogateSet fit_surrogates(const OperationLog& log, double holdout_frac, const PlantConfig& config,
                            const ForestParams& params) {
  if (!(holdout_frac > 0.0 && holdout_frac <= 0.5)) throw Error("holdout_frac must lie in (0, 0.5]");
  const std::size_t n = log.rows.size();
  if (n < kMinLogRows) throw Error("operation log has fewer than " + std::to_string(kMinLogRows) + " rows");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng(derive_seed(params.seed, 0xC0FFEE));
  std::shuffle(order.begin(), order.end(), split_rng);
  const auto n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(holdout_frac * static_cast<double>(n))));
  const std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  const std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());

  SurrogateSet set;
  for (Asset asset : kAllAssets) {
    const std::string name = asset_name(asset);
    const auto build = [&](const std::vector<std::size_t>& idx, FeatureMatrix& x, std::vector<double>& y) {
      std::array<double, 4> buf{};
      for (std::size_t i : idx) {
        const auto& row = log.rows[i];
        const std::size_t k = surrogate_features(asset, row.action, row.features, config.off_threshold, buf);
        x.push_row(std::span<const double>(buf.data(), k));
        y.push_back(row.target(asset));
      }
    };
    FeatureMatrix x_train, x_test;
    std::vector<double> y_train, y_test;
    build(train, x_train, y_train);
    build(test, x_test, y_test);

    const auto [y_lo, y_hi] = std::minmax_element(y_train.begin(), y_train.end());
    if (*y_hi - *y_lo <= 1e-12) throw Error("degenerate target for " + name + ": constant power in log");
    bool any_varying = false;
    for (std::size_t f = 0; f < x_train.n_features && !any_varying; ++f) {
      for (std::size_t i = 1; i < x_train.rows(); ++i) {
        if (x_train.at(i, f) != x_train.at(0, f)) {
          any_varying = true;
          break;
        }
      }
    }
    if (!any_varying) throw Error("degenerate features for " + name + ": every feature is constant");

    ForestParams p = params;
    p.seed = derive_seed(params.seed, static_cast<std::uint64_t>(asset));
    RandomForest forest;
    forest.fit(x_train, y_train, p);

    const auto [lo, hi] = envelope(asset, config);
    double abs_err = 0.0, ss_res = 0.0, mean = 0.0;
    for (double v : y_test) mean += v;
    mean /= static_cast<double>(y_test.size());
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < y_test.size(); ++i) {
      const double pred = std::clamp(forest.predict(x_test.row(i)), lo, hi);
      abs_err += std::abs(pred - y_test[i]);
      ss_res += (pred - y_test[i]) * (pred - y_test[i]);
      ss_tot += (y_test[i] - mean) * (y_test[i] - mean);
    }
    const auto [t_lo, t_hi] = std::minmax_element(y_test.begin(), y_test.end());
    FitMetrics m;
    m.mae = abs_err / static_cast<double>(y_test.size());
    m.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
    m.nmae = (*t_hi - *t_lo) > 0.0 ? m.mae / (*t_hi - *t_lo) : 0.0;

    set.emplace(asset, SurrogateModel(asset, std::move(forest), m, lo, hi, config.off_threshold));
  }
  return set;
}

void save_surrogates(const SurrogateSet& set, std::ostream& out) {
  nlohmann::json doc;
  doc["format"] = "safemes-surrogates";
  doc["version"] = kSurrogateFormatVersion;
  doc["models"] = nlohmann::json::array();
  for (const auto& [asset, model] : set) {
    nlohmann::json m;
    m["asset"] = asset_name(asset);
    m["feature_names"] = model.feature_names();
    m["fit_metrics"] = {{"r2", model.fit_metrics().r2}, {"mae", model.fit_metrics().mae},
                        {"nmae", model.fit_metrics().nmae}};
    m["lower"] = model.lower();
    m["upper"] = model.upper();
    m["off_threshold"] = model.off_threshold();
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : model.forest().trees()) {
      nlohmann::json t;
      std::vector<int> feature, left, right;
      std::vector<double> threshold, value;
      for (const auto& node : tree.nodes()) {
        feature.push_back(node.feature);
        left.push_back(node.left);
        right.push_back(node.right);
        threshold.push_back(node.threshold);
        value.push_back(node.value);
      }
      t["feature"] = feature;
      t["threshold"] = threshold;
      t["left"] = left;
      t["right"] = right;
      t["value"] = value;
      trees.push_back(std::move(t));
    }
    m["trees"] = std::move(trees);
    doc["models"].push_back(std::move(m));
  }
  out << doc.dump() << '\n';
}

SurrogateSet load_surrogates(std::istream& in) {
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("surrogate file is not valid JSON: ") + e.what());
  }
  if (doc.value("format", "") != "safemes-surrogates") throw Error("not a surrogate model file");
  if (doc.value("version", 0) != kSurrogateFormatVersion) throw Error("unsupported surrogate file version");
  SurrogateSet set;
  try {
    for (const auto& m : doc.at("models")) {
      const Asset asset = asset_from_name(m.at("asset").get<std::string>());
      std::vector<RegressionTree> trees;
      for (const auto& t : m.at("trees")) {
        const auto feature = t.at("feature").get<std::vector<int>>();
        const auto threshold = t.at("threshold").get<std::vector<double>>();
        const auto left = t.at("left").get<std::vector<int>>();
        const auto right = t.at("right").get<std::vector<int>>();
        const auto value = t.at("value").get<std::vector<double>>();
        const std::size_t count = feature.size();
        if (threshold.size() != count || left.size() != count || right.size() != count || value.size() != count) {
          throw Error("tree arrays differ in length");
        }
        std::vector<RegressionTree::Node> nodes(count);
        for (std::size_t i = 0; i < count; ++i) nodes[i] = {feature[i], threshold[i], left[i], right[i], value[i]};
        trees.push_back(RegressionTree::from_nodes(std::move(nodes)));
      }
      const auto& fm = m.at("fit_metrics");
      FitMetrics metrics{fm.at("r2").get<double>(), fm.at("mae").get<double>(), fm.at("nmae").get<double>()};
      set.emplace(asset, SurrogateModel(asset, RandomForest::from_trees(std::move(trees)), metrics,
                                        m.at("lower").get<double>(), m.at("upper").get<double>(),
                                        m.at("off_threshold").get<double>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed surrogate file: ") + e.what());
  }
  return set;
}

void save_surrogates(const SurrogateSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write surrogate file: " + path.string());
  save_surrogates(set, out);
}

SurrogateSet load_surrogates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open surrogate file: " + path.string());
  return load_surrogates(in);
}

ConstraintReport check(const Action& action, const SafetyFeatures& features, const SurrogateSet& surrogates,
                       double q_tol, double demand_mw) {
  for (double v : action.values) {
    if (!std::isfinite(v)) throw Error("safety check: non-finite action");
  }
  if (!std::isfinite(features.ambient_temp_c) || !std::isfinite(features.soc_tess) ||
      !std::isfinite(features.soc_bess) || !std::isfinite(demand_mw) || !std::isfinite(q_tol)) {
    throw Error("safety check: non-finite input");
  }
  if (!(q_tol > 0.0)) throw Error("safety check: q_tol must be positive");
  ConstraintReport report;
  report.q_tol = q_tol;
  double production = 0.0;
  for (Asset a : kThermalAssets) {
    auto it = surrogates.find(a);
    if (it == surrogates.end()) throw Error(std::string("missing surrogate for ") + asset_name(a));
    const double p = it->second.predict(action, features);
    report.per_asset_pred[static_cast<std::size_t>(a)] = p;
    production += p;
  }
  report.residual = production - demand_mw;
  report.feasible = std::abs(report.residual) <= q_tol;
  return report;
}

SafetyLayer::SafetyLayer(SurrogateSet surrogates, double q_tol) : surrogates_(std::move(surrogates)), q_tol_(q_tol) {
  if (!(q_tol_ > 0.0) || !std::isfinite(q_tol_)) throw Error("safety layer: q_tol must be positive");
  for (Asset a : kThermalAssets) {
    auto it = surrogates_.find(a);
    if (it == surrogates_.end()) throw Error(std::string("missing surrogate for ") + asset_name(a));
  }
}

ConstraintReport SafetyLayer::check(const Action& action, const SafetyFeatures& features, double demand_mw) const {
  return safemes::check(action, features, surrogates_, q_tol_, demand_mw);
}

double tolerance_from_series(const ExogenousSeries& series, double fraction) {
  if (!(fraction > 0.0)) throw Error("tolerance fraction must be positive");
  return fraction * series.mean_thermal_demand();
}

double episode_tolerance(std::span<const ToleranceSample> trace) {
  if (trace.empty()) throw Error("episode_tolerance: empty trace");
  double imbalance = 0.0;
  double demand = 0.0;
  for (const auto& s : trace) {
    imbalance += std::abs(s.production_mw - s.demand_mw);
    demand += s.demand_mw;
  }
  if (!(demand > 0.0)) throw Error("episode_tolerance: total demand is zero");
  return imbalance / demand;
}

}  // namespace safemes
