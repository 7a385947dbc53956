#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "safemes/forest.hpp"
#include "safemes/plant.hpp"
#include "safemes/timeseries.hpp"

namespace safemes {

/// Assets with a learned power surrogate. The first four enter the thermal balance.
enum class Asset { kBoiler = 0, kHeatPump = 1, kChp = 2, kTess = 3, kBess = 4 };

inline constexpr std::array<Asset, 5> kAllAssets = {Asset::kBoiler, Asset::kHeatPump, Asset::kChp,
                                                    Asset::kTess, Asset::kBess};
inline constexpr std::array<Asset, 4> kThermalAssets = {Asset::kBoiler, Asset::kHeatPump, Asset::kChp,
                                                        Asset::kTess};

const char* asset_name(Asset a);
Asset asset_from_name(const std::string& name);

/// Exogenous and state quantities the surrogates may condition on.
struct SafetyFeatures {
  double ambient_temp_c = 0.0;
  double soc_tess = 0.0;
  double soc_bess = 0.0;
};

struct FitMetrics {
  double r2 = 0.0;
  double mae = 0.0;   // MW
  double nmae = 0.0;  // MAE / range of the held-out targets
};

/// Maps (action component, exogenous features) to realized asset power.
class SurrogateModel {
 public:
  SurrogateModel() = default;
  SurrogateModel(Asset asset, RandomForest forest, FitMetrics metrics, double lower, double upper,
                 double off_threshold);

  Asset asset() const { return asset_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const FitMetrics& fit_metrics() const { return metrics_; }
  const RandomForest& forest() const { return forest_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  double off_threshold() const { return off_threshold_; }

  /// Predicted power, clipped to the asset envelope.
  double predict(const Action& action, const SafetyFeatures& features) const;

 private:
  Asset asset_ = Asset::kBoiler;
  std::vector<std::string> feature_names_;
  RandomForest forest_;
  FitMetrics metrics_;
  double lower_ = 0.0;
  double upper_ = 0.0;
  double off_threshold_ = -0.6;
};

using SurrogateSet = std::map<Asset, SurrogateModel>;

/// Column names of the features an asset's surrogate sees.
std::vector<std::string> surrogate_feature_names(Asset asset);

/// Feature vector for one asset; returns the number of entries written.
std::size_t surrogate_features(Asset asset, const Action& action, const SafetyFeatures& features,
                               double off_threshold, std::span<double> out);

struct OperationRow {
  Action action;
  SafetyFeatures features;
  std::array<double, 5> power{};  // indexed by Asset: q_boil, q_hp, q_chp, q_tess (MW_th), p_bess (MW_e)

  double target(Asset a) const { return power[static_cast<std::size_t>(a)]; }
};

struct OperationLog {
  std::vector<OperationRow> rows;
};

inline constexpr std::size_t kMinLogRows = 100;

/// Action source used while logging: sees the record and plant state.
using LogPolicy = std::function<Action(const ExogenousRecord&, const PlantState&, Rng&)>;

/// Fallback dispatch perturbed by clipped Gaussian noise on every component,
/// with slow periodic charge/discharge sweeps on both stores.
LogPolicy noisy_fallback_policy(const PlantConfig& config, double noise_std);

OperationLog collect_log(const PlantConfig& config, const ExogenousSeries& series, const LogPolicy& policy,
                         std::size_t n_steps, std::uint64_t seed);

void write_log(const OperationLog& log, std::ostream& out);
OperationLog read_log(std::istream& in);

/// Fits one surrogate per asset and scores it on a held-out split.
SurrogateSet fit_surrogates(const OperationLog& log, double holdout_frac, const PlantConfig& config,
                            const ForestParams& params = {});

void save_surrogates(const SurrogateSet& set, const std::filesystem::path& path);
SurrogateSet load_surrogates(const std::filesystem::path& path);
void save_surrogates(const SurrogateSet& set, std::ostream& out);
SurrogateSet load_surrogates(std::istream& in);

struct ConstraintReport {
  double residual = 0.0;  // predicted production - demand, MW_th
  double q_tol = 0.0;
  bool feasible = false;
  std::array<double, 4> per_asset_pred{};  // indexed by thermal Asset
};

/// Relaxed thermal balance |sum of predicted thermal powers - demand| <= q_tol.
ConstraintReport check(const Action& action, const SafetyFeatures& features, const SurrogateSet& surrogates,
                       double q_tol, double demand_mw);

/// Surrogates plus tolerance bundled for repeated checks.
class SafetyLayer {
 public:
  SafetyLayer(SurrogateSet surrogates, double q_tol);

  ConstraintReport check(const Action& action, const SafetyFeatures& features, double demand_mw) const;

  double q_tol() const { return q_tol_; }
  const SurrogateSet& surrogates() const { return surrogates_; }
  const SurrogateModel& model(Asset a) const { return surrogates_.at(a); }

 private:
  SurrogateSet surrogates_;
  double q_tol_;
};

/// q_tol as a fraction of the mean per-step thermal demand.
double tolerance_from_series(const ExogenousSeries& series, double fraction);

struct ToleranceSample {
  double production_mw = 0.0;
  double demand_mw = 0.0;
};

/// Sum of absolute thermal imbalance relative to total demand.
double episode_tolerance(std::span<const ToleranceSample> trace);

}  // namespace safemes
