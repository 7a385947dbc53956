#pragma once

#include <memory>

#include "safemes/experience.hpp"
#include "safemes/plant.hpp"
#include "safemes/safety.hpp"
#include "safemes/shield.hpp"
#include "safemes/timeseries.hpp"

namespace safemes {

/// Fixed scales dividing demand, infeed and price features.
struct ObservationNorms {
  double thermal_mw = 1.0;
  double electrical_mw = 1.0;
  double wind = 1.0;   // infeed potential, fraction of nominal
  double solar = 1.0;
  double price_eur_mwh = 1.0;

  /// Maxima of the training series.
  static ObservationNorms from_series(const ExogenousSeries& series);
  void validate() const;

  bool operator==(const ObservationNorms&) const = default;
};

Observation build_observation(const ExogenousRecord& exo, const PlantState& state, const ObservationNorms& norms);

struct RewardParams {
  double a = 1.0 / 10.0;  // per EUR
  double b = 1.0 / 5e5;   // per W
  void validate() const;
};

struct RewardTerms {
  double l_cost_eur = 0.0;    // grid exchange and gas over the step
  double l_comfort_w = 0.0;   // |thermal demand - thermal production|
};

RewardTerms reward_terms(const StepOutputs& out, const ExogenousRecord& exo, double gas_price);

/// -(a L_cost + b L_comfort) - shield_cost
double reward(const StepOutputs& out, const ExogenousRecord& exo, const RewardParams& params, double gas_price,
              double shield_cost = 0.0);

/// Plant driven by a series cursor. Wraps at the end of the series: that
/// step reports done and the plant is reset.
class MesEnv {
 public:
  MesEnv(std::shared_ptr<const ExogenousSeries> series, PlantConfig plant, ObservationNorms norms,
         RewardParams reward);

  struct StepInfo {
    Transition transition;
    StepOutputs outputs;
    RewardTerms terms;
    ExogenousRecord exo;
  };

  void reset();
  StepInfo step(const Action& action);

  Observation observe() const { return build_observation(record(), state_, norms_); }
  const ExogenousRecord& record() const { return (*series_)[cursor_]; }
  const PlantState& state() const { return state_; }
  SafetyFeatures safety_features() const;
  std::size_t cursor() const { return cursor_; }
  const PlantConfig& plant() const { return plant_; }
  const ExogenousSeries& series() const { return *series_; }

  /// Restores a saved position (checkpoint resume).
  void restore(std::size_t cursor, const PlantState& state);

 private:
  std::shared_ptr<const ExogenousSeries> series_;
  PlantConfig plant_;
  ObservationNorms norms_;
  RewardParams reward_;
  std::size_t cursor_ = 0;
  PlantState state_;
};

}  // namespace safemes
