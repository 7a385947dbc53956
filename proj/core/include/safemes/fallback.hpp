#pragma once

#include "safemes/plant.hpp"

namespace safemes {

struct FallbackDecision {
  Action action;
  double q_chp = 0.0;     // MW_th the rule assigns to the CHP
  double q_boiler = 0.0;  // MW_th the rule assigns to the boiler
  bool saturated = false; // demand exceeded boiler + CHP capacity
};

/// Rule-based priority dispatch: CHP first inside its band, boiler for the
/// rest. Heat pump off, storage idle.
FallbackDecision fallback_policy(double thermal_demand_mw, const PlantConfig& config);

}  // namespace safemes
