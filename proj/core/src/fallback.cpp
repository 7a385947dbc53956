#include "safemes/fallback.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

namespace safemes {

namespace {

double storage_idle_raw(const AssetSpec& a) {
  const double span = a.p_max_signed - a.p_min_signed;
  if (span <= 0.0) return 0.0;
  return std::clamp(2.0 * (0.0 - a.p_min_signed) / span - 1.0, -1.0, 1.0);
}

}  // namespace

FallbackDecision fallback_policy(double thermal_demand_mw, const PlantConfig& config) {
  if (!(thermal_demand_mw >= 0.0) || !std::isfinite(thermal_demand_mw)) {
    throw Error("fallback policy: thermal demand must be finite and >= 0");
  }
  const double chp_min = config.chp.q_min();
  const double chp_max = config.chp.q_max();
  const double boil_min = config.boiler.q_min();
  const double boil_max = config.boiler.q_max();
  const double demand = thermal_demand_mw;

  FallbackDecision d;
  if (demand < chp_min) {
    d.q_chp = 0.0;
    // Below the boiler's minimum load pick the nearer of {0, q_min}.
    d.q_boiler = demand >= boil_min ? demand : (demand >= 0.5 * boil_min ? boil_min : 0.0);
  } else if (demand < chp_max) {
    d.q_chp = demand;
    d.q_boiler = 0.0;
  } else {
    d.q_chp = chp_max;
    d.q_boiler = demand - chp_max;
    if (d.q_boiler > 0.0 && d.q_boiler < boil_min) {
      // Boiler cannot run this low: shift the remainder back onto the CHP.
      d.q_boiler = boil_min;
      d.q_chp = std::max(chp_min, demand - boil_min);
    } else if (d.q_boiler > boil_max) {
      d.q_boiler = boil_max;
      d.saturated = true;
      spdlog::warn("fallback policy saturated: demand {} MW_th exceeds boiler + CHP capacity", demand);
    }
  }

  d.action[ActionIndex::kBoiler] = encode_semicontinuous(d.q_boiler, config.boiler, config.off_threshold);
  d.action[ActionIndex::kChp] = encode_semicontinuous(d.q_chp, config.chp, config.off_threshold);
  d.action[ActionIndex::kHeatPump] = -1.0;
  d.action[ActionIndex::kTess] = storage_idle_raw(config.tess);
  d.action[ActionIndex::kBess] = storage_idle_raw(config.bess);
  return d;
}

}  // namespace safemes
