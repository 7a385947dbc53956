#include "safemes/plant.hpp"

#include <algorithm>
#include <cmath>

namespace safemes {

namespace {

constexpr double kKelvin = 273.15;

void require_unit(double v, const char* what) {
  if (!(v > 0.0 && v <= 1.0)) throw Error(std::string("plant config: ") + what + " must be in (0,1]");
}

void validate_asset(const AssetSpec& a) {
  if (a.p_min_frac < 0.0 || a.p_min_frac > 1.0) throw Error("asset " + a.name + ": p_min_frac outside [0,1]");
  if (a.e_nom < 0.0) throw Error("asset " + a.name + ": negative e_nom");
  if (a.p_min_signed > a.p_max_signed) throw Error("asset " + a.name + ": p_min_signed > p_max_signed");
  if (a.p_nom_th < 0.0 || a.p_nom_el < 0.0) throw Error("asset " + a.name + ": negative nominal power");
}

struct StorageMove {
  double power;  // realized, discharge positive
  double soc;    // after the move, before standing loss
};

// Moves the SOC by the requested power and curtails the power to whatever
// the [0,1] clamp admits. charge_eff scales energy taken in on charge.
StorageMove move_storage(double soc, double power, double e_nom, double charge_eff) {
  if (e_nom <= 0.0 || power == 0.0) return {0.0, soc};
  if (power > 0.0) {
    const double next = soc - power * kStepHours / e_nom;
    if (next >= 0.0) return {power, next};
    return {soc * e_nom / kStepHours, 0.0};
  }
  const double next = soc - power * charge_eff * kStepHours / e_nom;
  if (next <= 1.0) return {power, next};
  return {-(1.0 - soc) * e_nom / (kStepHours * charge_eff), 1.0};
}

}  // namespace

void PlantConfig::validate() const {
  for (const AssetSpec* a : {&boiler, &heat_pump, &chp, &tess, &bess, &wind, &solar}) validate_asset(*a);
  require_unit(boiler_eff, "boiler_eff");
  require_unit(chp_th_eff, "chp_th_eff");
  require_unit(chp_el_eff, "chp_el_eff");
  require_unit(bess_roundtrip_eff, "bess_roundtrip_eff");
  require_unit(carnot_fraction, "carnot_fraction");
  if (!(hp_cop_max >= 1.0)) throw Error("plant config: hp_cop_max must be >= 1");
  if (tess_loss_per_step < 0.0 || tess_loss_per_step >= 1.0) throw Error("plant config: tess_loss_per_step outside [0,1)");
  if (!(off_threshold > -1.0 && off_threshold < 1.0)) throw Error("plant config: off_threshold must lie in (-1,1)");
  if (initial_soc < 0.0 || initial_soc > 1.0) throw Error("plant config: initial_soc outside [0,1]");
  if (gas_price < 0.0) throw Error("plant config: negative gas_price");
}

PlantConfig default_plant_config() { return PlantConfig{}; }

PlantState reset(const PlantConfig& config, std::uint64_t /*seed*/) {
  config.validate();
  PlantState s;
  s.soc_tess = config.initial_soc;
  s.soc_bess = config.initial_soc;
  s.t_tess_mean = config.tess_t_min_c + (config.tess_t_max_c - config.tess_t_min_c) * s.soc_tess;
  s.t_return_boiler = config.t_return_boiler_c;
  s.t_cond = config.t_cond_c;
  s.t_evap = 10.0;
  return s;
}

double decode_semicontinuous(double raw, const AssetSpec& asset, double off_threshold) {
  if (!(raw >= -1.0 && raw <= 1.0)) throw Error("action component out of range [-1,1]");
  if (raw < off_threshold) return 0.0;
  const double frac = (raw - off_threshold) / (1.0 - off_threshold);
  return asset.q_min() + frac * (asset.q_max() - asset.q_min());
}

double encode_semicontinuous(double q, const AssetSpec& asset, double off_threshold) {
  if (q == 0.0) return -1.0;
  if (q < asset.q_min() || q > asset.q_max()) throw Error("cannot encode " + asset.name + " power outside its envelope");
  const double span = asset.q_max() - asset.q_min();
  const double frac = span > 0.0 ? (q - asset.q_min()) / span : 1.0;
  return std::min(1.0, off_threshold + frac * (1.0 - off_threshold));
}

double decode_storage(double raw, const AssetSpec& asset) {
  if (!(raw >= -1.0 && raw <= 1.0)) throw Error("action component out of range [-1,1]");
  return asset.p_min_signed + 0.5 * (raw + 1.0) * (asset.p_max_signed - asset.p_min_signed);
}

DecodedAction decode_action(const Action& raw, const PlantConfig& config) {
  DecodedAction d;
  d.boiler_q = decode_semicontinuous(raw[ActionIndex::kBoiler], config.boiler, config.off_threshold);
  d.hp_q = decode_semicontinuous(raw[ActionIndex::kHeatPump], config.heat_pump, config.off_threshold);
  d.chp_q = decode_semicontinuous(raw[ActionIndex::kChp], config.chp, config.off_threshold);
  d.boiler_on = raw[ActionIndex::kBoiler] >= config.off_threshold;
  d.hp_on = raw[ActionIndex::kHeatPump] >= config.off_threshold;
  d.chp_on = raw[ActionIndex::kChp] >= config.off_threshold;
  d.tess_q = decode_storage(raw[ActionIndex::kTess], config.tess);
  d.bess_p = decode_storage(raw[ActionIndex::kBess], config.bess);
  return d;
}

double cop_from_temperatures(double t_cond_c, double t_evap_c, double carnot_fraction, double cop_max) {
  if (!(t_cond_c > t_evap_c)) throw Error("degenerate heat-pump temperatures: t_cond must exceed t_evap");
  const double carnot = (t_cond_c + kKelvin) / (t_cond_c - t_evap_c);
  return std::clamp(carnot_fraction * carnot, 1.0, cop_max);
}

double hp_cop(const PlantState& state, const ExogenousRecord& exo, const PlantConfig& config) {
  return cop_from_temperatures(state.t_cond, exo.ambient_temp_c, config.carnot_fraction, config.hp_cop_max);
}

StepResult step(const PlantState& state, const Action& action, const ExogenousRecord& exo,
                const PlantConfig& config) {
  for (double v : action.values) {
    if (!std::isfinite(v)) throw Error("non-finite action component");
  }
  const double exo_values[] = {exo.thermal_demand_mw, exo.electrical_demand_mw, exo.wind_potential,
                               exo.solar_potential,   exo.price_eur_mwh,        exo.ambient_temp_c};
  for (double v : exo_values) {
    if (std::isnan(v)) throw Error("NaN in exogenous record");
  }

  const DecodedAction d = decode_action(action, config);
  StepResult result;
  StepOutputs& out = result.outputs;

  out.q_boil = d.boiler_q;

  if (d.hp_on) {
    const double cop = hp_cop(state, exo, config);
    const double q_min = config.heat_pump.q_min();
    out.q_hp = q_min + (d.hp_q - q_min) * cop / config.hp_cop_max;
    out.p_hp = out.q_hp / cop;
  }

  out.q_chp = d.chp_q;
  out.p_chp = d.chp_q * config.chp_el_eff / config.chp_th_eff;

  const StorageMove tess = move_storage(state.soc_tess, d.tess_q, config.tess.e_nom, 1.0);
  const StorageMove bess = move_storage(state.soc_bess, d.bess_p, config.bess.e_nom, config.bess_roundtrip_eff);
  out.q_tess = tess.power;
  out.p_bess = bess.power;

  out.p_wind = exo.wind_potential * config.wind.p_nom_el;
  out.p_solar = exo.solar_potential * config.solar.p_nom_el;
  out.gas_power = out.q_boil / config.boiler_eff + out.q_chp / config.chp_th_eff;
  out.p_grid = exo.electrical_demand_mw + out.p_hp - out.p_wind - out.p_solar - out.p_chp - out.p_bess;

  PlantState& next = result.state;
  next.soc_tess = tess.soc * (1.0 - config.tess_loss_per_step);
  next.soc_bess = bess.soc;
  next.t_tess_mean = config.tess_t_min_c + (config.tess_t_max_c - config.tess_t_min_c) * next.soc_tess;
  next.t_return_boiler = config.t_return_boiler_c;
  next.t_evap = exo.ambient_temp_c;
  next.t_cond = config.t_cond_c;
  return result;
}

}  // namespace safemes
