#include "safemes/mdp.hpp"

#include <algorithm>
#include <cmath>

namespace safemes {

ObservationNorms ObservationNorms::from_series(const ExogenousSeries& series) {
  ObservationNorms n{0.0, 0.0, 0.0, 0.0, 0.0};
  for (const auto& r : series.records()) {
    n.thermal_mw = std::max(n.thermal_mw, r.thermal_demand_mw);
    n.electrical_mw = std::max(n.electrical_mw, r.electrical_demand_mw);
    n.wind = std::max(n.wind, r.wind_potential);
    n.solar = std::max(n.solar, r.solar_potential);
    n.price_eur_mwh = std::max(n.price_eur_mwh, std::abs(r.price_eur_mwh));
  }
  // A feature that never moves keeps a unit scale.
  for (double* v : {&n.thermal_mw, &n.electrical_mw, &n.wind, &n.solar, &n.price_eur_mwh}) {
    if (*v <= 0.0) *v = 1.0;
  }
  return n;
}

void ObservationNorms::validate() const {
  for (double v : {thermal_mw, electrical_mw, wind, solar, price_eur_mwh}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error("observation norms must be positive and finite");
  }
}

Observation build_observation(const ExogenousRecord& exo, const PlantState& state, const ObservationNorms& norms) {
  norms.validate();
  Observation o;
  o.values = {exo.thermal_demand_mw / norms.thermal_mw,
              exo.electrical_demand_mw / norms.electrical_mw,
              exo.wind_potential / norms.wind,
              exo.solar_potential / norms.solar,
              exo.price_eur_mwh / norms.price_eur_mwh,
              state.soc_tess,
              state.soc_bess,
              exo.hour_of_day() / 23.0,
              exo.day_of_week() / 6.0};
  for (double v : o.values) {
    if (!std::isfinite(v)) throw Error("observation has a non-finite component");
  }
  return o;
}

void RewardParams::validate() const {
  if (!(a > 0.0) || !(b > 0.0)) throw Error("reward scaling factors a and b must be positive");
}

RewardTerms reward_terms(const StepOutputs& out, const ExogenousRecord& exo, double gas_price) {
  RewardTerms t;
  t.l_cost_eur = kStepHours * (out.p_grid * exo.price_eur_mwh + out.gas_power * gas_price);
  t.l_comfort_w = std::abs(exo.thermal_demand_mw - out.thermal_production()) * 1e6;
  return t;
}

double reward(const StepOutputs& out, const ExogenousRecord& exo, const RewardParams& params, double gas_price,
              double shield_cost) {
  const RewardTerms t = reward_terms(out, exo, gas_price);
  return -(params.a * t.l_cost_eur + params.b * t.l_comfort_w) - shield_cost;
}

MesEnv::MesEnv(std::shared_ptr<const ExogenousSeries> series, PlantConfig plant, ObservationNorms norms,
               RewardParams reward)
    : series_(std::move(series)), plant_(std::move(plant)), norms_(norms), reward_(reward) {
  if (!series_) throw Error("environment needs a series");
  plant_.validate();
  norms_.validate();
  reward_.validate();
  reset();
}

void MesEnv::reset() {
  cursor_ = 0;
  state_ = safemes::reset(plant_);
}

SafetyFeatures MesEnv::safety_features() const {
  return SafetyFeatures{record().ambient_temp_c, state_.soc_tess, state_.soc_bess};
}

void MesEnv::restore(std::size_t cursor, const PlantState& state) {
  if (cursor >= series_->size()) throw Error("environment cursor out of range");
  cursor_ = cursor;
  state_ = state;
}

MesEnv::StepInfo MesEnv::step(const Action& action) {
  StepInfo info;
  info.exo = record();
  const StepResult r = safemes::step(state_, action, info.exo, plant_);
  info.outputs = r.outputs;
  info.terms = reward_terms(r.outputs, info.exo, plant_.gas_price);
  info.transition.reward = -(reward_.a * info.terms.l_cost_eur + reward_.b * info.terms.l_comfort_w);

  const std::size_t next = cursor_ + 1;
  info.transition.done = next >= series_->size();
  const std::size_t next_cursor = info.transition.done ? 0 : next;
  info.transition.s_next = build_observation((*series_)[next_cursor], r.state, norms_);
  if (info.transition.done) {
    reset();
  } else {
    cursor_ = next_cursor;
    state_ = r.state;
  }
  return info;
}

}  // namespace safemes
