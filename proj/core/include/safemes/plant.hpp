#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "safemes/timeseries.hpp"

namespace safemes {

/// Positions of the five set-points inside an Action.
enum class ActionIndex : std::size_t { kBoiler = 0, kHeatPump = 1, kChp = 2, kTess = 3, kBess = 4 };

inline constexpr std::size_t kActionDim = 5;

/// Raw agent action, every component scaled to [-1, +1].
struct Action {
  std::array<double, kActionDim> values{};

  double& operator[](ActionIndex i) { return values[static_cast<std::size_t>(i)]; }
  double operator[](ActionIndex i) const { return values[static_cast<std::size_t>(i)]; }

  bool operator==(const Action&) const = default;
};

/// Power envelope of one asset. Storage uses the signed bounds, everything
/// else the nominal power and minimum fraction.
struct AssetSpec {
  std::string name;
  double p_nom_th = 0.0;       // MW_th
  double p_nom_el = 0.0;       // MW_e
  double p_min_frac = 0.0;     // fraction of nominal when on
  double e_nom = 0.0;          // MWh, storage only
  double p_min_signed = 0.0;   // MW, storage only (charge is negative)
  double p_max_signed = 0.0;   // MW, storage only (discharge is positive)

  double q_min() const { return p_min_frac * p_nom_th; }
  double q_max() const { return p_nom_th; }
};

struct PlantConfig {
  AssetSpec boiler{"boiler", 2.0, 0.0, 0.10};
  AssetSpec heat_pump{"heat_pump", 1.0, 0.0, 0.25};
  AssetSpec chp{"chp", 1.0, 0.8, 0.50};
  AssetSpec tess{"tess", 0.0, 0.0, 0.0, 3.5, -0.5, 0.5};
  AssetSpec bess{"bess", 0.0, 0.0, 0.0, 2.0, -0.5, 0.5};
  AssetSpec wind{"wind", 0.0, 0.8, 0.015};
  AssetSpec solar{"solar", 0.0, 1.0, 0.0};
  AssetSpec transformer{"transformer"};

  double boiler_eff = 0.90;
  double chp_th_eff = 0.45;
  double chp_el_eff = 0.36;
  double hp_cop_max = 4.5;
  double carnot_fraction = 0.5;
  double tess_loss_per_step = 0.001;
  double bess_roundtrip_eff = 0.92;
  double gas_price = 35.0;  // EUR/MWh

  double off_threshold = -0.6;
  double initial_soc = 0.5;
  double t_cond_c = 70.0;
  double t_return_boiler_c = 60.0;
  double tess_t_min_c = 60.0;
  double tess_t_max_c = 90.0;

  /// Throws Error if any invariant is violated.
  void validate() const;
};

struct PlantState {
  double soc_tess = 0.5;
  double soc_bess = 0.5;
  double t_tess_mean = 75.0;
  double t_return_boiler = 60.0;
  double t_evap = 10.0;
  double t_cond = 70.0;

  bool operator==(const PlantState&) const = default;
};

/// Realized powers of one step. TESS/BESS are positive when discharging,
/// p_grid positive when importing.
struct StepOutputs {
  double q_boil = 0.0;
  double q_hp = 0.0;
  double q_chp = 0.0;
  double q_tess = 0.0;
  double p_hp = 0.0;
  double p_chp = 0.0;
  double p_bess = 0.0;
  double p_wind = 0.0;
  double p_solar = 0.0;
  double p_grid = 0.0;
  double gas_power = 0.0;

  double thermal_production() const { return q_boil + q_hp + q_chp + q_tess; }
};

/// Set-points after decoding the raw action onto the asset envelopes.
struct DecodedAction {
  bool boiler_on = false;
  bool hp_on = false;
  bool chp_on = false;
  double boiler_q = 0.0;   // MW_th
  double hp_q = 0.0;       // MW_th at full COP
  double chp_q = 0.0;      // MW_th
  double tess_q = 0.0;     // MW_th, discharge positive
  double bess_p = 0.0;     // MW_e, discharge positive
};

struct StepResult {
  PlantState state;
  StepOutputs outputs;
};

PlantConfig default_plant_config();

PlantState reset(const PlantConfig& config, std::uint64_t seed = 0);

DecodedAction decode_action(const Action& raw, const PlantConfig& config);

/// Semi-continuous decode of one on/off asset: OFF below the threshold,
/// otherwise linear onto [q_min, q_max].
double decode_semicontinuous(double raw, const AssetSpec& asset, double off_threshold);

/// Inverse of decode_semicontinuous for q in {0} or [q_min, q_max].
double encode_semicontinuous(double q, const AssetSpec& asset, double off_threshold);

/// Linear decode of a storage component onto [p_min_signed, p_max_signed].
double decode_storage(double raw, const AssetSpec& asset);

/// Carnot-fraction COP, capped at cop_max and floored at 1.
double cop_from_temperatures(double t_cond_c, double t_evap_c, double carnot_fraction, double cop_max);

/// COP for the current condenser temperature and the record's ambient air.
double hp_cop(const PlantState& state, const ExogenousRecord& exo, const PlantConfig& config);

/// Advance the plant by one 15-minute step. Pure.
StepResult step(const PlantState& state, const Action& action, const ExogenousRecord& exo,
                const PlantConfig& config);

}  // namespace safemes
