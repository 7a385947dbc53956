#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "safemes/common.hpp"

namespace safemes {

/// Exogenous drivers of one 15-minute step.
struct ExogenousRecord {
  std::int64_t index = 0;            // step count, 15-min steps
  double thermal_demand_mw = 0.0;    // MW_th
  double electrical_demand_mw = 0.0; // MW_e
  double wind_potential = 0.0;       // fraction of nominal
  double solar_potential = 0.0;      // fraction of nominal
  double price_eur_mwh = 0.0;
  double ambient_temp_c = 0.0;

  /// Hour of day in [0, 23]; index 0 is Monday 00:00.
  int hour_of_day() const;
  /// Day of week in [0, 6], Monday = 0.
  int day_of_week() const;

  bool operator==(const ExogenousRecord&) const = default;
};

/// Gap-free, non-empty sequence of exogenous records at a fixed 0.25 h step.
/// Immutable after construction.
class ExogenousSeries {
 public:
  /// Validates every invariant; throws Error naming the offending row.
  explicit ExogenousSeries(std::vector<ExogenousRecord> records);

  std::size_t size() const { return records_.size(); }
  double step_hours() const { return kStepHours; }
  const ExogenousRecord& operator[](std::size_t i) const { return records_[i]; }
  const ExogenousRecord& at(std::size_t i) const { return records_.at(i); }
  std::span<const ExogenousRecord> records() const { return records_; }

  double mean_thermal_demand() const;

  bool operator==(const ExogenousSeries&) const = default;

 private:
  std::vector<ExogenousRecord> records_;
};

inline constexpr const char* kSeriesCsvHeader =
    "index,thermal_demand_mw,electrical_demand_mw,wind_potential,solar_potential,"
    "price_eur_mwh,ambient_temp_c";

ExogenousSeries load_series(const std::filesystem::path& path);
ExogenousSeries read_series(std::istream& in);

void write_series(const ExogenousSeries& series, std::ostream& out);
void write_series(const ExogenousSeries& series, const std::filesystem::path& path);

/// Synthetic demand/weather/price year with daily and weekly structure.
/// Pure function of (seed, n_steps).
ExogenousSeries synth_profiles(std::uint64_t seed, std::size_t n_steps);

/// Records [start, start+len) re-based to index 0.
ExogenousSeries window(const ExogenousSeries& series, std::size_t start, std::size_t len);

}  // namespace safemes
