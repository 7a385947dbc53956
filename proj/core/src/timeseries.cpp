#include "safemes/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

namespace safemes {

namespace {

std::int64_t positive_mod(std::int64_t a, std::int64_t m) {
  std::int64_t r = a % m;
  return r < 0 ? r + m : r;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string strip(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && s[i] == ' ') ++i;
  return s.substr(i);
}

}  // namespace

int ExogenousRecord::hour_of_day() const {
  return static_cast<int>(positive_mod(index, kStepsPerDay) / 4);
}

int ExogenousRecord::day_of_week() const {
  const std::int64_t day = (index - positive_mod(index, kStepsPerDay)) / kStepsPerDay;
  return static_cast<int>(positive_mod(day, 7));
}

ExogenousSeries::ExogenousSeries(std::vector<ExogenousRecord> records)
    : records_(std::move(records)) {
  if (records_.empty()) throw Error("exogenous series is empty");
  for (std::size_t k = 0; k < records_.size(); ++k) {
    const auto& r = records_[k];
    const std::size_t row = k + 1;
    const double values[] = {r.thermal_demand_mw, r.electrical_demand_mw, r.wind_potential,
                             r.solar_potential,   r.price_eur_mwh,        r.ambient_temp_c};
    for (double v : values) {
      if (!std::isfinite(v)) throw Error("non-finite value at row " + std::to_string(row));
    }
    if (r.thermal_demand_mw < 0.0 || r.electrical_demand_mw < 0.0) {
      throw Error("negative demand at row " + std::to_string(row));
    }
    if (r.wind_potential < 0.0 || r.wind_potential > 1.0 || r.solar_potential < 0.0 ||
        r.solar_potential > 1.0) {
      throw Error("infeed potential outside [0,1] at row " + std::to_string(row));
    }
    if (k > 0 && r.index != records_[k - 1].index + 1) {
      throw Error("gap at index " + std::to_string(records_[k - 1].index + 1));
    }
  }
}

double ExogenousSeries::mean_thermal_demand() const {
  double sum = 0.0;
  for (const auto& r : records_) sum += r.thermal_demand_mw;
  return sum / static_cast<double>(records_.size());
}

ExogenousSeries read_series(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("series file is empty");
  if (strip(line) != kSeriesCsvHeader) throw Error("unexpected series header: " + strip(line));

  std::vector<ExogenousRecord> records;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    line = strip(line);
    if (line.empty()) continue;
    ++row;
    auto fields = split_csv_line(line);
    if (fields.size() != 7) {
      throw Error("malformed row " + std::to_string(row) + ": expected 7 columns, got " +
                  std::to_string(fields.size()));
    }
    ExogenousRecord r;
    try {
      double idx = parse_double(fields[0]);
      if (idx != std::floor(idx)) throw Error("index is not an integer");
      r.index = static_cast<std::int64_t>(idx);
      r.thermal_demand_mw = parse_double(fields[1]);
      r.electrical_demand_mw = parse_double(fields[2]);
      r.wind_potential = parse_double(fields[3]);
      r.solar_potential = parse_double(fields[4]);
      r.price_eur_mwh = parse_double(fields[5]);
      r.ambient_temp_c = parse_double(fields[6]);
    } catch (const Error& e) {
      throw Error("malformed row " + std::to_string(row) + ": " + e.what());
    }
    records.push_back(r);
  }
  return ExogenousSeries(std::move(records));
}

ExogenousSeries load_series(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open series file: " + path.string());
  return read_series(in);
}

void write_series(const ExogenousSeries& series, std::ostream& out) {
  out << kSeriesCsvHeader << '\n';
  for (const auto& r : series.records()) {
    out << r.index << ',' << format_double(r.thermal_demand_mw) << ','
        << format_double(r.electrical_demand_mw) << ',' << format_double(r.wind_potential) << ','
        << format_double(r.solar_potential) << ',' << format_double(r.price_eur_mwh) << ','
        << format_double(r.ambient_temp_c) << '\n';
  }
}

void write_series(const ExogenousSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write series file: " + path.string());
  write_series(series, out);
}

ExogenousSeries synth_profiles(std::uint64_t seed, std::size_t n_steps) {
  if (n_steps == 0) throw Error("synth_profiles: n_steps must be >= 1");
  constexpr double kTwoPi = 2.0 * std::numbers::pi;

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  std::vector<ExogenousRecord> records(n_steps);
  double wind_state = 0.0;
  double temp_noise = 0.0;
  double price_noise = 0.0;
  double cloudiness = 0.8;
  for (std::size_t k = 0; k < n_steps; ++k) {
    ExogenousRecord& r = records[k];
    r.index = static_cast<std::int64_t>(k);
    const double hour = static_cast<double>(k % kStepsPerDay) * kStepHours;
    const std::size_t day = k / kStepsPerDay;
    const bool weekend = (day % 7) >= 5;
    const double season = std::cos(kTwoPi * static_cast<double>(day % 365) / 365.0);  // +1 in January

    // Thermal demand: morning-heavy daily sinusoid, lower on weekends.
    const double daily_th = std::sin(kTwoPi * (hour - 4.0) / 24.0);
    const double weekly_th = weekend ? 0.85 : 1.0;
    const double th = (0.8 + 0.25 * daily_th) * weekly_th + 0.04 * normal(rng);
    r.thermal_demand_mw = std::clamp(th, 0.0, 2.5);

    const double daily_el = std::sin(kTwoPi * (hour - 8.0) / 24.0);
    const double weekly_el = weekend ? 0.8 : 1.0;
    const double el = (0.6 + 0.2 * daily_el) * weekly_el + 0.03 * normal(rng);
    r.electrical_demand_mw = std::max(el, 0.0);

    // Wind: AR(1) noise squashed into [0, 1].
    wind_state = 0.985 * wind_state + std::sqrt(1.0 - 0.985 * 0.985) * normal(rng);
    r.wind_potential = std::clamp(0.35 + 0.22 * wind_state, 0.0, 1.0);

    // Solar: clipped daylight sinusoid, longer and stronger days in summer, daily cloud factor.
    if (k % kStepsPerDay == 0) cloudiness = 0.5 + 0.5 * uniform(rng);
    const double daylight = std::sin(std::numbers::pi * (hour - 6.0) / 12.0);
    r.solar_potential = std::clamp(daylight * (0.65 - 0.3 * season) * cloudiness, 0.0, 1.0);

    // Day-ahead price: hourly blocks with morning and evening peaks and a
    // midday trough that deepens with solar infeed (occasionally negative).
    if (k % 4 == 0) price_noise = 0.6 * price_noise + 9.0 * normal(rng);
    const double h = std::floor(hour);
    const double peaks = 38.0 * std::exp(-0.5 * std::pow((h - 8.0) / 1.8, 2)) +
                         60.0 * std::exp(-0.5 * std::pow((h - 19.0) / 1.8, 2));
    const double solar_hour = std::clamp(std::sin(std::numbers::pi * (h + 0.5 - 6.0) / 12.0), 0.0, 1.0) *
                              (0.65 - 0.3 * season) * cloudiness;
    r.price_eur_mwh = 105.0 + peaks - 135.0 * solar_hour - (weekend ? 15.0 : 0.0) + 12.0 * season + price_noise;

    temp_noise = 0.97 * temp_noise + 0.3 * normal(rng);
    r.ambient_temp_c = 10.0 - 8.0 * season + 4.0 * std::sin(kTwoPi * (hour - 9.0) / 24.0) + temp_noise;
  }
  return ExogenousSeries(std::move(records));
}

ExogenousSeries window(const ExogenousSeries& series, std::size_t start, std::size_t len) {
  if (len == 0 || start > series.size() || len > series.size() - start) {
    throw Error("window out of range: start=" + std::to_string(start) + " len=" +
                std::to_string(len) + " size=" + std::to_string(series.size()));
  }
  std::vector<ExogenousRecord> out(series.records().begin() + static_cast<std::ptrdiff_t>(start),
                                   series.records().begin() + static_cast<std::ptrdiff_t>(start + len));
  for (std::size_t i = 0; i < out.size(); ++i) out[i].index = static_cast<std::int64_t>(i);
  return ExogenousSeries(std::move(out));
}

}  // namespace safemes
