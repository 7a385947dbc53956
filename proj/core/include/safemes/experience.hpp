#pragma once

#include <array>

#include "safemes/plant.hpp"

namespace safemes {

inline constexpr std::size_t kObservationDim = 9;

/// Normalized MDP state: demands, infeeds, price, storage SOCs, calendar.
struct Observation {
  std::array<double, kObservationDim> values{};

  double e_th() const { return values[0]; }
  double e_el() const { return values[1]; }
  double p_wind() const { return values[2]; }
  double p_solar() const { return values[3]; }
  double x_el() const { return values[4]; }
  double soc_tess() const { return values[5]; }
  double soc_bess() const { return values[6]; }
  double hour() const { return values[7]; }
  double dow() const { return values[8]; }

  bool operator==(const Observation&) const = default;
};

/// (s, a, r, s', d) record handed to a learner. Synthetic tuples describe
/// actions that were rejected and never executed by the plant.
struct ExperienceTuple {
  Observation s;
  Action a;
  double r = 0.0;
  Observation s_next;
  bool done = false;
  bool synthetic = false;

  bool operator==(const ExperienceTuple&) const = default;
};

}  // namespace safemes
