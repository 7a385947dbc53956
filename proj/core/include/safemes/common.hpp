#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace safemes {

/// Engine used for every seeded stream in the project.
using Rng = std::mt19937_64;

/// Length of one control step in hours (15 minutes).
inline constexpr double kStepHours = 0.25;

/// Steps in one day / one week at 15-minute resolution.
inline constexpr int kStepsPerDay = 96;
inline constexpr int kStepsPerWeek = 7 * kStepsPerDay;

/// Raised for malformed inputs, violated preconditions and bad configuration.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double value);

/// Strict parse of a full string as a double; throws Error otherwise.
double parse_double(const std::string& text);

/// Derive an independent seed for a sub-stream (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace safemes
