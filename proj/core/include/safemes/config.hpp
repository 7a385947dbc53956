#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "safemes/agents.hpp"
#include "safemes/forest.hpp"
#include "safemes/mdp.hpp"
#include "safemes/plant.hpp"
#include "safemes/shield.hpp"

namespace safemes {

enum class AgentKind { kTd3, kRandom };

AgentKind parse_agent(std::string_view name);
const char* agent_name(AgentKind kind);

/// Preset that goes with a shield unless one is chosen explicitly.
std::string default_preset(ShieldKind shield);

struct SafetySettings {
  double q_tol_fraction = 0.15;   // of the mean thermal demand per step
  double holdout_fraction = 0.25;
  std::size_t log_steps = 10000;
  double log_noise_std = 0.8;
  std::uint64_t log_seed = 11;
  ForestParams forest;
  std::string surrogates_path;    // empty: collect a log and fit at start-up
};

struct HarnessSettings {
  std::uint64_t seed = 1;
  std::uint64_t data_seed = 1;
  std::int64_t budget = 100000;
  std::int64_t eval_interval = 5000;
  std::size_t series_steps = 35040;  // one year of quarter hours
  std::string series_path;           // empty: synthetic series from data_seed
  std::string eval_series_path;      // empty: synthetic week from a separate stream
  std::size_t eval_start = 0;
  std::size_t eval_len = 672;
  RewardParams reward;
  int n_runs = 5;
  int workers = 0;                   // 0: hardware concurrency
  bool plots = true;
};

struct RunConfig {
  PlantConfig plant;
  SafetySettings safety;
  ShieldKind shield = ShieldKind::kSafeFallback;
  ShieldConfig shield_cfg;
  AgentKind agent = AgentKind::kTd3;
  Td3Hyper hyper;
  HarnessSettings harness;

  void validate() const;
};

RunConfig default_run_config();

/// INI text with sections plant, safety, shield, agent, harness. Keys that
/// are absent keep their defaults; unknown keys are an error.
RunConfig read_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);
void write_config(const RunConfig& cfg, std::ostream& out);

}  // namespace safemes
