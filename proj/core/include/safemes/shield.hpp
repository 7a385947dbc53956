#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "safemes/experience.hpp"

namespace safemes {

enum class ShieldKind { kNone, kSafeFallback, kGiveSafe };

ShieldKind parse_shield(std::string_view name);
const char* shield_name(ShieldKind kind);

struct ShieldConfig {
  double cost_fallback = 1.0;            // subtracted from r for the rejected action's tuple
  double cost_givesafe_base = 50.0;      // rejected action's reward is -base (+ bonus)
  double cost_givesafe_chp_bonus = 10.0;
  double chp_bonus_threshold = 0.5;      // raw CHP action above this earns the bonus
  int max_retries = 1000;

  void validate() const;
};

/// What the plant reports after executing an action.
struct Transition {
  Observation s_next;
  double reward = 0.0;
  bool done = false;
};

/// Agent proposal for the current state; called again for every retry.
using ProposeFn = std::function<Action()>;
/// Constraint check of a candidate action in the current state.
using CheckFn = std::function<bool(const Action&)>;
/// Executes an action in the plant. Must only ever see checked actions.
using EnvStepFn = std::function<Transition(const Action&)>;
/// Known-safe action for the current state.
using FallbackFn = std::function<Action()>;

struct ShieldOutcome {
  ExperienceTuple executed;
  std::vector<ExperienceTuple> synthetic;
  Action proposed;          // first proposal of the agent
  int rejections = 0;       // failed checks this step
  bool fallback_used = false;
};

/// The fallback itself failed the check; execution must stop.
class SafetyBreach : public Error {
 public:
  using Error::Error;
};

class RetriesExhausted : public Error {
 public:
  explicit RetriesExhausted(int retries);
  int retries() const { return retries_; }

 private:
  int retries_;
};

/// Reward of a rejected GiveSafe proposal: -base, plus the CHP bonus.
double give_safe_reward(const Action& rejected, const ShieldConfig& cfg);

/// Executes the proposal as-is.
ShieldOutcome unshielded_step(const Observation& s, const ProposeFn& propose, const EnvStepFn& env_step);

/// Checked proposal runs as-is; otherwise the fallback runs and the rejected
/// proposal is also returned as (s, a, r - c, s', d).
ShieldOutcome safe_fallback_step(const Observation& s, const ProposeFn& propose, const EnvStepFn& env_step,
                                 const CheckFn& check, const FallbackFn& fallback, const ShieldConfig& cfg);

/// Rejected proposals yield (s, a, c, s, d) without touching the plant and
/// the agent proposes again; the first passing proposal is executed once.
ShieldOutcome give_safe_step(const Observation& s, const ProposeFn& propose, const EnvStepFn& env_step,
                             const CheckFn& check, const ShieldConfig& cfg, bool done_flag = false);

}  // namespace safemes
