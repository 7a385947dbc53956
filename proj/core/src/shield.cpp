#include "safemes/shield.hpp"

namespace safemes {

ShieldKind parse_shield(std::string_view name) {
  if (name == "none") return ShieldKind::kNone;
  if (name == "safe_fallback") return ShieldKind::kSafeFallback;
  if (name == "give_safe") return ShieldKind::kGiveSafe;
  throw Error("unknown shield: " + std::string(name));
}

const char* shield_name(ShieldKind kind) {
  switch (kind) {
    case ShieldKind::kNone: return "none";
    case ShieldKind::kSafeFallback: return "safe_fallback";
    case ShieldKind::kGiveSafe: return "give_safe";
  }
  return "?";
}

void ShieldConfig::validate() const {
  if (max_retries < 1) throw Error("shield: max_retries must be >= 1");
}

RetriesExhausted::RetriesExhausted(int retries)
    : Error("give_safe: no feasible action after " + std::to_string(retries) + " retries"), retries_(retries) {}

double give_safe_reward(const Action& rejected, const ShieldConfig& cfg) {
  const bool bonus = rejected[ActionIndex::kChp] > cfg.chp_bonus_threshold;
  return -cfg.cost_givesafe_base + (bonus ? cfg.cost_givesafe_chp_bonus : 0.0);
}

ShieldOutcome unshielded_step(const Observation& s, const ProposeFn& propose, const EnvStepFn& env_step) {
  ShieldOutcome out;
  out.proposed = propose();
  const Transition t = env_step(out.proposed);
  out.executed = ExperienceTuple{s, out.proposed, t.reward, t.s_next, t.done, false};
  return out;
}

ShieldOutcome safe_fallback_step(const Observation& s, const ProposeFn& propose, const EnvStepFn& env_step,
                                 const CheckFn& check, const FallbackFn& fallback, const ShieldConfig& cfg) {
  ShieldOutcome out;
  out.proposed = propose();
  Action safe = out.proposed;
  if (!check(out.proposed)) {
    out.rejections = 1;
    out.fallback_used = true;
    safe = fallback();
    if (!check(safe)) throw SafetyBreach("safe_fallback: fallback action fails the constraint check");
  }
  const Transition t = env_step(safe);
  out.executed = ExperienceTuple{s, safe, t.reward, t.s_next, t.done, false};
  if (out.fallback_used) {
    out.synthetic.push_back(ExperienceTuple{s, out.proposed, t.reward - cfg.cost_fallback, t.s_next, t.done, true});
  }
  return out;
}

ShieldOutcome give_safe_step(const Observation& s, const ProposeFn& propose, const EnvStepFn& env_step,
                             const CheckFn& check, const ShieldConfig& cfg, bool done_flag) {
  ShieldOutcome out;
  out.proposed = propose();
  Action a = out.proposed;
  while (!check(a)) {
    out.synthetic.push_back(ExperienceTuple{s, a, give_safe_reward(a, cfg), s, done_flag, true});
    if (++out.rejections >= cfg.max_retries) throw RetriesExhausted(out.rejections);
    a = propose();
  }
  const Transition t = env_step(a);
  out.executed = ExperienceTuple{s, a, t.reward, t.s_next, t.done, false};
  return out;
}

}  // namespace safemes
