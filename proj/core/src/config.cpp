#include "safemes/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <type_traits>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace safemes {

AgentKind parse_agent(std::string_view name) {
  if (name == "td3") return AgentKind::kTd3;
  if (name == "random") return AgentKind::kRandom;
  throw Error("unknown agent: " + std::string(name));
}

const char* agent_name(AgentKind kind) { return kind == AgentKind::kTd3 ? "td3" : "random"; }

std::string default_preset(ShieldKind shield) {
  switch (shield) {
    case ShieldKind::kNone: return "unsafe";
    case ShieldKind::kSafeFallback: return "safefallback";
    case ShieldKind::kGiveSafe: return "givesafe";
  }
  return "safefallback";
}

void RunConfig::validate() const {
  plant.validate();
  shield_cfg.validate();
  hyper.validate();
  harness.reward.validate();
  if (!(safety.q_tol_fraction > 0.0)) throw Error("safety.q_tol_fraction must be positive");
  if (!(safety.holdout_fraction > 0.0 && safety.holdout_fraction <= 0.5))
    throw Error("safety.holdout_fraction must lie in (0, 0.5]");
  if (safety.log_steps < kMinLogRows) throw Error("safety.log_steps below the minimum log size");
  if (safety.log_noise_std < 0.0) throw Error("safety.log_noise_std must be >= 0");
  if (safety.forest.n_trees < 1 || safety.forest.max_depth < 1 || safety.forest.min_samples_leaf < 1)
    throw Error("safety forest parameters must be >= 1");
  if (harness.budget < 0) throw Error("harness.budget must be >= 0");
  if (harness.eval_interval < 1) throw Error("harness.eval_interval must be >= 1");
  if (harness.series_steps < 2) throw Error("harness.series_steps must be >= 2");
  if (harness.eval_len < 1) throw Error("harness.eval_len must be >= 1");
  if (harness.n_runs < 1) throw Error("harness.n_runs must be >= 1");
  if (harness.workers < 0) throw Error("harness.workers must be >= 0");
}

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.hyper = Td3Hyper::preset(default_preset(cfg.shield));
  return cfg;
}

namespace {

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

std::string to_text(double v) { return format_double(v); }
std::string to_text(bool v) { return v ? "true" : "false"; }
template <typename T>
std::string to_text(T v) requires std::is_integral_v<T> { return std::to_string(v); }
std::string to_text(const std::string& v) { return v; }

void from_text(const std::string& s, double& v) { v = parse_double(s); }
void from_text(const std::string& s, bool& v) {
  if (s == "true" || s == "1") v = true;
  else if (s == "false" || s == "0") v = false;
  else throw Error("expected a boolean, got '" + s + "'");
}
template <typename T>
void from_text(const std::string& s, T& v) requires std::is_integral_v<T> {
  const char* b = s.data();
  const char* e = b + s.size();
  if (!s.empty() && *b == '+') ++b;
  T out{};
  auto [p, ec] = std::from_chars(b, e, out);
  if (ec != std::errc() || p != e || b == e) throw Error("expected an integer, got '" + s + "'");
  v = out;
}
void from_text(const std::string& s, std::string& v) { v = s; }

using Registry = std::vector<std::pair<std::string, Field>>;  // "section.key" in write order

template <typename Proj>
void add(Registry& reg, std::string name, Proj proj) {
  reg.emplace_back(std::move(name),
                   Field{[proj](const RunConfig& c) { return to_text(proj(const_cast<RunConfig&>(c))); },
                         [proj](RunConfig& c, const std::string& s) { from_text(s, proj(c)); }});
}

void add_asset(Registry& reg, const std::string& prefix, AssetSpec PlantConfig::*asset,
               std::initializer_list<std::string> keys) {
  for (const auto& k : keys) {
    const std::string name = "plant." + prefix + "_" + k;
    if (k == "p_nom_th") add(reg, name, [asset](RunConfig& c) -> double& { return (c.plant.*asset).p_nom_th; });
    if (k == "p_nom_el") add(reg, name, [asset](RunConfig& c) -> double& { return (c.plant.*asset).p_nom_el; });
    if (k == "p_min_frac") add(reg, name, [asset](RunConfig& c) -> double& { return (c.plant.*asset).p_min_frac; });
    if (k == "e_nom") add(reg, name, [asset](RunConfig& c) -> double& { return (c.plant.*asset).e_nom; });
    if (k == "p_min") add(reg, name, [asset](RunConfig& c) -> double& { return (c.plant.*asset).p_min_signed; });
    if (k == "p_max") add(reg, name, [asset](RunConfig& c) -> double& { return (c.plant.*asset).p_max_signed; });
  }
}

#define SM_FIELD(reg, name, expr) add(reg, name, [](RunConfig& c) -> auto& { return expr; })

const Registry& registry() {
  static const Registry reg = [] {
    Registry r;
    add_asset(r, "boiler", &PlantConfig::boiler, {"p_nom_th", "p_min_frac"});
    add_asset(r, "heat_pump", &PlantConfig::heat_pump, {"p_nom_th", "p_min_frac"});
    add_asset(r, "chp", &PlantConfig::chp, {"p_nom_th", "p_nom_el", "p_min_frac"});
    add_asset(r, "tess", &PlantConfig::tess, {"e_nom", "p_min", "p_max"});
    add_asset(r, "bess", &PlantConfig::bess, {"e_nom", "p_min", "p_max"});
    add_asset(r, "wind", &PlantConfig::wind, {"p_nom_el", "p_min_frac"});
    add_asset(r, "solar", &PlantConfig::solar, {"p_nom_el", "p_min_frac"});
    SM_FIELD(r, "plant.boiler_eff", c.plant.boiler_eff);
    SM_FIELD(r, "plant.chp_th_eff", c.plant.chp_th_eff);
    SM_FIELD(r, "plant.chp_el_eff", c.plant.chp_el_eff);
    SM_FIELD(r, "plant.hp_cop_max", c.plant.hp_cop_max);
    SM_FIELD(r, "plant.carnot_fraction", c.plant.carnot_fraction);
    SM_FIELD(r, "plant.tess_loss_per_step", c.plant.tess_loss_per_step);
    SM_FIELD(r, "plant.bess_roundtrip_eff", c.plant.bess_roundtrip_eff);
    SM_FIELD(r, "plant.gas_price", c.plant.gas_price);
    SM_FIELD(r, "plant.off_threshold", c.plant.off_threshold);
    SM_FIELD(r, "plant.initial_soc", c.plant.initial_soc);
    SM_FIELD(r, "plant.t_cond_c", c.plant.t_cond_c);
    SM_FIELD(r, "plant.t_return_boiler_c", c.plant.t_return_boiler_c);
    SM_FIELD(r, "plant.tess_t_min_c", c.plant.tess_t_min_c);
    SM_FIELD(r, "plant.tess_t_max_c", c.plant.tess_t_max_c);

    SM_FIELD(r, "safety.q_tol_fraction", c.safety.q_tol_fraction);
    SM_FIELD(r, "safety.holdout_fraction", c.safety.holdout_fraction);
    SM_FIELD(r, "safety.log_steps", c.safety.log_steps);
    SM_FIELD(r, "safety.log_noise_std", c.safety.log_noise_std);
    SM_FIELD(r, "safety.log_seed", c.safety.log_seed);
    SM_FIELD(r, "safety.forest_trees", c.safety.forest.n_trees);
    SM_FIELD(r, "safety.forest_max_depth", c.safety.forest.max_depth);
    SM_FIELD(r, "safety.forest_min_samples_leaf", c.safety.forest.min_samples_leaf);
    SM_FIELD(r, "safety.forest_bootstrap", c.safety.forest.bootstrap);
    SM_FIELD(r, "safety.forest_seed", c.safety.forest.seed);
    SM_FIELD(r, "safety.surrogates_path", c.safety.surrogates_path);

    r.emplace_back("shield.kind", Field{[](const RunConfig& c) { return std::string(shield_name(c.shield)); },
                                        [](RunConfig& c, const std::string& s) { c.shield = parse_shield(s); }});
    SM_FIELD(r, "shield.cost_fallback", c.shield_cfg.cost_fallback);
    SM_FIELD(r, "shield.cost_givesafe_base", c.shield_cfg.cost_givesafe_base);
    SM_FIELD(r, "shield.cost_givesafe_chp_bonus", c.shield_cfg.cost_givesafe_chp_bonus);
    SM_FIELD(r, "shield.chp_bonus_threshold", c.shield_cfg.chp_bonus_threshold);
    SM_FIELD(r, "shield.max_retries", c.shield_cfg.max_retries);

    r.emplace_back("agent.kind", Field{[](const RunConfig& c) { return std::string(agent_name(c.agent)); },
                                       [](RunConfig& c, const std::string& s) { c.agent = parse_agent(s); }});
    SM_FIELD(r, "agent.preset", c.hyper.name);
    SM_FIELD(r, "agent.gamma", c.hyper.gamma);
    SM_FIELD(r, "agent.learning_rate", c.hyper.learning_rate);
    SM_FIELD(r, "agent.batch_size", c.hyper.batch_size);
    SM_FIELD(r, "agent.buffer_size", c.hyper.buffer_size);
    SM_FIELD(r, "agent.train_freq", c.hyper.train_freq);
    SM_FIELD(r, "agent.gradient_steps", c.hyper.gradient_steps);
    SM_FIELD(r, "agent.noise_type", c.hyper.noise_type);
    SM_FIELD(r, "agent.noise_std", c.hyper.noise_std);
    SM_FIELD(r, "agent.policy_delay", c.hyper.policy_delay);
    SM_FIELD(r, "agent.target_noise_std", c.hyper.target_noise_std);
    SM_FIELD(r, "agent.target_noise_clip", c.hyper.target_noise_clip);
    SM_FIELD(r, "agent.polyak", c.hyper.polyak);
    SM_FIELD(r, "agent.warmup_steps", c.hyper.warmup_steps);
    SM_FIELD(r, "agent.hidden", c.hyper.hidden);
    SM_FIELD(r, "agent.uniform_retry_after", c.hyper.uniform_retry_after);

    SM_FIELD(r, "harness.seed", c.harness.seed);
    SM_FIELD(r, "harness.data_seed", c.harness.data_seed);
    SM_FIELD(r, "harness.budget", c.harness.budget);
    SM_FIELD(r, "harness.eval_interval", c.harness.eval_interval);
    SM_FIELD(r, "harness.series_steps", c.harness.series_steps);
    SM_FIELD(r, "harness.series_path", c.harness.series_path);
    SM_FIELD(r, "harness.eval_series_path", c.harness.eval_series_path);
    SM_FIELD(r, "harness.eval_start", c.harness.eval_start);
    SM_FIELD(r, "harness.eval_len", c.harness.eval_len);
    SM_FIELD(r, "harness.reward_a", c.harness.reward.a);
    SM_FIELD(r, "harness.reward_b", c.harness.reward.b);
    SM_FIELD(r, "harness.n_runs", c.harness.n_runs);
    SM_FIELD(r, "harness.workers", c.harness.workers);
    SM_FIELD(r, "harness.plots", c.harness.plots);
    return r;
  }();
  return reg;
}

#undef SM_FIELD

}  // namespace

RunConfig read_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(std::string("config: ") + e.what());
  }

  std::map<std::string, std::string> values;
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) throw Error("config: key '" + section + "' outside a section");
    for (const auto& [key, leaf] : body) values[section + "." + key] = leaf.data();
  }

  const auto& reg = registry();
  std::map<std::string, const Field*> by_name;
  for (const auto& [name, field] : reg) by_name[name] = &field;
  for (const auto& [name, _] : values) {
    if (!by_name.count(name)) throw Error("config: unknown key '" + name + "'");
  }

  RunConfig cfg;
  // The shield picks the preset unless the file names one; explicit
  // hyper-parameter keys then override the preset's values.
  if (auto it = values.find("shield.kind"); it != values.end()) cfg.shield = parse_shield(it->second);
  auto preset = values.find("agent.preset");
  cfg.hyper = Td3Hyper::preset(preset != values.end() ? preset->second : default_preset(cfg.shield));

  for (const auto& [name, field] : reg) {
    auto it = values.find(name);
    if (it == values.end() || name == "agent.preset") continue;
    try {
      field.set(cfg, it->second);
    } catch (const Error& e) {
      throw Error("config: " + name + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  return read_config(in);
}

void write_config(const RunConfig& cfg, std::ostream& out) {
  std::string section;
  for (const auto& [name, field] : registry()) {
    const auto dot = name.find('.');
    const std::string sec = name.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out << '\n';
      out << '[' << sec << "]\n";
      section = sec;
    }
    out << name.substr(dot + 1) << " = " << field.get(cfg) << '\n';
  }
}

}  // namespace safemes
