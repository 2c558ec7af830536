#pragma once

#include <charconv>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "idsr/adam.hpp"
#include "idsr/loss.hpp"

namespace idsr {

enum class Objective { idp, ce };
enum class Selection { recall, composite };

inline std::string to_string(Objective o) {
  return o == Objective::idp ? "idp" : "ce";
}
inline std::string to_string(Selection s) {
  return s == Selection::recall ? "recall" : "composite";
}
inline std::string to_string(PositionWeight w) {
  return w == PositionWeight::linear ? "linear" : "constant";
}

// Everything the train/sweep commands accept, with the defaults used
// throughout the experiments. Echoed back verbatim by to_text().
struct TrainConfig {
  int embed_dim = 100;
  int intent_dim = 100;
  int n_intents = 3;
  double lambda = 0.5;
  int list_len = 10;  // decoded-list length during training
  int batch_size = 128;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double dropout = 0.1;
  int max_epochs = 100;
  int patience = 10;
  std::uint64_t seed = 1;
  Objective objective = Objective::idp;
  PositionWeight position_weight = PositionWeight::linear;
  Selection selection = Selection::recall;
  double clip_norm = 5.0;
  int threads = 1;

  void validate() const {
    if (lambda < 0.0 || lambda > 1.0)
      throw ConfigError("lambda must lie in [0, 1]");
    if (list_len < 1) throw ConfigError("list_len must be positive");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be positive");
    if (patience < 0) throw ConfigError("patience must be non-negative");
    if (threads < 1) throw ConfigError("threads must be positive");
    if (clip_norm <= 0) throw ConfigError("clip_norm must be positive");
    if (objective == Objective::idp && lambda < 1.0 && n_intents == 0)
      throw ConfigError(
          "objective=idp with lambda < 1 needs n_intents > 0 (no intents "
          "means no diversity term)");
    model_config(1).validate();
    adam_config().validate();
  }

  ModelConfig model_config(int n_items) const {
    ModelConfig m;
    m.n_items = n_items;
    m.embed_dim = embed_dim;
    m.intent_dim = intent_dim;
    // the relevance-only baseline trains and decodes without intents
    m.n_intents = objective == Objective::ce ? 0 : n_intents;
    m.dropout = dropout;
    return m;
  }

  AdamConfig adam_config() const {
    AdamConfig a;
    a.alpha = learning_rate;
    a.beta1 = beta1;
    a.beta2 = beta2;
    a.epsilon = epsilon;
    return a;
  }

  std::string to_text() const;
  static TrainConfig parse_text(const std::string& text);
};

namespace detail {

inline std::string fmt_double(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, end);
}

inline double to_double(const std::string& key, const std::string& s) {
  double x = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || end != s.data() + s.size())
    throw ConfigError("value for '" + key + "' is not a number: '" + s + "'");
  return x;
}

inline long long to_int(const std::string& key, const std::string& s) {
  long long x = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || end != s.data() + s.size())
    throw ConfigError("value for '" + key + "' is not an integer: '" + s +
                      "'");
  return x;
}

struct ConfigField {
  const char* name;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

inline const std::vector<ConfigField>& config_fields() {
  auto ints = [](int TrainConfig::*p, const char* name) {
    return ConfigField{
        name,
        [p, name](TrainConfig& c, const std::string& v) {
          c.*p = static_cast<int>(to_int(name, v));
        },
        [p](const TrainConfig& c) { return std::to_string(c.*p); }};
  };
  auto reals = [](double TrainConfig::*p, const char* name) {
    return ConfigField{name,
                       [p, name](TrainConfig& c, const std::string& v) {
                         c.*p = to_double(name, v);
                       },
                       [p](const TrainConfig& c) { return fmt_double(c.*p); }};
  };
  static const std::vector<ConfigField> fields = {
      ints(&TrainConfig::embed_dim, "embed_dim"),
      ints(&TrainConfig::intent_dim, "intent_dim"),
      ints(&TrainConfig::n_intents, "n_intents"),
      reals(&TrainConfig::lambda, "lambda"),
      ints(&TrainConfig::list_len, "list_len"),
      ints(&TrainConfig::batch_size, "batch_size"),
      reals(&TrainConfig::learning_rate, "learning_rate"),
      reals(&TrainConfig::beta1, "beta1"),
      reals(&TrainConfig::beta2, "beta2"),
      reals(&TrainConfig::epsilon, "epsilon"),
      reals(&TrainConfig::dropout, "dropout"),
      ints(&TrainConfig::max_epochs, "max_epochs"),
      ints(&TrainConfig::patience, "patience"),
      {"seed",
       [](TrainConfig& c, const std::string& v) {
         c.seed = static_cast<std::uint64_t>(to_int("seed", v));
       },
       [](const TrainConfig& c) { return std::to_string(c.seed); }},
      {"objective",
       [](TrainConfig& c, const std::string& v) {
         if (v == "idp")
           c.objective = Objective::idp;
         else if (v == "ce")
           c.objective = Objective::ce;
         else
           throw ConfigError("objective must be 'idp' or 'ce', got '" + v +
                             "'");
       },
       [](const TrainConfig& c) { return to_string(c.objective); }},
      {"position_weight",
       [](TrainConfig& c, const std::string& v) {
         c.position_weight = parse_position_weight(v);
       },
       [](const TrainConfig& c) { return to_string(c.position_weight); }},
      {"selection",
       [](TrainConfig& c, const std::string& v) {
         if (v == "recall")
           c.selection = Selection::recall;
         else if (v == "composite")
           c.selection = Selection::composite;
         else
           throw ConfigError("selection must be 'recall' or 'composite', got '" +
                             v + "'");
       },
       [](const TrainConfig& c) { return to_string(c.selection); }},
      reals(&TrainConfig::clip_norm, "clip_norm"),
      ints(&TrainConfig::threads, "threads"),
  };
  return fields;
}

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline std::string TrainConfig::to_text() const {
  std::ostringstream out;
  for (const auto& f : detail::config_fields())
    out << f.name << " = " << f.get(*this) << "\n";
  return out.str();
}

// key = value lines; '#' starts a comment; unknown or repeated keys are
// rejected by name so typos cannot silently fall back to defaults
inline TrainConfig TrainConfig::parse_text(const std::string& text) {
  TrainConfig cfg;
  std::vector<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        " is not 'key = value': '" + line + "'");
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) +
                        " has an empty key");
    const detail::ConfigField* field = nullptr;
    for (const auto& f : detail::config_fields())
      if (key == f.name) field = &f;
    if (!field) throw ConfigError("unknown config key '" + key + "'");
    for (const auto& s : seen)
      if (s == key) throw ConfigError("config key '" + key + "' repeated");
    seen.push_back(key);
    field->set(cfg, value);
  }
  cfg.validate();
  return cfg;
}

}  // namespace idsr
