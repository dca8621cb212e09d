#pragma once

// Experiment configuration: flat `section.key = value` text, one entry per
// line, `#` starts a comment. Lists are comma separated.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lift/collect.hpp"
#include "lift/core.hpp"
#include "lift/dataset_io.hpp"
#include "lift/distortions.hpp"
#include "lift/environment.hpp"
#include "lift/knn_q.hpp"
#include "lift/policies.hpp"
#include "lift/shortcuts.hpp"

namespace lift {

class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

enum class AugmentorKind { knn, oracle_direct, gaussian_noise, random_scale, uniform };

inline std::string_view to_string(AugmentorKind k) {
  switch (k) {
    case AugmentorKind::knn: return "knn";
    case AugmentorKind::oracle_direct: return "oracle_direct";
    case AugmentorKind::gaussian_noise: return "gaussian_noise";
    case AugmentorKind::random_scale: return "random_scale";
    case AugmentorKind::uniform: return "uniform";
  }
  return "?";
}

inline AugmentorKind parse_augmentor_kind(std::string_view s) {
  for (auto k : {AugmentorKind::knn, AugmentorKind::oracle_direct, AugmentorKind::gaussian_noise,
                 AugmentorKind::random_scale, AugmentorKind::uniform})
    if (to_string(k) == s) return k;
  throw InvalidArgument("unknown augmentor '" + std::string(s) + "'");
}

struct EvalConfig {
  std::size_t episodes = 20;
  std::size_t horizon = 30;
  bool operator==(const EvalConfig&) const = default;
};

struct VerifyConfig {
  std::size_t episodes = 200;   // direct-policy corpus size
  std::size_t segments = 1000;  // sampled (i, j) segments
  std::size_t pairs = 2000;     // Lipschitz / contraction pairs
  std::size_t chains = 2000;    // LPE chains
  std::size_t chain_length = 5;
  double lambda = 0.25;         // action radius for the verification corpora
  double tolerance = 1e-9;
  bool operator==(const VerifyConfig&) const = default;
};

struct OutputConfig {
  std::string data = "dataset.jsonl";
  std::string shortcuts = "shortcuts.jsonl";
  std::string model;  // empty: <data>.model
  std::string evaluation = "evaluation.csv";
  std::string report = "verify.jsonl";
  bool operator==(const OutputConfig&) const = default;
};

struct InputConfig {
  std::string data;
  std::string model;
  bool operator==(const InputConfig&) const = default;
};

struct ExperimentConfig {
  EnvConfig env;
  PolicySpec policy;
  ShortcutConfig shortcut;
  CollectConfig collect;
  AugmentorKind augmentor = AugmentorKind::knn;
  double augmentor_sigma = 0.1;
  KnnQParams knn;
  EvalConfig eval;
  VerifyConfig verify;
  std::uint64_t seed = 0;
  InputConfig input;
  OutputConfig output;

  bool operator==(const ExperimentConfig&) const = default;

  /// Copies env-level values into the dependent sections.
  void sync() {
    env.distortion.lambda = env.lambda;
    shortcut.gamma = env.gamma;
    shortcut.lambda = env.lambda;
  }

  void validate() const {
    const auto named = [](const char* key, const auto& fn) {
      try {
        fn();
      } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("config: ") + key + ": " + e.what());
      }
    };
    named("env", [&] { env.validate(); });
    named("policy", [&] { policy.validate(); });
    named("shortcut", [&] { shortcut.validate(); });
    named("collect", [&] { collect.validate(); });
    named("knn", [&] { knn.validate(); });
    if (shortcut.gamma != env.gamma || shortcut.lambda != env.lambda)
      throw ConfigError("config: shortcut.gamma/lambda must follow env.gamma/lambda");
    if (policy.kind == PolicyKind::coordinate_walk && policy.l0 > env.lambda)
      throw ConfigError("config: policy.l0 must not exceed env.lambda");
    if (!(augmentor_sigma >= 0.0)) throw ConfigError("config: augmentor.sigma must be >= 0");
    if (eval.episodes < 1) throw ConfigError("config: eval.episodes must be >= 1");
    if (!(verify.lambda > 0.0)) throw ConfigError("config: verify.lambda must be > 0");
    if (!(verify.tolerance >= 0.0)) throw ConfigError("config: verify.tolerance must be >= 0");
    if (verify.chain_length < 1) throw ConfigError("config: verify.chain_length must be >= 1");
  }
};

namespace detail {

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("config: " + std::string(key) + ": cannot parse '" + std::string(text) + "'");
  return value;
}

inline std::vector<std::string_view> split_list(std::string_view text) {
  std::vector<std::string_view> out;
  if (text.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = text.find(',', start);
    std::string_view item = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    out.push_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

struct Field {
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  bool in_digest = true;
};

inline std::string show(double x) { return format_double(x); }
inline std::string show(std::size_t x) { return std::to_string(x); }

#define LIFT_NUM_FIELD(KEY, MEMBER, TYPE)                                                   \
  Field {                                                                                   \
    KEY, [](const ExperimentConfig& c) { return show(static_cast<TYPE>(c.MEMBER)); },       \
        [](ExperimentConfig& c, std::string_view v) { c.MEMBER = parse_number<TYPE>(KEY, v); } \
  }

inline const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(LIFT_NUM_FIELD("env.d", env.d, std::size_t));
    f.push_back(LIFT_NUM_FIELD("env.lambda", env.lambda, double));
    f.push_back(LIFT_NUM_FIELD("env.theta", env.theta, double));
    f.push_back(LIFT_NUM_FIELD("env.max_steps", env.max_steps, std::size_t));
    f.push_back(LIFT_NUM_FIELD("env.gamma", env.gamma, double));
    f.push_back(LIFT_NUM_FIELD("env.box", env.box, double));
    f.push_back({"env.observation", [](const ExperimentConfig& c) { return std::string(to_string(c.env.observation)); },
                 [](ExperimentConfig& c, std::string_view v) { c.env.observation = parse_observation_kind(v); }});
    f.push_back({"env.target_mode", [](const ExperimentConfig& c) { return std::string(to_string(c.env.target_mode)); },
                 [](ExperimentConfig& c, std::string_view v) { c.env.target_mode = parse_target_mode(v); }});
    f.push_back({"distortion.kind",
                 [](const ExperimentConfig& c) { return std::string(to_string(c.env.distortion.kind)); },
                 [](ExperimentConfig& c, std::string_view v) { c.env.distortion.kind = parse_distortion_kind(v); }});
    f.push_back(LIFT_NUM_FIELD("distortion.sigma", env.distortion.sigma, double));
    f.push_back(LIFT_NUM_FIELD("distortion.scale_floor", env.distortion.scale_floor, double));
    f.push_back({"distortion.region_means",
                 [](const ExperimentConfig& c) {
                   std::string s;
                   for (double m : c.env.distortion.region_means) s += (s.empty() ? "" : ",") + show(m);
                   return s;
                 },
                 [](ExperimentConfig& c, std::string_view v) {
                   const auto items = split_list(v);
                   if (items.size() != 4) throw ConfigError("config: distortion.region_means needs 4 values");
                   for (std::size_t k = 0; k < 4; ++k)
                     c.env.distortion.region_means[k] = parse_number<double>("distortion.region_means", items[k]);
                 }});
    f.push_back({"policy.kind", [](const ExperimentConfig& c) { return std::string(to_string(c.policy.kind)); },
                 [](ExperimentConfig& c, std::string_view v) { c.policy.kind = parse_policy_kind(v); }});
    f.push_back(LIFT_NUM_FIELD("policy.l0", policy.l0, double));
    f.push_back(LIFT_NUM_FIELD("policy.reduction", policy.reduction, double));
    f.push_back(LIFT_NUM_FIELD("policy.l_min", policy.l_min, double));
    f.push_back(LIFT_NUM_FIELD("policy.sigma", policy.sigma, double));
    f.push_back(LIFT_NUM_FIELD("shortcut.C", shortcut.C, double));
    f.push_back({"shortcut.strategy", [](const ExperimentConfig& c) { return std::string(to_string(c.shortcut.strategy)); },
                 [](ExperimentConfig& c, std::string_view v) { c.shortcut.strategy = parse_sampling_strategy(v); }});
    f.push_back(LIFT_NUM_FIELD("shortcut.cap", shortcut.max_per_trajectory, std::size_t));
    f.push_back(LIFT_NUM_FIELD("shortcut.tolerance", shortcut.tolerance, double));
    f.push_back(LIFT_NUM_FIELD("collect.p", collect.p, double));
    f.push_back(LIFT_NUM_FIELD("collect.n", collect.n, std::size_t));
    f.push_back(LIFT_NUM_FIELD("collect.cap", collect.cap, std::size_t));
    f.push_back({"collect.train_after",
                 [](const ExperimentConfig& c) {
                   std::string s;
                   for (std::size_t t : c.collect.train_after) s += (s.empty() ? "" : ",") + std::to_string(t);
                   return s;
                 },
                 [](ExperimentConfig& c, std::string_view v) {
                   c.collect.train_after.clear();
                   for (auto item : split_list(v))
                     c.collect.train_after.push_back(parse_number<std::size_t>("collect.train_after", item));
                 }});
    f.push_back({"augmentor.kind", [](const ExperimentConfig& c) { return std::string(to_string(c.augmentor)); },
                 [](ExperimentConfig& c, std::string_view v) { c.augmentor = parse_augmentor_kind(v); }});
    f.push_back(LIFT_NUM_FIELD("augmentor.sigma", augmentor_sigma, double));
    f.push_back(LIFT_NUM_FIELD("knn.k", knn.k, std::size_t));
    f.push_back(LIFT_NUM_FIELD("knn.candidates", knn.candidates, std::size_t));
    f.push_back(LIFT_NUM_FIELD("knn.sweeps", knn.sweeps, std::size_t));
    f.push_back(LIFT_NUM_FIELD("eval.episodes", eval.episodes, std::size_t));
    f.push_back(LIFT_NUM_FIELD("eval.horizon", eval.horizon, std::size_t));
    f.push_back(LIFT_NUM_FIELD("verify.episodes", verify.episodes, std::size_t));
    f.push_back(LIFT_NUM_FIELD("verify.segments", verify.segments, std::size_t));
    f.push_back(LIFT_NUM_FIELD("verify.pairs", verify.pairs, std::size_t));
    f.push_back(LIFT_NUM_FIELD("verify.chains", verify.chains, std::size_t));
    f.push_back(LIFT_NUM_FIELD("verify.chain_length", verify.chain_length, std::size_t));
    f.push_back(LIFT_NUM_FIELD("verify.lambda", verify.lambda, double));
    f.push_back(LIFT_NUM_FIELD("verify.tolerance", verify.tolerance, double));
    f.push_back({"seed", [](const ExperimentConfig& c) { return std::to_string(c.seed); },
                 [](ExperimentConfig& c, std::string_view v) { c.seed = parse_number<std::uint64_t>("seed", v); }});
    f.push_back({"input.data", [](const ExperimentConfig& c) { return c.input.data; },
                 [](ExperimentConfig& c, std::string_view v) { c.input.data = v; }, false});
    f.push_back({"input.model", [](const ExperimentConfig& c) { return c.input.model; },
                 [](ExperimentConfig& c, std::string_view v) { c.input.model = v; }, false});
    f.push_back({"output.data", [](const ExperimentConfig& c) { return c.output.data; },
                 [](ExperimentConfig& c, std::string_view v) { c.output.data = v; }, false});
    f.push_back({"output.shortcuts", [](const ExperimentConfig& c) { return c.output.shortcuts; },
                 [](ExperimentConfig& c, std::string_view v) { c.output.shortcuts = v; }, false});
    f.push_back({"output.model", [](const ExperimentConfig& c) { return c.output.model; },
                 [](ExperimentConfig& c, std::string_view v) { c.output.model = v; }, false});
    f.push_back({"output.evaluation", [](const ExperimentConfig& c) { return c.output.evaluation; },
                 [](ExperimentConfig& c, std::string_view v) { c.output.evaluation = v; }, false});
    f.push_back({"output.report", [](const ExperimentConfig& c) { return c.output.report; },
                 [](ExperimentConfig& c, std::string_view v) { c.output.report = v; }, false});
    return f;
  }();
  return table;
}

#undef LIFT_NUM_FIELD

inline const Field& field_for(std::string_view key) {
  for (const Field& f : fields())
    if (key == f.key) return f;
  throw ConfigError("config: unknown key '" + std::string(key) + "'");
}

}  // namespace detail

/// Applies `key = value` assignments on top of `cfg`. Distortion noise scale
/// and f_scale floor follow the kind and lambda unless set explicitly.
inline ExperimentConfig apply_config_entries(ExperimentConfig cfg,
                                             const std::vector<std::pair<std::string, std::string>>& entries) {
  std::set<std::string> seen;
  for (const auto& [key, value] : entries) {
    if (!seen.insert(key).second) throw ConfigError("config: duplicate key '" + key + "'");
    const auto& f = detail::field_for(key);
    try {
      f.set(cfg, value);
    } catch (const ConfigError&) {
      throw;
    } catch (const InvalidArgument& e) {
      throw ConfigError("config: " + key + ": " + e.what());
    }
  }
  if (seen.count("distortion.kind") || seen.count("env.lambda")) {
    const auto defaults = DistortionSpec::defaults(cfg.env.distortion.kind, cfg.env.lambda);
    if (!seen.count("distortion.sigma")) cfg.env.distortion.sigma = defaults.sigma;
    if (!seen.count("distortion.scale_floor")) cfg.env.distortion.scale_floor = defaults.scale_floor;
  }
  cfg.sync();
  cfg.validate();
  return cfg;
}

inline std::vector<std::pair<std::string, std::string>> parse_config_entries(std::istream& is) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = detail::trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos)
      throw ParseError(line_no, "expected 'key = value', got '" + std::string(view) + "'");
    const auto key = detail::trim(view.substr(0, eq));
    const auto value = detail::trim(view.substr(eq + 1));
    if (key.empty()) throw ParseError(line_no, "empty key");
    out.emplace_back(std::string(key), std::string(value));
  }
  return out;
}

inline ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig base;
  base.sync();
  return apply_config_entries(base, parse_config_entries(is));
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config '" + path + "'");
  try {
    return parse_config(is);
  } catch (const ParseError& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
}

/// Every key, in canonical order.
inline std::string serialize_config(const ExperimentConfig& cfg, bool include_paths = true) {
  std::string out;
  for (const auto& f : detail::fields()) {
    if (!include_paths && !f.in_digest) continue;
    out += f.key;
    out += " = ";
    out += f.get(cfg);
    out += '\n';
  }
  return out;
}

/// FNV-1a over the canonical text without input/output paths.
inline std::string config_digest(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize_config(cfg, false)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace lift
