#pragma once

// Rollout oracles and runtime checks of the shortcut theory.
//
// Policies and dynamics are deterministic once the context is fixed, so
// V^pi(s, W) is computed exactly by simulating pi from a state snapshot.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lift/collect.hpp"
#include "lift/core.hpp"
#include "lift/dataset_io.hpp"
#include "lift/environment.hpp"
#include "lift/policies.hpp"
#include "lift/shortcuts.hpp"

namespace lift {

struct Counterexample {
  std::uint64_t episode = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  double slack = 0.0;
};

struct CheckReport {
  std::string name;
  bool pass = true;
  bool applicable = true;
  bool hard = true;  // a failing hard check fails the suite
  std::size_t violations = 0;
  std::size_t samples = 0;
  std::optional<Counterexample> first;
  std::map<std::string, double> metrics;

  void record(bool ok, const Counterexample& ce) {
    ++samples;
    if (!ok) {
      ++violations;
      if (!first) first = ce;
    }
    pass = violations == 0;
  }

  void merge(const CheckReport& other) {
    samples += other.samples;
    violations += other.violations;
    if (!first && other.first) first = other.first;
    pass = violations == 0;
  }

  std::string summary() const {
    std::ostringstream os;
    os << (applicable ? (pass ? "PASS" : "FAIL") : "N/A ") << "  " << name << "  samples=" << samples
       << " violations=" << violations;
    if (first)
      os << " first=(ep " << first->episode << ", i " << first->i << ", j " << first->j << ", slack "
         << format_double(first->slack) << ")";
    for (const auto& [k, v] : metrics) os << ' ' << k << '=' << format_double(v);
    if (!hard) os << " [diagnostic]";
    return os.str();
  }

  std::string record_line() const {
    JsonLine line;
    line.field("type", "check")
        .field("name", name)
        .field("pass", pass)
        .field("applicable", applicable)
        .field("hard", hard)
        .field("violations", static_cast<std::uint64_t>(violations))
        .field("samples", static_cast<std::uint64_t>(samples));
    if (first) {
      line.field("first_episode", first->episode)
          .field("first_i", static_cast<std::uint64_t>(first->i))
          .field("first_j", static_cast<std::uint64_t>(first->j))
          .field("first_slack", first->slack);
    }
    for (const auto& [k, v] : metrics) line.field("metric." + k, v);
    return line.str();
  }
};

inline void require_deterministic(const LoggingPolicy& policy) {
  if (!policy.spec().deterministic())
    throw InvalidArgument("value oracle needs a deterministic policy, got " + std::string(to_string(policy.spec().kind)));
}

/// Discounted return of `policy` (with its current internal state) from
/// `state`, continuing the state's step counter until the episode ends or
/// `horizon` steps have run. Terminal states have value 0.
inline double value_of(const Environment& env, LoggingPolicy policy, EpisodeState state,
                       std::size_t horizon = std::numeric_limits<std::size_t>::max()) {
  require_deterministic(policy);
  double value = 0.0;
  double discount = 1.0;
  const double gamma = env.config().gamma;
  for (std::size_t k = 0; k < horizon && !state.done; ++k) {
    const Vec a = policy.act(env.delta_from_observation(env.observe(state)));
    const StepResult r = env.step(state, a);
    value += discount * r.transition.reward;
    discount *= gamma;
  }
  return value;
}

/// Index where the longest strictly distance-improving suffix begins
/// (== size() when even the last step does not improve).
inline std::size_t distance_improving_suffix_start(const Trajectory& traj) {
  std::size_t start = traj.size();
  while (start > 0) {
    const Transition& tr = traj.transitions[start - 1];
    if (!(distance(tr.latent_next_s, traj.target) < distance(tr.latent_s, traj.target))) break;
    --start;
  }
  return start;
}

inline bool is_distance_improving(const Trajectory& traj) {
  return distance_improving_suffix_start(traj) == 0;
}

inline CheckReport check_distance_improving(const Trajectory& traj) {
  CheckReport rep;
  rep.name = "distance_improving";
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const Transition& tr = traj.transitions[i];
    const double before = distance(tr.latent_s, traj.target);
    const double after = distance(tr.latent_next_s, traj.target);
    rep.record(after < before, {traj.episode, i, i + 1, before - after});
  }
  const std::size_t start = distance_improving_suffix_start(traj);
  rep.metrics["suffix_start"] = static_cast<double>(start);
  rep.metrics["suffix_fraction"] =
      traj.empty() ? 1.0 : static_cast<double>(traj.size() - start) / static_cast<double>(traj.size());
  return rep;
}

/// State after applying `a` at `state` without the action-radius check.
inline EpisodeState successor_state(const Environment& env, const EpisodeState& state, std::span<const double> a) {
  EpisodeState next = state;
  next.s = env.next_position(state, a);
  next.t = state.t + 1;
  next.done = env.at_target(next.s, next.target) || next.t >= env.config().max_steps;
  return next;
}

/// gamma * V(s') - V(s) - |s' - s_W| with s' = f(s, a, W). `policy_at_s` is the
/// policy state that would act at s, `policy_after` the one continuing from s'.
inline double shortcut_slack(const Environment& env, const LoggingPolicy& policy_at_s,
                             const LoggingPolicy& policy_after, const EpisodeState& state, std::span<const double> a) {
  const EpisodeState next = successor_state(env, state, a);
  const double v_s = value_of(env, policy_at_s, state);
  const double v_next = value_of(env, policy_after, next);
  return env.config().gamma * v_next - v_s - distance(next.s, next.target);
}

inline CheckReport check_shortcut(const Environment& env, const LoggingPolicy& policy_at_s,
                                  const LoggingPolicy& policy_after, const EpisodeState& state,
                                  std::span<const double> a, double tol = 1e-9) {
  CheckReport rep;
  rep.name = "shortcut";
  const double slack = shortcut_slack(env, policy_at_s, policy_after, state, a);
  rep.record(slack >= -tol, {0, state.t, state.t + 1, slack});
  rep.metrics["slack"] = slack;
  return rep;
}

/// Rebuilds the logging-policy state that chose action i, replaying the
/// logged observations (and resets after augmented steps).
inline LoggingPolicy policy_state_at(const Environment& env, const PolicySpec& spec, const Trajectory& traj,
                                     std::size_t i) {
  LoggingPolicy policy(spec, env.config().d, env.config().lambda);
  require_deterministic(policy);
  for (std::size_t k = 0; k < i && k < traj.size(); ++k) {
    policy.act(env.delta_from_observation(traj.transitions[k].obs));
    if (traj.transitions[k].augmented) policy.reset();
  }
  return policy;
}

/// The latent state at step i of a logged trajectory.
inline EpisodeState state_at(const Environment& env, const Trajectory& traj, std::size_t i) {
  return env.make_state(traj.transitions[i].latent_s, traj.context, traj.target, i);
}

/// (1 - gamma) G_i + |s_i - s_W| >= -1e-9 at every index. Not applicable to
/// trajectories that are not distance-improving.
inline CheckReport check_lemma_lower_bound(const Trajectory& traj, double gamma, double tol = 1e-9) {
  CheckReport rep;
  rep.name = "lemma_lower_bound";
  if (traj.empty() || !is_distance_improving(traj)) {
    rep.applicable = false;
    return rep;
  }
  const auto G = returns(traj, gamma);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double slack = (1.0 - gamma) * G[i] + distance(traj.transitions[i].latent_s, traj.target);
    rep.record(slack >= -tol, {traj.episode, i, i, slack});
  }
  return rep;
}

struct TheoremOutcome {
  bool condition_holds = false;
  double lhs = 0.0;
  double rhs = 0.0;
  std::optional<double> shortcut_slack;  // set when the condition holds
};

/// Evaluates gamma G_j - G_i - |s_j - s_W| >= (gamma L_V + 1) L_f sum |a_k| and,
/// when it holds, verifies by rollout that a_hat is a shortcut at s_i.
inline TheoremOutcome theorem_condition(const Environment& env, const PolicySpec& spec, const Trajectory& traj,
                                        std::span<const double> G, std::size_t i, std::size_t j, double L_V,
                                        double L_f, double gamma) {
  if (!(i < j) || j >= traj.size()) throw InvalidArgument("theorem_condition: need i < j < size");
  TheoremOutcome out;
  Vec a_hat = zeros(env.config().d);
  double path = 0.0;
  for (std::size_t k = i; k < j; ++k) {
    a_hat = add(a_hat, traj.transitions[k].action);
    path += norm(traj.transitions[k].action);
  }
  out.lhs = gamma * G[j] - G[i] - distance(traj.transitions[j].latent_s, traj.target);
  out.rhs = (gamma * L_V + 1.0) * L_f * path;
  out.condition_holds = out.lhs + 1e-12 >= out.rhs;
  if (out.condition_holds) {
    const LoggingPolicy at_i = policy_state_at(env, spec, traj, i);
    const LoggingPolicy at_j = policy_state_at(env, spec, traj, j);
    out.shortcut_slack = shortcut_slack(env, at_i, at_j, state_at(env, traj, i), a_hat);
  }
  return out;
}

inline CheckReport check_theorem_condition(const Environment& env, const PolicySpec& spec, const Trajectory& traj,
                                           std::size_t i, std::size_t j, double L_V, double L_f, double gamma,
                                           double tol = 1e-9) {
  CheckReport rep;
  rep.name = "theorem_condition";
  const auto G = returns(traj, gamma);
  const auto out = theorem_condition(env, spec, traj, G, i, j, L_V, L_f, gamma);
  rep.metrics["lhs"] = out.lhs;
  rep.metrics["rhs"] = out.rhs;
  rep.metrics["condition_holds"] = out.condition_holds ? 1.0 : 0.0;
  if (out.condition_holds) rep.record(*out.shortcut_slack >= -tol, {traj.episode, i, j, *out.shortcut_slack});
  return rep;
}

/// Lipschitz constant of V^pi valid for f-contractions.
inline double contraction_lipschitz_bound(double gamma) { return 1.0 / (1.0 - gamma); }

enum class PairMode { local, ray };

struct LipschitzEstimate {
  double max_ratio = 0.0;
  std::size_t pairs = 0;
  std::size_t exceed_bound = 0;  // ratios above 1/(1-gamma) + 1e-9
};

/// max |V(s) - V(s')| / |s - s'| over same-context pairs; values are exact
/// rollouts from t = 0 with a freshly reset policy.
inline LipschitzEstimate estimate_lipschitz(const Environment& env, const PolicySpec& spec, std::size_t n_pairs,
                                            const RngStream& rng, PairMode mode = PairMode::local,
                                            double max_offset = 0.2) {
  const auto& cfg = env.config();
  const LoggingPolicy fresh(spec, cfg.d, cfg.lambda);
  require_deterministic(fresh);
  const double bound = contraction_lipschitz_bound(cfg.gamma);
  std::vector<std::optional<double>> ratios(n_pairs);
  parallel_for(n_pairs, [&](std::size_t k) {
    RngStream r = rng.child("pair", k);
    auto [state, obs] = env.reset(r);
    EpisodeState other = state;
    if (mode == PairMode::local) {
      Vec dir = r.normal_vec(cfg.d);
      const double len = r.uniform(0.0, max_offset);
      other.s = env.clamp_to_box(add(state.s, scaled(dir, len / std::max(norm(dir), 1e-300))));
    } else {
      const double factor = r.uniform(0.0, 1.0);
      other.s = add(state.target, scaled(sub(state.s, state.target), factor));
    }
    other = env.make_state(other.s, other.context, other.target);
    const double ds = distance(state.s, other.s);
    if (ds < 1e-6) return;
    const double dv = std::abs(value_of(env, fresh, state) - value_of(env, fresh, other));
    ratios[k] = dv / ds;
  });
  LipschitzEstimate est;
  for (const auto& r : ratios) {
    if (!r) continue;
    ++est.pairs;
    est.max_ratio = std::max(est.max_ratio, *r);
    if (*r > bound + 1e-9) ++est.exceed_bound;
  }
  return est;
}

/// Produces two states sharing one context.
using PairSampler = std::function<std::pair<EpisodeState, EpisodeState>(const Environment&, RngStream&)>;

inline PairSampler uniform_pair_sampler(double max_offset = 0.2) {
  return [max_offset](const Environment& env, RngStream& r) {
    auto [a, obs] = env.reset(r);
    Vec dir = r.normal_vec(env.config().d);
    const double len = r.uniform(0.0, max_offset);
    Vec s2 = env.clamp_to_box(add(a.s, scaled(dir, len / std::max(norm(dir), 1e-300))));
    EpisodeState b = env.make_state(std::move(s2), a.context, a.target);
    return std::make_pair(std::move(a), std::move(b));
  };
}

/// Pairs mirrored across the second-coordinate axis (different regrot regions),
/// with the first coordinate at least `min_first` away from the target so a
/// fresh coordinate walk takes the same step at both.
inline PairSampler regrot_boundary_sampler(double max_gap = 0.01, double min_first = 0.3) {
  return [max_gap, min_first](const Environment& env, RngStream& r) {
    auto [a, obs] = env.reset(r);
    const double box = env.config().box;
    const double sign = r.uniform01() < 0.5 ? -1.0 : 1.0;
    a.s[0] = a.target[0] + sign * r.uniform(min_first, box - std::abs(a.target[0]));
    a.s[0] = std::clamp(a.s[0], -box, box);
    const double eps = r.uniform(1e-6, max_gap);
    EpisodeState b = a;
    a.s[1] = eps;
    b.s[1] = -eps;
    a = env.make_state(a.s, a.context, a.target);
    b = env.make_state(b.s, b.context, b.target);
    return std::make_pair(std::move(a), std::move(b));
  };
}

/// Pairs inside a single regrot region, first coordinate far from the target.
inline PairSampler regrot_same_region_sampler(double max_offset = 0.05, double min_first = 0.3) {
  return [max_offset, min_first](const Environment& env, RngStream& r) {
    auto [a, obs] = env.reset(r);
    const double box = env.config().box;
    const double sign = r.uniform01() < 0.5 ? -1.0 : 1.0;
    a.s[0] = std::clamp(a.target[0] + sign * r.uniform(min_first, box), -box, box);
    EpisodeState b = a;
    const std::size_t region = regrot_region(a.s);
    do {
      for (std::size_t c = 0; c < b.s.size(); ++c)
        b.s[c] = std::clamp(a.s[c] + r.uniform(-max_offset, max_offset), -box, box);
    } while (regrot_region(b.s) != region || (b.s[0] - b.target[0]) * (a.s[0] - a.target[0]) <= 0.0);
    a = env.make_state(a.s, a.context, a.target);
    b = env.make_state(b.s, b.context, b.target);
    return std::make_pair(std::move(a), std::move(b));
  };
}

struct ContractionEstimate {
  std::size_t pairs = 0;
  std::size_t violations = 0;
  std::size_t skipped = 0;  // unequal actions when equal actions were required
  double max_expansion = 0.0;  // max |s1' - s2'| / |s1 - s2|

  double violation_rate() const { return pairs ? static_cast<double>(violations) / static_cast<double>(pairs) : 0.0; }
};

/// Fraction of same-context pairs where one policy step increases the distance
/// between the states by more than 1e-9.
inline ContractionEstimate check_contraction(const Environment& env, const PolicySpec& spec, std::size_t n_pairs,
                                             const RngStream& rng, const PairSampler& sampler,
                                             bool require_equal_actions = false) {
  const auto& cfg = env.config();
  ContractionEstimate est;
  for (std::size_t k = 0; k < n_pairs; ++k) {
    RngStream r = rng.child("pair", k);
    auto [a, b] = sampler(env, r);
    if (a.done || b.done) {
      ++est.skipped;
      continue;
    }
    LoggingPolicy pa(spec, cfg.d, cfg.lambda), pb(spec, cfg.d, cfg.lambda);
    require_deterministic(pa);
    const Vec act_a = pa.act(env.delta_from_observation(env.observe(a)));
    const Vec act_b = pb.act(env.delta_from_observation(env.observe(b)));
    if (require_equal_actions && act_a != act_b) {
      ++est.skipped;
      continue;
    }
    const double before = distance(a.s, b.s);
    const double after = distance(env.next_position(a, act_a), env.next_position(b, act_b));
    ++est.pairs;
    if (after > before + 1e-9) ++est.violations;
    if (before > 0.0) est.max_expansion = std::max(est.max_expansion, after / before);
  }
  return est;
}

/// clip_lambda(s_W - s): the largest step straight at the target.
inline Vec oracle_direct_action(const Environment& env, const EpisodeState& state) {
  return clip_ball(sub(state.target, state.s), env.config().lambda);
}

/// Suggests the direct step and keeps it only when it is a shortcut for the
/// logging policy, judged with the policy reset after the hand-off. This is
/// pi_aug with an oracle shortcut test.
class OracleDirectAugmentor : public Augmentor {
 public:
  explicit OracleDirectAugmentor(double tol = 1e-9) : tol_(tol) {}

  std::string_view name() const override { return "oracle_direct"; }
  bool trained() const override { return true; }
  bool uses_oracle() const override { return true; }

  std::optional<Vec> suggest(const SuggestContext& ctx, RngStream& /*rng*/) const override {
    if (!ctx.env || !ctx.state || !ctx.policy) throw std::logic_error("oracle augmentor needs oracle access");
    const Vec a = oracle_direct_action(*ctx.env, *ctx.state);
    LoggingPolicy after = *ctx.policy;
    after.reset();
    if (shortcut_slack(*ctx.env, *ctx.policy, after, *ctx.state, a) >= -tol_) return a;
    return std::nullopt;
  }

 private:
  double tol_;
};

}  // namespace lift
