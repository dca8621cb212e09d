#pragma once

// Logging policies and collection-time action perturbations.

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "lift/core.hpp"
#include "lift/environment.hpp"
#include "lift/rng.hpp"

namespace lift {

enum class PolicyKind { coordinate_walk, direct, noisy_coordinate_walk, uniform_random };

inline std::string_view to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::coordinate_walk: return "coordinate_walk";
    case PolicyKind::direct: return "direct";
    case PolicyKind::noisy_coordinate_walk: return "noisy_coordinate_walk";
    case PolicyKind::uniform_random: return "uniform_random";
  }
  return "?";
}

inline PolicyKind parse_policy_kind(std::string_view s) {
  for (auto k : {PolicyKind::coordinate_walk, PolicyKind::direct, PolicyKind::noisy_coordinate_walk,
                 PolicyKind::uniform_random})
    if (to_string(k) == s) return k;
  throw InvalidArgument("unknown policy kind '" + std::string(s) + "'");
}

struct PolicySpec {
  PolicyKind kind = PolicyKind::coordinate_walk;
  double l0 = 0.025;
  double reduction = 0.5;
  double l_min = 0.0125;  // theta / 4 for the default theta
  double sigma = 0.0;     // noisy_coordinate_walk only

  bool deterministic() const {
    return kind == PolicyKind::coordinate_walk || kind == PolicyKind::direct;
  }

  void validate() const {
    if (kind == PolicyKind::coordinate_walk || kind == PolicyKind::noisy_coordinate_walk) {
      if (!(l0 > 0.0)) throw InvalidArgument("policy.l0 must be > 0");
      if (!(reduction > 0.0 && reduction < 1.0)) throw InvalidArgument("policy.reduction must be in (0, 1)");
      if (!(l_min > 0.0 && l_min <= l0)) throw InvalidArgument("policy.l_min must be in (0, l0]");
    }
    if (!(sigma >= 0.0)) throw InvalidArgument("policy.sigma must be >= 0");
  }

  bool operator==(const PolicySpec&) const = default;
};

/// Coordinate-walk bookkeeping: the active axis and current step size.
struct CoordWalkState {
  double l = 0.0;
  std::size_t axis = 0;

  bool operator==(const CoordWalkState&) const = default;
};

/// A logging policy instance. Consumes delta = s_W - s and holds whatever
/// internal state its kind needs; copying it snapshots that state.
class LoggingPolicy {
 public:
  LoggingPolicy(PolicySpec spec, std::size_t d, double lambda)
      : spec_(spec), d_(d), lambda_(lambda) {
    spec_.validate();
    if (d_ < 1) throw InvalidArgument("policy: d must be >= 1");
    if (!(lambda_ > 0.0)) throw InvalidArgument("policy: lambda must be > 0");
    reset();
  }

  const PolicySpec& spec() const { return spec_; }
  const CoordWalkState& walk_state() const { return walk_; }
  std::size_t dim() const { return d_; }
  double lambda() const { return lambda_; }

  void reset() { walk_ = CoordWalkState{spec_.l0, 0}; }

  /// `rng` is only read by the stochastic kinds.
  Vec act(std::span<const double> delta, RngStream& rng) {
    if (delta.size() != d_) throw InvalidArgument("policy act: delta dimension mismatch");
    require_finite(delta, "policy delta");
    switch (spec_.kind) {
      case PolicyKind::direct: return clip_ball(delta, lambda_);
      case PolicyKind::coordinate_walk: return clip_ball(walk_step(delta), lambda_);
      case PolicyKind::noisy_coordinate_walk: {
        Vec a = walk_step(delta);
        for (double& x : a) x += rng.normal(0.0, spec_.sigma);
        return clip_ball(a, lambda_);
      }
      case PolicyKind::uniform_random: return rng.uniform_ball(d_, lambda_);
    }
    return zeros(d_);
  }

  /// Convenience for deterministic kinds.
  Vec act(std::span<const double> delta) {
    RngStream unused(0);
    return act(delta, unused);
  }

  bool operator==(const LoggingPolicy&) const = default;

 private:
  Vec walk_step(std::span<const double> delta) {
    Vec a = zeros(d_);
    const double component = delta[walk_.axis];
    if (std::abs(component) > walk_.l) {
      a[walk_.axis] = component > 0.0 ? walk_.l : -walk_.l;
      return a;
    }
    a[walk_.axis] = component;
    if (++walk_.axis == d_) {
      walk_.axis = 0;
      walk_.l = std::max(walk_.l * spec_.reduction, std::min(spec_.l_min, spec_.l0));
    }
    return a;
  }

  PolicySpec spec_;
  std::size_t d_;
  double lambda_;
  CoordWalkState walk_;
};

enum class PerturbationKind { gaussian_noise, random_scale, uniform };

inline std::string_view to_string(PerturbationKind k) {
  switch (k) {
    case PerturbationKind::gaussian_noise: return "gaussian_noise";
    case PerturbationKind::random_scale: return "random_scale";
    case PerturbationKind::uniform: return "uniform";
  }
  return "?";
}

inline PerturbationKind parse_perturbation_kind(std::string_view s) {
  for (auto k : {PerturbationKind::gaussian_noise, PerturbationKind::random_scale, PerturbationKind::uniform})
    if (to_string(k) == s) return k;
  throw InvalidArgument("unknown perturbation kind '" + std::string(s) + "'");
}

/// Baseline augmentations: a + eps, a * 2 exp(eta) with eta ~ N(0, sigma), or a
/// fresh uniform action. Results are clipped to the lambda-ball.
inline Vec perturb_action(std::span<const double> a, PerturbationKind kind, double sigma, double lambda,
                          RngStream& rng) {
  switch (kind) {
    case PerturbationKind::gaussian_noise: {
      Vec out(a.begin(), a.end());
      for (double& x : out) x += rng.normal(0.0, sigma);
      return clip_ball(out, lambda);
    }
    case PerturbationKind::random_scale: {
      const double eta = rng.normal(0.0, sigma);
      return clip_ball(scaled(a, 2.0 * std::exp(eta)), lambda);
    }
    case PerturbationKind::uniform: return rng.uniform_ball(a.size(), lambda);
  }
  return Vec(a.begin(), a.end());
}

struct EpisodeOutcome {
  std::size_t steps = 0;
  bool reached = false;
  double discounted_return = 0.0;
};

/// Runs one episode of `policy` (freshly reset) and reports its length.
inline EpisodeOutcome run_policy_episode(const Environment& env, LoggingPolicy policy, const RngStream& episode_rng) {
  auto [state, obs] = env.reset(episode_rng);
  RngStream act_rng = episode_rng.child("policy");
  policy.reset();
  EpisodeOutcome out;
  double discount = 1.0;
  while (!state.done) {
    const Vec a = policy.act(env.delta_from_observation(obs), act_rng);
    StepResult r = env.step(state, a);
    out.discounted_return += discount * r.transition.reward;
    discount *= env.config().gamma;
    obs = std::move(r.next_obs);
    ++out.steps;
  }
  out.reached = env.at_target(state.s, state.target);
  return out;
}

struct ExpertnessRow {
  double l0 = 0.0;
  double mean_steps = 0.0;
  double success_rate = 0.0;
};

/// Mean steps-to-target for each initial step size. Episode k uses the same
/// stream for every l0, so rows are paired.
inline std::vector<ExpertnessRow> expertness_curve(const PolicySpec& base, const EnvConfig& config,
                                                   std::span<const double> step_sizes, std::size_t n_episodes,
                                                   const RngStream& rng) {
  Environment env(config);
  std::vector<ExpertnessRow> rows;
  for (double l0 : step_sizes) {
    PolicySpec spec = base;
    spec.l0 = l0;
    spec.l_min = std::min(spec.l_min, l0);
    LoggingPolicy policy(spec, config.d, config.lambda);
    std::vector<EpisodeOutcome> outcomes(n_episodes);
    parallel_for(n_episodes, [&](std::size_t k) { outcomes[k] = run_policy_episode(env, policy, rng.child("episode", k)); });
    ExpertnessRow row{l0, 0.0, 0.0};
    for (const auto& o : outcomes) {
      row.mean_steps += static_cast<double>(o.steps);
      row.success_rate += o.reached ? 1.0 : 0.0;
    }
    if (n_episodes > 0) {
      row.mean_steps /= static_cast<double>(n_episodes);
      row.success_rate /= static_cast<double>(n_episodes);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace lift
