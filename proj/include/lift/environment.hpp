#pragma once

// Episodic active-positioning environment: latent position s, context W and
// target s_W; reward is the negative remaining distance after each move.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lift/core.hpp"
#include "lift/distortions.hpp"
#include "lift/rng.hpp"

namespace lift {

enum class ObservationKind { position, difference };
enum class TargetMode { fixed_origin, random_per_episode };

inline std::string_view to_string(ObservationKind k) {
  return k == ObservationKind::position ? "position" : "difference";
}
inline std::string_view to_string(TargetMode m) {
  return m == TargetMode::fixed_origin ? "fixed_origin" : "random_per_episode";
}
inline ObservationKind parse_observation_kind(std::string_view s) {
  if (s == "position") return ObservationKind::position;
  if (s == "difference") return ObservationKind::difference;
  throw InvalidArgument("unknown observation kind '" + std::string(s) + "'");
}
inline TargetMode parse_target_mode(std::string_view s) {
  if (s == "fixed_origin") return TargetMode::fixed_origin;
  if (s == "random_per_episode") return TargetMode::random_per_episode;
  throw InvalidArgument("unknown target mode '" + std::string(s) + "'");
}

struct EnvConfig {
  std::size_t d = 2;
  double lambda = 1.0;
  double theta = 0.05;
  std::size_t max_steps = 100;
  double gamma = 0.99;
  DistortionSpec distortion = DistortionSpec::defaults(DistortionKind::identity);
  ObservationKind observation = ObservationKind::position;
  TargetMode target_mode = TargetMode::fixed_origin;
  double box = 1.0;  // P = [-box, box]^d

  void validate() const {
    if (d < 1) throw InvalidArgument("env.d must be >= 1");
    if (!(theta > 0.0 && theta < lambda)) throw InvalidArgument("env: need 0 < theta < lambda");
    if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("env.gamma must be in (0, 1)");
    if (max_steps < 1) throw InvalidArgument("env.max_steps must be >= 1");
    if (!(box > 0.0)) throw InvalidArgument("env.box must be > 0");
    if (observation == ObservationKind::position && target_mode != TargetMode::fixed_origin)
      throw InvalidArgument("env: position observations require target_mode = fixed_origin");
    if (distortion.lambda != lambda)
      throw InvalidArgument("env: distortion.lambda must equal env.lambda");
    if (distortion.kind == DistortionKind::regrot && d < 2)
      throw InvalidArgument("env: regrot distortion needs d >= 2");
    distortion.validate();
  }

  bool operator==(const EnvConfig&) const = default;
};

/// Full simulator state. Copying it is the snapshot operation.
struct EpisodeState {
  Vec s;
  Context context;
  Vec target;
  std::size_t t = 0;
  bool done = false;

  bool operator==(const EpisodeState&) const = default;
};

inline EpisodeState snapshot(const EpisodeState& state) { return state; }
inline EpisodeState restore(const EpisodeState& saved) { return saved; }

/// One logged step. `obs` is the observation the action was chosen from;
/// reward = -|latent_next_s - s_W|.
struct Transition {
  Vec obs;
  Vec action;
  double reward = 0.0;
  bool done = false;
  Vec latent_s;
  Vec latent_next_s;
  bool augmented = false;

  bool operator==(const Transition&) const = default;
};

struct Trajectory {
  std::uint64_t episode = 0;
  Context context;
  Vec target;
  std::vector<Transition> transitions;

  std::size_t size() const { return transitions.size(); }
  bool empty() const { return transitions.empty(); }
  bool operator==(const Trajectory&) const = default;
};

struct DatasetMeta {
  int format_version = 1;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::size_t d = 0;
  double gamma = 0.99;

  bool operator==(const DatasetMeta&) const = default;
};

struct Dataset {
  DatasetMeta meta;
  std::vector<Trajectory> trajectories;

  bool operator==(const Dataset&) const = default;
};

struct StepResult {
  Transition transition;
  Vec next_obs;
};

class Environment {
 public:
  explicit Environment(EnvConfig config) : config_(std::move(config)) { config_.validate(); }

  const EnvConfig& config() const { return config_; }

  /// Starts an episode from `rng` (one stream per episode). Draws context,
  /// target and start position from independent children.
  std::pair<EpisodeState, Vec> reset(const RngStream& rng) const {
    RngStream ctx_rng = rng.child("context");
    RngStream target_rng = rng.child("target");
    RngStream start_rng = rng.child("start");

    EpisodeState state;
    state.context = sample_context(config_.distortion, config_.d, ctx_rng);
    state.target = config_.target_mode == TargetMode::fixed_origin
                       ? zeros(config_.d)
                       : target_rng.uniform_box(config_.d, config_.box / 2.0);
    do {
      state.s = start_rng.uniform_box(config_.d, config_.box);
    } while (distance(state.s, state.target) <= config_.theta);
    Vec obs = observe(state);
    return {std::move(state), std::move(obs)};
  }

  /// Builds a state directly, e.g. for oracle rollouts from chosen positions.
  EpisodeState make_state(Vec s, Context context, Vec target, std::size_t t = 0) const {
    require_same_dim(s, target, "make_state");
    if (s.size() != config_.d) throw InvalidArgument("make_state: wrong dimension");
    context.validate(config_.d);
    EpisodeState state{std::move(s), std::move(context), std::move(target), t, false};
    state.done = at_target(state.s, state.target) || t >= config_.max_steps;
    return state;
  }

  Vec observe(const EpisodeState& state) const { return observe(state.s, state.target); }

  Vec observe(std::span<const double> s, std::span<const double> target) const {
    if (config_.observation == ObservationKind::position) return Vec(s.begin(), s.end());
    return sub(s, target);
  }

  /// s_W - s as recovered from an observation.
  Vec delta_from_observation(std::span<const double> obs) const {
    // Position observations use the fixed origin as the target.
    return scaled(obs, -1.0);
  }

  bool at_target(std::span<const double> s, std::span<const double> target) const {
    return distance(s, target) <= config_.theta;
  }

  Vec clamp_to_box(Vec v) const {
    for (double& x : v) x = std::min(std::max(x, -config_.box), config_.box);
    return v;
  }

  /// f(s, a, W) clamped into the box. No action-radius check.
  Vec next_position(const EpisodeState& state, std::span<const double> a) const {
    if (a.size() != config_.d) throw InvalidArgument("next_position: action dimension mismatch");
    require_finite(a, "action");
    return clamp_to_box(apply(config_.distortion, state.s, a, state.context, state.target));
  }

  StepResult step(EpisodeState& state, std::span<const double> a) const {
    if (state.done) throw std::logic_error("step called on a finished episode");
    if (norm(a) > config_.lambda + 1e-9)
      throw InvalidArgument("step: action norm " + std::to_string(norm(a)) + " exceeds lambda");

    StepResult out;
    Transition& tr = out.transition;
    tr.obs = observe(state);
    tr.action.assign(a.begin(), a.end());
    tr.latent_s = state.s;
    tr.latent_next_s = next_position(state, a);
    const double dist = distance(tr.latent_next_s, state.target);
    tr.reward = -dist;

    state.s = tr.latent_next_s;
    state.t += 1;
    state.done = dist <= config_.theta || state.t >= config_.max_steps;
    tr.done = state.done;
    out.next_obs = observe(state);
    return out;
  }

 private:
  EnvConfig config_;
};

}  // namespace lift
