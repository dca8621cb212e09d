#pragma once

// LIFT collection: roll out the logging policy, let an augmentor override
// actions with probability p (at most `cap` times per episode), reset the
// logging policy after every override, and retrain the augmentor at fixed
// episode counts. Only real transitions are stored.

#include <algorithm>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lift/core.hpp"
#include "lift/environment.hpp"
#include "lift/knn_q.hpp"
#include "lift/policies.hpp"
#include "lift/rng.hpp"
#include "lift/shortcuts.hpp"

namespace lift {

struct CollectConfig {
  double p = 0.6;
  std::size_t n = 100;
  std::size_t cap = 20;
  std::vector<std::size_t> train_after{50};

  void validate() const {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("collect.p must be in [0, 1]");
    for (std::size_t t : train_after)
      if (t < 1 || t >= n) throw InvalidArgument("collect.train_after entries must be in [1, n)");
  }

  bool operator==(const CollectConfig&) const = default;
};

/// What an augmentor sees at one step. `env`, `state` and `policy` (the
/// logging policy as it was before choosing the logged action) are oracle
/// access; only augmentors reporting uses_oracle() may read them.
struct SuggestContext {
  std::span<const double> obs;
  std::span<const double> logged_action;
  const Environment* env = nullptr;
  const EpisodeState* state = nullptr;
  const LoggingPolicy* policy = nullptr;
};

class Augmentor {
 public:
  virtual ~Augmentor() = default;

  virtual std::string_view name() const = 0;
  virtual bool trained() const = 0;
  virtual bool uses_oracle() const { return false; }

  /// Replacement action, or nullopt to keep the logged one. Must be safe to
  /// call concurrently; suggestions satisfy |a| <= lambda.
  virtual std::optional<Vec> suggest(const SuggestContext& ctx, RngStream& rng) const = 0;

  virtual void train(const Dataset& /*data*/, const ShortcutConfig& /*shortcut*/, const RngStream& /*rng*/) {}
};

/// Q-argmax augmentor backed by a KnnQModel.
class KnnAugmentor : public Augmentor {
 public:
  KnnAugmentor(const Environment& env, KnnQParams params) : env_(env), params_(params) {}

  std::string_view name() const override { return "knn_q"; }
  bool trained() const override { return model_.trained(); }
  const KnnQModel& model() const { return model_; }
  void set_model(KnnQModel model) { model_ = std::move(model); }

  std::optional<Vec> suggest(const SuggestContext& ctx, RngStream& rng) const override {
    if (!model_.trained()) return std::nullopt;
    auto [idx, action] = model_.argmax(ctx.obs, ctx.logged_action, rng);
    if (idx == 0) return std::nullopt;
    return clip_ball(action, env_.config().lambda);
  }

  void train(const Dataset& data, const ShortcutConfig& shortcut, const RngStream& rng) override {
    model_ = train_knn_q(data, env_, shortcut, params_, rng);
  }

 private:
  const Environment& env_;
  KnnQParams params_;
  KnnQModel model_;
};

/// Collection-time baseline: perturbs the logged action.
class PerturbationAugmentor : public Augmentor {
 public:
  PerturbationAugmentor(PerturbationKind kind, double sigma, double lambda)
      : kind_(kind), sigma_(sigma), lambda_(lambda) {}

  std::string_view name() const override { return to_string(kind_); }
  bool trained() const override { return true; }

  std::optional<Vec> suggest(const SuggestContext& ctx, RngStream& rng) const override {
    return perturb_action(ctx.logged_action, kind_, sigma_, lambda_, rng);
  }

 private:
  PerturbationKind kind_;
  double sigma_;
  double lambda_;
};

/// Called after every step with the stored transition and the logging-policy
/// state that will choose the next action.
using StepObserver = std::function<void(std::size_t episode, const Transition&, const LoggingPolicy&)>;

struct EpisodeStats {
  std::size_t overrides = 0;
  std::size_t draws_below_p = 0;
};

/// Rolls out one episode from stream `ep_rng`. Child streams: "context",
/// "target", "start" (environment), "policy", "override", "augmentor".
inline Trajectory collect_episode(const Environment& env, const PolicySpec& policy_spec, const Augmentor* augmentor,
                                  const CollectConfig& cfg, std::uint64_t episode, const RngStream& ep_rng,
                                  const StepObserver& observer = {}, EpisodeStats* stats = nullptr) {
  LoggingPolicy policy(policy_spec, env.config().d, env.config().lambda);
  RngStream act_rng = ep_rng.child("policy");
  RngStream override_rng = ep_rng.child("override");
  RngStream aug_rng = ep_rng.child("augmentor");

  auto [state, obs] = env.reset(ep_rng);
  Trajectory traj;
  traj.episode = episode;
  traj.context = state.context;
  traj.target = state.target;

  std::size_t overrides = 0;
  const bool can_override = augmentor != nullptr && augmentor->trained();
  while (!state.done) {
    const LoggingPolicy before = policy;
    Vec a = policy.act(env.delta_from_observation(obs), act_rng);
    const double u = override_rng.uniform_open_closed();
    bool augmented = false;
    if (u <= cfg.p) {
      if (stats) ++stats->draws_below_p;
      if (can_override && overrides < cfg.cap) {
        SuggestContext ctx{obs, a, &env, &state, &before};
        if (auto replacement = augmentor->suggest(ctx, aug_rng)) {
          a = clip_ball(*replacement, env.config().lambda);
          augmented = true;
        }
      }
    }
    StepResult r = env.step(state, a);
    r.transition.augmented = augmented;
    if (augmented) {
      policy.reset();
      ++overrides;
    }
    if (observer) observer(episode, r.transition, policy);
    traj.transitions.push_back(std::move(r.transition));
    obs = std::move(r.next_obs);
  }
  if (stats) stats->overrides += overrides;
  return traj;
}

/// Collects cfg.n trajectories. Episodes between training checkpoints are
/// independent and may run in parallel; results are merged in episode order.
inline Dataset collect(const Environment& env, const PolicySpec& policy_spec, Augmentor* augmentor,
                       const CollectConfig& cfg, const ShortcutConfig& shortcut, const RngStream& rng,
                       const StepObserver& observer = {}) {
  cfg.validate();
  Dataset ds;
  ds.meta.seed = rng.seed();
  ds.meta.d = env.config().d;
  ds.meta.gamma = env.config().gamma;
  ds.trajectories.resize(cfg.n);

  std::vector<std::size_t> checkpoints = cfg.train_after;
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
  checkpoints.push_back(cfg.n);

  std::size_t begin = 0;
  for (std::size_t checkpoint : checkpoints) {
    const std::size_t end = std::min(checkpoint, cfg.n);
    if (observer) {
      for (std::size_t k = begin; k < end; ++k)
        ds.trajectories[k] =
            collect_episode(env, policy_spec, augmentor, cfg, k, rng.child("episode", k), observer);
    } else {
      parallel_for(end - begin, [&](std::size_t off) {
        const std::size_t k = begin + off;
        ds.trajectories[k] = collect_episode(env, policy_spec, augmentor, cfg, k, rng.child("episode", k));
      });
    }
    begin = end;
    if (augmentor != nullptr && end < cfg.n) {
      Dataset so_far;
      so_far.meta = ds.meta;
      so_far.trajectories.assign(ds.trajectories.begin(), ds.trajectories.begin() + static_cast<std::ptrdiff_t>(end));
      augmentor->train(so_far, shortcut, rng.child("train", end));
    }
  }
  return ds;
}

}  // namespace lift
