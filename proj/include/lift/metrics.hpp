#pragma once

// Dataset summaries and evaluation curves. Return, length, success and grid
// occupancy are proxies for trajectory quality and state coverage.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <unordered_set>
#include <vector>

#include "lift/core.hpp"
#include "lift/dataset_io.hpp"
#include "lift/environment.hpp"
#include "lift/knn_q.hpp"
#include "lift/policies.hpp"
#include "lift/rng.hpp"
#include "lift/shortcuts.hpp"

namespace lift {

struct DatasetMetrics {
  std::size_t episodes = 0;
  std::size_t transitions = 0;
  std::size_t augmented = 0;
  double mean_return = 0.0;  // discounted, from the first state
  double mean_length = 0.0;
  double success_rate = 0.0;
  double occupancy = 0.0;    // fraction of grid cells visited
  std::size_t cells_visited = 0;

  std::string record_line(std::string_view config_digest) const {
    return JsonLine()
        .field("type", "metrics")
        .field("config_digest", config_digest)
        .field("episodes", static_cast<std::uint64_t>(episodes))
        .field("transitions", static_cast<std::uint64_t>(transitions))
        .field("augmented", static_cast<std::uint64_t>(augmented))
        .field("mean_return", mean_return)
        .field("mean_length", mean_length)
        .field("success_rate", success_rate)
        .field("occupancy", occupancy)
        .field("cells_visited", static_cast<std::uint64_t>(cells_visited))
        .str();
  }
};

/// Grid cell of `s` in [-box, box]^d at the given resolution, packed into one key.
inline std::uint64_t grid_cell(std::span<const double> s, double box, double resolution) {
  const auto per_dim = static_cast<std::uint64_t>(std::ceil(2.0 * box / resolution - 1e-9));
  std::uint64_t key = 0;
  for (double x : s) {
    const double pos = std::floor((std::clamp(x, -box, box) + box) / resolution);
    const auto idx = std::min(static_cast<std::uint64_t>(std::max(pos, 0.0)), per_dim - 1);
    key = key * per_dim + idx;
  }
  return key;
}

inline DatasetMetrics dataset_metrics(const Dataset& ds, double theta, double box = 1.0, double resolution = 0.1) {
  if (!(resolution > 0.0)) throw InvalidArgument("metrics: resolution must be > 0");
  DatasetMetrics m;
  std::unordered_set<std::uint64_t> cells;
  std::size_t d = ds.meta.d;
  for (const Trajectory& traj : ds.trajectories) {
    ++m.episodes;
    if (traj.empty()) continue;
    d = traj.transitions.front().latent_s.size();
    m.transitions += traj.size();
    m.mean_length += static_cast<double>(traj.size());
    m.mean_return += returns(traj, ds.meta.gamma)[0];
    const Transition& last = traj.transitions.back();
    if (distance(last.latent_next_s, traj.target) <= theta) m.success_rate += 1.0;
    for (const Transition& tr : traj.transitions) {
      if (tr.augmented) ++m.augmented;
      cells.insert(grid_cell(tr.latent_s, box, resolution));
    }
    cells.insert(grid_cell(last.latent_next_s, box, resolution));
  }
  if (m.episodes > 0) {
    const double n = static_cast<double>(m.episodes);
    m.mean_return /= n;
    m.mean_length /= n;
    m.success_rate /= n;
  }
  m.cells_visited = cells.size();
  if (d > 0) {
    const double per_dim = std::ceil(2.0 * box / resolution - 1e-9);
    m.occupancy = static_cast<double>(cells.size()) / std::pow(per_dim, static_cast<double>(d));
  }
  return m;
}

/// Linear-interpolation quantile of an unsorted sample, q in [0, 1].
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw InvalidArgument("quantile of empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("quantile level must be in [0, 1]");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct CurveRow {
  std::size_t step = 0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

/// Chooses the next action from an observation; owns any per-episode state.
using Actor = std::function<Vec(std::span<const double> obs, RngStream& rng)>;
using ActorFactory = std::function<Actor()>;

inline ActorFactory policy_actor(const Environment& env, const PolicySpec& spec) {
  return [&env, spec] {
    auto policy = std::make_shared<LoggingPolicy>(spec, env.config().d, env.config().lambda);
    return Actor([&env, policy](std::span<const double> obs, RngStream& rng) {
      return policy->act(env.delta_from_observation(obs), rng);
    });
  };
}

/// Greedy Q-argmax actor; the logging policy's action is the fallback
/// candidate and wins ties.
inline ActorFactory model_actor(const Environment& env, const KnnQModel& model, const PolicySpec& fallback) {
  return [&env, &model, fallback] {
    auto policy = std::make_shared<LoggingPolicy>(fallback, env.config().d, env.config().lambda);
    return Actor([&env, &model, policy](std::span<const double> obs, RngStream& rng) {
      const Vec logged = policy->act(env.delta_from_observation(obs), rng);
      auto [idx, action] = model.argmax(obs, logged, rng);
      if (idx != 0) policy->reset();
      return clip_ball(action, env.config().lambda);
    });
  };
}

/// Distance to target at steps 0..horizon over `episodes` rollouts. Finished
/// episodes keep their final distance.
inline std::vector<CurveRow> evaluation_curve(const Environment& env, const ActorFactory& make_actor,
                                              std::size_t episodes, std::size_t horizon, const RngStream& rng) {
  if (episodes < 1) throw InvalidArgument("evaluation needs at least one episode");
  std::vector<std::vector<double>> dist(episodes, std::vector<double>(horizon + 1, 0.0));
  parallel_for(episodes, [&](std::size_t k) {
    const RngStream ep = rng.child("episode", k);
    RngStream act_rng = ep.child("policy");
    auto [state, obs] = env.reset(ep);
    Actor actor = make_actor();
    dist[k][0] = distance(state.s, state.target);
    for (std::size_t t = 1; t <= horizon; ++t) {
      if (!state.done) {
        StepResult r = env.step(state, actor(obs, act_rng));
        obs = std::move(r.next_obs);
      }
      dist[k][t] = distance(state.s, state.target);
    }
  });
  std::vector<CurveRow> rows;
  std::vector<double> column(episodes);
  for (std::size_t t = 0; t <= horizon; ++t) {
    for (std::size_t k = 0; k < episodes; ++k) column[k] = dist[k][t];
    rows.push_back({t, quantile(column, 0.5), quantile(column, 0.25), quantile(column, 0.75)});
  }
  return rows;
}

inline void write_curve_csv(const std::vector<CurveRow>& rows, std::ostream& os, std::string_view config_digest = "") {
  if (!config_digest.empty()) os << "# config_digest=" << config_digest << '\n';
  os << "step,median_distance,q25,q75\n";
  for (const auto& r : rows)
    os << r.step << ',' << format_double(r.median) << ',' << format_double(r.q25) << ',' << format_double(r.q75)
       << '\n';
}

}  // namespace lift
