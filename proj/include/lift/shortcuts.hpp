#pragma once

// Shortcut extraction from logged trajectories.
//
// For a trajectory (o_0, a_0, r_0), ..., (o_n, a_n, r_n) with returns G, the
// accumulated action a_hat = a_i + ... + a_{j-1} is a candidate for the jump
// i -> j (i < j <= n) when
//
//     gamma * G_j - G_i + r_{j-1} >= C * sum_{k=i}^{j-1} |a_k|   and  |a_hat| <= lambda.
//
// Accepted jumps become synthetic tuples (o_i, a_hat, r_{j-1}, o_j) that reuse
// the observed landing observation and reward.

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lift/core.hpp"
#include "lift/dataset_io.hpp"
#include "lift/environment.hpp"
#include "lift/rng.hpp"

namespace lift {

enum class SamplingStrategy { weighted, inverse_distance, uniform, best };

inline std::string_view to_string(SamplingStrategy s) {
  switch (s) {
    case SamplingStrategy::weighted: return "weighted";
    case SamplingStrategy::inverse_distance: return "inverse_distance";
    case SamplingStrategy::uniform: return "uniform";
    case SamplingStrategy::best: return "best";
  }
  return "?";
}

inline SamplingStrategy parse_sampling_strategy(std::string_view s) {
  for (auto k : {SamplingStrategy::weighted, SamplingStrategy::inverse_distance, SamplingStrategy::uniform,
                 SamplingStrategy::best})
    if (to_string(k) == s) return k;
  throw InvalidArgument("unknown sampling strategy '" + std::string(s) + "'");
}

struct ShortcutConfig {
  double C = 0.0;
  SamplingStrategy strategy = SamplingStrategy::weighted;
  std::size_t max_per_trajectory = 20;
  double gamma = 0.99;
  double lambda = 1.0;
  /// Absolute slack on the value-gap test; absorbs rounding of G in the j = i + 1 case.
  double tolerance = 1e-12;

  void validate() const {
    if (!(C >= 0.0)) throw InvalidArgument("shortcut.C must be >= 0");
    if (max_per_trajectory < 1) throw InvalidArgument("shortcut.cap must be >= 1");
    if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("shortcut.gamma must be in (0, 1)");
    if (!(lambda > 0.0)) throw InvalidArgument("shortcut.lambda must be > 0");
    if (!(tolerance >= 0.0)) throw InvalidArgument("shortcut.tolerance must be >= 0");
  }

  bool operator==(const ShortcutConfig&) const = default;
};

struct ShortcutTuple {
  std::size_t i = 0;
  std::size_t j = 0;
  Vec o_i;
  Vec a_hat;
  double r = 0.0;  // r_{j-1}
  Vec o_j;
  double weight = 0.0;  // sampling mass under the configured strategy

  bool operator==(const ShortcutTuple&) const = default;
};

/// G_i = r_i + gamma * G_{i+1}, G_n = r_n.
inline std::vector<double> returns(std::span<const double> rewards, double gamma) {
  std::vector<double> g(rewards.size());
  double acc = 0.0;
  for (std::size_t k = rewards.size(); k-- > 0;) {
    acc = rewards[k] + gamma * acc;
    g[k] = acc;
  }
  return g;
}

inline std::vector<double> rewards_of(const Trajectory& traj) {
  std::vector<double> r;
  r.reserve(traj.size());
  for (const auto& tr : traj.transitions) r.push_back(tr.reward);
  return r;
}

inline std::vector<double> returns(const Trajectory& traj, double gamma) {
  if (traj.empty()) throw InvalidArgument("returns: empty trajectory");
  return returns(rewards_of(traj), gamma);
}

/// Work counter for candidate_set, one unit per examined j.
struct CandidateStats {
  std::size_t examined = 0;
};

/// All jumps from source index i that pass the value-gap and action-space
/// tests, in increasing j. `G` must be returns(traj, cfg.gamma).
inline std::vector<ShortcutTuple> candidate_set(const Trajectory& traj, std::span<const double> G, std::size_t i,
                                                const ShortcutConfig& cfg, CandidateStats* stats = nullptr) {
  if (traj.empty() || i >= traj.size() - 1)
    throw InvalidArgument("candidate_set: source index " + std::to_string(i) + " out of range");
  if (G.size() != traj.size()) throw InvalidArgument("candidate_set: returns do not match trajectory");

  const std::size_t n = traj.size() - 1;
  std::vector<ShortcutTuple> out;
  Vec a_hat = zeros(traj.transitions[i].action.size());
  double path = 0.0;
  for (std::size_t j = i + 1; j <= n; ++j) {
    const Transition& prev = traj.transitions[j - 1];
    for (std::size_t c = 0; c < a_hat.size(); ++c) a_hat[c] += prev.action[c];
    path += norm(prev.action);
    if (stats) ++stats->examined;

    const double gap = cfg.gamma * G[j] - G[i] + prev.reward;
    if (gap + cfg.tolerance >= cfg.C * path && norm(a_hat) <= cfg.lambda) {
      ShortcutTuple tup;
      tup.i = i;
      tup.j = j;
      tup.o_i = traj.transitions[i].obs;
      tup.a_hat = a_hat;
      tup.r = prev.reward;
      tup.o_j = traj.transitions[j].obs;
      out.push_back(std::move(tup));
    }
  }
  return out;
}

inline std::vector<ShortcutTuple> candidate_set(const Trajectory& traj, std::size_t i, const ShortcutConfig& cfg) {
  const auto G = returns(traj, cfg.gamma);
  return candidate_set(traj, G, i, cfg);
}

/// Sampling masses over a candidate list (unnormalised).
inline std::vector<double> sampling_masses(std::span<const ShortcutTuple> S, SamplingStrategy strategy) {
  std::vector<double> mass(S.size(), 1.0);
  if (S.empty()) return mass;
  switch (strategy) {
    case SamplingStrategy::weighted: {
      double lo = std::numeric_limits<double>::infinity();
      for (const auto& t : S) lo = std::min(lo, t.r);
      double total = 0.0;
      for (std::size_t k = 0; k < S.size(); ++k) total += (mass[k] = S[k].r - lo);
      if (!(total > 0.0)) std::fill(mass.begin(), mass.end(), 1.0);
      break;
    }
    case SamplingStrategy::inverse_distance:
      for (std::size_t k = 0; k < S.size(); ++k) mass[k] = 1.0 / std::max(-S[k].r, 1e-9);
      break;
    case SamplingStrategy::uniform: break;
    case SamplingStrategy::best: {
      std::size_t best = 0;
      for (std::size_t k = 1; k < S.size(); ++k)
        if (S[k].r > S[best].r) best = k;
      std::fill(mass.begin(), mass.end(), 0.0);
      mass[best] = 1.0;
      break;
    }
  }
  return mass;
}

/// Index into S drawn from the strategy's mass function; nullopt if S is empty.
inline std::optional<std::size_t> sample_shortcut_index(std::span<const ShortcutTuple> S, SamplingStrategy strategy,
                                                        RngStream& rng) {
  if (S.empty()) return std::nullopt;
  const auto mass = sampling_masses(S, strategy);
  if (strategy == SamplingStrategy::best) {
    for (std::size_t k = 0; k < mass.size(); ++k)
      if (mass[k] > 0.0) return k;
  }
  double total = 0.0;
  for (double m : mass) total += m;
  const double u = rng.uniform01() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < mass.size(); ++k) {
    if (mass[k] <= 0.0) continue;
    acc += mass[k];
    last_positive = k;
    if (u < acc) return k;
  }
  return last_positive;
}

inline std::optional<ShortcutTuple> sample_shortcut(std::span<const ShortcutTuple> S, SamplingStrategy strategy,
                                                    RngStream& rng) {
  const auto idx = sample_shortcut_index(S, strategy, rng);
  if (!idx) return std::nullopt;
  ShortcutTuple t = S[*idx];
  t.weight = sampling_masses(S, strategy)[*idx];
  return t;
}

/// Up to cfg.max_per_trajectory tuples, one per source index, with source
/// indices visited in uniformly random order without replacement.
inline std::vector<ShortcutTuple> shortcut_tuples(const Trajectory& traj, const ShortcutConfig& cfg, RngStream& rng) {
  cfg.validate();
  std::vector<ShortcutTuple> out;
  if (traj.size() < 2) return out;
  const auto G = returns(traj, cfg.gamma);
  std::vector<std::size_t> sources(traj.size() - 1);
  for (std::size_t k = 0; k < sources.size(); ++k) sources[k] = k;
  rng.shuffle(sources);
  for (std::size_t i : sources) {
    if (out.size() >= cfg.max_per_trajectory) break;
    const auto S = candidate_set(traj, G, i, cfg);
    if (auto t = sample_shortcut(S, cfg.strategy, rng)) out.push_back(std::move(*t));
  }
  return out;
}

inline std::string shortcut_record(std::uint64_t ep, const ShortcutTuple& t) {
  return JsonLine()
      .field("type", "shortcut")
      .field("ep", ep)
      .field("i", static_cast<std::uint64_t>(t.i))
      .field("j", static_cast<std::uint64_t>(t.j))
      .field("o_i", t.o_i)
      .field("a_hat", t.a_hat)
      .field("r", t.r)
      .field("o_j", t.o_j)
      .field("weight", t.weight)
      .field("augmented", true)
      .str();
}

}  // namespace lift
