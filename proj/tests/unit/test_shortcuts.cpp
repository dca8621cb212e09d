#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "lift/shortcuts.hpp"
#include "test_util.hpp"

using namespace lift;
using namespace lift::testing;

namespace {

ShortcutConfig config(double C, double gamma = 0.99, double lambda = 1.0) {
  ShortcutConfig c;
  c.C = C;
  c.gamma = gamma;
  c.lambda = lambda;
  return c;
}

ShortcutTuple tuple_with_r(double r, std::size_t j) {
  ShortcutTuple t;
  t.j = j;
  t.r = r;
  return t;
}

std::set<std::pair<std::size_t, std::size_t>> pairs(const Trajectory& traj, const ShortcutConfig& cfg) {
  std::set<std::pair<std::size_t, std::size_t>> out;
  const auto G = returns(traj, cfg.gamma);
  for (std::size_t i = 0; i + 1 < traj.size(); ++i)
    for (const auto& t : candidate_set(traj, G, i, cfg)) out.insert({t.i, t.j});
  return out;
}

}  // namespace

TEST(Returns, HandExample) {
  const auto G = returns(std::vector<double>{-1, -1, 0}, 0.5);
  EXPECT_EQ(G, (std::vector<double>{-1.5, -1, 0}));
  EXPECT_EQ(returns(std::vector<double>{0, 0, 0, 0}, 0.9), (std::vector<double>(4, 0.0)));
}

TEST(Returns, MatchesDoubleLoopOracle) {
  RngStream r(11);
  std::vector<double> rewards;
  for (int k = 0; k < 50; ++k) rewards.push_back(-r.uniform(0.0, 2.0));
  const auto G = returns(rewards, 0.97);
  const auto oracle = returns_oracle(rewards, 0.97);
  for (std::size_t k = 0; k < G.size(); ++k) EXPECT_NEAR(G[k], oracle[k], 1e-12);
}

TEST(Returns, EmptyTrajectoryRejected) { EXPECT_THROW(returns(Trajectory{}, 0.9), InvalidArgument); }

TEST(CandidateSet, MatchesDirectInequality) {
  RngStream r(12);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t len = 2 + r.uniform_index(30);
    std::vector<double> rewards;
    std::vector<Vec> actions;
    for (std::size_t k = 0; k < len; ++k) {
      rewards.push_back(-r.uniform(0.0, 1.5));
      actions.push_back(r.uniform_ball(3, 0.4));
    }
    const Trajectory traj = synthetic(rewards, actions);
    const double C = trial % 3 == 0 ? 0.0 : r.uniform(0.0, 0.5);
    const ShortcutConfig cfg = config(C, 0.9, 1.0);
    const auto G = returns_oracle(rewards, cfg.gamma);
    for (std::size_t i = 0; i + 1 < len; ++i) {
      std::vector<std::size_t> expected;
      for (std::size_t j = i + 1; j < len; ++j) {
        Vec a_hat = zeros(3);
        double path = 0.0;
        for (std::size_t k = i; k < j; ++k) {
          for (int c = 0; c < 3; ++c) a_hat[c] += actions[k][c];
          path += std::sqrt(actions[k][0] * actions[k][0] + actions[k][1] * actions[k][1] +
                            actions[k][2] * actions[k][2]);
        }
        const double gap = cfg.gamma * G[j] - G[i] + rewards[j - 1];
        if (gap + cfg.tolerance >= C * path && norm(a_hat) <= cfg.lambda) expected.push_back(j);
      }
      const auto S = candidate_set(traj, i, cfg);
      std::vector<std::size_t> got;
      for (const auto& t : S) {
        got.push_back(t.j);
        EXPECT_EQ(t.i, i);
        EXPECT_EQ(t.o_i, traj.transitions[i].obs);
        EXPECT_EQ(t.o_j, traj.transitions[t.j].obs);
        EXPECT_EQ(t.r, rewards[t.j - 1]);
        EXPECT_LE(norm(t.a_hat), cfg.lambda);
      }
      EXPECT_EQ(got, expected) << "trial " << trial << " i " << i;
    }
  }
}

TEST(CandidateSet, AccumulatedActionIsExactSum) {
  RngStream r(13);
  std::vector<double> rewards(25, -0.5);
  std::vector<Vec> actions;
  for (int k = 0; k < 25; ++k) actions.push_back(r.uniform_ball(2, 0.03));
  const Trajectory traj = synthetic(rewards, actions);
  for (const auto& t : candidate_set(traj, 3, config(0.0))) {
    Vec sum = zeros(2);
    for (std::size_t k = t.i; k < t.j; ++k) sum = add(sum, actions[k]);
    EXPECT_EQ(t.a_hat, sum);
  }
}

TEST(CandidateSet, ActionSpaceExclusion) {
  // j = 2 passes the value-gap test but |a_0 + a_1| = 1.2 > lambda.
  const Trajectory traj = synthetic({-1, -1, 0}, {Vec{0.6, 0}, Vec{0.6, 0}, Vec{0, 0}});
  const auto S = candidate_set(traj, 0, config(0.0, 0.5, 1.0));
  ASSERT_EQ(S.size(), 1u);
  EXPECT_EQ(S[0].j, 1u);
}

TEST(CandidateSet, LargeThresholdEmpties) {
  const Trajectory traj = synthetic({-1, -0.8, -0.5, -0.1}, {Vec{0.1}, Vec{0.1}, Vec{0.1}, Vec{0.1}});
  for (std::size_t i = 0; i < 3; ++i) EXPECT_TRUE(candidate_set(traj, i, config(1e6)).empty());
}

TEST(CandidateSet, ImprovingTrajectoryAllQualifyAtZeroThreshold) {
  const Environment env(env_config(DistortionKind::identity));
  const Dataset ds = corpus(env, walk_spec(0.1), 20, 14);
  const ShortcutConfig cfg = config(0.0);
  for (const auto& traj : ds.trajectories) {
    bool improving = true;
    for (const auto& tr : traj.transitions)
      improving &= distance(tr.latent_next_s, traj.target) < distance(tr.latent_s, traj.target);
    if (!improving || traj.size() < 2) continue;
    const auto G = returns(traj, cfg.gamma);
    for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
      std::size_t in_ball = 0;
      Vec a_hat = zeros(2);
      for (std::size_t j = i + 1; j < traj.size(); ++j) {
        a_hat = add(a_hat, traj.transitions[j - 1].action);
        in_ball += norm(a_hat) <= cfg.lambda;
      }
      EXPECT_EQ(candidate_set(traj, G, i, cfg).size(), in_ball);
    }
  }
}

TEST(CandidateSet, Errors) {
  const Trajectory traj = synthetic({-1, -1}, {Vec{0.1}, Vec{0.1}});
  EXPECT_THROW(candidate_set(traj, 1, config(0)), InvalidArgument);
  EXPECT_THROW(candidate_set(Trajectory{}, 0, config(0)), InvalidArgument);
  const std::vector<double> short_G{0.0};
  EXPECT_THROW(candidate_set(traj, short_G, 0, config(0)), InvalidArgument);
}

TEST(CandidateSet, ThresholdMonotone) {
  const Environment env(env_config(DistortionKind::blend));
  const Dataset ds = corpus(env, walk_spec(0.1), 30, 15);
  for (const auto& traj : ds.trajectories) {
    auto prev = pairs(traj, config(0.0));
    for (double C : {0.1, 1.0, 10.0}) {
      const auto cur = pairs(traj, config(C));
      EXPECT_TRUE(std::includes(prev.begin(), prev.end(), cur.begin(), cur.end()));
      prev = cur;
    }
  }
}

TEST(CandidateSet, LinearWork) {
  std::vector<std::size_t> work;
  for (std::size_t len : {50u, 100u, 200u, 400u}) {
    const Trajectory traj = synthetic(std::vector<double>(len, -1.0), std::vector<Vec>(len, Vec{0.001}));
    const auto G = returns(traj, 0.9);
    CandidateStats stats;
    candidate_set(traj, G, 0, config(0.0), &stats);
    work.push_back(stats.examined);
    EXPECT_EQ(stats.examined, len - 1);
  }
}

TEST(Sampling, Masses) {
  const std::vector<ShortcutTuple> two{tuple_with_r(-2, 1), tuple_with_r(-1, 2)};
  EXPECT_EQ(sampling_masses(two, SamplingStrategy::weighted), (std::vector<double>{0, 1}));
  RngStream r(16);
  for (int k = 0; k < 100; ++k) EXPECT_EQ(*sample_shortcut_index(two, SamplingStrategy::weighted, r), 1u);

  const std::vector<ShortcutTuple> ties{tuple_with_r(-3, 1), tuple_with_r(-1, 2), tuple_with_r(-1, 3)};
  EXPECT_EQ(*sample_shortcut_index(ties, SamplingStrategy::best, r), 1u);

  const auto inv = sampling_masses(two, SamplingStrategy::inverse_distance);
  EXPECT_DOUBLE_EQ(inv[0], 0.5);
  EXPECT_DOUBLE_EQ(inv[1], 1.0);
  const std::vector<ShortcutTuple> zero{tuple_with_r(0.0, 1)};
  EXPECT_DOUBLE_EQ(sampling_masses(zero, SamplingStrategy::inverse_distance)[0], 1e9);

  const std::vector<ShortcutTuple> equal{tuple_with_r(-1, 1), tuple_with_r(-1, 2)};
  EXPECT_EQ(sampling_masses(equal, SamplingStrategy::weighted), (std::vector<double>{1, 1}));
}

TEST(Sampling, EmptyAndSingleton) {
  RngStream r(17);
  const std::vector<ShortcutTuple> none;
  const std::vector<ShortcutTuple> one{tuple_with_r(-0.3, 4)};
  for (auto s : {SamplingStrategy::weighted, SamplingStrategy::inverse_distance, SamplingStrategy::uniform,
                 SamplingStrategy::best}) {
    EXPECT_FALSE(sample_shortcut(none, s, r));
    EXPECT_EQ(sample_shortcut(one, s, r)->j, 4u);
  }
}

TEST(Sampling, FrequenciesFollowMasses) {
  const std::vector<ShortcutTuple> S{tuple_with_r(-4, 1), tuple_with_r(-2, 2), tuple_with_r(-1, 3)};
  RngStream r(18);
  const int n = 60000;
  for (auto s : {SamplingStrategy::weighted, SamplingStrategy::inverse_distance, SamplingStrategy::uniform}) {
    const auto mass = sampling_masses(S, s);
    double total = 0;
    for (double m : mass) total += m;
    std::vector<int> counts(3, 0);
    for (int k = 0; k < n; ++k) ++counts[*sample_shortcut_index(S, s, r)];
    for (int k = 0; k < 3; ++k) {
      const double p = mass[k] / total;
      EXPECT_NEAR(counts[k] / double(n), p, 4 * std::sqrt(p * (1 - p) / n) + 1e-12) << to_string(s) << " " << k;
    }
  }
}

TEST(ShortcutTuples, CapDistinctSourcesAndDeterminism) {
  const Environment env(env_config(DistortionKind::blend));
  const Dataset ds = corpus(env, walk_spec(0.05), 10, 19);
  ShortcutConfig cfg = config(0.0);
  for (const auto& traj : ds.trajectories) {
    RngStream a(20), b(20);
    const auto x = shortcut_tuples(traj, cfg, a);
    const auto y = shortcut_tuples(traj, cfg, b);
    EXPECT_EQ(x, y);
    EXPECT_LE(x.size(), cfg.max_per_trajectory);
    std::set<std::size_t> sources;
    for (const auto& t : x) {
      EXPECT_TRUE(sources.insert(t.i).second);
      EXPECT_LT(t.i, t.j);
      EXPECT_GT(t.weight, 0.0);
    }
  }
  cfg.max_per_trajectory = 3;
  RngStream r(21);
  EXPECT_LE(shortcut_tuples(ds.trajectories[0], cfg, r).size(), 3u);
  const Trajectory single = synthetic({-1}, {Vec{0.1, 0}});
  EXPECT_TRUE(shortcut_tuples(single, config(0.0), r).empty());
  EXPECT_EQ(ShortcutConfig{}.max_per_trajectory, 20u);
}

TEST(ShortcutTuples, SourceOrderIsUniform) {
  // 4 source indices with a singleton candidate each and cap 1: the chosen
  // source is the first in the shuffled order, uniform over 0..3.
  const Trajectory traj = synthetic({-1, -1, -1, -1, -1}, std::vector<Vec>(5, Vec{0.1}));
  ShortcutConfig cfg = config(0.0, 0.5);
  cfg.max_per_trajectory = 1;
  std::vector<int> counts(4, 0);
  RngStream r(22);
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    const auto t = shortcut_tuples(traj, cfg, r);
    ASSERT_EQ(t.size(), 1u);
    ++counts[t[0].i];
  }
  for (int c : counts) EXPECT_NEAR(c / double(n), 0.25, 4 * std::sqrt(0.25 * 0.75 / n));
}

TEST(ShortcutTuples, LinearReplayUnderBlendAndRot) {
  for (auto kind : {DistortionKind::blend, DistortionKind::rot}) {
    const Environment env(env_config(kind));
    const Dataset ds = corpus(env, walk_spec(0.1), 20, 23);
    RngStream r(24);
    std::size_t checked = 0;
    for (const auto& traj : ds.trajectories) {
      for (const auto& t : shortcut_tuples(traj, config(0.0), r)) {
        bool interior = true;
        for (std::size_t k = t.i; k < t.j; ++k)
          for (double x : traj.transitions[k].latent_next_s) interior &= std::abs(x) < env.config().box;
        if (!interior) continue;
        const EpisodeState s = env.make_state(traj.transitions[t.i].latent_s, traj.context, traj.target, t.i);
        const Vec landed = env.next_position(s, t.a_hat);
        EXPECT_LT(distance(landed, traj.transitions[t.j].latent_s), 1e-9);
        ++checked;
      }
    }
    EXPECT_GT(checked, 20u);
  }
}
