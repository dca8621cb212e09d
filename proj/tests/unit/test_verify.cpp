#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "lift/verify.hpp"
#include "test_util.hpp"

using namespace lift;
using namespace lift::testing;

namespace {

/// Direct policy under identity: the distance shrinks by lambda per step.
double direct_identity_value(double d0, double lambda, double theta, double gamma, std::size_t max_steps) {
  double v = 0.0, w = 1.0, d = d0;
  for (std::size_t t = 0; t < max_steps && d > theta; ++t) {
    d = std::max(d - lambda, 0.0);
    v += w * -d;
    w *= gamma;
  }
  return v;
}

std::vector<Trajectory> trajectories(const Environment& env, const PolicySpec& spec, std::size_t n,
                                     std::uint64_t seed) {
  return corpus(env, spec, n, seed).trajectories;
}

}  // namespace

TEST(ValueOracle, DirectIdentityClosedForm) {
  EnvConfig c = env_config(DistortionKind::identity, 3, 0.25);
  c.theta = 0.05;
  const Environment env(c);
  RngStream r(60);
  const LoggingPolicy direct(direct_spec(), 3, 0.25);
  for (int k = 0; k < 200; ++k) {
    const Vec s = r.uniform_box(3, 1.0);
    const EpisodeState st = env.make_state(s, Context{}, zeros(3));
    const double expected = direct_identity_value(norm(s), 0.25, 0.05, c.gamma, c.max_steps);
    EXPECT_NEAR(value_of(env, direct, st), expected, 1e-12);
  }
  // Terminal states have value 0.
  EXPECT_EQ(value_of(env, direct, env.make_state(Vec{0.01, 0, 0}, Context{}, zeros(3))), 0.0);
}

TEST(ValueOracle, ContinuesStepCounterAndHorizon) {
  EnvConfig c = env_config(DistortionKind::identity, 1, 0.1);
  c.max_steps = 10;
  const Environment env(c);
  const LoggingPolicy direct(direct_spec(), 1, 0.1);
  // From 0.95 the direct policy needs 9 steps; starting at t = 8 leaves 2.
  const EpisodeState late = env.make_state(Vec{0.95}, Context{}, Vec{0.0}, 8);
  EXPECT_NEAR(value_of(env, direct, late), -0.85 - c.gamma * 0.75, 1e-12);
  const EpisodeState early = env.make_state(Vec{0.95}, Context{}, Vec{0.0}, 0);
  EXPECT_NEAR(value_of(env, direct, early, 1), -0.85, 1e-12);
}

TEST(ValueOracle, RejectsStochasticPolicies) {
  const Environment env(env_config(DistortionKind::identity));
  PolicySpec noisy = walk_spec(0.1);
  noisy.kind = PolicyKind::noisy_coordinate_walk;
  noisy.sigma = 0.1;
  const EpisodeState st = env.make_state(Vec{0.5, 0.5}, Context{}, zeros(2));
  EXPECT_THROW(value_of(env, LoggingPolicy(noisy, 2, 1.0), st), InvalidArgument);
  PolicySpec uni = walk_spec(0.1);
  uni.kind = PolicyKind::uniform_random;
  EXPECT_THROW(value_of(env, LoggingPolicy(uni, 2, 1.0), st), InvalidArgument);
}

TEST(DistanceImproving, SuffixAndReport) {
  Trajectory t;
  t.target = Vec{0.0};
  const double path[] = {0.5, 0.6, 0.4, 0.2, 0.1};
  for (int k = 0; k < 4; ++k) {
    Transition tr;
    tr.latent_s = Vec{path[k]};
    tr.latent_next_s = Vec{path[k + 1]};
    t.transitions.push_back(tr);
  }
  EXPECT_EQ(distance_improving_suffix_start(t), 1u);
  EXPECT_FALSE(is_distance_improving(t));
  const CheckReport rep = check_distance_improving(t);
  EXPECT_EQ(rep.violations, 1u);
  EXPECT_EQ(rep.samples, 4u);
  EXPECT_DOUBLE_EQ(rep.metrics.at("suffix_fraction"), 0.75);
  t.transitions.erase(t.transitions.begin());
  EXPECT_TRUE(is_distance_improving(t));
  EXPECT_TRUE(check_lemma_lower_bound(t, 0.9).applicable);
}

TEST(ShortcutCheck, LoggedStepHasZeroSlack) {
  // gamma V(s') - V(s) - |s' - s_W| = -r_i - |s' - s_W| = 0 for the logged step.
  for (auto kind : {DistortionKind::identity, DistortionKind::blend, DistortionKind::sin}) {
    const Environment env(env_config(kind));
    const PolicySpec spec = walk_spec(0.1);
    for (const auto& traj : trajectories(env, spec, 5, 61)) {
      for (std::size_t i = 0; i < traj.size(); ++i) {
        const LoggingPolicy at = policy_state_at(env, spec, traj, i);
        const LoggingPolicy after = policy_state_at(env, spec, traj, i + 1);
        const double slack = shortcut_slack(env, at, after, state_at(env, traj, i), traj.transitions[i].action);
        EXPECT_NEAR(slack, 0.0, 1e-9);
      }
    }
  }
}

TEST(ShortcutCheck, ReversedActionIsUsuallyNotAShortcut) {
  const Environment env(env_config(DistortionKind::identity));
  const PolicySpec spec = walk_spec(0.1);
  std::size_t fails = 0, total = 0;
  for (const auto& traj : trajectories(env, spec, 10, 62)) {
    for (std::size_t i = 0; i < traj.size(); ++i) {
      const Vec back = scaled(traj.transitions[i].action, -1.0);
      const auto rep = check_shortcut(env, policy_state_at(env, spec, traj, i), policy_state_at(env, spec, traj, i + 1),
                                      state_at(env, traj, i), back);
      fails += !rep.pass;
      ++total;
    }
  }
  EXPECT_GT(fails, total / 2);
}

TEST(PolicyReplay, MatchesCollectionObserver) {
  const Environment env(env_config(DistortionKind::blend));
  const PolicySpec spec = walk_spec(0.05);
  PerturbationAugmentor aug(PerturbationKind::uniform, 0.0, 1.0);
  CollectConfig cfg;
  cfg.n = 5;
  cfg.p = 0.2;
  cfg.train_after.clear();
  std::vector<std::vector<LoggingPolicy>> states(5);
  const Dataset ds = collect(env, spec, &aug, cfg, ShortcutConfig{}, RngStream(63),
                             [&](std::size_t ep, const Transition&, const LoggingPolicy& p) { states[ep].push_back(p); });
  for (std::size_t e = 0; e < 5; ++e)
    for (std::size_t i = 0; i < ds.trajectories[e].size(); ++i)
      EXPECT_EQ(policy_state_at(env, spec, ds.trajectories[e], i + 1), states[e][i]);
}

TEST(Lemma, HoldsOnImprovingTrajectories) {
  const Environment env(env_config(DistortionKind::blend));
  std::size_t applicable = 0;
  for (const auto& traj : trajectories(env, direct_spec(), 100, 64)) {
    const CheckReport rep = check_lemma_lower_bound(traj, env.config().gamma);
    if (!rep.applicable) continue;
    ++applicable;
    EXPECT_TRUE(rep.pass) << rep.summary();
  }
  EXPECT_GT(applicable, 50u);
  const Trajectory away = synthetic({-1, -2}, {Vec{0.1}, Vec{0.1}});
  EXPECT_FALSE(check_lemma_lower_bound(away, 0.9).applicable);
}

TEST(Theorem, ConditionImpliesShortcutWhenLinear) {
  const Environment env(env_config(DistortionKind::identity));
  const PolicySpec spec = walk_spec(0.1);
  std::size_t held = 0;
  for (const auto& traj : trajectories(env, spec, 8, 65)) {
    const auto G = returns(traj, env.config().gamma);
    for (std::size_t i = 0; i + 1 < traj.size(); ++i)
      for (std::size_t j = i + 1; j < traj.size(); ++j) {
        const auto out = theorem_condition(env, spec, traj, G, i, j, 0.0, 0.0, env.config().gamma);
        if (!out.condition_holds) continue;
        ++held;
        EXPECT_GE(*out.shortcut_slack, -1e-9) << i << "," << j;
      }
  }
  EXPECT_GT(held, 100u);
}

TEST(Theorem, ConditionArithmetic) {
  const Environment env(env_config(DistortionKind::identity, 1));
  Trajectory t;
  t.target = Vec{0.0};
  const double pos[] = {0.9, 0.8, 0.7};
  for (int k = 0; k < 2; ++k) {
    Transition tr;
    tr.latent_s = Vec{pos[k]};
    tr.latent_next_s = Vec{pos[k + 1]};
    tr.obs = tr.latent_s;
    tr.action = Vec{-0.1};
    tr.reward = -pos[k + 1];
    t.transitions.push_back(tr);
  }
  const auto G = returns(t, 0.5);
  const auto out = theorem_condition(env, direct_spec(), t, G, 0, 1, 2.0, 0.5, 0.5);
  EXPECT_NEAR(out.lhs, 0.5 * G[1] - G[0] - 0.8, 1e-15);
  EXPECT_NEAR(out.rhs, (0.5 * 2.0 + 1.0) * 0.5 * 0.1, 1e-15);
  EXPECT_FALSE(out.condition_holds);
  EXPECT_FALSE(out.shortcut_slack);
  EXPECT_THROW(theorem_condition(env, direct_spec(), t, G, 1, 1, 0, 0, 0.5), InvalidArgument);
  EXPECT_THROW(theorem_condition(env, direct_spec(), t, G, 0, 2, 0, 0, 0.5), InvalidArgument);
}

TEST(Lipschitz, DirectIdentityWithinContractionBound) {
  const Environment env(env_config(DistortionKind::identity));
  const auto est = estimate_lipschitz(env, direct_spec(), 400, RngStream(66));
  EXPECT_GT(est.pairs, 350u);
  EXPECT_EQ(est.exceed_bound, 0u);
  EXPECT_LE(est.max_ratio, contraction_lipschitz_bound(env.config().gamma));
  EXPECT_GT(est.max_ratio, 0.5);
  const auto ray = estimate_lipschitz(env, direct_spec(), 200, RngStream(67), PairMode::ray);
  EXPECT_EQ(ray.exceed_bound, 0u);
}

TEST(Contraction, RegrotBoundaryVersusRegion) {
  const Environment env(env_config(DistortionKind::regrot));
  const PolicySpec spec = walk_spec(0.1);
  const auto boundary = check_contraction(env, spec, 1000, RngStream(68), regrot_boundary_sampler(), true);
  EXPECT_GT(boundary.pairs, 900u);
  EXPECT_GT(boundary.violations, 0u);
  EXPECT_GT(boundary.max_expansion, 1.0);
  const auto region = check_contraction(env, spec, 1000, RngStream(69), regrot_same_region_sampler(), true);
  EXPECT_GT(region.pairs, 900u);
  EXPECT_EQ(region.violations, 0u);
}

TEST(Contraction, IdentityDirectNeverExpands) {
  const Environment env(env_config(DistortionKind::identity));
  const auto est = check_contraction(env, direct_spec(), 1000, RngStream(70), uniform_pair_sampler());
  EXPECT_EQ(est.violations, 0u);
  EXPECT_EQ(est.violation_rate(), 0.0);
}

TEST(OracleAugmentor, NeverLowersEpisodeReturn) {
  const Environment env(env_config(DistortionKind::blend));
  const PolicySpec spec = walk_spec(0.025);
  const OracleDirectAugmentor oracle;
  CollectConfig cfg;
  cfg.n = 1;
  cfg.train_after.clear();
  double margin = 0.0;
  std::size_t overrides = 0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    const RngStream ep = RngStream(71).child("episode", k);
    const Trajectory plain = collect_episode(env, spec, nullptr, cfg, k, ep);
    EpisodeStats stats;
    const Trajectory aug = collect_episode(env, spec, &oracle, cfg, k, ep, {}, &stats);
    overrides += stats.overrides;
    const double gp = returns(plain, env.config().gamma)[0];
    const double ga = returns(aug, env.config().gamma)[0];
    EXPECT_GE(ga, gp - 1e-9) << "episode " << k;
    margin += ga - gp;
  }
  EXPECT_GT(overrides, 0u);
  EXPECT_GT(margin, 0.0);
}

TEST(OracleAugmentor, NeedsOracleAccess) {
  const OracleDirectAugmentor oracle;
  RngStream r(72);
  const Vec o{0, 0}, a{0, 0};
  EXPECT_THROW(oracle.suggest(SuggestContext{o, a}, r), std::logic_error);
  EXPECT_TRUE(oracle.uses_oracle());
}

TEST(CheckReport, RecordMergeAndSerialize) {
  CheckReport a;
  a.name = "x";
  a.record(true, {});
  a.record(false, {3, 1, 2, -0.5});
  a.record(false, {4, 0, 1, -1.0});
  EXPECT_FALSE(a.pass);
  EXPECT_EQ(a.violations, 2u);
  EXPECT_EQ(a.first->episode, 3u);
  CheckReport b;
  b.record(true, {});
  b.merge(a);
  EXPECT_EQ(b.samples, 4u);
  EXPECT_FALSE(b.pass);
  EXPECT_EQ(b.first->slack, -0.5);
  EXPECT_NE(a.summary().find("FAIL"), std::string::npos);
  const auto j = nlohmann::json::parse(a.record_line());
  EXPECT_EQ(j["name"], "x");
  EXPECT_EQ(j["violations"], 2);
  EXPECT_EQ(j["first_j"], 2);
  CheckReport na;
  na.applicable = false;
  EXPECT_EQ(na.summary().substr(0, 3), "N/A");
}
