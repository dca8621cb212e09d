#include <gtest/gtest.h>

#include <filesystem>

#include "lift/config.hpp"

using namespace lift;

TEST(Config, DefaultsMatchDocumentedValues) {
  const ExperimentConfig c = parse_config_string("");
  EXPECT_EQ(c.collect.p, 0.6);
  EXPECT_EQ(c.collect.cap, 20u);
  EXPECT_EQ(c.collect.train_after, (std::vector<std::size_t>{50}));
  EXPECT_EQ(c.shortcut.C, 0.0);
  EXPECT_EQ(c.shortcut.max_per_trajectory, 20u);
  EXPECT_EQ(c.shortcut.strategy, SamplingStrategy::weighted);
  EXPECT_EQ(c.knn.k, 8u);
  EXPECT_EQ(c.knn.candidates, 64u);
  EXPECT_EQ(c.env.gamma, c.shortcut.gamma);
  EXPECT_EQ(c.env.lambda, c.env.distortion.lambda);
}

TEST(Config, ParsesAssignmentsAndComments) {
  const ExperimentConfig c = parse_config_string(
      "# comment\n"
      "seed = 42   # trailing\n"
      "env.d = 5\n"
      "env.lambda = 0.5\n"
      "env.theta = 0.05\n"
      "distortion.kind = rot\n"
      "env.observation = difference\n"
      "env.target_mode = random_per_episode\n"
      "policy.l0 = 0.1\n"
      "shortcut.strategy = best\n"
      "collect.train_after = 10, 20\n"
      "collect.n = 30\n"
      "augmentor.kind = oracle_direct\n"
      "\n");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.env.d, 5u);
  EXPECT_EQ(c.env.distortion.kind, DistortionKind::rot);
  EXPECT_EQ(c.env.distortion.lambda, 0.5);
  EXPECT_EQ(c.env.distortion.sigma, DistortionSpec::defaults(DistortionKind::rot, 0.5).sigma);
  EXPECT_EQ(c.shortcut.lambda, 0.5);
  EXPECT_EQ(c.shortcut.strategy, SamplingStrategy::best);
  EXPECT_EQ(c.collect.train_after, (std::vector<std::size_t>{10, 20}));
  EXPECT_EQ(c.augmentor, AugmentorKind::oracle_direct);
  EXPECT_EQ(c.env.observation, ObservationKind::difference);
}

TEST(Config, ExplicitDistortionSigmaWins) {
  const auto c = parse_config_string("distortion.kind = blend\ndistortion.sigma = 0.05\n");
  EXPECT_EQ(c.env.distortion.sigma, 0.05);
  const auto scale = parse_config_string("distortion.kind = scale\nenv.lambda = 0.4\nenv.theta = 0.05\npolicy.l0 = 0.1\n");
  EXPECT_EQ(scale.env.distortion.scale_floor, DistortionSpec::defaults(DistortionKind::scale, 0.4).scale_floor);
}

TEST(Config, RoundTrip) {
  const ExperimentConfig c = parse_config_string(
      "seed = 9\nenv.d = 3\ndistortion.kind = regrot\ndistortion.region_means = 0.1, -0.2, 0.3, 0.05\n"
      "policy.kind = noisy_coordinate_walk\npolicy.sigma = 0.02\nshortcut.C = 0.1\ncollect.p = 0.25\n"
      "knn.sweeps = 0\neval.horizon = 17\nverify.lambda = 0.3\ninput.data = in.jsonl\noutput.report = r.jsonl\n");
  const std::string text = serialize_config(c);
  const ExperimentConfig back = parse_config_string(text);
  EXPECT_EQ(back, c);
  EXPECT_EQ(serialize_config(back), text);
}

TEST(Config, DigestIgnoresPathsOnly) {
  const auto a = parse_config_string("seed = 1\noutput.data = a.jsonl\n");
  const auto b = parse_config_string("seed = 1\noutput.data = b.jsonl\ninput.model = m\n");
  const auto c = parse_config_string("seed = 2\n");
  EXPECT_EQ(config_digest(a), config_digest(b));
  EXPECT_NE(config_digest(a), config_digest(c));
  EXPECT_EQ(config_digest(a).size(), 16u);
  EXPECT_EQ(serialize_config(a, false).find("output."), std::string::npos);
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_config_string("nope = 1\n"), ConfigError);
  EXPECT_THROW(parse_config_string("seed = 1\nseed = 2\n"), ConfigError);
  EXPECT_THROW(parse_config_string("env.d = two\n"), ConfigError);
  EXPECT_THROW(parse_config_string("env.d = 0\n"), ConfigError);
  EXPECT_THROW(parse_config_string("collect.p = 1.5\n"), ConfigError);
  EXPECT_THROW(parse_config_string("distortion.kind = wobble\n"), ConfigError);
  EXPECT_THROW(parse_config_string("env.observation = position\nenv.target_mode = random_per_episode\n"), ConfigError);
  EXPECT_THROW(parse_config_string("distortion.region_means = 1, 2\n"), ConfigError);
  EXPECT_THROW(parse_config_string("policy.l0 = 2\n"), ConfigError);
  EXPECT_THROW(parse_config_string("collect.n = 10\n"), ConfigError);  // train_after 50 >= n
  try {
    parse_config_string("seed = 1\njust words\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(load_config("/nonexistent/x.cfg"), IoError);
}

TEST(Config, ShippedConfigsLoad) {
  std::size_t n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(std::string(LIFT_SOURCE_DIR) + "/configs")) {
    if (entry.path().extension() != ".cfg") continue;
    EXPECT_NO_THROW(load_config(entry.path().string())) << entry.path();
    ++n;
  }
  EXPECT_GE(n, 3u);
}
