#include <gtest/gtest.h>

#include <sstream>

#include "lift/dataset_io.hpp"
#include "lift/policies.hpp"

using namespace lift;

namespace {

Dataset sample_dataset(std::size_t episodes) {
  EnvConfig c;
  c.d = 3;
  c.distortion = DistortionSpec::defaults(DistortionKind::blend);
  c.observation = ObservationKind::difference;
  c.target_mode = TargetMode::random_per_episode;
  const Environment env(c);
  Dataset ds;
  ds.meta.config_digest = "abc123";
  ds.meta.seed = 77;
  ds.meta.d = 3;
  ds.meta.gamma = 0.99;
  PolicySpec spec;
  spec.kind = PolicyKind::noisy_coordinate_walk;
  spec.sigma = 0.01;
  spec.l0 = 0.1;
  for (std::size_t k = 0; k < episodes; ++k) {
    RngStream r = RngStream(1).child("episode", k);
    auto [state, obs] = env.reset(r);
    LoggingPolicy policy(spec, 3, 1.0);
    RngStream act = r.child("policy");
    Trajectory traj{k, state.context, state.target, {}};
    while (!state.done) {
      auto res = env.step(state, policy.act(env.delta_from_observation(obs), act));
      res.transition.augmented = res.transition.latent_s[0] > 0;
      traj.transitions.push_back(res.transition);
      obs = res.next_obs;
    }
    ds.trajectories.push_back(traj);
  }
  return ds;
}

std::string serialize(const Dataset& ds) {
  std::ostringstream os;
  write_dataset(ds, os);
  return os.str();
}

Dataset parse(const std::string& text) {
  std::istringstream is(text);
  return read_dataset(is);
}

}  // namespace

TEST(DatasetIo, RoundTripIsBitExact) {
  const Dataset ds = sample_dataset(5);
  const std::string text = serialize(ds);
  const Dataset back = parse(text);
  EXPECT_EQ(back, ds);
  EXPECT_EQ(serialize(back), text);
}

TEST(DatasetIo, EmptyDatasetHasHeaderOnly) {
  Dataset ds;
  ds.meta.d = 2;
  const std::string text = serialize(ds);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
  EXPECT_EQ(parse(text), ds);
}

TEST(DatasetIo, TruncatedFileIsReported) {
  const std::string text = serialize(sample_dataset(2));
  // Drop the last record.
  const std::string cut = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
  try {
    parse(cut);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("episode 1"), std::string::npos) << e.what();
  }
  // Drop a whole episode.
  const auto second_ctx = text.find("{\"type\":\"context\",\"ep\":1");
  EXPECT_THROW(parse(text.substr(0, second_ctx)), ParseError);
}

TEST(DatasetIo, MalformedRecordNamesLine) {
  std::string text = serialize(sample_dataset(1));
  const auto second_line = text.find('\n') + 1;
  text.insert(second_line, "{not json}\n");
  try {
    parse(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(DatasetIo, RejectsMissingHeaderAndWrongVersion) {
  EXPECT_THROW(parse("{\"type\":\"context\",\"ep\":0}\n"), ParseError);
  std::string text = serialize(Dataset{});
  const auto pos = text.find("\"version\":1");
  text.replace(pos, 11, "\"version\":9");
  EXPECT_THROW(parse(text), ParseError);
}

TEST(DatasetIo, MissingFieldIsReported) {
  std::string text = serialize(sample_dataset(1));
  const auto pos = text.find(",\"reward\":");
  const auto end = text.find(',', pos + 1);
  text.erase(pos, end - pos);
  try {
    parse(text);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("reward"), std::string::npos) << e.what();
  }
}

TEST(DatasetIo, UnwritablePathIsIoError) {
  EXPECT_THROW(write_dataset(Dataset{}, std::string("/nonexistent-dir/x.jsonl")), IoError);
  EXPECT_THROW(read_dataset(std::string("/nonexistent-dir/x.jsonl")), IoError);
}

TEST(DatasetIo, SeventeenDigitsRoundTrip) {
  RngStream r(3);
  for (int i = 0; i < 10000; ++i) {
    const double x = r.normal(0.0, 1e3) * std::pow(10.0, r.uniform(-20, 20));
    ASSERT_EQ(std::stod(format_double(x)), x);
  }
}
