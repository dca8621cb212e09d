#pragma once

// Command implementations behind the CLI: data generation, shortcut
// extraction, LIFT collection, evaluation and the verification suite.

#include <algorithm>
#include <fstream>
#include <memory>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "lift/collect.hpp"
#include "lift/config.hpp"
#include "lift/dataset_io.hpp"
#include "lift/distortions.hpp"
#include "lift/environment.hpp"
#include "lift/knn_q.hpp"
#include "lift/metrics.hpp"
#include "lift/policies.hpp"
#include "lift/rng.hpp"
#include "lift/shortcuts.hpp"
#include "lift/verify.hpp"

namespace lift {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitVerification = 2, kExitIo = 3 };

inline std::ofstream open_output(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  return os;
}

inline void finish_output(std::ofstream& os, const std::string& path) {
  os.flush();
  if (!os) throw IoError("write to '" + path + "' failed");
}

inline std::unique_ptr<Augmentor> make_augmentor(const ExperimentConfig& cfg, const Environment& env) {
  switch (cfg.augmentor) {
    case AugmentorKind::knn: return std::make_unique<KnnAugmentor>(env, cfg.knn);
    case AugmentorKind::oracle_direct: return std::make_unique<OracleDirectAugmentor>(cfg.verify.tolerance);
    case AugmentorKind::gaussian_noise:
      return std::make_unique<PerturbationAugmentor>(PerturbationKind::gaussian_noise, cfg.augmentor_sigma,
                                                     cfg.env.lambda);
    case AugmentorKind::random_scale:
      return std::make_unique<PerturbationAugmentor>(PerturbationKind::random_scale, cfg.augmentor_sigma,
                                                     cfg.env.lambda);
    case AugmentorKind::uniform:
      return std::make_unique<PerturbationAugmentor>(PerturbationKind::uniform, cfg.augmentor_sigma, cfg.env.lambda);
  }
  return nullptr;
}

inline RngStream collection_stream(const ExperimentConfig& cfg) { return RngStream(cfg.seed).child("collect"); }

/// Plain logging-policy dataset (no augmentor).
inline Dataset generate_dataset(const ExperimentConfig& cfg) {
  const Environment env(cfg.env);
  Dataset ds = collect(env, cfg.policy, nullptr, cfg.collect, cfg.shortcut, collection_stream(cfg));
  ds.meta.config_digest = config_digest(cfg);
  return ds;
}

struct ShortcutBatch {
  std::uint64_t episode = 0;
  std::vector<ShortcutTuple> tuples;
};

inline std::vector<ShortcutBatch> extract_shortcuts(const Dataset& ds, const ShortcutConfig& shortcut,
                                                    const RngStream& rng) {
  std::vector<ShortcutBatch> out(ds.trajectories.size());
  parallel_for(ds.trajectories.size(), [&](std::size_t k) {
    const Trajectory& traj = ds.trajectories[k];
    RngStream r = rng.child("episode", traj.episode);
    out[k] = {traj.episode, shortcut_tuples(traj, shortcut, r)};
  });
  return out;
}

inline std::size_t write_shortcuts(const std::vector<ShortcutBatch>& batches, const ShortcutConfig& shortcut,
                                   std::string_view config_digest, std::string_view source_digest,
                                   std::ostream& os) {
  std::size_t count = 0;
  for (const auto& b : batches) count += b.tuples.size();
  os << JsonLine()
            .field("type", "shortcuts")
            .field("version", 1)
            .field("config_digest", config_digest)
            .field("source_digest", source_digest)
            .field("C", shortcut.C)
            .field("strategy", to_string(shortcut.strategy))
            .field("cap", static_cast<std::uint64_t>(shortcut.max_per_trajectory))
            .field("episodes", static_cast<std::uint64_t>(batches.size()))
            .field("tuples", static_cast<std::uint64_t>(count))
            .str()
     << '\n';
  for (const auto& b : batches)
    for (const auto& t : b.tuples) os << shortcut_record(b.episode, t) << '\n';
  return count;
}

inline void write_metrics(const Dataset& ds, const ExperimentConfig& cfg, const std::string& path) {
  auto os = open_output(path);
  os << dataset_metrics(ds, cfg.env.theta, cfg.env.box).record_line(config_digest(cfg)) << '\n';
  finish_output(os, path);
}

inline int cmd_gen_data(const ExperimentConfig& cfg, std::ostream& log) {
  const Dataset ds = generate_dataset(cfg);
  write_dataset(ds, cfg.output.data);
  write_metrics(ds, cfg, cfg.output.data + ".metrics");
  const auto m = dataset_metrics(ds, cfg.env.theta, cfg.env.box);
  log << "gen-data: " << ds.trajectories.size() << " episodes, " << m.transitions << " transitions -> "
      << cfg.output.data << '\n';
  return kExitOk;
}

inline int cmd_extract_shortcuts(const ExperimentConfig& cfg, std::ostream& log) {
  if (cfg.input.data.empty()) throw ConfigError("extract-shortcuts: no input dataset (input.data / --data)");
  const Dataset ds = read_dataset(cfg.input.data);
  ShortcutConfig shortcut = cfg.shortcut;
  shortcut.gamma = ds.meta.gamma;
  const auto batches = extract_shortcuts(ds, shortcut, RngStream(cfg.seed).child("shortcuts"));
  auto os = open_output(cfg.output.shortcuts);
  const std::size_t count = write_shortcuts(batches, shortcut, config_digest(cfg), ds.meta.config_digest, os);
  finish_output(os, cfg.output.shortcuts);
  log << "extract-shortcuts: " << count << " tuples from " << ds.trajectories.size() << " episodes -> "
      << cfg.output.shortcuts << '\n';
  return kExitOk;
}

/// LIFT collection end to end; returns the dataset and leaves the trained
/// augmentor in `augmentor`.
inline Dataset run_collect_lift(const ExperimentConfig& cfg, const Environment& env, Augmentor& augmentor) {
  Dataset ds = collect(env, cfg.policy, &augmentor, cfg.collect, cfg.shortcut, collection_stream(cfg));
  ds.meta.config_digest = config_digest(cfg);
  return ds;
}

inline int cmd_collect_lift(const ExperimentConfig& cfg, std::ostream& log) {
  const Environment env(cfg.env);
  auto augmentor = make_augmentor(cfg, env);
  const Dataset ds = run_collect_lift(cfg, env, *augmentor);
  write_dataset(ds, cfg.output.data);
  write_metrics(ds, cfg, cfg.output.data + ".metrics");
  if (auto* knn = dynamic_cast<KnnAugmentor*>(augmentor.get()))
    write_knn_model(knn->model(), cfg.output.model.empty() ? cfg.output.data + ".model" : cfg.output.model,
                    config_digest(cfg));
  const auto m = dataset_metrics(ds, cfg.env.theta, cfg.env.box);
  log << "collect-lift: " << ds.trajectories.size() << " episodes, " << m.augmented << " overrides, mean return "
      << format_double(m.mean_return) << " -> " << cfg.output.data << '\n';
  return kExitOk;
}

inline std::vector<CurveRow> run_evaluation(const ExperimentConfig& cfg, const Environment& env,
                                            const KnnQModel* model) {
  const RngStream rng = RngStream(cfg.seed).child("evaluate");
  const ActorFactory actor = model ? model_actor(env, *model, cfg.policy) : policy_actor(env, cfg.policy);
  return evaluation_curve(env, actor, cfg.eval.episodes, cfg.eval.horizon, rng);
}

inline int cmd_evaluate(const ExperimentConfig& cfg, std::ostream& log) {
  const Environment env(cfg.env);
  std::optional<KnnQModel> model;
  if (!cfg.input.model.empty()) model = read_knn_model(cfg.input.model);
  const auto rows = run_evaluation(cfg, env, model ? &*model : nullptr);
  auto os = open_output(cfg.output.evaluation);
  write_curve_csv(rows, os, config_digest(cfg));
  finish_output(os, cfg.output.evaluation);
  log << "evaluate: " << cfg.eval.episodes << " episodes, final median distance "
      << format_double(rows.back().median) << " -> " << cfg.output.evaluation << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Verification suite

/// Environment used for the direct-policy corpora: the experiment's setup with
/// action radius `verify.lambda`.
inline EnvConfig verification_env(const ExperimentConfig& cfg) {
  EnvConfig e = cfg.env;
  const double ratio = cfg.verify.lambda / e.lambda;
  e.lambda = cfg.verify.lambda;
  e.distortion.lambda = e.lambda;
  e.distortion.scale_floor *= ratio;
  e.theta = std::min(e.theta, e.lambda / 2.0);
  return e;
}

inline PolicySpec direct_policy() {
  PolicySpec p;
  p.kind = PolicyKind::direct;
  return p;
}

/// A deterministic logging policy: the configured one, or the default walk.
inline PolicySpec deterministic_logging_policy(const ExperimentConfig& cfg) {
  if (cfg.policy.deterministic()) return cfg.policy;
  PolicySpec p = cfg.policy;
  p.kind = PolicyKind::coordinate_walk;
  return p;
}

inline std::vector<Trajectory> policy_corpus(const Environment& env, const PolicySpec& spec, std::size_t episodes,
                                             const RngStream& rng) {
  CollectConfig c;
  c.p = 0.0;
  c.n = episodes;
  c.train_after.clear();
  std::vector<Trajectory> out(episodes);
  parallel_for(episodes, [&](std::size_t k) {
    out[k] = collect_episode(env, spec, nullptr, c, k, rng.child("episode", k));
  });
  return out;
}

/// Per-step flag: the step was not altered by clamping to the position box.
inline std::vector<bool> unclamped_steps(const Environment& env, const Trajectory& traj) {
  std::vector<bool> ok(traj.size());
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const Transition& tr = traj.transitions[k];
    ok[k] = apply(env.config().distortion, tr.latent_s, tr.action, traj.context, traj.target) == tr.latent_next_s;
  }
  return ok;
}

inline bool reached_target(const Environment& env, const Trajectory& traj) {
  return !traj.empty() && env.at_target(traj.transitions.back().latent_next_s, traj.target);
}

struct Segment {
  std::size_t traj = 0;
  std::size_t i = 0;
  std::size_t j = 0;
};

/// Segments (i, j), i < j < size, of successful trajectories with no clamped
/// step in [i, j). `improving_only` restricts to the distance-improving suffix.
inline std::vector<Segment> eligible_segments(const Environment& env, const std::vector<Trajectory>& corpus,
                                              bool improving_only) {
  std::vector<Segment> out;
  for (std::size_t t = 0; t < corpus.size(); ++t) {
    const Trajectory& traj = corpus[t];
    if (!reached_target(env, traj)) continue;
    const auto ok = unclamped_steps(env, traj);
    const std::size_t start = improving_only ? distance_improving_suffix_start(traj) : 0;
    for (std::size_t i = start; i < traj.size(); ++i) {
      for (std::size_t j = i + 1; j < traj.size(); ++j) {
        if (!ok[j - 1]) break;
        out.push_back({t, i, j});
      }
    }
  }
  return out;
}

inline std::vector<Segment> sample_segments(std::vector<Segment> all, std::size_t n, RngStream rng) {
  rng.shuffle(all);
  if (all.size() > n) all.resize(n);
  std::sort(all.begin(), all.end(), [](const Segment& a, const Segment& b) {
    return std::tie(a.traj, a.i, a.j) < std::tie(b.traj, b.i, b.j);
  });
  return all;
}

inline Vec accumulated_action(const Trajectory& traj, std::size_t i, std::size_t j) {
  Vec a = zeros(traj.transitions[i].action.size());
  for (std::size_t k = i; k < j; ++k) a = add(a, traj.transitions[k].action);
  return a;
}

inline CheckReport suite_distance_improving(const std::vector<Trajectory>& direct,
                                            const std::vector<Trajectory>& walk) {
  CheckReport rep;
  rep.name = "distance_improving";
  rep.hard = false;
  const auto summarize = [&](const std::vector<Trajectory>& corpus, const std::string& tag) {
    std::size_t improving = 0, suffix = 0, steps = 0;
    for (const auto& traj : corpus) {
      const auto r = check_distance_improving(traj);
      rep.merge(r);
      if (r.pass) ++improving;
      suffix += traj.size() - distance_improving_suffix_start(traj);
      steps += traj.size();
    }
    rep.metrics[tag + ".improving_fraction"] =
        corpus.empty() ? 0.0 : static_cast<double>(improving) / static_cast<double>(corpus.size());
    rep.metrics[tag + ".suffix_step_fraction"] = steps ? static_cast<double>(suffix) / static_cast<double>(steps) : 0.0;
  };
  summarize(direct, "direct");
  summarize(walk, "walk");
  return rep;
}

/// One-step logged actions on the walk corpus (definitional) and accumulated
/// actions on distance-improving direct-policy segments.
inline CheckReport suite_shortcut(const ExperimentConfig& cfg, const Environment& walk_env,
                                  const std::vector<Trajectory>& walk, const PolicySpec& walk_policy,
                                  const Environment& direct_env, const std::vector<Trajectory>& direct,
                                  const RngStream& rng) {
  CheckReport rep;
  rep.name = "shortcut";
  const double tol = cfg.verify.tolerance;

  std::vector<Segment> one_step;
  for (std::size_t t = 0; t < walk.size(); ++t)
    for (std::size_t i = 0; i < walk[t].size(); ++i) one_step.push_back({t, i, i + 1});
  one_step = sample_segments(std::move(one_step), cfg.verify.segments, rng.child("one_step"));
  std::vector<double> slack(one_step.size());
  parallel_for(one_step.size(), [&](std::size_t k) {
    const auto& s = one_step[k];
    const Trajectory& traj = walk[s.traj];
    slack[k] = shortcut_slack(walk_env, policy_state_at(walk_env, walk_policy, traj, s.i),
                              policy_state_at(walk_env, walk_policy, traj, s.i + 1), state_at(walk_env, traj, s.i),
                              traj.transitions[s.i].action);
  });
  double min_one = 0.0;
  for (std::size_t k = 0; k < one_step.size(); ++k) {
    rep.record(slack[k] >= -tol, {walk[one_step[k].traj].episode, one_step[k].i, one_step[k].j, slack[k]});
    min_one = std::min(min_one, slack[k]);
  }
  rep.metrics["one_step.samples"] = static_cast<double>(one_step.size());
  rep.metrics["one_step.min_slack"] = min_one;

  const bool linear = lpe_constant(direct_env.config().distortion, direct_env.config().d) == 0.0;
  const auto segs = sample_segments(eligible_segments(direct_env, direct, true), cfg.verify.segments,
                                    rng.child("segments"));
  std::vector<double> fwd(segs.size()), rev(segs.size());
  const PolicySpec dp = direct_policy();
  parallel_for(segs.size(), [&](std::size_t k) {
    const auto& s = segs[k];
    const Trajectory& traj = direct[s.traj];
    const LoggingPolicy fresh(dp, direct_env.config().d, direct_env.config().lambda);
    const Vec a = accumulated_action(traj, s.i, s.j);
    const EpisodeState st = state_at(direct_env, traj, s.i);
    fwd[k] = shortcut_slack(direct_env, fresh, fresh, st, a);
    rev[k] = shortcut_slack(direct_env, fresh, fresh, st, scaled(a, -1.0));
  });
  std::size_t reversed_fail = 0;
  double min_seg = 0.0;
  for (std::size_t k = 0; k < segs.size(); ++k) {
    if (linear) rep.record(fwd[k] >= -tol, {direct[segs[k].traj].episode, segs[k].i, segs[k].j, fwd[k]});
    min_seg = std::min(min_seg, fwd[k]);
    if (rev[k] < -tol) ++reversed_fail;
  }
  rep.metrics["segments.samples"] = static_cast<double>(segs.size());
  rep.metrics["segments.min_slack"] = min_seg;
  rep.metrics["segments.asserted"] = linear ? 1.0 : 0.0;
  rep.metrics["reversed.failure_rate"] =
      segs.empty() ? 0.0 : static_cast<double>(reversed_fail) / static_cast<double>(segs.size());
  return rep;
}

inline CheckReport suite_lemma(const Environment& env, const std::vector<Trajectory>& direct, double tol) {
  CheckReport rep;
  rep.name = "lemma_lower_bound";
  std::size_t applicable = 0;
  for (const auto& traj : direct) {
    const auto r = check_lemma_lower_bound(traj, env.config().gamma, tol);
    if (!r.applicable) continue;
    ++applicable;
    rep.merge(r);
  }
  rep.metrics["applicable_trajectories"] = static_cast<double>(applicable);
  rep.metrics["corpus_trajectories"] = static_cast<double>(direct.size());
  return rep;
}

inline CheckReport suite_theorem(const ExperimentConfig& cfg, const Environment& env,
                                 const std::vector<Trajectory>& direct, const RngStream& rng) {
  CheckReport rep;
  rep.name = "theorem_condition";
  const double gamma = env.config().gamma;
  const double L_f = lpe_constant(env.config().distortion, env.config().d);
  const double L_V = contraction_lipschitz_bound(gamma);
  rep.hard = L_f == 0.0;
  const auto segs = sample_segments(eligible_segments(env, direct, false), cfg.verify.segments, rng);
  std::vector<TheoremOutcome> outcomes(segs.size());
  const PolicySpec dp = direct_policy();
  parallel_for(segs.size(), [&](std::size_t k) {
    const Trajectory& traj = direct[segs[k].traj];
    const auto G = returns(traj, gamma);
    outcomes[k] = theorem_condition(env, dp, traj, G, segs[k].i, segs[k].j, L_V, L_f, gamma);
  });
  std::size_t holds = 0;
  for (std::size_t k = 0; k < segs.size(); ++k) {
    if (!outcomes[k].condition_holds) continue;
    ++holds;
    const double slack = *outcomes[k].shortcut_slack;
    rep.record(slack >= -cfg.verify.tolerance, {direct[segs[k].traj].episode, segs[k].i, segs[k].j, slack});
  }
  rep.metrics["segments"] = static_cast<double>(segs.size());
  rep.metrics["condition_holds"] = static_cast<double>(holds);
  rep.metrics["L_f"] = L_f;
  rep.metrics["L_V"] = L_V;
  return rep;
}

inline CheckReport suite_lipschitz(const ExperimentConfig& cfg, const Environment& direct_env,
                                   const Environment& walk_env, const PolicySpec& walk_policy, const RngStream& rng) {
  CheckReport rep;
  rep.name = "lipschitz";
  rep.hard = direct_env.config().distortion.kind == DistortionKind::identity;
  const auto est = estimate_lipschitz(direct_env, direct_policy(), cfg.verify.pairs, rng.child("direct"));
  rep.samples = est.pairs;
  rep.violations = est.exceed_bound;
  rep.pass = rep.violations == 0;
  rep.metrics["direct.max_ratio"] = est.max_ratio;
  rep.metrics["bound"] = contraction_lipschitz_bound(direct_env.config().gamma);
  const auto walk_est = estimate_lipschitz(walk_env, walk_policy, cfg.verify.pairs, rng.child("walk"));
  rep.metrics["walk.max_ratio"] = walk_est.max_ratio;
  return rep;
}

inline CheckReport contraction_report(std::string name, bool hard, const ContractionEstimate& est) {
  CheckReport rep;
  rep.name = std::move(name);
  rep.hard = hard;
  rep.samples = est.pairs;
  rep.violations = est.violations;
  rep.pass = rep.violations == 0;
  rep.metrics["violation_rate"] = est.violation_rate();
  rep.metrics["skipped"] = static_cast<double>(est.skipped);
  rep.metrics["max_expansion"] = est.max_expansion;
  return rep;
}

inline std::vector<CheckReport> suite_contraction(const ExperimentConfig& cfg, const Environment& direct_env,
                                                  const Environment& walk_env, const PolicySpec& walk_policy,
                                                  const RngStream& rng) {
  std::vector<CheckReport> out;
  if (walk_env.config().distortion.kind == DistortionKind::regrot) {
    out.push_back(contraction_report(
        "contraction_regrot_boundary", false,
        check_contraction(walk_env, walk_policy, cfg.verify.pairs, rng.child("boundary"), regrot_boundary_sampler())));
    out.push_back(contraction_report("contraction_regrot_region", true,
                                     check_contraction(walk_env, walk_policy, cfg.verify.pairs, rng.child("region"),
                                                       regrot_same_region_sampler(), true)));
  } else {
    const bool identity = direct_env.config().distortion.kind == DistortionKind::identity;
    out.push_back(contraction_report(
        "contraction", identity,
        check_contraction(direct_env, direct_policy(), cfg.verify.pairs, rng.child("direct"), uniform_pair_sampler())));
  }
  return out;
}

inline CheckReport suite_lpe(const ExperimentConfig& cfg, const RngStream& rng) {
  CheckReport rep;
  rep.name = "lpe";
  const double L_f = lpe_constant(cfg.env.distortion, cfg.env.d);
  RngStream r = rng;
  const auto est = estimate_lpe_ratio(cfg.env.distortion, cfg.env.d, cfg.verify.chains, cfg.verify.chain_length, r,
                                      cfg.env.box);
  rep.samples = est.chains_used;
  rep.violations = est.max_ratio <= L_f + 1e-6 ? 0 : 1;
  rep.pass = rep.violations == 0;
  rep.metrics["max_ratio"] = est.max_ratio;
  rep.metrics["L_f"] = L_f;
  rep.metrics["chains_skipped"] = static_cast<double>(est.chains_skipped);
  return rep;
}

struct PairedReturns {
  std::vector<double> plain;
  std::vector<double> augmented;
  std::size_t overrides = 0;

  double margin() const {
    double m = 0.0;
    for (std::size_t k = 0; k < plain.size(); ++k) m += augmented[k] - plain[k];
    return plain.empty() ? 0.0 : m / static_cast<double>(plain.size());
  }
};

/// Per-episode discounted returns with and without `augmentor`, sharing the
/// episode streams.
inline PairedReturns paired_returns(const Environment& env, const PolicySpec& policy, const Augmentor& augmentor,
                                    const CollectConfig& collect_cfg, std::size_t episodes, const RngStream& rng) {
  PairedReturns out;
  out.plain.resize(episodes);
  out.augmented.resize(episodes);
  std::vector<std::size_t> overrides(episodes);
  parallel_for(episodes, [&](std::size_t k) {
    const RngStream ep = rng.child("episode", k);
    const auto plain = collect_episode(env, policy, nullptr, collect_cfg, k, ep);
    EpisodeStats stats;
    const auto aug = collect_episode(env, policy, &augmentor, collect_cfg, k, ep, {}, &stats);
    out.plain[k] = returns(plain, env.config().gamma)[0];
    out.augmented[k] = returns(aug, env.config().gamma)[0];
    overrides[k] = stats.overrides;
  });
  for (std::size_t o : overrides) out.overrides += o;
  return out;
}

inline CheckReport suite_augmentation(const ExperimentConfig& cfg, const Environment& env,
                                      const PolicySpec& walk_policy, const RngStream& rng) {
  CheckReport rep;
  rep.name = "augmentation_improvement";
  const OracleDirectAugmentor oracle(cfg.verify.tolerance);
  const auto paired = paired_returns(env, walk_policy, oracle, cfg.collect, cfg.verify.episodes, rng);
  double plain = 0.0, aug = 0.0;
  for (std::size_t k = 0; k < paired.plain.size(); ++k) {
    const double diff = paired.augmented[k] - paired.plain[k];
    rep.record(diff >= -cfg.verify.tolerance, {k, 0, 0, diff});
    plain += paired.plain[k];
    aug += paired.augmented[k];
  }
  const double n = std::max<double>(1.0, static_cast<double>(paired.plain.size()));
  rep.metrics["plain.mean_return"] = plain / n;
  rep.metrics["augmented.mean_return"] = aug / n;
  rep.metrics["margin"] = paired.margin();
  rep.metrics["overrides"] = static_cast<double>(paired.overrides);
  return rep;
}

/// The full suite in a fixed order. Checks only assert where a bound is proven
/// for the configured distortion; the others are reported as diagnostics.
inline std::vector<CheckReport> run_verify_suite(const ExperimentConfig& cfg) {
  const RngStream rng = RngStream(cfg.seed).child("verify");
  const Environment walk_env(cfg.env);
  const Environment direct_env(verification_env(cfg));
  const PolicySpec walk_policy = deterministic_logging_policy(cfg);
  const auto direct = policy_corpus(direct_env, direct_policy(), cfg.verify.episodes, rng.child("direct_corpus"));
  const auto walk = policy_corpus(walk_env, walk_policy, cfg.verify.episodes, rng.child("walk_corpus"));

  std::vector<CheckReport> reports;
  reports.push_back(suite_distance_improving(direct, walk));
  reports.push_back(suite_shortcut(cfg, walk_env, walk, walk_policy, direct_env, direct, rng.child("shortcut")));
  reports.push_back(suite_lemma(direct_env, direct, cfg.verify.tolerance));
  reports.push_back(suite_theorem(cfg, direct_env, direct, rng.child("theorem")));
  reports.push_back(suite_lipschitz(cfg, direct_env, walk_env, walk_policy, rng.child("lipschitz")));
  for (auto& r : suite_contraction(cfg, direct_env, walk_env, walk_policy, rng.child("contraction")))
    reports.push_back(std::move(r));
  reports.push_back(suite_lpe(cfg, rng.child("lpe")));
  reports.push_back(suite_augmentation(cfg, walk_env, walk_policy, rng.child("augmentation")));
  return reports;
}

inline bool suite_passes(const std::vector<CheckReport>& reports) {
  return std::all_of(reports.begin(), reports.end(),
                     [](const CheckReport& r) { return !r.hard || !r.applicable || r.pass; });
}

inline int cmd_verify(const ExperimentConfig& cfg, std::ostream& log) {
  const auto reports = run_verify_suite(cfg);
  auto os = open_output(cfg.output.report);
  os << JsonLine().field("type", "verify").field("config_digest", config_digest(cfg)).str() << '\n';
  for (const auto& r : reports) {
    os << r.record_line() << '\n';
    log << r.summary() << '\n';
  }
  finish_output(os, cfg.output.report);
  const bool ok = suite_passes(reports);
  log << "verify: " << (ok ? "all hard checks passed" : "hard check failed") << " -> " << cfg.output.report << '\n';
  return ok ? kExitOk : kExitVerification;
}

}  // namespace lift
