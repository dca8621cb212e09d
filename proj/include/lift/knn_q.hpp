#pragma once

// k-nearest-neighbour fitted Q over (observation, action) features, trained on
// logged transitions plus shortcut tuples.

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <numeric>
#include <queue>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lift/core.hpp"
#include "lift/dataset_io.hpp"
#include "lift/environment.hpp"
#include "lift/rng.hpp"
#include "lift/shortcuts.hpp"

namespace lift {

/// Static kd-tree over a flat point array for exact k-nearest queries.
class KdTree {
 public:
  KdTree() = default;

  KdTree(std::vector<double> points, std::size_t dim) : points_(std::move(points)), dim_(dim) {
    if (dim_ == 0) throw InvalidArgument("KdTree: dimension must be positive");
    const std::size_t n = points_.size() / dim_;
    index_.resize(n);
    std::iota(index_.begin(), index_.end(), std::size_t{0});
    nodes_.reserve(n);
    if (n > 0) root_ = build(0, n, 0);
  }

  std::size_t size() const { return index_.size(); }
  std::size_t dim() const { return dim_; }
  std::span<const double> point(std::size_t i) const { return {points_.data() + i * dim_, dim_}; }

  /// Indices of the k nearest points, nearest first; ties broken by index.
  std::vector<std::size_t> nearest(std::span<const double> q, std::size_t k) const {
    std::vector<std::size_t> out;
    if (index_.empty() || k == 0) return out;
    Heap heap;
    search(root_, q, k, heap);
    out.resize(heap.size());
    for (std::size_t i = heap.size(); i-- > 0;) {
      out[i] = heap.top().second;
      heap.pop();
    }
    return out;
  }

 private:
  struct Node {
    std::size_t begin, end;  // range in index_
    std::size_t axis;
    double split;
    int left = -1, right = -1;
  };
  using Entry = std::pair<double, std::size_t>;  // (squared distance, point)
  using Heap = std::priority_queue<Entry>;
  static constexpr std::size_t kLeafSize = 12;

  double sq_dist(std::span<const double> q, std::size_t p) const {
    double acc = 0.0;
    const double* x = points_.data() + p * dim_;
    for (std::size_t c = 0; c < dim_; ++c) {
      const double diff = q[c] - x[c];
      acc += diff * diff;
    }
    return acc;
  }

  int build(std::size_t begin, std::size_t end, std::size_t depth) {
    Node node{begin, end, 0, 0.0};
    if (end - begin > kLeafSize) {
      // Split on the axis of largest spread.
      std::size_t best_axis = 0;
      double best_spread = -1.0;
      for (std::size_t c = 0; c < dim_; ++c) {
        double lo = points_[index_[begin] * dim_ + c], hi = lo;
        for (std::size_t i = begin; i < end; ++i) {
          const double v = points_[index_[i] * dim_ + c];
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        if (hi - lo > best_spread) {
          best_spread = hi - lo;
          best_axis = c;
        }
      }
      const std::size_t mid = begin + (end - begin) / 2;
      std::nth_element(index_.begin() + static_cast<std::ptrdiff_t>(begin),
                       index_.begin() + static_cast<std::ptrdiff_t>(mid),
                       index_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t a, std::size_t b) {
                         const double va = points_[a * dim_ + best_axis], vb = points_[b * dim_ + best_axis];
                         return va < vb || (va == vb && a < b);
                       });
      node.axis = best_axis;
      node.split = points_[index_[mid] * dim_ + best_axis];
      const int id = static_cast<int>(nodes_.size());
      nodes_.push_back(node);
      const int l = build(begin, mid, depth + 1);
      const int r = build(mid, end, depth + 1);
      nodes_[static_cast<std::size_t>(id)].left = l;
      nodes_[static_cast<std::size_t>(id)].right = r;
      return id;
    }
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size() - 1);
  }

  void search(int id, std::span<const double> q, std::size_t k, Heap& heap) const {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.left < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t p = index_[i];
        const Entry e{sq_dist(q, p), p};
        if (heap.size() < k) {
          heap.push(e);
        } else if (e < heap.top()) {
          heap.pop();
          heap.push(e);
        }
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const int first = diff < 0.0 ? node.left : node.right;
    const int second = diff < 0.0 ? node.right : node.left;
    search(first, q, k, heap);
    if (heap.size() < k || diff * diff <= heap.top().first) search(second, q, k, heap);
  }

  std::vector<double> points_;
  std::size_t dim_ = 0;
  std::vector<std::size_t> index_;
  std::vector<Node> nodes_;
  int root_ = 0;
};

struct KnnQParams {
  std::size_t k = 8;
  std::size_t candidates = 64;  // M
  std::size_t sweeps = 2;

  void validate() const {
    if (k < 1) throw InvalidArgument("knn.k must be >= 1");
  }
  bool operator==(const KnnQParams&) const = default;
};

/// Q(o, a) = mean target of the k nearest training pairs in std-scaled
/// (o, a) space. Immutable once trained.
class KnnQModel {
 public:
  KnnQModel() = default;

  KnnQModel(KnnQParams params, double lambda, std::size_t obs_dim, std::size_t action_dim, Vec scale,
            std::vector<double> features, std::vector<double> targets)
      : params_(params),
        lambda_(lambda),
        obs_dim_(obs_dim),
        action_dim_(action_dim),
        scale_(std::move(scale)),
        raw_features_(std::move(features)),
        targets_(std::move(targets)) {
    params_.validate();
    rebuild();
  }

  bool trained() const { return !targets_.empty(); }
  const KnnQParams& params() const { return params_; }
  double lambda() const { return lambda_; }
  std::size_t obs_dim() const { return obs_dim_; }
  std::size_t action_dim() const { return action_dim_; }
  const Vec& scale() const { return scale_; }
  const std::vector<double>& targets() const { return targets_; }
  const std::vector<double>& features() const { return raw_features_; }
  std::size_t size() const { return targets_.size(); }

  double q(std::span<const double> obs, std::span<const double> action) const {
    return q_with_targets(obs, action, targets_);
  }

  /// Q evaluated with an alternative target vector over the same features.
  double q_with_targets(std::span<const double> obs, std::span<const double> action,
                        std::span<const double> targets) const {
    if (!trained()) throw std::logic_error("KnnQModel: not trained");
    const Vec x = scaled_feature(obs, action);
    const auto nn = tree_.nearest(x, params_.k);
    double acc = 0.0;
    for (std::size_t idx : nn) acc += targets[idx];
    return acc / static_cast<double>(nn.size());
  }

  /// argmax_a Q(obs, a) over M uniform candidates in the lambda-ball plus the
  /// logged action; the logged action wins ties. Returns the index of the
  /// winner (0 = logged) together with the action.
  std::pair<std::size_t, Vec> argmax(std::span<const double> obs, std::span<const double> logged,
                                     RngStream& rng) const {
    Vec best(logged.begin(), logged.end());
    if (!trained() || params_.candidates == 0) return {0, best};
    double best_q = q(obs, logged);
    std::size_t best_idx = 0;
    for (std::size_t m = 0; m < params_.candidates; ++m) {
      Vec cand = rng.uniform_ball(action_dim_, lambda_);
      const double v = q(obs, cand);
      if (v > best_q) {
        best_q = v;
        best = std::move(cand);
        best_idx = m + 1;
      }
    }
    return {best_idx, best};
  }

  /// Greedy action suggestion; an untrained model returns `logged` unchanged.
  Vec suggest(std::span<const double> obs, std::span<const double> logged, RngStream& rng) const {
    return argmax(obs, logged, rng).second;
  }

  Vec scaled_feature(std::span<const double> obs, std::span<const double> action) const {
    if (obs.size() != obs_dim_ || action.size() != action_dim_)
      throw InvalidArgument("KnnQModel: feature dimension mismatch");
    Vec x(obs_dim_ + action_dim_);
    for (std::size_t c = 0; c < obs_dim_; ++c) x[c] = obs[c] / scale_[c];
    for (std::size_t c = 0; c < action_dim_; ++c) x[obs_dim_ + c] = action[c] / scale_[obs_dim_ + c];
    return x;
  }

 private:
  void rebuild() {
    const std::size_t dim = obs_dim_ + action_dim_;
    if (scale_.size() != dim) throw InvalidArgument("KnnQModel: scale vector has wrong size");
    if (raw_features_.size() != targets_.size() * dim)
      throw InvalidArgument("KnnQModel: feature/target count mismatch");
    std::vector<double> pts(raw_features_.size());
    for (std::size_t i = 0; i < targets_.size(); ++i)
      for (std::size_t c = 0; c < dim; ++c) pts[i * dim + c] = raw_features_[i * dim + c] / scale_[c];
    tree_ = KdTree(std::move(pts), dim);
  }

  KnnQParams params_;
  double lambda_ = 1.0;
  std::size_t obs_dim_ = 0;
  std::size_t action_dim_ = 0;
  Vec scale_;
  std::vector<double> raw_features_;
  std::vector<double> targets_;
  KdTree tree_;
};

namespace detail {

struct QSample {
  Vec obs;
  Vec action;
  double reward = 0.0;
  bool terminal = false;
  Vec next_obs;
  Vec next_action;  // logged action at next_obs, empty if none
};

}  // namespace detail

/// Trains a KnnQModel on real transitions plus up to `shortcut.max_per_trajectory`
/// shortcut tuples per trajectory. Targets start at r + gamma * V0(o'), V0 the
/// mean logged return of the k nearest logged observations, and are refined by
/// `params.sweeps` fitted-value-iteration sweeps.
inline KnnQModel train_knn_q(const Dataset& ds, const Environment& env, const ShortcutConfig& shortcut,
                             const KnnQParams& params, const RngStream& rng) {
  params.validate();
  shortcut.validate();
  std::size_t total = 0;
  for (const auto& t : ds.trajectories) total += t.size();
  if (total == 0) throw InvalidArgument("train_knn_q: empty dataset");

  const double gamma = shortcut.gamma;
  const std::size_t obs_dim = ds.trajectories.front().transitions.front().obs.size();
  const std::size_t act_dim = ds.trajectories.front().transitions.front().action.size();

  std::vector<detail::QSample> samples;
  std::vector<double> state_points;
  std::vector<double> state_returns;

  for (std::size_t ti = 0; ti < ds.trajectories.size(); ++ti) {
    const Trajectory& traj = ds.trajectories[ti];
    if (traj.empty()) continue;
    const auto G = returns(traj, gamma);
    const std::size_t n = traj.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Transition& tr = traj.transitions[i];
      state_points.insert(state_points.end(), tr.obs.begin(), tr.obs.end());
      state_returns.push_back(G[i]);
      detail::QSample s;
      s.obs = tr.obs;
      s.action = tr.action;
      s.reward = tr.reward;
      s.terminal = tr.done;
      if (i + 1 < n) {
        s.next_obs = traj.transitions[i + 1].obs;
        s.next_action = traj.transitions[i + 1].action;
      } else {
        s.next_obs = env.observe(tr.latent_next_s, traj.target);
      }
      samples.push_back(std::move(s));
    }
    RngStream sc_rng = rng.child("shortcuts", ti);
    for (auto& tup : shortcut_tuples(traj, shortcut, sc_rng)) {
      detail::QSample s;
      s.obs = tup.o_i;
      s.action = tup.a_hat;
      s.reward = tup.r;
      s.terminal = false;
      s.next_obs = tup.o_j;
      s.next_action = traj.transitions[tup.j].action;
      samples.push_back(std::move(s));
    }
  }

  // Feature scaling by per-coordinate standard deviation.
  const std::size_t dim = obs_dim + act_dim;
  Vec mean(dim, 0.0), var(dim, 0.0);
  std::vector<double> features;
  features.reserve(samples.size() * dim);
  for (const auto& s : samples) {
    features.insert(features.end(), s.obs.begin(), s.obs.end());
    features.insert(features.end(), s.action.begin(), s.action.end());
  }
  const double count = static_cast<double>(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t c = 0; c < dim; ++c) mean[c] += features[i * dim + c] / count;
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t c = 0; c < dim; ++c) {
      const double diff = features[i * dim + c] - mean[c];
      var[c] += diff * diff / count;
    }
  Vec scale(dim);
  for (std::size_t c = 0; c < dim; ++c) scale[c] = var[c] > 1e-18 ? std::sqrt(var[c]) : 1.0;

  // Initial targets from neighbouring logged returns.
  const KdTree state_tree(state_points, obs_dim);
  std::vector<double> targets(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.terminal) {
      targets[i] = s.reward;
      continue;
    }
    const auto nn = state_tree.nearest(s.next_obs, params.k);
    double v0 = 0.0;
    for (std::size_t idx : nn) v0 += state_returns[idx];
    v0 /= static_cast<double>(nn.size());
    targets[i] = s.reward + gamma * v0;
  }

  KnnQModel model(params, shortcut.lambda, obs_dim, act_dim, scale, features, targets);

  for (std::size_t sweep = 0; sweep < params.sweeps; ++sweep) {
    const std::vector<double> current = model.targets();
    std::vector<double> next(samples.size());
    const RngStream sweep_rng = rng.child("sweep", sweep);
    parallel_for(samples.size(), [&](std::size_t i) {
      const auto& s = samples[i];
      if (s.terminal) {
        next[i] = s.reward;
        return;
      }
      RngStream cand_rng = sweep_rng.child(static_cast<std::uint64_t>(i));
      double best = s.next_action.empty() ? -std::numeric_limits<double>::infinity()
                                          : model.q_with_targets(s.next_obs, s.next_action, current);
      for (std::size_t m = 0; m < params.candidates; ++m) {
        const Vec cand = cand_rng.uniform_ball(act_dim, shortcut.lambda);
        best = std::max(best, model.q_with_targets(s.next_obs, cand, current));
      }
      // Without any candidate action the target is left unchanged.
      next[i] = std::isfinite(best) ? s.reward + gamma * best : current[i];
    });
    model = KnnQModel(params, shortcut.lambda, obs_dim, act_dim, scale, features, next);
  }
  return model;
}

inline void write_knn_model(const KnnQModel& model, std::ostream& os, std::string_view config_digest = "") {
  os << JsonLine()
            .field("type", "knnq")
            .field("version", 1)
            .field("config_digest", config_digest)
            .field("k", static_cast<std::uint64_t>(model.params().k))
            .field("candidates", static_cast<std::uint64_t>(model.params().candidates))
            .field("sweeps", static_cast<std::uint64_t>(model.params().sweeps))
            .field("lambda", model.lambda())
            .field("obs_dim", static_cast<std::uint64_t>(model.obs_dim()))
            .field("action_dim", static_cast<std::uint64_t>(model.action_dim()))
            .field("scale", model.scale())
            .field("pairs", static_cast<std::uint64_t>(model.size()))
            .str()
     << '\n';
  const std::size_t dim = model.obs_dim() + model.action_dim();
  for (std::size_t i = 0; i < model.size(); ++i) {
    std::span<const double> x(model.features().data() + i * dim, dim);
    os << JsonLine().field("type", "pair").field("x", x).field("target", model.targets()[i]).str() << '\n';
  }
}

inline void write_knn_model(const KnnQModel& model, const std::string& path, std::string_view config_digest = "") {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_knn_model(model, os, config_digest);
  if (!os) throw IoError("write to '" + path + "' failed");
}

inline KnnQModel read_knn_model(std::istream& is) {
  std::string text;
  std::size_t line = 0;
  nlohmann::json header;
  KnnQParams params;
  double lambda = 1.0;
  std::size_t obs_dim = 0, act_dim = 0, pairs = 0;
  Vec scale;
  std::vector<double> features, targets;
  bool have_header = false;
  while (std::getline(is, text)) {
    ++line;
    if (text.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line, std::string("malformed record: ") + e.what());
    }
    const auto type = detail::read_scalar<std::string>(j, "type", line, "model");
    if (!have_header) {
      if (type != "knnq") throw ParseError(line, "first record must be the knnq header");
      if (detail::read_scalar<int>(j, "version", line, "knnq") != 1) throw ParseError(line, "unsupported model version");
      params.k = detail::read_scalar<std::size_t>(j, "k", line, "knnq");
      params.candidates = detail::read_scalar<std::size_t>(j, "candidates", line, "knnq");
      params.sweeps = detail::read_scalar<std::size_t>(j, "sweeps", line, "knnq");
      lambda = detail::read_scalar<double>(j, "lambda", line, "knnq");
      obs_dim = detail::read_scalar<std::size_t>(j, "obs_dim", line, "knnq");
      act_dim = detail::read_scalar<std::size_t>(j, "action_dim", line, "knnq");
      scale = detail::read_vec(j, "scale", line, "knnq");
      pairs = detail::read_scalar<std::size_t>(j, "pairs", line, "knnq");
      have_header = true;
      continue;
    }
    if (type != "pair") throw ParseError(line, "unexpected record type '" + type + "'");
    const Vec x = detail::read_vec(j, "x", line, "pair");
    if (x.size() != obs_dim + act_dim) throw ParseError(line, "pair record: feature has wrong dimension");
    features.insert(features.end(), x.begin(), x.end());
    targets.push_back(detail::read_scalar<double>(j, "target", line, "pair"));
  }
  if (!have_header) throw ParseError(line + 1, "missing knnq header");
  if (targets.size() != pairs)
    throw ParseError(line + 1, "truncated model: expected " + std::to_string(pairs) + " pairs, found " +
                                   std::to_string(targets.size()));
  if (pairs == 0) return KnnQModel();
  return KnnQModel(params, lambda, obs_dim, act_dim, scale, features, targets);
}

inline KnnQModel read_knn_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "' for reading");
  return read_knn_model(is);
}

}  // namespace lift
