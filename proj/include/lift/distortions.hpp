#pragma once

// Movement distortions f(s, a, W): how a commanded action moves the latent
// position under the episode context W.

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>

#include "lift/core.hpp"
#include "lift/rng.hpp"

namespace lift {

enum class DistortionKind { identity, blend, rot, scale, regrot, sin, sqrt };

inline std::string_view to_string(DistortionKind k) {
  switch (k) {
    case DistortionKind::identity: return "identity";
    case DistortionKind::blend: return "blend";
    case DistortionKind::rot: return "rot";
    case DistortionKind::scale: return "scale";
    case DistortionKind::regrot: return "regrot";
    case DistortionKind::sin: return "sin";
    case DistortionKind::sqrt: return "sqrt";
  }
  return "?";
}

inline DistortionKind parse_distortion_kind(std::string_view name) {
  for (auto k : {DistortionKind::identity, DistortionKind::blend, DistortionKind::rot,
                 DistortionKind::scale, DistortionKind::regrot, DistortionKind::sin,
                 DistortionKind::sqrt}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidArgument("unknown distortion kind '" + std::string(name) + "'");
}

struct DistortionSpec {
  DistortionKind kind = DistortionKind::identity;
  double sigma = 0.0;
  double scale_floor = 0.25;  // C of f_scale
  std::array<double, 4> region_means{-0.3, 0.6, -0.3, 0.6};
  double lambda = 1.0;

  /// Parameters with the default noise scale for `kind` and C = lambda / 4.
  static DistortionSpec defaults(DistortionKind kind, double lambda = 1.0) {
    DistortionSpec s;
    s.kind = kind;
    s.lambda = lambda;
    s.scale_floor = lambda / 4.0;
    switch (kind) {
      case DistortionKind::blend: s.sigma = 0.2; break;
      case DistortionKind::rot: s.sigma = 0.5; break;
      case DistortionKind::regrot: s.sigma = 0.2; break;
      case DistortionKind::sin: s.sigma = 0.3; break;
      case DistortionKind::sqrt: s.sigma = 0.2; break;
      default: s.sigma = 0.0; break;
    }
    return s;
  }

  void validate() const {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidArgument("distortion.sigma must be >= 0");
    if (!(lambda > 0.0)) throw InvalidArgument("distortion.lambda must be > 0");
    if (!(scale_floor > 0.0 && scale_floor < lambda))
      throw InvalidArgument("distortion.scale_floor must satisfy 0 < C < lambda");
    if (!all_finite(region_means)) throw InvalidArgument("distortion.region_means must be finite");
  }

  bool operator==(const DistortionSpec&) const = default;
};

/// Per-episode context. Payload layout by kind:
///   blend, sqrt: d*d row-major matrix W
///   rot:         one angle
///   regrot:      four region angles
///   sin:         one amplitude
///   scale, identity: empty
struct Context {
  DistortionKind kind = DistortionKind::identity;
  Vec values;

  std::size_t expected_size(std::size_t d) const {
    switch (kind) {
      case DistortionKind::blend:
      case DistortionKind::sqrt: return d * d;
      case DistortionKind::rot:
      case DistortionKind::sin: return 1;
      case DistortionKind::regrot: return 4;
      default: return 0;
    }
  }

  void validate(std::size_t d) const {
    if (values.size() != expected_size(d))
      throw InvalidArgument("context payload size " + std::to_string(values.size()) +
                            " does not match kind " + std::string(to_string(kind)));
    require_finite(values, "context");
  }

  Matrix matrix(std::size_t d) const {
    Matrix m(d, d);
    m.data = values;
    return m;
  }

  bool operator==(const Context&) const = default;
};

inline Context sample_context(const DistortionSpec& spec, std::size_t d, RngStream& rng) {
  if (d < 1) throw InvalidArgument("sample_context: d must be >= 1");
  Context ctx;
  ctx.kind = spec.kind;
  switch (spec.kind) {
    case DistortionKind::blend:
    case DistortionKind::sqrt:
      ctx.values.resize(d * d);
      for (double& x : ctx.values) x = rng.normal(0.0, spec.sigma);
      break;
    case DistortionKind::rot: ctx.values = {rng.normal(0.0, spec.sigma)}; break;
    case DistortionKind::regrot:
      ctx.values.resize(4);
      for (std::size_t i = 0; i < 4; ++i) ctx.values[i] = rng.normal(spec.region_means[i], spec.sigma);
      break;
    case DistortionKind::sin: ctx.values = {rng.uniform(0.0, spec.sigma)}; break;
    case DistortionKind::scale:
    case DistortionKind::identity: break;
  }
  return ctx;
}

/// Quadrant of the first two coordinates: 0 = (+,+), 1 = (-,+), 2 = (-,-),
/// 3 = (+,-). Zero counts as non-negative.
inline std::size_t regrot_region(std::span<const double> s) {
  if (s.size() < 2) throw InvalidArgument("regrot: dimension must be >= 2");
  const bool x_pos = s[0] >= 0.0;
  const bool y_pos = s[1] >= 0.0;
  if (x_pos && y_pos) return 0;
  if (!x_pos && y_pos) return 1;
  if (!x_pos) return 2;
  return 3;
}

/// f(s, a, W). Does not clamp to the position box.
inline Vec apply(const DistortionSpec& spec, std::span<const double> s, std::span<const double> a,
                 const Context& ctx, std::span<const double> target) {
  require_same_dim(s, a, "distortion apply");
  const std::size_t d = s.size();
  if (ctx.kind != spec.kind) throw InvalidArgument("distortion apply: context kind mismatch");
  if (ctx.values.size() != ctx.expected_size(d))
    throw InvalidArgument("distortion apply: context payload does not match dimension");

  switch (spec.kind) {
    case DistortionKind::identity: return add(s, a);
    case DistortionKind::blend: {
      // s + (I + W) a
      Vec move = ctx.matrix(d).apply(a);
      for (std::size_t i = 0; i < d; ++i) move[i] += a[i];
      return add(s, move);
    }
    case DistortionKind::rot: return add(s, rotate_blocks(a, ctx.values[0]));
    case DistortionKind::scale: {
      require_same_dim(s, target, "distortion apply (scale target)");
      const double factor = clip_interval(distance(s, target), spec.scale_floor, spec.lambda);
      return add(s, scaled(a, factor));
    }
    case DistortionKind::regrot: {
      const std::size_t region = regrot_region(s);
      return add(s, rotate_blocks(a, ctx.values[region]));
    }
    case DistortionKind::sin: {
      const double w = ctx.values[0];
      const double a_norm = norm(a);
      Vec out(d);
      for (std::size_t i = 0; i < d; ++i)
        out[i] = s[i] + a[i] + w * std::sin(s[i]) * std::cos(s[i]) * a_norm;
      return out;
    }
    case DistortionKind::sqrt: {
      // s + (I + W) sqrt(|a|) a
      const Vec base = scaled(a, std::sqrt(norm(a)));
      Vec move = ctx.matrix(d).apply(base);
      for (std::size_t i = 0; i < d; ++i) move[i] += base[i];
      return add(s, move);
    }
  }
  return Vec(s.begin(), s.end());
}

/// Proven LPE constant; +infinity when none exists.
inline double lpe_constant(const DistortionSpec& spec, std::size_t d) {
  switch (spec.kind) {
    case DistortionKind::identity:
    case DistortionKind::blend:
    case DistortionKind::rot: return 0.0;
    case DistortionKind::scale: return 2.0 * spec.lambda;
    case DistortionKind::regrot: return 2.0;
    case DistortionKind::sin: return spec.sigma * std::sqrt(static_cast<double>(d));
    case DistortionKind::sqrt: return std::numeric_limits<double>::infinity();
  }
  return std::numeric_limits<double>::infinity();
}

struct LpeEstimate {
  double max_ratio = 0.0;
  std::size_t chains_used = 0;
  std::size_t chains_skipped = 0;  // resampling budget exhausted or path length ~ 0
};

/// Empirical max of |f(s0, sum a_i) - s_k| / sum |a_i| over random action
/// chains. Chains whose states leave [-box, box]^d are resampled.
inline LpeEstimate estimate_lpe_ratio(const DistortionSpec& spec, std::size_t d, std::size_t n_chains,
                                      std::size_t chain_len, RngStream& rng, double box = 1.0) {
  if (spec.kind == DistortionKind::regrot && d < 2)
    throw InvalidArgument("estimate_lpe_ratio: regrot needs d >= 2");
  constexpr int kMaxAttempts = 200;
  const auto inside = [box](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [box](double x) { return std::abs(x) <= box; });
  };

  LpeEstimate est;
  for (std::size_t c = 0; c < n_chains; ++c) {
    RngStream chain_rng = rng.child("chain", c);
    bool accepted = false;
    for (int attempt = 0; attempt < kMaxAttempts && !accepted; ++attempt) {
      RngStream r = chain_rng.child(static_cast<std::uint64_t>(attempt));
      const Context ctx = sample_context(spec, d, r);
      const Vec target = r.uniform_box(d, box / 2.0);
      Vec s = r.uniform_box(d, box);
      const Vec s0 = s;
      const double radius = r.uniform(0.0, spec.lambda);
      Vec total = zeros(d);
      double path = 0.0;
      bool ok = true;
      for (std::size_t k = 0; k < chain_len && ok; ++k) {
        const Vec a = r.uniform_ball(d, radius);
        s = apply(spec, s, a, ctx, target);
        total = add(total, a);
        path += norm(a);
        ok = inside(s);
      }
      if (!ok) continue;
      const Vec jump = apply(spec, s0, total, ctx, target);
      if (!inside(jump)) continue;
      accepted = true;
      if (path < 1e-9) {
        ++est.chains_skipped;
        break;
      }
      est.max_ratio = std::max(est.max_ratio, distance(jump, s) / path);
      ++est.chains_used;
    }
    if (!accepted) ++est.chains_skipped;
  }
  return est;
}

/// Gap |f(0, 2cv) - f(f(0, cv), cv)| for W = 0, the regrouping mismatch used to
/// show that f_sqrt has no LPE constant.
inline double sqrt_regrouping_gap(std::size_t d, double c) {
  DistortionSpec spec = DistortionSpec::defaults(DistortionKind::sqrt);
  Context ctx{DistortionKind::sqrt, Vec(d * d, 0.0)};
  Vec v = zeros(d);
  v[0] = 1.0;
  const Vec origin = zeros(d);
  const Vec step = scaled(v, c);
  const Vec s1 = apply(spec, origin, step, ctx, origin);
  const Vec s2 = apply(spec, s1, step, ctx, origin);
  const Vec jump = apply(spec, origin, scaled(v, 2.0 * c), ctx, origin);
  return distance(jump, s2);
}

}  // namespace lift
