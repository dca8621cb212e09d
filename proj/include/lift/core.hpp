#pragma once

// Shared numerics: vectors, small dense matrices, clipping, block rotations.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace lift {

/// Thrown when an argument violates an operation's precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Positions, actions and observations. Entries must stay finite.
using Vec = std::vector<double>;

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline void require_finite(std::span<const double> v, const char* what) {
  if (!all_finite(v)) throw InvalidArgument(std::string(what) + ": non-finite entry");
}

inline void require_same_dim(std::span<const double> a, std::span<const double> b,
                             const char* what) {
  if (a.size() != b.size()) {
    throw InvalidArgument(std::string(what) + ": dimension mismatch (" +
                          std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm(std::span<const double> v) {
  return std::sqrt(dot(v, v));
}

inline Vec add(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a, b, "add");
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

inline Vec sub(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a, b, "sub");
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

inline Vec scaled(std::span<const double> v, double factor) {
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * factor;
  return out;
}

inline double distance(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a, b, "distance");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

inline Vec zeros(std::size_t d) { return Vec(d, 0.0); }

/// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  Vec apply(std::span<const double> v) const {
    if (v.size() != cols) throw InvalidArgument("Matrix::apply: dimension mismatch");
    Vec out(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < cols; ++c) acc += (*this)(r, c) * v[c];
      out[r] = acc;
    }
    return out;
  }

  Matrix operator*(const Matrix& other) const {
    if (cols != other.rows) throw InvalidArgument("Matrix::operator*: dimension mismatch");
    Matrix out(rows, other.cols);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t k = 0; k < cols; ++k)
        for (std::size_t c = 0; c < other.cols; ++c) out(r, c) += (*this)(r, k) * other(k, c);
    return out;
  }

  Matrix transposed() const {
    Matrix out(cols, rows);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) out(c, r) = (*this)(r, c);
    return out;
  }

  bool operator==(const Matrix&) const = default;
};

/// Radial projection onto the closed Euclidean ball of radius `lambda`.
inline Vec clip_ball(std::span<const double> v, double lambda) {
  if (!(lambda > 0.0)) throw InvalidArgument("clip_ball: lambda must be positive");
  require_finite(v, "clip_ball");
  const double n = norm(v);
  if (n <= lambda) return Vec(v.begin(), v.end());
  Vec out = scaled(v, lambda / n);
  // Rounding in the rescale can leave the norm a few ulps above lambda.
  while (norm(out) > lambda) {
    for (double& x : out) x = std::nextafter(x, 0.0);
  }
  return out;
}

inline double clip_interval(double x, double lo, double hi) {
  if (!(lo > 0.0) || !(lo < hi)) throw InvalidArgument("clip_interval: need 0 < lo < hi");
  if (!std::isfinite(x)) throw InvalidArgument("clip_interval: non-finite input");
  return std::min(std::max(x, lo), hi);
}

/// diag(R_w, ..., R_w) with 2x2 rotations on adjacent coordinate pairs. For odd
/// `d` the last coordinate is left fixed.
inline Matrix block_rotation(std::size_t d, double w) {
  if (d < 1) throw InvalidArgument("block_rotation: d must be >= 1");
  Matrix m = Matrix::identity(d);
  const double c = std::cos(w);
  const double s = std::sin(w);
  for (std::size_t b = 0; b + 1 < d; b += 2) {
    m(b, b) = c;
    m(b, b + 1) = -s;
    m(b + 1, b) = s;
    m(b + 1, b + 1) = c;
  }
  return m;
}

/// Applies block_rotation(v.size(), w) without materialising the matrix.
inline Vec rotate_blocks(std::span<const double> v, double w) {
  const double c = std::cos(w);
  const double s = std::sin(w);
  Vec out(v.begin(), v.end());
  for (std::size_t b = 0; b + 1 < v.size(); b += 2) {
    out[b] = c * v[b] - s * v[b + 1];
    out[b + 1] = s * v[b] + c * v[b + 1];
  }
  return out;
}

/// Worker count from LIFT_THREADS (default: hardware concurrency, at least 1).
inline std::size_t worker_count() {
  std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("LIFT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<std::size_t>(v);
  }
  return hw;
}

/// Runs body(i) for i in [0, n) on up to worker_count() threads. Each index is
/// processed exactly once; callers write results into per-index slots.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace lift
