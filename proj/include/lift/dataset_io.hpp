#pragma once

// Line-delimited dataset files.
//
//   {"type":"meta","format":"lift-dataset","version":1,"config_digest":..,"seed":..,"d":..,"gamma":..,"episodes":N}
//   {"type":"context","ep":k,"kind":..,"payload":[..],"s_W":[..],"transitions":n}
//   {"type":"transition","ep":k,"t":i,"obs":[..],"action":[..],"reward":..,"done":..,
//    "latent_s":[..],"latent_next_s":[..],"augmented":..}
//
// Doubles are written with 17 significant digits so reading restores them
// bit for bit.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "lift/environment.hpp"

namespace lift {

/// Malformed input file. The message names the line and record.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Output file could not be opened or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Builds one JSON object with fields in insertion order.
class JsonLine {
 public:
  JsonLine& field(std::string_view key, double v) { return raw(key, format_double(v)); }
  JsonLine& field(std::string_view key, std::uint64_t v) { return raw(key, std::to_string(v)); }
  JsonLine& field(std::string_view key, int v) { return raw(key, std::to_string(v)); }
  JsonLine& field(std::string_view key, bool v) { return raw(key, v ? "true" : "false"); }
  JsonLine& field(std::string_view key, std::string_view v) {
    return raw(key, nlohmann::json(std::string(v)).dump());
  }
  JsonLine& field(std::string_view key, const char* v) { return field(key, std::string_view(v)); }
  JsonLine& field(std::string_view key, std::span<const double> v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ',';
      s += format_double(v[i]);
    }
    s += ']';
    return raw(key, s);
  }
  JsonLine& field(std::string_view key, const Vec& v) { return field(key, std::span<const double>(v)); }

  std::string str() const { return "{" + body_ + "}"; }

 private:
  JsonLine& raw(std::string_view key, const std::string& value) {
    if (!body_.empty()) body_ += ',';
    body_ += '"';
    body_ += key;
    body_ += "\":";
    body_ += value;
    return *this;
  }
  std::string body_;
};

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& j, const char* key, std::size_t line,
                                           std::string_view record) {
  auto it = j.find(key);
  if (it == j.end())
    throw ParseError(line, std::string(record) + " record: missing field '" + key + "'");
  return *it;
}

inline Vec read_vec(const nlohmann::json& j, const char* key, std::size_t line, std::string_view record) {
  const auto& v = require_field(j, key, line, record);
  if (!v.is_array()) throw ParseError(line, std::string(record) + " record: '" + key + "' is not an array");
  Vec out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) throw ParseError(line, std::string(record) + " record: '" + key + "' has a non-number");
    out.push_back(x.get<double>());
  }
  return out;
}

template <typename T>
T read_scalar(const nlohmann::json& j, const char* key, std::size_t line, std::string_view record) {
  const auto& v = require_field(j, key, line, record);
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError(line, std::string(record) + " record: field '" + key + "' has the wrong type");
  }
}

}  // namespace detail

inline std::string transition_record(std::uint64_t ep, std::size_t t, const Transition& tr) {
  return JsonLine()
      .field("type", "transition")
      .field("ep", ep)
      .field("t", static_cast<std::uint64_t>(t))
      .field("obs", tr.obs)
      .field("action", tr.action)
      .field("reward", tr.reward)
      .field("done", tr.done)
      .field("latent_s", tr.latent_s)
      .field("latent_next_s", tr.latent_next_s)
      .field("augmented", tr.augmented)
      .str();
}

inline void write_dataset(const Dataset& ds, std::ostream& os) {
  os << JsonLine()
            .field("type", "meta")
            .field("format", "lift-dataset")
            .field("version", ds.meta.format_version)
            .field("config_digest", ds.meta.config_digest)
            .field("seed", ds.meta.seed)
            .field("d", static_cast<std::uint64_t>(ds.meta.d))
            .field("gamma", ds.meta.gamma)
            .field("episodes", static_cast<std::uint64_t>(ds.trajectories.size()))
            .str()
     << '\n';
  for (const Trajectory& traj : ds.trajectories) {
    os << JsonLine()
              .field("type", "context")
              .field("ep", traj.episode)
              .field("kind", to_string(traj.context.kind))
              .field("payload", traj.context.values)
              .field("s_W", traj.target)
              .field("transitions", static_cast<std::uint64_t>(traj.transitions.size()))
              .str()
       << '\n';
    for (std::size_t t = 0; t < traj.transitions.size(); ++t)
      os << transition_record(traj.episode, t, traj.transitions[t]) << '\n';
  }
}

inline void write_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_dataset(ds, os);
  if (!os) throw IoError("write to '" + path + "' failed");
}

inline Dataset read_dataset(std::istream& is) {
  Dataset ds;
  std::string text;
  std::size_t line_no = 0;
  std::size_t expected_episodes = 0;
  std::size_t expected_transitions = 0;
  bool have_meta = false;

  const auto close_episode = [&](std::size_t line) {
    if (!ds.trajectories.empty() && ds.trajectories.back().transitions.size() != expected_transitions) {
      throw ParseError(line, "episode " + std::to_string(ds.trajectories.back().episode) + ": expected " +
                                 std::to_string(expected_transitions) + " transitions, found " +
                                 std::to_string(ds.trajectories.back().transitions.size()));
    }
  };

  while (std::getline(is, text)) {
    ++line_no;
    if (text.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_no, std::string("malformed record: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(line_no, "record is not an object");
    const auto type = detail::read_scalar<std::string>(j, "type", line_no, "any");

    if (!have_meta) {
      if (type != "meta") throw ParseError(line_no, "first record must be the metadata record");
      if (detail::read_scalar<std::string>(j, "format", line_no, "meta") != "lift-dataset")
        throw ParseError(line_no, "meta record: unexpected format");
      ds.meta.format_version = detail::read_scalar<int>(j, "version", line_no, "meta");
      if (ds.meta.format_version != 1) throw ParseError(line_no, "meta record: unsupported version");
      ds.meta.config_digest = detail::read_scalar<std::string>(j, "config_digest", line_no, "meta");
      ds.meta.seed = detail::read_scalar<std::uint64_t>(j, "seed", line_no, "meta");
      ds.meta.d = detail::read_scalar<std::size_t>(j, "d", line_no, "meta");
      ds.meta.gamma = detail::read_scalar<double>(j, "gamma", line_no, "meta");
      expected_episodes = detail::read_scalar<std::size_t>(j, "episodes", line_no, "meta");
      have_meta = true;
      continue;
    }

    if (type == "context") {
      close_episode(line_no);
      Trajectory traj;
      traj.episode = detail::read_scalar<std::uint64_t>(j, "ep", line_no, "context");
      try {
        traj.context.kind = parse_distortion_kind(detail::read_scalar<std::string>(j, "kind", line_no, "context"));
      } catch (const InvalidArgument& e) {
        throw ParseError(line_no, std::string("context record: ") + e.what());
      }
      traj.context.values = detail::read_vec(j, "payload", line_no, "context");
      traj.target = detail::read_vec(j, "s_W", line_no, "context");
      expected_transitions = detail::read_scalar<std::size_t>(j, "transitions", line_no, "context");
      if (traj.target.size() != ds.meta.d) throw ParseError(line_no, "context record: s_W has wrong dimension");
      if (traj.context.values.size() != traj.context.expected_size(ds.meta.d))
        throw ParseError(line_no, "context record: payload size does not match kind");
      ds.trajectories.push_back(std::move(traj));
    } else if (type == "transition") {
      if (ds.trajectories.empty()) throw ParseError(line_no, "transition record before any context record");
      Trajectory& traj = ds.trajectories.back();
      const auto ep = detail::read_scalar<std::uint64_t>(j, "ep", line_no, "transition");
      const auto t = detail::read_scalar<std::size_t>(j, "t", line_no, "transition");
      if (ep != traj.episode) throw ParseError(line_no, "transition record: episode id does not match context");
      if (t != traj.transitions.size()) throw ParseError(line_no, "transition record: step index out of order");
      Transition tr;
      tr.obs = detail::read_vec(j, "obs", line_no, "transition");
      tr.action = detail::read_vec(j, "action", line_no, "transition");
      tr.reward = detail::read_scalar<double>(j, "reward", line_no, "transition");
      tr.done = detail::read_scalar<bool>(j, "done", line_no, "transition");
      tr.latent_s = detail::read_vec(j, "latent_s", line_no, "transition");
      tr.latent_next_s = detail::read_vec(j, "latent_next_s", line_no, "transition");
      tr.augmented = detail::read_scalar<bool>(j, "augmented", line_no, "transition");
      if (tr.action.size() != ds.meta.d || tr.latent_s.size() != ds.meta.d || tr.latent_next_s.size() != ds.meta.d)
        throw ParseError(line_no, "transition record: vector has wrong dimension");
      traj.transitions.push_back(std::move(tr));
    } else {
      throw ParseError(line_no, "unknown record type '" + type + "'");
    }
  }
  if (!have_meta) throw ParseError(line_no + 1, "missing metadata record");
  close_episode(line_no + 1);
  if (ds.trajectories.size() != expected_episodes) {
    throw ParseError(line_no + 1, "truncated dataset: expected " + std::to_string(expected_episodes) +
                                      " episodes, found " + std::to_string(ds.trajectories.size()));
  }
  return ds;
}

inline Dataset read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "' for reading");
  return read_dataset(is);
}

}  // namespace lift
