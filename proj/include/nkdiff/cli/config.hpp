/*
 * Copyright 2026 The nkdiff Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Experiment configuration files (YAML, flat keys plus a `sweep:` map of
// per-axis lists), their canonical form and content hash.

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nkdiff/engine.hpp"

namespace nkdiff::cli {

/// A configuration problem, with the 1-based line of the offending entry
/// when it came from a file (0 otherwise).
class ConfigError : public ConfigurationError {
 public:
  ConfigError(const std::string& what, int line = 0)
      : ConfigurationError(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Output or input files that could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SweepAxes {
  std::vector<PolicyTag> policies;
  std::vector<int> capacities;
  std::vector<bool> pretrain;
  std::vector<double> noise;

  bool empty() const { return policies.empty() && capacities.empty() && pretrain.empty() && noise.empty(); }
};

struct RunConfig {
  ExperimentConfig experiment;
  int seeds = 5;
  std::uint64_t seed_base = 1;
  std::string out = "results";
  std::optional<SweepAxes> sweep;

  std::vector<std::uint64_t> seed_list() const {
    std::vector<std::uint64_t> s;
    for (int i = 0; i < seeds; ++i) s.push_back(seed_base + static_cast<std::uint64_t>(i));
    return s;
  }
};

namespace detail {

inline int line_of(const YAML::Node& node) { return node.Mark().line + 1; }

template <typename T>
T scalar(const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) throw ConfigError("'" + key + "' must be a scalar", line_of(node));
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("'" + key + "' has an invalid value '" + node.Scalar() + "'", line_of(node));
  }
}

inline bool parse_switch(const std::string& text, const std::string& key, int line) {
  if (text == "on" || text == "true" || text == "yes" || text == "1") return true;
  if (text == "off" || text == "false" || text == "no" || text == "0") return false;
  throw ConfigError("'" + key + "' must be on/off, got '" + text + "'", line);
}

inline bool switch_value(const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) throw ConfigError("'" + key + "' must be on/off", line_of(node));
  return parse_switch(node.Scalar(), key, line_of(node));
}

inline PolicyTag policy_value(const YAML::Node& node, const std::string& key) {
  const auto tag = parse_policy(scalar<std::string>(node, key));
  if (!tag) throw ConfigError("unknown policy '" + node.Scalar() + "' (oo, pom, rgbt, btb, eq)", line_of(node));
  return *tag;
}

template <typename Fn>
auto list_value(const YAML::Node& node, const std::string& key, Fn&& item) {
  using T = decltype(item(node, key));
  std::vector<T> out;
  if (!node.IsSequence()) throw ConfigError("'" + key + "' must be a list", line_of(node));
  if (node.size() == 0) throw ConfigError("'" + key + "' must not be empty", line_of(node));
  for (const auto& v : node) out.push_back(item(v, key));
  return out;
}

}  // namespace detail

/// Applies the entries of a parsed YAML document on top of `cfg`.
inline void apply_yaml(const YAML::Node& root, RunConfig& cfg) {
  using namespace detail;
  if (!root.IsDefined() || root.IsNull()) return;
  if (!root.IsMap()) throw ConfigError("configuration must be a key: value map", line_of(root));
  auto& e = cfg.experiment;
  auto& d = e.data;
  for (const auto& entry : root) {
    const auto key = entry.first.as<std::string>();
    const auto& v = entry.second;
    const int line = line_of(entry.first);
    if (key == "policy") e.policy = policy_value(v, key);
    else if (key == "n") e.N = scalar<int>(v, key);
    else if (key == "c") e.C = scalar<int>(v, key);
    else if (key == "rounds") e.rounds = scalar<int>(v, key);
    else if (key == "pretrain") e.pretrain = switch_value(v, key);
    else if (key == "noise") e.noise = scalar<double>(v, key);
    else if (key == "random_labels") e.random_labels = switch_value(v, key);
    else if (key == "learning_rate") e.hp.learning_rate = scalar<double>(v, key);
    else if (key == "batch_size") e.hp.batch_size = scalar<int>(v, key);
    else if (key == "shuffle") e.hp.shuffle = switch_value(v, key);
    else if (key == "hidden") {
      if (v.IsSequence() && v.size() == 0) e.hidden.clear();
      else e.hidden = list_value(v, key, [](const YAML::Node& n, const std::string& k) { return scalar<int>(n, k); });
    }
    else if (key == "dataset") {
      const auto kind = scalar<std::string>(v, key);
      if (kind == "blobs") d.kind = DatasetKind::blobs;
      else if (kind == "idx") d.kind = DatasetKind::idx;
      else throw ConfigError("dataset must be 'blobs' or 'idx', got '" + kind + "'", line_of(v));
    }
    else if (key == "blobs_n_per_class") d.n_per_class = scalar<int>(v, key);
    else if (key == "blobs_classes") d.K = scalar<int>(v, key);
    else if (key == "blobs_dim") d.d = scalar<int>(v, key);
    else if (key == "blobs_centers_scale") d.centers_scale = scalar<double>(v, key);
    else if (key == "blobs_noise_sigma") d.noise_sigma = scalar<double>(v, key);
    else if (key == "idx_images") d.idx_images = scalar<std::string>(v, key);
    else if (key == "idx_labels") d.idx_labels = scalar<std::string>(v, key);
    else if (key == "max_rows") d.max_rows = scalar<std::size_t>(v, key);
    else if (key == "train_frac") d.train_frac = scalar<double>(v, key);
    else if (key == "val_frac") d.val_frac = scalar<double>(v, key);
    else if (key == "seeds") cfg.seeds = scalar<int>(v, key);
    else if (key == "seed_base") cfg.seed_base = scalar<std::uint64_t>(v, key);
    else if (key == "out") cfg.out = scalar<std::string>(v, key);
    else if (key == "sweep") {
      if (!v.IsMap()) throw ConfigError("'sweep' must be a map of axis lists", line_of(v));
      SweepAxes axes;
      for (const auto& axis : v) {
        const auto name = axis.first.as<std::string>();
        const auto& list = axis.second;
        if (name == "policy") axes.policies = list_value(list, name, policy_value);
        else if (name == "c") axes.capacities = list_value(list, name, [](const YAML::Node& n, const std::string& k) { return scalar<int>(n, k); });
        else if (name == "pretrain") axes.pretrain = list_value(list, name, switch_value);
        else if (name == "noise") axes.noise = list_value(list, name, [](const YAML::Node& n, const std::string& k) { return scalar<double>(n, k); });
        else throw ConfigError("unknown sweep axis '" + name + "'", line_of(axis.first));
      }
      if (axes.empty()) throw ConfigError("'sweep' lists no axes", line_of(v));
      cfg.sweep = axes;
    }
    else throw ConfigError("unknown key '" + key + "'", line);
  }
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  RunConfig cfg;
  try {
    apply_yaml(YAML::Load(in), cfg);
  } catch (const YAML::ParserException& ex) {
    throw ConfigError("YAML syntax error: " + ex.msg, ex.mark.line + 1);
  }
  return cfg;
}

inline RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  try {
    apply_yaml(YAML::Load(text), cfg);
  } catch (const YAML::ParserException& ex) {
    throw ConfigError("YAML syntax error: " + ex.msg, ex.mark.line + 1);
  }
  return cfg;
}

inline void validate(const RunConfig& cfg) {
  if (cfg.seeds < 1) throw ConfigError("seeds must be at least 1");
  try {
    nkdiff::validate(cfg.experiment);
  } catch (const ConfigError&) {
    throw;
  } catch (const ConfigurationError& ex) {
    throw ConfigError(ex.what());
  }
}

namespace detail {
/// Shortest text that reads back to exactly v.
inline std::string fmt_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}
}  // namespace detail

/// Every semantically meaningful experiment field in a fixed order and
/// format. Seeds, output directory and sweep axes are not part of it.
inline std::string canonical_text(const ExperimentConfig& e) {
  using detail::fmt_real;
  std::ostringstream os;
  os << "policy: " << to_string(e.policy) << "\n"
     << "n: " << e.N << "\n"
     << "c: " << e.C << "\n"
     << "rounds: " << e.rounds << "\n"
     << "pretrain: " << (e.pretrain ? "on" : "off") << "\n"
     << "noise: " << fmt_real(e.noise) << "\n"
     << "random_labels: " << (e.random_labels ? "on" : "off") << "\n"
     << "learning_rate: " << fmt_real(e.hp.learning_rate) << "\n"
     << "batch_size: " << e.hp.batch_size << "\n"
     << "shuffle: " << (e.hp.shuffle ? "on" : "off") << "\n"
     << "hidden: [";
  for (std::size_t i = 0; i < e.hidden.size(); ++i) os << (i ? ", " : "") << e.hidden[i];
  os << "]\n";
  const auto& d = e.data;
  if (d.kind == DatasetKind::blobs) {
    os << "dataset: blobs\n"
       << "blobs_n_per_class: " << d.n_per_class << "\n"
       << "blobs_classes: " << d.K << "\n"
       << "blobs_dim: " << d.d << "\n"
       << "blobs_centers_scale: " << fmt_real(d.centers_scale) << "\n"
       << "blobs_noise_sigma: " << fmt_real(d.noise_sigma) << "\n";
  } else {
    os << "dataset: idx\n"
       << "idx_images: \"" << d.idx_images << "\"\n"
       << "idx_labels: \"" << d.idx_labels << "\"\n";
  }
  os << "max_rows: " << d.max_rows << "\n"
     << "train_frac: " << fmt_real(d.train_frac) << "\n"
     << "val_frac: " << fmt_real(d.val_frac) << "\n";
  return os.str();
}

/// Git blob id (SHA-1 of "blob <len>\0<content>") of a text.
inline std::string git_blob_hash(const std::string& content) {
  const std::string payload = "blob " + std::to_string(content.size()) + std::string(1, '\0') + content;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(payload.data(), payload.size(), digest, &len, EVP_sha1(), nullptr) != 1) {
    throw std::runtime_error("SHA-1 digest failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return os.str();
}

inline std::string config_hash(const ExperimentConfig& e) { return git_blob_hash(canonical_text(e)); }

/// The manifest is itself a loadable config: running it again reproduces
/// the same CSVs.
inline std::string manifest_text(const RunConfig& cfg) {
  std::ostringstream os;
  os << "# config_hash: " << config_hash(cfg.experiment) << "\n"
     << "# seed_list:";
  for (auto s : cfg.seed_list()) os << " " << s;
  os << "\n" << canonical_text(cfg.experiment) << "seeds: " << cfg.seeds << "\n"
     << "seed_base: " << cfg.seed_base << "\n";
  return os.str();
}

}  // namespace nkdiff::cli
