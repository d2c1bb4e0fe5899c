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

// The batch front-end: `run`, `sweep` and `disagree`. Each command writes
// fixed-format CSVs (6 decimals) through temp-file + rename.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "nkdiff/cli/config.hpp"
#include "nkdiff/engine.hpp"
#include "nkdiff/metrics.hpp"
#include "nkdiff/parallel.hpp"

namespace nkdiff::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kIoError = 3 };

namespace fs = std::filesystem;

inline std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline void write_atomic(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw IoError("short write to " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

inline const char* kRunHeader = "round,oracle_sessions,forward_ops,alacc_test,ensacc_test,alacc_train,ensacc_val";

inline std::string run_csv(const std::vector<MetricsRecord>& records) {
  std::ostringstream os;
  os << kRunHeader << "\n";
  for (const auto& r : records) {
    os << r.round << "," << r.oracle_sessions << "," << r.forward_ops << "," << fixed6(r.alacc_test) << ","
       << fixed6(r.ensacc_test) << "," << fixed6(r.alacc_train) << "," << fixed6(r.ensacc_val) << "\n";
  }
  return os.str();
}

inline std::string agg_csv(const AggregateSeries& agg) {
  std::ostringstream os;
  os << "round";
  for (const auto& [name, stats] : agg.metrics) os << "," << name << "_mean," << name << "_ci95";
  os << "\n";
  for (std::size_t t = 0; t < agg.rounds.size(); ++t) {
    os << agg.rounds[t];
    for (const auto& [name, stats] : agg.metrics) os << "," << fixed6(stats.mean[t]) << "," << fixed6(stats.ci95[t]);
    os << "\n";
  }
  return os.str();
}

/// One experiment per seed; runs are returned in seed order whatever the
/// thread count.
inline std::vector<std::vector<MetricsRecord>> run_seeds(const ExperimentConfig& base,
                                                         const std::vector<std::uint64_t>& seeds, int threads) {
  std::vector<std::vector<MetricsRecord>> runs(seeds.size());
  const int outer = std::max(1, std::min<int>(threads, static_cast<int>(seeds.size())));
  const int inner = std::max(1, threads / outer);
  parallel_for(seeds.size(), outer, [&](std::size_t i) {
    ExperimentConfig cfg = base;
    cfg.master_seed = seeds[i];
    runs[i] = run_experiment(cfg, inner).records;
  });
  return runs;
}

/// Writes run_<seed>.csv per seed, agg.csv (two or more seeds) and
/// manifest.yaml into `dir`. Aggregates are written after every run is done.
inline AggregateSeries write_run_outputs(const RunConfig& cfg, const fs::path& dir,
                                         const std::vector<std::vector<MetricsRecord>>& runs) {
  const auto seeds = cfg.seed_list();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    write_atomic(dir / ("run_" + std::to_string(seeds[i]) + ".csv"), run_csv(runs[i]));
  }
  AggregateSeries agg;
  if (runs.size() >= 2) {
    agg = aggregate_seeds(runs);
    write_atomic(dir / "agg.csv", agg_csv(agg));
  }
  write_atomic(dir / "manifest.yaml", manifest_text(cfg));
  return agg;
}

inline void cmd_run(const RunConfig& cfg, int threads, std::ostream& log) {
  validate(cfg);
  const auto runs = run_seeds(cfg.experiment, cfg.seed_list(), threads);
  write_run_outputs(cfg, cfg.out, runs);
  log << "run " << to_string(cfg.experiment.policy) << " C=" << cfg.experiment.C << ": " << runs.size()
      << " seed(s), " << cfg.experiment.rounds << " rounds -> " << cfg.out << " (config "
      << config_hash(cfg.experiment).substr(0, 12) << ")\n";
}

struct SweepCell {
  std::string name;
  RunConfig config;
};

inline std::string cell_name(const ExperimentConfig& e) {
  return std::string(to_string(e.policy)) + "_c" + std::to_string(e.C) + "_pre" + (e.pretrain ? "on" : "off") +
         "_noise" + fixed6(e.noise).substr(0, 4);
}

/// Cartesian product of the sweep axes. Axes that are not listed keep the
/// base value. Cells that fail validation are reported in `skipped`.
inline std::vector<SweepCell> sweep_cells(const RunConfig& cfg, std::vector<std::string>& skipped) {
  if (!cfg.sweep) throw ConfigError("sweep needs a 'sweep:' section listing at least one axis");
  const auto& axes = *cfg.sweep;
  const auto& e = cfg.experiment;
  const auto policies = axes.policies.empty() ? std::vector<PolicyTag>{e.policy} : axes.policies;
  const auto caps = axes.capacities.empty() ? std::vector<int>{e.C} : axes.capacities;
  const auto pre = axes.pretrain.empty() ? std::vector<bool>{e.pretrain} : axes.pretrain;
  const auto noise = axes.noise.empty() ? std::vector<double>{e.noise} : axes.noise;

  std::vector<SweepCell> cells;
  for (auto p : policies) {
    for (int c : caps) {
      for (bool pt : pre) {
        for (double nz : noise) {
          RunConfig cell = cfg;
          cell.sweep.reset();
          cell.experiment.policy = p;
          cell.experiment.C = c;
          cell.experiment.pretrain = pt;
          cell.experiment.noise = nz;
          const auto name = cell_name(cell.experiment);
          try {
            validate(cell);
          } catch (const ConfigurationError& ex) {
            skipped.push_back(name + ": " + ex.what());
            continue;
          }
          cell.out = (fs::path(cfg.out) / name).string();
          cells.push_back({name, std::move(cell)});
        }
      }
    }
  }
  return cells;
}

inline const char* kSummaryHeader =
    "cell,policy,c,pretrain,noise,rounds,final_alacc_test_mean,final_alacc_test_ci95,final_ensacc_test_mean,"
    "final_ensacc_test_ci95,best_alacc_test_mean,best_alacc_test_round,best_ensacc_test_mean,best_ensacc_test_round";

inline void cmd_sweep(const RunConfig& cfg, int threads, std::ostream& log) {
  if (cfg.seeds < 2) throw ConfigError("sweep needs at least 2 seeds for confidence intervals");
  std::vector<std::string> skipped;
  const auto cells = sweep_cells(cfg, skipped);
  for (const auto& s : skipped) log << "skipping cell " << s << "\n";
  if (cells.empty()) throw ConfigError("sweep has no valid cells");

  // Every (cell, seed) pair is an independent task.
  const auto seeds = cfg.seed_list();
  std::vector<std::vector<std::vector<MetricsRecord>>> results(cells.size(),
                                                                std::vector<std::vector<MetricsRecord>>(seeds.size()));
  parallel_for(cells.size() * seeds.size(), threads, [&](std::size_t task) {
    const auto c = task / seeds.size();
    const auto s = task % seeds.size();
    ExperimentConfig e = cells[c].config.experiment;
    e.master_seed = seeds[s];
    results[c][s] = run_experiment(e, 1).records;
  });

  std::ostringstream summary;
  summary << kSummaryHeader << "\n";
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto& cell = cells[c];
    const auto agg = write_run_outputs(cell.config, cell.config.out, results[c]);
    const auto& al = agg.get("alacc_test");
    const auto& en = agg.get("ensacc_test");
    const auto best_al = static_cast<std::size_t>(std::max_element(al.mean.begin(), al.mean.end()) - al.mean.begin());
    const auto best_en = static_cast<std::size_t>(std::max_element(en.mean.begin(), en.mean.end()) - en.mean.begin());
    const auto& e = cell.config.experiment;
    summary << cell.name << "," << to_string(e.policy) << "," << e.C << "," << (e.pretrain ? "on" : "off") << ","
            << fixed6(e.noise) << "," << e.rounds << "," << fixed6(al.mean.back()) << "," << fixed6(al.ci95.back())
            << "," << fixed6(en.mean.back()) << "," << fixed6(en.ci95.back()) << "," << fixed6(al.mean[best_al]) << ","
            << agg.rounds[best_al] << "," << fixed6(en.mean[best_en]) << "," << agg.rounds[best_en] << "\n";
  }
  write_atomic(fs::path(cfg.out) / "summary.csv", summary.str());
  log << "sweep: " << cells.size() << " cell(s), " << skipped.size() << " skipped -> " << cfg.out << "\n";
}

inline const char* kDisagreementHeader = "epoch,both_correct,at_least_one_correct,n,acc_a,acc_b";

/// Two independently initialized models trained identically on the true
/// labels; one CSV row per epoch.
inline void cmd_disagree(const RunConfig& cfg, int epochs, std::ostream& log) {
  validate(cfg);
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  const auto& e = cfg.experiment;
  const auto data = make_datasets(e.data, cfg.seed_base);
  ExperimentConfig seeded = e;
  seeded.master_seed = cfg.seed_base;
  const auto curve = disagreement_curve(model_spec_for(seeded, data.train), data.train, data.test, e.hp, epochs,
                                        cfg.seed_base);
  std::ostringstream os;
  os << kDisagreementHeader << "\n";
  for (const auto& r : curve) {
    os << r.epoch << "," << r.stats.both_correct << "," << r.stats.at_least_one_correct << "," << r.stats.n << ","
       << fixed6(r.acc_a) << "," << fixed6(r.acc_b) << "\n";
  }
  write_atomic(fs::path(cfg.out) / "disagreement.csv", os.str());
  log << "disagree: " << epochs << " epochs -> " << (fs::path(cfg.out) / "disagreement.csv").string() << "\n";
}

}  // namespace nkdiff::cli
