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

// nkdiff: run knowledge-diffusion experiments and sweeps from the command line.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "nkdiff/cli/commands.hpp"

namespace {

using namespace nkdiff;
using namespace nkdiff::cli;

struct Overrides {
  std::string config;
  std::optional<std::string> policy;
  std::optional<int> n, c, rounds, seeds;
  std::optional<std::string> pretrain;
  std::optional<double> noise;
  bool random_labels = false;
  std::optional<std::string> dataset, idx_images, idx_labels;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "YAML configuration file");
  cmd->add_option("--policy", o.policy, "Grouping policy: oo, pom, rgbt, btb, eq");
  cmd->add_option("--n", o.n, "Population size N (trainees + Oracle)");
  cmd->add_option("--c", o.c, "Capacity bound C");
  cmd->add_option("--rounds", o.rounds, "Number of rounds");
  cmd->add_option("--seeds", o.seeds, "Number of seeds");
  cmd->add_option("--pretrain", o.pretrain, "Learner initialization scheme")->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--noise", o.noise, "Fraction of Oracle training labels to corrupt");
  cmd->add_flag("--random-labels", o.random_labels, "Replace every Oracle training label by a random one");
  cmd->add_option("--dataset", o.dataset, "Dataset kind")->check(CLI::IsMember({"blobs", "idx"}));
  cmd->add_option("--idx-images", o.idx_images, "IDX image file (dataset idx)");
  cmd->add_option("--idx-labels", o.idx_labels, "IDX label file (dataset idx)");
  cmd->add_option("--out", o.out, "Output directory");
}

RunConfig resolve(const Overrides& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_config(o.config);
  auto& e = cfg.experiment;
  if (o.policy) {
    const auto tag = parse_policy(*o.policy);
    if (!tag) throw ConfigError("unknown policy '" + *o.policy + "'");
    e.policy = *tag;
  }
  if (o.n) e.N = *o.n;
  if (o.c) e.C = *o.c;
  if (o.rounds) e.rounds = *o.rounds;
  if (o.seeds) cfg.seeds = *o.seeds;
  if (o.pretrain) e.pretrain = *o.pretrain == "on";
  if (o.noise) e.noise = *o.noise;
  if (o.random_labels) e.random_labels = true;
  if (o.dataset) e.data.kind = *o.dataset == "idx" ? DatasetKind::idx : DatasetKind::blobs;
  if (o.idx_images) e.data.idx_images = *o.idx_images;
  if (o.idx_labels) e.data.idx_labels = *o.idx_labels;
  if (o.out) cfg.out = *o.out;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Population training by peer teaching under a teaching-capacity bound"};
  app.require_subcommand(1);

  Overrides run_opts, sweep_opts, disagree_opts;
  int epochs = 50;
  auto* run = app.add_subcommand("run", "Run one configuration for every seed");
  add_common(run, run_opts);
  auto* sweep = app.add_subcommand("sweep", "Run the cartesian product of the config's sweep axes");
  add_common(sweep, sweep_opts);
  auto* disagree = app.add_subcommand("disagree", "Track agreement of two identically trained models");
  add_common(disagree, disagree_opts);
  disagree->add_option("--epochs", epochs, "Training epochs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  const int threads = default_threads();
  try {
    if (*run) cmd_run(resolve(run_opts), threads, std::cout);
    else if (*sweep) cmd_sweep(resolve(sweep_opts), threads, std::cout);
    else if (*disagree) cmd_disagree(resolve(disagree_opts), epochs, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ConfigurationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIoError;
  } catch (const IdxError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}
