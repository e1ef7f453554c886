/*
 * Copyright 2026 The cnnbound Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line front end: one subcommand per pipeline stage.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cnnbound/error.hpp"
#include "cnnbound/pipeline.hpp"

namespace {

void add_common(CLI::App* sub, cnnbound::RunSpec& s) {
  sub->add_option("--seed", s.seed, "Random seed");
  sub->add_option("--preset", s.preset, "Architecture preset: synthetic2 or mnist4");
  sub->add_option("--n", s.n, "Number of samples (instances for downsample-check, dimension for concentration-check)");
  sub->add_option("--len", s.len, "Sequence length (synthetic2)");
  sub->add_option("--iter", s.iter, "Copies of each inserted signature; 0 means len/1000");
  sub->add_option("--scale-s", s.scale_s, "Canvas scale s for augmented MNIST");
  sub->add_option("--data", s.data, "Dataset manifest written by gen-data");
  sub->add_option("--mnist-images", s.mnist_images, "MNIST image IDX file");
  sub->add_option("--mnist-labels", s.mnist_labels, "MNIST label IDX file");
  sub->add_option("--out", s.out, "Output file (or directory for compare)");
}

void add_analysis(CLI::App* sub, cnnbound::RunSpec& s, std::optional<double>& gamma) {
  sub->add_option("--snapshot", s.snapshot, "Snapshot manifest written by train")->required();
  sub->add_option("--variant", s.variants, "Bound variants (repeatable); default all");
  sub->add_option("--delta", s.delta, "Confidence parameter");
  auto* g = sub->add_option("--gamma", gamma, "Fixed margin");
  sub->add_option("--auto-margin", s.auto_margin, "Pick gamma as the largest margin reaching this train accuracy")
      ->excludes(g);
  sub->add_option("--exact-sigma-budget", s.exact_sigma_budget, "Max selections for exact sigma' enumeration");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Norm-based generalization bound measurements for convolutional networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(CNNBOUND_VERSION));

  cnnbound::RunSpec spec;
  std::optional<double> gamma;
  std::optional<cnnbound::Index> dim;
  std::optional<double> ratio;

  auto* gen = app.add_subcommand("gen-data", "Generate a dataset");
  add_common(gen, spec);

  auto* train = app.add_subcommand("train", "Train a preset network and save a snapshot");
  add_common(train, spec);
  train->add_option("--snapshot", spec.snapshot, "Snapshot manifest to write")->required();
  train->add_option("--lr", spec.train.learning_rate, "Adam learning rate");
  train->add_option("--weight-decay", spec.train.weight_decay, "Weight decay coefficient");
  train->add_option("--batch", spec.train.batch_size, "Mini-batch size");
  train->add_option("--epochs", spec.train.max_epochs, "Maximum epochs");
  train->add_option("--target-acc", spec.train.target_accuracy, "Stop at this train accuracy");
  train->add_option("--train-seed", spec.train.seed, "Initialization and batch-order seed");

  for (const char* name : {"measure", "bounds", "compare"}) {
    auto* sub = app.add_subcommand(name, std::string(name) == "measure" ? "Per-layer norm table"
                                         : std::string(name) == "bounds" ? "Bound comparison table"
                                                                         : "Norms, bounds and margin histograms");
    add_common(sub, spec);
    add_analysis(sub, spec, gamma);
  }

  auto* cover = app.add_subcommand("cover-check", "Build and verify L1-ball covers");
  cover->add_option("--seed", spec.seed, "Random seed");
  cover->add_option("--dim", dim, "Dimension (default: the full grid)");
  cover->add_option("--ratio", ratio, "beta / eps");
  cover->add_option("--trials", spec.trials, "Sampled points per certificate");
  cover->add_option("--out", spec.out, "Output CSV");

  auto* conc = app.add_subcommand("concentration-check", "Monte-Carlo norm concentration check");
  conc->add_option("--seed", spec.seed, "Random seed");
  conc->add_option("--n", spec.n, "Vector dimension");
  conc->add_option("--eps", spec.eps, "Deviation parameter");
  conc->add_option("--trials", spec.trials, "Number of draws");
  conc->add_option("--out", spec.out, "Output CSV");

  auto* down = app.add_subcommand("downsample-check", "Bound inputs before and after 2x downsampling");
  down->add_option("--seed", spec.seed, "Random seed");
  down->add_option("--n", spec.n, "Number of random instances");
  down->add_option("--out", spec.out, "Output CSV");

  std::string report, replay_out;
  auto* replay = app.add_subcommand("replay", "Re-run the command recorded in a report header");
  replay->add_option("report", report, "Report file with a # runspec line")->required();
  replay->add_option("--out", replay_out, "Write here instead of the recorded output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  spec.command = app.get_subcommands().front()->get_name();
  spec.gamma = gamma;
  spec.cover_dim = dim;
  spec.cover_ratio = ratio;
  try {
    if (spec.command == "replay") {
      spec = cnnbound::runspec_from_report(report);
      if (!replay_out.empty()) spec.out = replay_out;
    }
    return cnnbound::run_pipeline(spec);
  } catch (const cnnbound::ValidationError& e) {
    std::cerr << "error [" << spec.command << "]: " << e.what() << '\n';
    return 2;
  } catch (const cnnbound::NumericalError& e) {
    std::cerr << "numerical error [" << spec.command << "]: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error [" << spec.command << "]: " << e.what() << '\n';
    return 2;
  }
}
