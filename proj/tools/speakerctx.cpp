/*
 * Copyright 2026 The speakerctx Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


// speakerctx: synth / train / evaluate / attribute / compare.

#include <cstdlib>
#include <exception>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "speakerctx/commands.hpp"
#include "speakerctx/text_io.hpp"

namespace {

using nlohmann::json;
using speakerctx::ErrorKind;

// A flag bound to a local plus the config-file key path it overrides.
struct Override {
  CLI::Option* option;
  std::function<void(json&)> apply;
};

template <typename T>
void add_flag(CLI::App& app, std::vector<Override>& overrides, const std::string& name, T& value,
              std::vector<std::string> path, const std::string& help) {
  CLI::Option* opt = app.add_option(name, value, help);
  overrides.push_back({opt, [&value, path](json& j) {
                         json* node = &j;
                         for (std::size_t i = 0; i + 1 < path.size(); ++i) node = &(*node)[path[i]];
                         (*node)[path.back()] = value;
                       }});
}

struct TrainFlags {
  std::string config_file;
  std::string corpus, prompts, audio_features, strategy, pooling, aggregation, output_dir;
  int vocab_size = 0, embed_dim = 0, hidden_dim = 0, audio_context_dim = 0, max_length = 0;
  double learning_rate = 0, lr_decay = 0, min_lr = 0;
  int batch_size = 0, max_epochs = 0, patience = 0, plateau_patience = 0;
  int attribution_steps = 0, jobs = 0;
  std::uint64_t seed = 0;
  std::vector<Override> overrides;
};

void add_train_flags(CLI::App& app, TrainFlags& f) {
  auto& o = f.overrides;
  app.add_option("--config", f.config_file, "JSON run config; explicit flags override it")
      ->check(CLI::ExistingFile);
  add_flag(app, o, "--corpus", f.corpus, {"corpus_path"}, "corpus TSV");
  add_flag(app, o, "--prompts", f.prompts, {"prompt_spec_path"}, "prompt spec TSV");
  add_flag(app, o, "--audio-features", f.audio_features, {"audio_features_path"},
           "external audio feature TSV");
  add_flag(app, o, "--strategy", f.strategy, {"strategy"}, "baseline | one-stage | two-stage");
  add_flag(app, o, "--vocab-size", f.vocab_size, {"encoder", "vocab_size"}, "0 derives from corpus");
  add_flag(app, o, "--embed-dim", f.embed_dim, {"encoder", "embed_dim"}, "embedding width");
  add_flag(app, o, "--hidden-dim", f.hidden_dim, {"encoder", "hidden_dim"}, "LSTM width per direction");
  add_flag(app, o, "--pooling", f.pooling, {"encoder", "pooling"}, "attention | last");
  add_flag(app, o, "--audio-context-dim", f.audio_context_dim, {"encoder", "audio_context_dim"},
           "audio branch width, 0 for text only");
  add_flag(app, o, "--max-length", f.max_length, {"encoder", "max_length"}, "token truncation length");
  add_flag(app, o, "--lr", f.learning_rate, {"train", "learning_rate"}, "Adam learning rate");
  add_flag(app, o, "--batch-size", f.batch_size, {"train", "batch_size"}, "mini-batch size");
  add_flag(app, o, "--max-epochs", f.max_epochs, {"train", "max_epochs"}, "epoch cap");
  add_flag(app, o, "--patience", f.patience, {"train", "early_stop_patience"}, "early stopping patience");
  add_flag(app, o, "--plateau-patience", f.plateau_patience, {"train", "plateau_patience"},
           "epochs before the learning rate decays");
  add_flag(app, o, "--lr-decay", f.lr_decay, {"train", "lr_decay_factor"}, "plateau decay factor");
  add_flag(app, o, "--min-lr", f.min_lr, {"train", "min_lr"}, "learning rate floor");
  add_flag(app, o, "--attribution-steps", f.attribution_steps, {"attribution", "num_steps"},
           "integrated-gradient steps");
  add_flag(app, o, "--aggregation", f.aggregation, {"attribution", "aggregation"}, "signed | absolute");
  add_flag(app, o, "--seed", f.seed, {"seed"}, "master seed");
  add_flag(app, o, "--output-dir", f.output_dir, {"output_dir"}, "run directory");
  add_flag(app, o, "--jobs", f.jobs, {"jobs"}, "worker threads for independent trainings");
}

speakerctx::RunConfig resolve_config(const TrainFlags& f) {
  json j = json::object();
  if (!f.config_file.empty()) {
    try {
      j = json::parse(speakerctx::read_text_file(f.config_file));
    } catch (const json::exception& e) {
      speakerctx::fail(ErrorKind::kFormat, f.config_file + ": " + e.what());
    }
  }
  for (const Override& o : f.overrides) {
    if (o.option->count() > 0) o.apply(j);
  }
  return speakerctx::RunConfig::from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speaker-conditioned proficiency scoring"};
  app.require_subcommand(1);

  speakerctx::SynthOptions synth;
  std::string synth_out = "corpus";
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus");
  synth_cmd->add_option("--speakers", synth.num_speakers, "number of speakers");
  synth_cmd->add_option("--prompts", synth.num_prompts, "number of prompts (1..6)");
  synth_cmd->add_option("--rho", synth.ability_correlation, "ability correlation");
  synth_cmd->add_option("--rater-noise", synth.rater_noise, "second-rater noise");
  synth_cmd->add_option("--audio-dim", synth.audio_dim, "audio feature width");
  synth_cmd->add_option("--seed", synth.seed, "generator seed");
  synth_cmd->add_option("--output-dir", synth_out, "output directory");

  TrainFlags train;
  auto* train_cmd = app.add_subcommand("train", "train every prompt model of a strategy");
  add_train_flags(*train_cmd, train);

  std::string manifest, split = "test";
  auto* eval_cmd = app.add_subcommand("evaluate", "score a trained run");
  eval_cmd->add_option("--manifest", manifest, "run manifest")->required();
  eval_cmd->add_option("--split", split, "validation | test");

  std::string kind = "all";
  bool normalize = false;
  auto* attr_cmd = app.add_subcommand("attribute", "integrated-gradient attributions");
  attr_cmd->add_option("--manifest", manifest, "run manifest")->required();
  attr_cmd->add_option("--kind", kind, "prompt | modality | all");
  attr_cmd->add_flag("--normalize", normalize, "row-normalize by absolute sum");

  std::string manifest_b, compare_out = "compare.json";
  auto* cmp_cmd = app.add_subcommand("compare", "deltas of run b relative to run a");
  cmp_cmd->add_option("--a", manifest, "reference manifest")->required();
  cmp_cmd->add_option("--b", manifest_b, "candidate manifest")->required();
  cmp_cmd->add_option("--split", split, "validation | test");
  cmp_cmd->add_option("--output", compare_out, "delta report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "speakerctx-error[usage]: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*synth_cmd) {
      synth.output_dir = synth_out;
      if (const char* root = std::getenv(speakerctx::kOutputRootEnv);
          root && *root && synth.output_dir.is_relative()) {
        synth.output_dir = std::filesystem::path(root) / synth.output_dir;
      }
      speakerctx::cmd_synth(synth, std::cout);
    } else if (*train_cmd) {
      speakerctx::cmd_train(resolve_config(train), std::cout);
    } else if (*eval_cmd) {
      speakerctx::cmd_evaluate(manifest, speakerctx::parse_split(split), std::cout);
    } else if (*attr_cmd) {
      speakerctx::cmd_attribute(manifest, speakerctx::parse_attribution_kind(kind), normalize,
                                std::cout);
    } else if (*cmp_cmd) {
      speakerctx::cmd_compare(manifest, manifest_b, speakerctx::parse_split(split), compare_out,
                              std::cout);
    }
  } catch (const speakerctx::Error& e) {
    std::cerr << "speakerctx-error[" << speakerctx::error_kind_name(e.kind()) << "]: " << e.what()
              << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "speakerctx-error[internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
