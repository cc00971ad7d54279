// SPDX-License-Identifier: Apache-2.0
//
// stressdet: lexical stress error detection pipeline.
//
//   synth-corpus  render a synthetic prosody corpus from a spec file
//   extract       compute prosodic features from WAV files + alignments
//   train         fit the classifier on a manifest
//   detect        flag stress errors with a trained model
//   eval          PR curves / AUC / report for one or more models
//   gradcheck     verify analytic gradients against finite differences
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "stressdet/audio.hpp"
#include "stressdet/augmentation.hpp"
#include "stressdet/checkpoint.hpp"
#include "stressdet/eval.hpp"
#include "stressdet/training.hpp"

namespace fs = std::filesystem;
using namespace stressdet;

namespace {

TrainConfig train_config_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open train config '" + path + "'");
  nlohmann::json doc;
  in >> doc;
  TrainConfig cfg;
  const std::set<std::string> known = {"learning_rate", "batch_size", "epochs",
                                       "seed", "patience", "val_fraction"};
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!known.count(it.key())) {
      throw std::runtime_error("train config '" + path + "': unknown key '" +
                               it.key() + "'");
    }
  }
  cfg.learning_rate = doc.value("learning_rate", cfg.learning_rate);
  cfg.batch_size = doc.value("batch_size", cfg.batch_size);
  cfg.epochs = doc.value("epochs", cfg.epochs);
  cfg.seed = doc.value("seed", cfg.seed);
  cfg.patience = doc.value("patience", cfg.patience);
  cfg.val_fraction = doc.value("val_fraction", cfg.val_fraction);
  if (cfg.learning_rate <= 0.0) throw std::runtime_error("learning_rate must be > 0");
  if (cfg.batch_size < 1) throw std::runtime_error("batch_size must be >= 1");
  return cfg;
}

int cmd_synth_corpus(const std::string& spec_path, const std::string& out_dir,
                     std::optional<std::uint64_t> seed) {
  CorpusSpec spec = corpus_spec_from_json_file(spec_path);
  if (seed) spec.seed = *seed;
  const GeneratedCorpus corpus = generate_corpus(spec);
  write_corpus(corpus, out_dir);
  std::printf("%-18s %-10s %-18s %s\n", "Data set", "Speakers", "Words (unique)",
              "Stress Errors");
  char words[64];
  std::snprintf(words, sizeof(words), "%d (%d)", corpus.summary.words,
                corpus.summary.unique_words);
  std::printf("%-18s %-10d %-18s %d\n", corpus.summary.name.c_str(),
              corpus.summary.speakers, words, corpus.summary.stress_errors);
  std::printf("wrote %s/{alignments.jsonl,features.jsonl,manifest.json}\n",
              out_dir.c_str());
  return 0;
}

int cmd_extract(const std::string& wav_dir, const std::string& alignment_path,
                const std::string& out_path) {
  const std::vector<WordAlignment> alignments = read_alignment_file(alignment_path);
  std::vector<ProsodicFeatures> features;
  features.reserve(alignments.size());
  for (const auto& alignment : alignments) {
    const fs::path wav = fs::path(wav_dir) / (alignment.uid + ".wav");
    const AudioSignal audio = read_wav(wav.string());
    features.push_back(extract_features(audio, alignment));
  }
  write_feature_file(features, out_path);
  std::printf("extracted %zu feature records -> %s\n", features.size(),
              out_path.c_str());
  return 0;
}

int cmd_train(const std::string& manifest_path, const std::string& out_path,
              const std::string& config_path, const std::string& loss_log_path,
              std::optional<std::uint64_t> seed, bool no_attention) {
  TrainConfig cfg;
  if (!config_path.empty()) cfg = train_config_from_file(config_path);
  if (seed) cfg.seed = *seed;

  const Manifest manifest = read_manifest(manifest_path);
  const std::vector<TrainingExample> examples =
      load_examples(manifest, manifest_path, "train");
  if (examples.empty()) {
    throw std::runtime_error("manifest '" + manifest_path +
                             "' contains no training examples");
  }
  ModelConfig model_cfg;
  model_cfg.use_attention = !no_attention;
  const TrainResult result = train(examples, cfg, model_cfg);

  Checkpoint ckpt;
  ckpt.config = model_cfg;
  ckpt.params = result.params;
  save_checkpoint(ckpt, out_path);
  if (!loss_log_path.empty()) write_loss_log(result.loss_log, loss_log_path);
  std::printf("trained on %zu words; best validation loss %.6f at epoch %d\n",
              examples.size(), result.best_val_loss, result.best_epoch);
  std::printf("checkpoint -> %s\n", out_path.c_str());
  return 0;
}

int cmd_detect(const std::string& model_path, const std::string& manifest_path,
               double threshold, const std::string& out_path,
               const std::string& attention_csv) {
  const Checkpoint ckpt = load_checkpoint(model_path);
  const Manifest manifest = read_manifest(manifest_path);
  const std::vector<TrainingExample> examples =
      load_examples(manifest, manifest_path);
  if (examples.empty()) {
    throw std::runtime_error("manifest '" + manifest_path + "' is empty");
  }

  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write report '" + out_path + "'");
  int flagged = 0;
  bool attention_written = attention_csv.empty();
  for (const auto& ex : examples) {
    const ModelInput input = make_model_input(ex.alignment, ex.features);
    const ForwardResult res = forward(input, ckpt.params, ckpt.config);
    const DetectionResult det = detect(ex.alignment.canonical, res.posterior, threshold);
    flagged += det.flagged ? 1 : 0;
    nlohmann::json rec;
    rec["uid"] = ex.alignment.uid;
    rec["word"] = ex.alignment.word;
    rec["flagged"] = det.flagged;
    rec["word_error_score"] = det.word_error_score;
    nlohmann::json syllables = nlohmann::json::array();
    for (std::size_t k = 0; k < det.predicted.size(); ++k) {
      syllables.push_back(
          {{"canonical", static_cast<int>(ex.alignment.canonical.flags[k])},
           {"predicted", det.predicted[k]},
           {"mismatch_prob", det.mismatch_prob[k]}});
    }
    rec["syllables"] = std::move(syllables);
    out << rec.dump() << '\n';
    if (!attention_written && ckpt.config.use_attention) {
      write_attention_csv(res.frame_attention, attention_csv);
      attention_written = true;
    }
  }
  std::printf("%d of %zu words flagged at threshold %.2f -> %s\n", flagged,
              examples.size(), threshold, out_path.c_str());
  return 0;
}

int cmd_eval(const std::vector<std::string>& model_paths,
             const std::string& manifest_path, const std::string& out_dir,
             double target_recall) {
  const Manifest manifest = read_manifest(manifest_path);
  std::vector<TrainingExample> examples =
      load_examples(manifest, manifest_path, "test");
  if (examples.empty()) examples = load_examples(manifest, manifest_path);
  if (examples.empty()) {
    throw std::runtime_error("manifest '" + manifest_path + "' is empty");
  }

  std::vector<std::pair<std::string, Checkpoint>> models;
  for (const auto& path : model_paths) {
    models.emplace_back(fs::path(path).stem().string(), load_checkpoint(path));
  }
  const EvalReport report = evaluate_models(models, examples, target_recall);

  fs::create_directories(out_dir);
  std::vector<std::pair<std::string, const PRCurve*>> curves;
  for (const auto& row : report.rows) {
    write_pr_csv(row.curve, (fs::path(out_dir) / (row.name + "_pr.csv")).string());
    curves.emplace_back(row.name, &row.curve);
  }
  write_pr_svg(curves, (fs::path(out_dir) / "pr_curves.svg").string());
  write_report_text(report, (fs::path(out_dir) / "report.txt").string());
  write_report_json(report, (fs::path(out_dir) / "report.json").string());
  std::fputs(report_to_text(report).c_str(), stdout);
  std::printf("report -> %s\n", out_dir.c_str());
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, int cases) {
  const GradCheckResult result = gradient_check(seed, cases);
  std::printf("%-14s %-10s %-11s %s\n", "tensor", "dropout", "attention",
              "max rel err");
  for (const auto& check : result.cases) {
    for (const auto& block : check.blocks) {
      std::printf("%-14s %-10s %-11s %.3e\n", block.name.c_str(),
                  check.train_mode ? "on" : "off",
                  check.use_attention ? "yes" : "no", block.max_rel_error);
    }
  }
  std::printf("max relative error over %d cases: %.3e -> %s\n", cases,
              result.max_rel_error, result.passed ? "PASS" : "FAIL");
  return result.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lexical stress error detection pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // --seed may appear before or after the subcommand

  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "Override the seed of the chosen subcommand");

  auto* synth = app.add_subcommand("synth-corpus",
                                   "Render a synthetic prosody corpus");
  std::string spec_path, out_dir;
  synth->add_option("--spec", spec_path, "Corpus spec JSON")->required();
  synth->add_option("--out", out_dir, "Output directory")->required();

  auto* extract = app.add_subcommand("extract", "Extract prosodic features");
  std::string wav_dir, alignment_path, feature_out;
  extract->add_option("--wav-dir", wav_dir, "Directory with <uid>.wav files")->required();
  extract->add_option("--alignments", alignment_path, "Alignment JSONL file")->required();
  extract->add_option("--out", feature_out, "Output feature JSONL file")->required();

  auto* train_cmd = app.add_subcommand("train", "Train the classifier");
  std::string manifest_path, checkpoint_out, train_config_path, loss_log_path;
  bool no_attention = false;
  train_cmd->add_option("--manifest", manifest_path, "Training manifest")->required();
  train_cmd->add_option("--out", checkpoint_out, "Checkpoint path")->required();
  train_cmd->add_option("--config", train_config_path, "Train config JSON");
  train_cmd->add_option("--loss-log", loss_log_path, "Loss log CSV path");
  train_cmd->add_flag("--no-attention", no_attention,
                      "Nucleus-mean baseline instead of attention pooling");

  auto* detect_cmd = app.add_subcommand("detect", "Flag stress errors");
  std::string model_path, detect_manifest, detect_out, attention_csv;
  double threshold = 0.5;
  detect_cmd->add_option("--model", model_path, "Checkpoint")->required();
  detect_cmd->add_option("--manifest", detect_manifest, "Manifest of words")->required();
  detect_cmd->add_option("--threshold", threshold, "Flagging threshold");
  detect_cmd->add_option("--out", detect_out, "Detection report JSONL")->required();
  detect_cmd->add_option("--attention-csv", attention_csv,
                         "Dump the first word's frame-attention matrix");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate trained models");
  std::vector<std::string> model_paths;
  std::string eval_manifest, eval_out;
  double target_recall = 0.5;
  eval_cmd->add_option("--models", model_paths, "Checkpoints")->required()->delimiter(',');
  eval_cmd->add_option("--manifest", eval_manifest, "Test manifest")->required();
  eval_cmd->add_option("--out", eval_out, "Output directory")->required();
  eval_cmd->add_option("--target-recall", target_recall, "Recall target");

  auto* gradcheck_cmd =
      app.add_subcommand("gradcheck", "Finite-difference gradient check");
  int cases = 10;
  gradcheck_cmd->add_option("--cases", cases, "Number of random instances");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth_corpus(spec_path, out_dir, seed);
    if (*extract) return cmd_extract(wav_dir, alignment_path, feature_out);
    if (*train_cmd) {
      return cmd_train(manifest_path, checkpoint_out, train_config_path,
                       loss_log_path, seed, no_attention);
    }
    if (*detect_cmd) {
      return cmd_detect(model_path, detect_manifest, threshold, detect_out,
                        attention_csv);
    }
    if (*eval_cmd) {
      return cmd_eval(model_paths, eval_manifest, eval_out, target_recall);
    }
    if (*gradcheck_cmd) return cmd_gradcheck(seed.value_or(2025), cases);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
