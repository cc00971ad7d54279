// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stressdet/model.hpp"
#include "stressdet/parallel.hpp"

namespace stressdet {

/// One (stress pattern, acoustics, text) triplet. The label is the
/// realized pattern; canonical lives in the alignment.
struct TrainingExample {
  WordAlignment alignment;
  ProsodicFeatures features;
  StressPattern label;
  Source source = Source::human;
};

/// Words sharing a syllable count, ordered by frame count so batches pad
/// minimally.
struct Bucket {
  int syllable_count = 0;
  int max_frames = 0;
  std::vector<int> members;  // example indices, sorted by frame count
};

struct TrainConfig {
  double learning_rate = 0.1;
  int batch_size = 20;
  int epochs = 60;
  std::uint64_t seed = 0;
  int patience = 10;          // early stopping on validation loss
  double val_fraction = 0.15; // of human speakers, split speaker-disjoint
  Exec exec = Exec::parallel;
};

/// A materialized batch: inputs zero-padded to the batch maxima, padding
/// masked out of the attention softmax via the valid_* lengths.
struct Batch {
  std::vector<ModelInput> inputs;
  std::vector<StressPattern> labels;
  std::vector<int> example_indices;
};

struct LossResult {
  double loss = 0.0;                     // mean over unmasked syllables
  std::vector<double> per_example;      // per-example means
  bool clamped = false;                 // a probability hit the 1e-12 floor
};

/// Masked negative log-likelihood. masks may be empty (all syllables
/// count); otherwise mask[e][k] == 0 drops syllable k of example e.
LossResult nll_loss(const std::vector<Eigen::MatrixXd>& posteriors,
                    const std::vector<StressPattern>& labels,
                    const std::vector<std::vector<std::uint8_t>>& masks = {});

struct BatchGradients {
  ModelParameters grads;
  double loss = 0.0;
  std::vector<double> per_example_loss;
};

/// Exact gradients of the batch loss. Per-example work runs under the
/// execution policy with a fixed-order reduction, so results are bitwise
/// independent of the thread count. Dropout masks derive from `seed`.
/// Throws (naming the tensor) if any gradient turns non-finite.
BatchGradients compute_gradients(const Batch& batch,
                                 const ModelParameters& params,
                                 const ModelConfig& config, std::uint64_t seed,
                                 Exec exec = Exec::parallel);

/// Plain SGD: w <- w - lr * g.
void sgd_step(ModelParameters& params, const ModelParameters& grads,
              double learning_rate);

/// Groups examples by syllable count, orders by frame count inside each
/// bucket, and cuts batches of at most batch_size from one bucket each.
std::vector<Bucket> make_buckets(const std::vector<TrainingExample>& examples,
                                 int batch_size,
                                 std::vector<std::vector<int>>* schedule = nullptr);

/// Materializes padded batches following the make_buckets schedule.
std::vector<Batch> build_batches(const std::vector<TrainingExample>& examples,
                                 int batch_size);

struct LossLogRow {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  ModelParameters params;  // best-validation-loss parameters
  std::vector<LossLogRow> loss_log;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  std::vector<std::string> val_speakers;
};

/// Bucketed SGD over mixed human/synthetic triplets. Splits validation
/// speakers out of the human portion (synthetic words always train),
/// early-stops on validation loss, and is deterministic given the seed.
TrainResult train(const std::vector<TrainingExample>& examples,
                  const TrainConfig& config, const ModelConfig& model_config);

/// Mean eval-mode loss over a set of examples (no dropout).
double evaluate_loss(const std::vector<TrainingExample>& examples,
                     const ModelParameters& params, const ModelConfig& config,
                     Exec exec = Exec::parallel);

void write_loss_log(const std::vector<LossLogRow>& log, const std::string& path);

// ---- training manifest ----

struct ManifestEntry {
  std::string alignment_path;
  std::string feature_path;
  Source source = Source::human;
  std::string split = "train";  // train | test
};

struct Manifest {
  std::vector<ManifestEntry> entries;
};

Manifest read_manifest(const std::string& path);
void write_manifest(const Manifest& manifest, const std::string& path);

/// Loads and joins alignment/feature records (by uid) for entries whose
/// split matches; empty filter loads everything. Paths resolve relative
/// to the manifest's directory.
std::vector<TrainingExample> load_examples(const Manifest& manifest,
                                           const std::string& manifest_path,
                                           const std::string& split_filter = "");

// ---- gradient verification ----

struct GradCheckBlock {
  std::string name;
  double max_rel_error = 0.0;
};

struct GradCheckCase {
  std::vector<GradCheckBlock> blocks;
  double max_rel_error = 0.0;
  bool train_mode = false;
  bool use_attention = true;
};

struct GradCheckResult {
  std::vector<GradCheckCase> cases;
  double max_rel_error = 0.0;
  bool passed = false;
};

/// Central finite differences (step h) against backward() on randomly
/// generated words, covering attention/baseline and dropout on/off.
GradCheckResult gradient_check(std::uint64_t seed, int cases, double h = 1e-4,
                               double tolerance = 1e-4);

}  // namespace stressdet
