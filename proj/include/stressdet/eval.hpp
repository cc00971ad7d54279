// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stressdet/augmentation.hpp"
#include "stressdet/checkpoint.hpp"
#include "stressdet/model.hpp"
#include "stressdet/training.hpp"

namespace stressdet {

struct DetectionResult {
  std::string uid;
  std::string word;
  std::vector<int> predicted;           // argmax class per syllable
  std::vector<double> mismatch_prob;    // posterior of the non-canonical class
  double word_error_score = 0.0;        // max mismatch probability
  bool flagged = false;
};

/// Flags a word when some syllable's argmax disagrees with canonical and
/// that syllable's mismatch probability exceeds the threshold.
DetectionResult detect(const StressPattern& canonical,
                       const Eigen::MatrixXd& posterior, double threshold);

struct PRPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

/// Points in sweep order (threshold descending, recall non-decreasing);
/// auc by trapezoidal integration over recall, anchored at recall 0 with
/// the strictest threshold's precision.
struct PRCurve {
  std::vector<PRPoint> points;
  double auc = 0.0;
};

/// Threshold sweep over every distinct score; equal scores are processed
/// atomically. Requires at least one positive and one negative label.
PRCurve pr_curve(const std::vector<double>& scores,
                 const std::vector<std::uint8_t>& labels);

/// The curve point with the smallest recall >= target (highest precision
/// among ties). Throws when no point reaches the target.
PRPoint precision_at_recall(const PRCurve& curve, double target_recall);

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Clopper-Pearson exact interval via beta-quantile bisection.
Interval binomial_ci(int successes, int trials, double level = 0.95);

/// Regularized incomplete beta I_x(a, b) (continued-fraction evaluation).
double regularized_incomplete_beta(double a, double b, double x);

/// Per-syllable nucleus means of the scaled features plus nucleus duration;
/// the fixed-region representation the no-attention baseline feeds to the
/// same differential layer and head.
Eigen::MatrixXd nucleus_mean_baseline(const ProsodicFeatures& features,
                                      const WordAlignment& alignment);

struct ModelEvalRow {
  std::string name;
  PRCurve curve;
  double auc = 0.0;
  bool target_reached = false;
  double precision = 0.0;  // at the smallest achieved recall >= target
  double recall = 0.0;
  Interval precision_ci;
  Interval recall_ci;
  double operating_threshold = 0.0;
};

struct EvalReport {
  std::vector<ModelEvalRow> rows;
  int word_count = 0;
  int error_count = 0;
  double target_recall = 0.5;
};

/// Scores every test word with the model (word_error_score) against the
/// ground truth "realized != canonical" and builds the PR row.
ModelEvalRow evaluate_model(const std::string& name, const ModelConfig& config,
                            const ModelParameters& params,
                            const std::vector<TrainingExample>& test_examples,
                            double target_recall = 0.5,
                            Exec exec = Exec::parallel);

EvalReport evaluate_models(
    const std::vector<std::pair<std::string, Checkpoint>>& models,
    const std::vector<TrainingExample>& test_examples,
    double target_recall = 0.5, Exec exec = Exec::parallel);

struct AblationSpec {
  CorpusSpec train_human;
  CorpusSpec train_tts;
  CorpusSpec test;
  TrainConfig train_config;
  ModelConfig model_config;  // attention on; baselines flip use_attention
  double target_recall = 0.5;
};

struct AblationResult {
  EvalReport report;
  std::map<std::string, Checkpoint> models;  // Att_TTS, Att_NoTTS, NoAtt_TTS, NoAtt_NoTTS
  CorpusSummary train_human_summary;
  CorpusSummary train_tts_summary;
  CorpusSummary test_summary;
};

/// Generates the three corpora, trains the four variants on the shared
/// training material (with/without the synthetic set) and evaluates all
/// of them on the identical held-out test list.
AblationResult run_ablation(const AblationSpec& spec, Exec exec = Exec::parallel);

// ---- renderers ----

void write_pr_csv(const PRCurve& curve, const std::string& path);
std::string report_to_text(const EvalReport& report);
void write_report_text(const EvalReport& report, const std::string& path);
void write_report_json(const EvalReport& report, const std::string& path);

/// Dependency-free SVG with one polyline per model curve.
void write_pr_svg(const std::vector<std::pair<std::string, const PRCurve*>>& curves,
                  const std::string& path);

}  // namespace stressdet
