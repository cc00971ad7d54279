// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance suite. Each criterion prints one PASS/FAIL line;
// the exit code is the number of failures.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "stressdet/audio.hpp"
#include "stressdet/augmentation.hpp"
#include "stressdet/checkpoint.hpp"
#include "stressdet/eval.hpp"
#include "stressdet/rng.hpp"
#include "stressdet/training.hpp"
#include "support/instances.hpp"
#include "support/naive_model.hpp"
#include "support/oracles.hpp"
#include "support/tempdir.hpp"

using namespace stressdet;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion,
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// ---- criterion 1: gradient correctness ----
void criterion_gradients() {
  const auto start = Clock::now();
  const GradCheckResult result = gradient_check(8181, 10);
  const double elapsed = seconds_since(start);
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "analytic vs central differences, 10 cases, max rel err "
                "%.3e (tol 1e-4), %.1f s",
                result.max_rel_error, elapsed);
  report(1, result.passed && elapsed < 60.0, detail);
}

// ---- criterion 2: forward-pass oracle equivalence ----
void criterion_forward_oracle() {
  double max_diff = 0.0;
  double max_row_sum_err = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ModelConfig cfg;
    cfg.use_attention = (seed % 5) != 4;
    const ModelParameters params = init_parameters(cfg, mix_seed(606, seed));
    const ModelInput input = testing_support::random_input(8200 + seed);
    const ForwardResult lib = forward(input, params, cfg);
    const naive::Result ref = naive::forward(input, params, cfg);
    for (int k = 0; k < lib.posterior.rows(); ++k) {
      for (int c = 0; c < 2; ++c) {
        max_diff = std::max(max_diff,
                            std::abs(lib.posterior(k, c) -
                                     ref.posterior[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)]));
      }
      max_row_sum_err =
          std::max(max_row_sum_err, std::abs(lib.posterior.row(k).sum() - 1.0));
    }
    if (cfg.use_attention) {
      for (int k = 0; k < lib.frame_attention.rows(); ++k) {
        for (int t = 0; t < lib.frame_attention.cols(); ++t) {
          max_diff = std::max(
              max_diff,
              std::abs(lib.frame_attention(k, t) -
                       ref.frame_attention[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)]));
        }
        max_row_sum_err = std::max(max_row_sum_err,
                                   std::abs(lib.frame_attention.row(k).sum() - 1.0));
        max_row_sum_err = std::max(max_row_sum_err,
                                   std::abs(lib.phone_attention.row(k).sum() - 1.0));
      }
    }
  }
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "20 seeded instances vs naive reimplementation, max |diff| "
                "%.2e (tol 1e-9), max row-sum err %.2e (tol 1e-6)",
                max_diff, max_row_sum_err);
  report(2, max_diff <= 1e-9 && max_row_sum_err <= 1e-6, detail);
}

// ---- criterion 3: attention micro-check ----
void criterion_attention_example() {
  Eigen::MatrixXd q(1, 2), k(2, 2), v(2, 1);
  q << 1.0, 0.0;
  k << 1.0, 0.0, 0.0, 1.0;
  v << 2.0, 4.0;
  const AttentionResult res = dot_product_attention(q, k, v);
  const double w0 = std::abs(res.weights(0, 0) - 0.6698);
  const double w1 = std::abs(res.weights(0, 1) - 0.3302);
  const double out = std::abs(res.output(0, 0) - 2.6604);
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "hand-derived 2x2 example: weight errs %.2e / %.2e, output "
                "err %.2e (tol 1e-4)",
                w0, w1, out);
  report(3, w0 <= 1e-4 && w1 <= 1e-4 && out <= 1e-4, detail);
}

// ---- criterion 4: DSP accuracy ----
void criterion_dsp() {
  double max_f0_err = 0.0;
  bool all_voiced = true;
  for (int freq = 75; freq <= 500; freq += 5) {
    AudioSignal tone;
    tone.samples.resize(4800);  // 0.3 s
    for (std::size_t i = 0; i < tone.samples.size(); ++i) {
      tone.samples[i] =
          0.7 * std::sin(2.0 * M_PI * freq * static_cast<double>(i) / 16000.0);
    }
    const FrameGrid grid = word_frame_grid(0.0, 0.3);
    const PitchTrack track = compute_f0(tone, grid);
    for (int i = 3; i < grid.frame_count - 3; ++i) {
      if (!track.voiced[static_cast<std::size_t>(i)]) {
        all_voiced = false;
        continue;
      }
      max_f0_err = std::max(
          max_f0_err, std::abs(track.f0_hz[static_cast<std::size_t>(i)] - freq));
    }
  }

  // Intensity shift-equivariance.
  auto engine = make_engine(404);
  std::uniform_real_distribution<double> amp(-0.25, 0.25);
  AudioSignal noise;
  noise.samples.resize(9600);
  for (auto& s : noise.samples) s = amp(engine);
  const FrameGrid grid = word_frame_grid(0.0, 0.6);
  const std::vector<double> base = compute_intensity(noise, grid);
  double max_int_err = 0.0;
  for (double gain : {0.5, 2.0, 0.25}) {
    AudioSignal scaled = noise;
    for (auto& s : scaled.samples) s *= gain;
    const std::vector<double> shifted = compute_intensity(scaled, grid);
    for (std::size_t i = 0; i < base.size(); ++i) {
      if (base[i] <= 0.0 || shifted[i] <= 0.0) continue;
      max_int_err = std::max(
          max_int_err, std::abs(shifted[i] - base[i] - 20.0 * std::log10(gain)));
    }
  }

  // Interpolation kills zeros whenever one voiced frame exists.
  bool no_zeros = true;
  std::uniform_int_distribution<int> len(1, 80);
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_real_distribution<double> hz(70.0, 400.0);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = len(engine);
    std::vector<double> f0(static_cast<std::size_t>(n), 0.0);
    std::vector<std::uint8_t> voiced(static_cast<std::size_t>(n), 0);
    voiced[static_cast<std::size_t>(trial % n)] = 1;
    f0[static_cast<std::size_t>(trial % n)] = hz(engine);
    for (int i = 0; i < n; ++i) {
      if (coin(engine) && !voiced[static_cast<std::size_t>(i)]) {
        voiced[static_cast<std::size_t>(i)] = 1;
        f0[static_cast<std::size_t>(i)] = hz(engine);
      }
    }
    interpolate_unvoiced(f0, voiced);
    for (double v : f0) no_zeros = no_zeros && v > 0.0;
  }

  char detail[200];
  std::snprintf(detail, sizeof(detail),
                "tones 75-500 Hz (5 Hz grid): max F0 err %.3f Hz (tol 2); "
                "intensity equivariance err %.3f dB (tol 0.1); interpolated "
                "tracks zero-free: %s",
                max_f0_err, max_int_err, no_zeros ? "yes" : "no");
  report(4, max_f0_err <= 2.0 && all_voiced && max_int_err <= 0.1 && no_zeros,
         detail);
}

// ---- criterion 5: ratio-layer algebra ----
void criterion_ratio_algebra() {
  auto engine = make_engine(505);
  std::uniform_real_distribution<double> value(0.02, 3.0);
  std::uniform_real_distribution<double> gain_dist(0.1, 20.0);
  std::uniform_int_distribution<int> rows(2, 6);
  double max_err = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int k = rows(engine);
    Eigen::MatrixXd s(k, 3);
    for (int r = 0; r < k; ++r) {
      for (int c = 0; c < 3; ++c) s(r, c) = value(engine);
    }
    const double gain = gain_dist(engine);
    const Eigen::MatrixXd base = differential_bidirectional(s);
    const Eigen::MatrixXd scaled = differential_bidirectional(gain * s);
    for (int r = 0; r < k; ++r) {
      for (int c = 3; c < 9; ++c) {
        max_err = std::max(max_err, std::abs(scaled(r, c) - base(r, c)));
      }
    }
  }
  // Uniform input: every ratio column exactly 1.
  Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(5, 3, 0.77);
  const Eigen::MatrixXd ones = differential_bidirectional(uniform);
  for (int r = 0; r < 5; ++r) {
    for (int c = 3; c < 9; ++c) {
      max_err = std::max(max_err, std::abs(ones(r, c) - 1.0));
    }
  }
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "scale invariance + uniform-input identity, max err %.2e "
                "(tol 1e-12)",
                max_err);
  report(5, max_err <= 1e-12, detail);
}

// ---- criterion 6: scaled ablation reproduction ----
void criterion_ablation() {
  const auto start = Clock::now();

  AblationSpec spec;
  spec.train_human.name = "train_human";
  spec.train_human.source = Source::human;
  spec.train_human.speakers = 40;
  spec.train_human.total_words = 4000;
  spec.train_human.error_rate = 0.05;
  spec.train_human.seed = 1111;

  spec.train_tts.name = "train_tts";
  spec.train_tts.source = Source::synthetic;
  spec.train_tts.speakers = 1;
  spec.train_tts.total_words = 2000;
  spec.train_tts.error_rate = 0.5;
  spec.train_tts.seed = 2222;
  SpeakerProfile voice;
  voice.base_f0_hz = 185.0;
  voice.rate = 1.0;
  voice.base_intensity_db = 66.0;
  voice.jitter = 0.10;
  spec.train_tts.fixed_speaker = voice;

  spec.test.name = "test_human";
  spec.test.source = Source::human;
  spec.test.speakers = 20;
  spec.test.total_words = 2000;
  spec.test.error_rate = 0.09;
  spec.test.seed = 3333;

  // Plain SGD at lr 0.1 spends a long stretch on the symmetric plateau
  // where both attentions pool uniformly; the epoch budget must outlast it,
  // so early stopping is effectively disabled here.
  spec.train_config.seed = 4242;
  spec.train_config.epochs = 500;
  spec.train_config.patience = 500;
  spec.target_recall = 0.5;

  const AblationResult result = run_ablation(spec);
  const double elapsed = seconds_since(start);

  auto row = [&](const std::string& name) -> const ModelEvalRow& {
    for (const auto& r : result.report.rows) {
      if (r.name == name) return r;
    }
    throw std::runtime_error("missing ablation row " + name);
  };
  const ModelEvalRow& att_tts = row("Att_TTS");
  const ModelEvalRow& att_nottts = row("Att_NoTTS");
  const ModelEvalRow& noatt_tts = row("NoAtt_TTS");
  const ModelEvalRow& noatt_nottts = row("NoAtt_NoTTS");

  const bool ordering = att_tts.auc > att_nottts.auc &&
                        att_nottts.auc > noatt_tts.auc &&
                        att_nottts.auc > noatt_nottts.auc;
  const bool precision_floor =
      att_tts.target_reached && att_tts.precision >= 0.90;
  const bool auc_gap = att_tts.auc - noatt_tts.auc >= 0.10 &&
                       att_tts.auc - noatt_nottts.auc >= 0.10;
  const bool in_time = elapsed <= 15.0 * 60.0;

  std::printf("  corpus: train %d words / %d errors, tts %d / %d, test %d / %d\n",
              result.train_human_summary.words,
              result.train_human_summary.stress_errors,
              result.train_tts_summary.words,
              result.train_tts_summary.stress_errors,
              result.test_summary.words, result.test_summary.stress_errors);
  for (const auto& r : result.report.rows) {
    if (r.target_reached) {
      std::printf("  %-12s AUC %.4f  precision %.4f at recall %.4f\n",
                  r.name.c_str(), r.auc, r.precision, r.recall);
    } else {
      std::printf("  %-12s AUC %.4f  (recall target unmet)\n", r.name.c_str(),
                  r.auc);
    }
  }

  char detail[240];
  std::snprintf(detail, sizeof(detail),
                "ordering %s, Att_TTS precision %.3f >= 0.90 %s, AUC gap vs "
                "NoAtt %.3f/%.3f >= 0.10 %s, runtime %.0f s <= 900 s %s",
                ordering ? "ok" : "VIOLATED",
                att_tts.target_reached ? att_tts.precision : 0.0,
                precision_floor ? "ok" : "VIOLATED",
                att_tts.auc - noatt_tts.auc, att_tts.auc - noatt_nottts.auc,
                auc_gap ? "ok" : "VIOLATED", elapsed, in_time ? "ok" : "OVER");
  report(6, ordering && precision_floor && auc_gap && in_time, detail);
}

// ---- criterion 7: evaluation correctness ----
void criterion_eval_correctness() {
  auto engine = make_engine(707);
  std::uniform_int_distribution<int> size(2, 12);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> grid(1, 5);
  double max_pr_err = 0.0;
  int checked = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const int n = size(engine);
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
    int pos = 0;
    for (int i = 0; i < n; ++i) {
      scores.push_back(grid(engine) / 5.0);
      labels.push_back(unit(engine) < 0.4 ? 1 : 0);
      pos += labels.back();
    }
    if (pos == 0 || pos == n) continue;
    ++checked;
    const PRCurve curve = pr_curve(scores, labels);
    const auto expected = oracles::enumerate_pr_points(scores, labels);
    if (curve.points.size() != expected.size()) {
      max_pr_err = 1.0;
      continue;
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
      max_pr_err = std::max(max_pr_err,
                            std::abs(curve.points[i].precision - expected[i].precision));
      max_pr_err = std::max(max_pr_err,
                            std::abs(curve.points[i].recall - expected[i].recall));
    }
  }

  double max_ci_err = 0.0;
  const struct {
    int s, n;
  } cases[] = {{93, 98}, {0, 12}, {12, 12}, {1, 30}, {189, 2108}, {47, 95}};
  for (const auto& c : cases) {
    const Interval ci = binomial_ci(c.s, c.n, 0.95);
    max_ci_err = std::max(max_ci_err,
                          std::abs(ci.lo - oracles::cp_lower_by_cdf(c.s, c.n, 0.05)));
    max_ci_err = std::max(max_ci_err,
                          std::abs(ci.hi - oracles::cp_upper_by_cdf(c.s, c.n, 0.05)));
  }

  char detail[200];
  std::snprintf(detail, sizeof(detail),
                "PR vs exhaustive enumeration on %d random sets (max err "
                "%.2e); Clopper-Pearson vs CDF-bisection oracle max err %.2e "
                "(tol 1e-6)",
                checked, max_pr_err, max_ci_err);
  report(7, max_pr_err == 0.0 && max_ci_err <= 1e-6, detail);
}

// ---- criterion 8: determinism and persistence ----
void criterion_determinism() {
  testing_support::TempDir tmp;

  CorpusSpec spec;
  spec.name = "det";
  spec.total_words = 150;
  spec.speakers = 6;
  spec.error_rate = 0.4;
  spec.seed = 808;

  // Corpus byte-identity.
  const GeneratedCorpus c1 = generate_corpus(spec);
  const GeneratedCorpus c2 = generate_corpus(spec);
  write_corpus(c1, tmp.file("c1"));
  write_corpus(c2, tmp.file("c2"));
  auto slurp = [](const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const bool corpus_identical =
      slurp(tmp.file("c1/alignments.jsonl")) == slurp(tmp.file("c2/alignments.jsonl")) &&
      slurp(tmp.file("c1/features.jsonl")) == slurp(tmp.file("c2/features.jsonl"));

  // Bitwise-identical retrains.
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 909;
  const TrainResult t1 = train(c1.examples, cfg, ModelConfig{});
  const TrainResult t2 = train(c1.examples, cfg, ModelConfig{});
  bool retrain_identical = t1.loss_log.size() == t2.loss_log.size();
  for (std::size_t i = 0; retrain_identical && i < t1.loss_log.size(); ++i) {
    retrain_identical = t1.loss_log[i].train_loss == t2.loss_log[i].train_loss &&
                        t1.loss_log[i].val_loss == t2.loss_log[i].val_loss;
  }
  {
    std::vector<const Eigen::MatrixXd*> other;
    visit_tensors(const_cast<ModelParameters&>(t2.params),
                  [&](const char*, Eigen::MatrixXd& m) { other.push_back(&m); });
    std::size_t i = 0;
    visit_tensors(const_cast<ModelParameters&>(t1.params),
                  [&](const char*, Eigen::MatrixXd& m) {
      if (!(m.array() == other[i++]->array()).all()) retrain_identical = false;
    });
  }

  // Checkpoint round-trip preserves the validation loss.
  Checkpoint ckpt;
  ckpt.config = ModelConfig{};
  ckpt.params = t1.params;
  save_checkpoint(ckpt, tmp.file("model.json"));
  const Checkpoint loaded = load_checkpoint(tmp.file("model.json"));
  const double val_before = evaluate_loss(c1.examples, ckpt.params, ckpt.config);
  const double val_after = evaluate_loss(c1.examples, loaded.params, loaded.config);
  const double roundtrip_err = std::abs(val_before - val_after);

  char detail[200];
  std::snprintf(detail, sizeof(detail),
                "corpus bytes identical: %s; retrain bitwise identical: %s; "
                "checkpoint round-trip loss err %.2e (tol 1e-9)",
                corpus_identical ? "yes" : "no",
                retrain_identical ? "yes" : "no", roundtrip_err);
  report(8, corpus_identical && retrain_identical && roundtrip_err <= 1e-9,
         detail);
}

}  // namespace

int main() {
  const auto start = Clock::now();
  criterion_gradients();
  criterion_forward_oracle();
  criterion_attention_example();
  criterion_dsp();
  criterion_ratio_algebra();
  criterion_ablation();
  criterion_eval_correctness();
  criterion_determinism();
  std::printf("%d of 8 criteria passed (%.0f s total)\n", 8 - failures,
              seconds_since(start));
  return failures;
}
