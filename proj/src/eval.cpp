// SPDX-License-Identifier: Apache-2.0
#include "stressdet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "stressdet/rng.hpp"

namespace stressdet {

using nlohmann::json;

DetectionResult detect(const StressPattern& canonical,
                       const Eigen::MatrixXd& posterior, double threshold) {
  if (static_cast<std::size_t>(posterior.rows()) != canonical.size()) {
    throw std::invalid_argument("detect: posterior has " +
                                std::to_string(posterior.rows()) +
                                " rows, canonical pattern has " +
                                std::to_string(canonical.size()));
  }
  if (threshold < 0.0 || threshold > 1.0) {
    throw std::invalid_argument("detect: threshold outside [0, 1]");
  }
  DetectionResult res;
  res.word_error_score = 0.0;
  for (Eigen::Index k = 0; k < posterior.rows(); ++k) {
    const int canon = canonical.flags[static_cast<std::size_t>(k)] ? 1 : 0;
    const int pred = posterior(k, 1) > posterior(k, 0) ? 1 : 0;
    const double mismatch = posterior(k, 1 - canon);
    res.predicted.push_back(pred);
    res.mismatch_prob.push_back(mismatch);
    res.word_error_score = std::max(res.word_error_score, mismatch);
    if (pred != canon && mismatch > threshold) res.flagged = true;
  }
  return res;
}

PRCurve pr_curve(const std::vector<double>& scores,
                 const std::vector<std::uint8_t>& labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw std::invalid_argument("pr_curve: scores/labels length mismatch");
  }
  long npos = 0;
  for (auto l : labels) npos += (l != 0);
  const long nneg = static_cast<long>(labels.size()) - npos;
  if (npos == 0 || nneg == 0) {
    throw std::invalid_argument(
        "pr_curve: ground truth is degenerate (needs at least one positive "
        "and one negative)");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  PRCurve curve;
  long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double threshold = scores[order[i]];
    // Equal scores enter the confusion matrix atomically.
    while (i < order.size() && scores[order[i]] == threshold) {
      if (labels[order[i]]) {
        ++tp;
      } else {
        ++fp;
      }
      ++i;
    }
    PRPoint point;
    point.threshold = threshold;
    point.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    point.recall = static_cast<double>(tp) / static_cast<double>(npos);
    curve.points.push_back(point);
  }

  double auc = 0.0;
  double prev_recall = 0.0;
  double prev_precision = curve.points.front().precision;
  for (const auto& point : curve.points) {
    auc += (point.recall - prev_recall) * 0.5 * (point.precision + prev_precision);
    prev_recall = point.recall;
    prev_precision = point.precision;
  }
  curve.auc = auc;
  return curve;
}

PRPoint precision_at_recall(const PRCurve& curve, double target_recall) {
  if (curve.points.empty()) {
    throw std::invalid_argument("precision_at_recall: empty curve");
  }
  std::optional<PRPoint> best;
  for (const auto& point : curve.points) {
    if (point.recall < target_recall) continue;
    if (!best || point.recall < best->recall ||
        (point.recall == best->recall && point.precision > best->precision)) {
      best = point;
    }
  }
  if (!best) {
    throw std::runtime_error("precision_at_recall: no operating point reaches recall " +
                             std::to_string(target_recall));
  }
  return *best;
}

namespace {

// Continued fraction for the regularized incomplete beta (Lentz).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log1p(-x);
  const double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return bt * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - bt * beta_continued_fraction(b, a, 1.0 - x) / b;
}

namespace {

// Smallest x with I_x(a, b) >= q, by bisection.
double beta_quantile(double a, double b, double q) {
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (regularized_incomplete_beta(a, b, mid) < q) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-15) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

Interval binomial_ci(int successes, int trials, double level) {
  if (trials <= 0) throw std::invalid_argument("binomial_ci: trials must be > 0");
  if (successes < 0 || successes > trials) {
    throw std::invalid_argument("binomial_ci: successes outside [0, trials]");
  }
  if (level <= 0.0 || level >= 1.0) {
    throw std::invalid_argument("binomial_ci: level outside (0, 1)");
  }
  const double alpha = 1.0 - level;
  Interval ci;
  ci.lo = successes == 0
              ? 0.0
              : beta_quantile(successes, trials - successes + 1, alpha / 2.0);
  ci.hi = successes == trials
              ? 1.0
              : beta_quantile(successes + 1, trials - successes, 1.0 - alpha / 2.0);
  return ci;
}

Eigen::MatrixXd nucleus_mean_baseline(const ProsodicFeatures& features,
                                      const WordAlignment& alignment) {
  const ModelInput input = make_model_input(alignment, features);
  return nucleus_feature_matrix(input);
}

ModelEvalRow evaluate_model(const std::string& name, const ModelConfig& config,
                            const ModelParameters& params,
                            const std::vector<TrainingExample>& test_examples,
                            double target_recall, Exec exec) {
  if (test_examples.empty()) {
    throw std::invalid_argument("evaluate_model: empty test set");
  }
  std::vector<double> scores(test_examples.size(), 0.0);
  std::vector<std::uint8_t> truth(test_examples.size(), 0);
  parallel_for(exec, static_cast<std::ptrdiff_t>(test_examples.size()),
               [&](std::ptrdiff_t i) {
    const auto& ex = test_examples[static_cast<std::size_t>(i)];
    const ModelInput input = make_model_input(ex.alignment, ex.features);
    const ForwardResult res = forward(input, params, config);
    const DetectionResult det = detect(ex.alignment.canonical, res.posterior, 0.5);
    scores[static_cast<std::size_t>(i)] = det.word_error_score;
    truth[static_cast<std::size_t>(i)] = ex.label == ex.alignment.canonical ? 0 : 1;
  });

  ModelEvalRow row;
  row.name = name;
  row.curve = pr_curve(scores, truth);
  row.auc = row.curve.auc;
  try {
    const PRPoint point = precision_at_recall(row.curve, target_recall);
    row.target_reached = true;
    row.precision = point.precision;
    row.recall = point.recall;
    row.operating_threshold = point.threshold;
    // Confusion counts at the operating threshold for the exact intervals.
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const bool predicted = scores[i] >= point.threshold;
      if (predicted && truth[i]) ++tp;
      if (predicted && !truth[i]) ++fp;
      if (!predicted && truth[i]) ++fn;
    }
    row.precision_ci = binomial_ci(static_cast<int>(tp), static_cast<int>(tp + fp));
    row.recall_ci = binomial_ci(static_cast<int>(tp), static_cast<int>(tp + fn));
  } catch (const std::runtime_error&) {
    row.target_reached = false;
  }
  return row;
}

EvalReport evaluate_models(
    const std::vector<std::pair<std::string, Checkpoint>>& models,
    const std::vector<TrainingExample>& test_examples, double target_recall,
    Exec exec) {
  EvalReport report;
  report.target_recall = target_recall;
  report.word_count = static_cast<int>(test_examples.size());
  for (const auto& ex : test_examples) {
    if (!(ex.label == ex.alignment.canonical)) ++report.error_count;
  }
  for (const auto& [name, ckpt] : models) {
    report.rows.push_back(evaluate_model(name, ckpt.config, ckpt.params,
                                         test_examples, target_recall, exec));
  }
  return report;
}

AblationResult run_ablation(const AblationSpec& spec, Exec exec) {
  AblationResult result;

  GeneratedCorpus train_human = generate_corpus(spec.train_human, exec);
  GeneratedCorpus train_tts = generate_corpus(spec.train_tts, exec);
  GeneratedCorpus test = generate_corpus(spec.test, exec);
  result.train_human_summary = train_human.summary;
  result.train_tts_summary = train_tts.summary;
  result.test_summary = test.summary;

  std::vector<TrainingExample> human_only = train_human.examples;
  std::vector<TrainingExample> augmented = train_human.examples;
  augmented.insert(augmented.end(), train_tts.examples.begin(),
                   train_tts.examples.end());

  ModelConfig att_cfg = spec.model_config;
  att_cfg.use_attention = true;
  ModelConfig noatt_cfg = spec.model_config;
  noatt_cfg.use_attention = false;

  const struct {
    const char* name;
    const ModelConfig* config;
    const std::vector<TrainingExample>* examples;
  } variants[] = {
      {"Att_TTS", &att_cfg, &augmented},
      {"Att_NoTTS", &att_cfg, &human_only},
      {"NoAtt_TTS", &noatt_cfg, &augmented},
      {"NoAtt_NoTTS", &noatt_cfg, &human_only},
  };

  TrainConfig train_cfg = spec.train_config;
  train_cfg.exec = exec;
  std::vector<std::pair<std::string, Checkpoint>> models;
  for (const auto& variant : variants) {
    const TrainResult trained = train(*variant.examples, train_cfg, *variant.config);
    Checkpoint ckpt;
    ckpt.config = *variant.config;
    ckpt.params = trained.params;
    result.models.emplace(variant.name, ckpt);
    models.emplace_back(variant.name, std::move(ckpt));
  }

  result.report =
      evaluate_models(models, test.examples, spec.target_recall, exec);
  return result;
}

void write_pr_csv(const PRCurve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write PR CSV '" + path + "'");
  out << "threshold,precision,recall\n";
  char buf[128];
  for (const auto& point : curve.points) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g\n", point.threshold,
                  point.precision, point.recall);
    out << buf;
  }
}

std::string report_to_text(const EvalReport& report) {
  char buf[256];
  std::string text;
  std::snprintf(buf, sizeof(buf),
                "Detection of incorrectly stressed words (%d words, %d true "
                "errors), recall target %.0f%%\n",
                report.word_count, report.error_count,
                report.target_recall * 100.0);
  text += buf;
  std::snprintf(buf, sizeof(buf), "%-12s  %-8s  %-22s  %-22s\n", "Model", "AUC",
                "Precision [%, 95% CI]", "Recall [%, 95% CI]");
  text += buf;
  for (const auto& row : report.rows) {
    if (row.target_reached) {
      std::snprintf(buf, sizeof(buf),
                    "%-12s  %-8.4f  %5.2f (%.2f-%.2f)     %5.2f (%.2f-%.2f)\n",
                    row.name.c_str(), row.auc, row.precision * 100.0,
                    row.precision_ci.lo * 100.0, row.precision_ci.hi * 100.0,
                    row.recall * 100.0, row.recall_ci.lo * 100.0,
                    row.recall_ci.hi * 100.0);
    } else {
      std::snprintf(buf, sizeof(buf), "%-12s  %-8.4f  %-22s  %-22s\n",
                    row.name.c_str(), row.auc, "n/a (recall target unmet)",
                    "n/a");
    }
    text += buf;
  }
  // Published reference operating point, reproduced verbatim, never
  // recomputed (evaluated on data with a far higher error proportion).
  std::snprintf(buf, sizeof(buf), "%-12s  %-8s  %-22s  %-22s\n",
                "Ferrer et al.", "n/a", "95.00 (na-na)", "48.3 (na-na)");
  text += buf;
  return text;
}

void write_report_text(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report '" + path + "'");
  out << report_to_text(report);
}

void write_report_json(const EvalReport& report, const std::string& path) {
  json doc;
  doc["word_count"] = report.word_count;
  doc["error_count"] = report.error_count;
  doc["target_recall"] = report.target_recall;
  json rows = json::array();
  for (const auto& row : report.rows) {
    json r;
    r["model"] = row.name;
    r["auc"] = row.auc;
    r["target_reached"] = row.target_reached;
    if (row.target_reached) {
      r["precision"] = row.precision;
      r["precision_ci"] = {row.precision_ci.lo, row.precision_ci.hi};
      r["recall"] = row.recall;
      r["recall_ci"] = {row.recall_ci.lo, row.recall_ci.hi};
      r["threshold"] = row.operating_threshold;
    }
    rows.push_back(std::move(r));
  }
  doc["models"] = std::move(rows);
  doc["reference"] = {{"model", "Ferrer et al."},
                      {"precision_percent", "95.00 (na-na)"},
                      {"recall_percent", "48.3 (na-na)"}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report '" + path + "'");
  out << doc.dump(2) << '\n';
}

void write_pr_svg(const std::vector<std::pair<std::string, const PRCurve*>>& curves,
                  const std::string& path) {
  constexpr double kW = 640.0, kH = 480.0;
  constexpr double kLeft = 60.0, kBottom = 40.0, kTop = 20.0, kRight = 140.0;
  const double plot_w = kW - kLeft - kRight;
  const double plot_h = kH - kTop - kBottom;
  auto px = [&](double recall) { return kLeft + recall * plot_w; };
  auto py = [&](double precision) { return kTop + (1.0 - precision) * plot_h; };
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b"};

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write SVG '" + path + "'");
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" "
                "height=\"%g\" viewBox=\"0 0 %g %g\">\n",
                kW, kH, kW, kH);
  out << buf << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof(buf),
                "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" "
                "fill=\"none\" stroke=\"black\"/>\n",
                kLeft, kTop, plot_w, plot_h);
  out << buf;
  for (int i = 0; i <= 5; ++i) {
    const double v = i / 5.0;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%g\" y=\"%g\" font-size=\"11\" "
                  "text-anchor=\"middle\">%.1f</text>\n",
                  px(v), kH - kBottom + 16.0, v);
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%g\" y=\"%g\" font-size=\"11\" "
                  "text-anchor=\"end\">%.1f</text>\n",
                  kLeft - 6.0, py(v) + 4.0, v);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%g\" y=\"%g\" font-size=\"13\" "
                "text-anchor=\"middle\">recall</text>\n",
                kLeft + plot_w / 2.0, kH - 8.0);
  out << buf;
  std::snprintf(buf, sizeof(buf),
                "<text x=\"14\" y=\"%g\" font-size=\"13\" text-anchor=\"middle\" "
                "transform=\"rotate(-90 14 %g)\">precision</text>\n",
                kTop + plot_h / 2.0, kTop + plot_h / 2.0);
  out << buf;

  int ci = 0;
  for (const auto& [name, curve] : curves) {
    const char* color = colors[ci % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    if (!curve->points.empty()) {
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px(0.0),
                    py(curve->points.front().precision));
      out << buf;
    }
    for (const auto& point : curve->points) {
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px(point.recall),
                    py(point.precision));
      out << buf;
    }
    out << "\"/>\n";
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"%s\" "
                  "stroke-width=\"2\"/>\n",
                  kW - kRight + 10.0, kTop + 14.0 + 18.0 * ci,
                  kW - kRight + 34.0, kTop + 14.0 + 18.0 * ci, color);
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%g\" y=\"%g\" font-size=\"12\">%s (%.3f)</text>\n",
                  kW - kRight + 40.0, kTop + 18.0 + 18.0 * ci, name.c_str(),
                  curve->auc);
    out << buf;
    ++ci;
  }
  out << "</svg>\n";
}

}  // namespace stressdet
