// SPDX-License-Identifier: Apache-2.0
#include "stressdet/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"
#include "stressdet/augmentation.hpp"
#include "stressdet/rng.hpp"

namespace stressdet {

using nlohmann::json;

namespace {

constexpr double kProbFloor = 1e-12;

// Seed stream tags, arbitrary but fixed.
constexpr std::uint64_t kStreamInit = 0x494e4954;
constexpr std::uint64_t kStreamOrder = 0x4f524452;
constexpr std::uint64_t kStreamDropout = 0x44524f50;
constexpr std::uint64_t kStreamSplit = 0x53504c54;

}  // namespace

LossResult nll_loss(const std::vector<Eigen::MatrixXd>& posteriors,
                    const std::vector<StressPattern>& labels,
                    const std::vector<std::vector<std::uint8_t>>& masks) {
  if (posteriors.size() != labels.size()) {
    throw std::invalid_argument("nll_loss: posterior/label count mismatch");
  }
  if (!masks.empty() && masks.size() != posteriors.size()) {
    throw std::invalid_argument("nll_loss: mask count mismatch");
  }
  LossResult res;
  res.per_example.resize(posteriors.size(), 0.0);
  double total = 0.0;
  long total_count = 0;
  for (std::size_t e = 0; e < posteriors.size(); ++e) {
    const Eigen::MatrixXd& post = posteriors[e];
    const StressPattern& label = labels[e];
    if (static_cast<std::size_t>(post.rows()) != label.size()) {
      throw std::invalid_argument("nll_loss: example " + std::to_string(e) +
                                  " posterior rows != label length");
    }
    double ex_total = 0.0;
    long ex_count = 0;
    for (Eigen::Index k = 0; k < post.rows(); ++k) {
      if (!masks.empty() && !masks[e].empty() &&
          masks[e][static_cast<std::size_t>(k)] == 0) {
        continue;
      }
      const int cls = label.flags[static_cast<std::size_t>(k)] ? 1 : 0;
      double p = post(k, cls);
      if (p < kProbFloor) {
        p = kProbFloor;
        res.clamped = true;
      }
      ex_total += -std::log(p);
      ++ex_count;
    }
    res.per_example[e] = ex_count > 0 ? ex_total / ex_count : 0.0;
    total += ex_total;
    total_count += ex_count;
  }
  res.loss = total_count > 0 ? total / total_count : 0.0;
  return res;
}

BatchGradients compute_gradients(const Batch& batch,
                                 const ModelParameters& params,
                                 const ModelConfig& config, std::uint64_t seed,
                                 Exec exec) {
  const std::size_t n = batch.inputs.size();
  if (n == 0) throw std::invalid_argument("compute_gradients: empty batch");

  long total_syllables = 0;
  for (const auto& label : batch.labels) {
    total_syllables += static_cast<long>(label.size());
  }

  // Per-example slots; the reduction below runs in a fixed order so the
  // result does not depend on the thread count.
  std::vector<ModelParameters> slot_grads(n);
  std::vector<double> slot_loss(n, 0.0);
  parallel_for(exec, static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t e) {
    const ModelInput& input = batch.inputs[static_cast<std::size_t>(e)];
    const StressPattern& label = batch.labels[static_cast<std::size_t>(e)];
    ForwardCache cache;
    const std::uint64_t drop_seed =
        mix_seed(seed, kStreamDropout, static_cast<std::uint64_t>(e));
    forward(input, params, config, /*train_mode=*/true, drop_seed, &cache);

    const Eigen::Index K = cache.posterior.rows();
    Eigen::MatrixXd dlogits = Eigen::MatrixXd::Zero(K, 2);
    double ex_loss = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) {
      const int cls = label.flags[static_cast<std::size_t>(k)] ? 1 : 0;
      double p = cache.posterior(k, cls);
      if (p < kProbFloor) p = kProbFloor;
      ex_loss += -std::log(p);
      dlogits(k, 0) = (cache.posterior(k, 0) - (cls == 0 ? 1.0 : 0.0)) /
                      static_cast<double>(total_syllables);
      dlogits(k, 1) = (cache.posterior(k, 1) - (cls == 1 ? 1.0 : 0.0)) /
                      static_cast<double>(total_syllables);
    }
    slot_loss[static_cast<std::size_t>(e)] = ex_loss;
    slot_grads[static_cast<std::size_t>(e)] = zero_parameters(config);
    backward(input, params, config, cache, dlogits,
             slot_grads[static_cast<std::size_t>(e)]);
  });

  BatchGradients out;
  out.grads = zero_parameters(config);
  out.per_example_loss.resize(n);
  std::vector<Eigen::MatrixXd*> acc;
  visit_tensors(out.grads, [&](const char*, Eigen::MatrixXd& m) { acc.push_back(&m); });
  double total = 0.0;
  for (std::size_t e = 0; e < n; ++e) {
    std::size_t ti = 0;
    visit_tensors(slot_grads[e], [&](const char*, Eigen::MatrixXd& sg) {
      *acc[ti++] += sg;
    });
    total += slot_loss[e];
    out.per_example_loss[e] =
        slot_loss[e] / static_cast<double>(batch.labels[e].size());
  }
  out.loss = total / static_cast<double>(total_syllables);

  visit_tensors(out.grads, [&](const char* name, Eigen::MatrixXd& g) {
    if (!g.allFinite()) {
      throw std::runtime_error(std::string("non-finite gradient in tensor '") +
                               name + "'");
    }
  });
  return out;
}

void sgd_step(ModelParameters& params, const ModelParameters& grads,
              double learning_rate) {
  auto& g = const_cast<ModelParameters&>(grads);
  std::vector<const Eigen::MatrixXd*> gs;
  visit_tensors(g, [&](const char*, Eigen::MatrixXd& m) { gs.push_back(&m); });
  std::size_t i = 0;
  visit_tensors(params, [&](const char*, Eigen::MatrixXd& w) {
    w -= learning_rate * (*gs[i++]);
  });
}

std::vector<Bucket> make_buckets(const std::vector<TrainingExample>& examples,
                                 int batch_size,
                                 std::vector<std::vector<int>>* schedule) {
  if (examples.empty()) {
    throw std::invalid_argument("make_buckets: no examples");
  }
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  std::map<int, std::vector<int>> by_syllables;
  for (int i = 0; i < static_cast<int>(examples.size()); ++i) {
    by_syllables[examples[static_cast<std::size_t>(i)].alignment.syllable_count()]
        .push_back(i);
  }
  std::vector<Bucket> buckets;
  for (auto& [k, members] : by_syllables) {
    std::stable_sort(members.begin(), members.end(), [&](int a, int b) {
      return examples[static_cast<std::size_t>(a)].features.frame_count() <
             examples[static_cast<std::size_t>(b)].features.frame_count();
    });
    Bucket bucket;
    bucket.syllable_count = k;
    bucket.members = members;
    bucket.max_frames =
        examples[static_cast<std::size_t>(members.back())].features.frame_count();
    buckets.push_back(std::move(bucket));
  }
  if (schedule) {
    schedule->clear();
    for (const auto& bucket : buckets) {
      for (std::size_t at = 0; at < bucket.members.size(); at += batch_size) {
        const std::size_t end =
            std::min(at + static_cast<std::size_t>(batch_size), bucket.members.size());
        schedule->emplace_back(bucket.members.begin() + static_cast<std::ptrdiff_t>(at),
                               bucket.members.begin() + static_cast<std::ptrdiff_t>(end));
      }
    }
  }
  return buckets;
}

std::vector<Batch> build_batches(const std::vector<TrainingExample>& examples,
                                 int batch_size) {
  std::vector<std::vector<int>> schedule;
  make_buckets(examples, batch_size, &schedule);
  std::vector<Batch> batches;
  batches.reserve(schedule.size());
  for (const auto& indices : schedule) {
    Batch batch;
    batch.example_indices = indices;
    int max_frames = 0, max_subs = 0;
    for (int idx : indices) {
      const auto& ex = examples[static_cast<std::size_t>(idx)];
      max_frames = std::max(max_frames, ex.features.frame_count());
      max_subs = std::max(max_subs,
                          static_cast<int>(ex.features.subphoneme_durations_s.size()));
    }
    for (int idx : indices) {
      const auto& ex = examples[static_cast<std::size_t>(idx)];
      ModelInput input = make_model_input(ex.alignment, ex.features);
      pad_model_input(input, max_frames, max_subs);
      batch.inputs.push_back(std::move(input));
      batch.labels.push_back(ex.label);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

double evaluate_loss(const std::vector<TrainingExample>& examples,
                     const ModelParameters& params, const ModelConfig& config,
                     Exec exec) {
  if (examples.empty()) return 0.0;
  std::vector<double> slot_total(examples.size(), 0.0);
  std::vector<long> slot_count(examples.size(), 0);
  parallel_for(exec, static_cast<std::ptrdiff_t>(examples.size()),
               [&](std::ptrdiff_t i) {
    const auto& ex = examples[static_cast<std::size_t>(i)];
    const ModelInput input = make_model_input(ex.alignment, ex.features);
    const ForwardResult res = forward(input, params, config);
    double total = 0.0;
    for (Eigen::Index k = 0; k < res.posterior.rows(); ++k) {
      const int cls = ex.label.flags[static_cast<std::size_t>(k)] ? 1 : 0;
      total += -std::log(std::max(res.posterior(k, cls), kProbFloor));
    }
    slot_total[static_cast<std::size_t>(i)] = total;
    slot_count[static_cast<std::size_t>(i)] =
        static_cast<long>(res.posterior.rows());
  });
  double total = 0.0;
  long count = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    total += slot_total[i];
    count += slot_count[i];
  }
  return count > 0 ? total / count : 0.0;
}

TrainResult train(const std::vector<TrainingExample>& examples,
                  const TrainConfig& config, const ModelConfig& model_config) {
  if (examples.empty()) {
    throw std::invalid_argument("train: empty training set");
  }
  // Degenerate features (every track constant everywhere) cannot carry a
  // stress signal; refuse instead of fitting the label marginal.
  {
    bool varies = false;
    double f0_ref = 0.0, int_ref = 0.0, dur_ref = 0.0;
    bool first = true;
    for (const auto& ex : examples) {
      for (std::size_t t = 0; !varies && t < ex.features.f0_hz.size(); ++t) {
        if (first) {
          f0_ref = ex.features.f0_hz[t];
          int_ref = ex.features.intensity_db[t];
          first = false;
        }
        varies = ex.features.f0_hz[t] != f0_ref ||
                 ex.features.intensity_db[t] != int_ref;
      }
      for (std::size_t i = 0; !varies && i < ex.features.subphoneme_durations_s.size(); ++i) {
        if (dur_ref == 0.0) dur_ref = ex.features.subphoneme_durations_s[i];
        varies = ex.features.subphoneme_durations_s[i] != dur_ref;
      }
      if (varies) break;
    }
    if (!varies) {
      throw std::invalid_argument(
          "train: all prosodic features are degenerate (constant tracks)");
    }
  }

  // Validation = a speaker-disjoint slice of the human-source examples;
  // synthetic words always stay in the training portion.
  std::set<std::string> human_speakers;
  for (const auto& ex : examples) {
    if (ex.source == Source::human) human_speakers.insert(ex.alignment.speaker_id);
  }
  std::vector<std::string> speakers(human_speakers.begin(), human_speakers.end());
  auto order_engine = make_engine(mix_seed(config.seed, kStreamSplit));
  std::shuffle(speakers.begin(), speakers.end(), order_engine);
  const int val_count = std::min(
      static_cast<int>(speakers.size()) - 1,
      static_cast<int>(std::lround(config.val_fraction * speakers.size())));
  std::set<std::string> val_speakers(speakers.begin(),
                                     speakers.begin() + std::max(val_count, 0));

  std::vector<TrainingExample> train_set, val_set;
  for (const auto& ex : examples) {
    if (ex.source == Source::human && val_speakers.count(ex.alignment.speaker_id)) {
      val_set.push_back(ex);
    } else {
      train_set.push_back(ex);
    }
  }

  std::vector<Batch> batches = build_batches(train_set, config.batch_size);
  ModelParameters params =
      init_parameters(model_config, mix_seed(config.seed, kStreamInit));

  TrainResult result;
  result.val_speakers.assign(val_speakers.begin(), val_speakers.end());
  const bool have_val = !val_set.empty();

  const double initial_train = evaluate_loss(train_set, params, model_config, config.exec);
  const double initial_val =
      have_val ? evaluate_loss(val_set, params, model_config, config.exec) : initial_train;
  result.loss_log.push_back({0, initial_train, initial_val});

  ModelParameters best = params;
  double best_val = initial_val;
  int best_epoch = 0;
  int since_best = 0;

  std::vector<int> order(batches.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[static_cast<std::size_t>(i)] = static_cast<int>(i);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    auto epoch_engine =
        make_engine(mix_seed(config.seed, kStreamOrder, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), epoch_engine);

    for (std::size_t bi = 0; bi < order.size(); ++bi) {
      const Batch& batch = batches[static_cast<std::size_t>(order[bi])];
      const std::uint64_t batch_seed =
          mix_seed(config.seed, static_cast<std::uint64_t>(epoch) * 1000003ULL,
                   static_cast<std::uint64_t>(order[bi]));
      BatchGradients bg =
          compute_gradients(batch, params, model_config, batch_seed, config.exec);
      sgd_step(params, bg.grads, config.learning_rate);
    }
    // Both log columns are eval-mode losses so rows are comparable with
    // each other and with the epoch-0 row.
    const double train_loss =
        evaluate_loss(train_set, params, model_config, config.exec);
    const double val_loss =
        have_val ? evaluate_loss(val_set, params, model_config, config.exec)
                 : train_loss;
    result.loss_log.push_back({epoch, train_loss, val_loss});

    if (val_loss < best_val) {
      best_val = val_loss;
      best = params;
      best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }

  result.params = std::move(best);
  result.best_epoch = best_epoch;
  result.best_val_loss = best_val;
  return result;
}

void write_loss_log(const std::vector<LossLogRow>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write loss log '" + path + "'");
  out << "epoch,train_loss,val_loss\n";
  char buf[128];
  for (const auto& row : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", row.epoch,
                  row.train_loss, row.val_loss);
    out << buf;
  }
}

// ---- manifest ----

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw std::runtime_error("manifest '" + path + "': " + e.what());
  }
  Manifest m;
  for (const auto& e : doc.at("entries")) {
    ManifestEntry entry;
    entry.alignment_path = e.at("alignments").get<std::string>();
    entry.feature_path = e.at("features").get<std::string>();
    entry.source = source_from_string(e.value("source", "human"));
    entry.split = e.value("split", "train");
    m.entries.push_back(std::move(entry));
  }
  return m;
}

void write_manifest(const Manifest& manifest, const std::string& path) {
  json doc;
  json entries = json::array();
  for (const auto& e : manifest.entries) {
    entries.push_back({{"alignments", e.alignment_path},
                       {"features", e.feature_path},
                       {"source", to_string(e.source)},
                       {"split", e.split}});
  }
  doc["entries"] = std::move(entries);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest '" + path + "'");
  out << doc.dump(2) << '\n';
}

std::vector<TrainingExample> load_examples(const Manifest& manifest,
                                           const std::string& manifest_path,
                                           const std::string& split_filter) {
  const std::filesystem::path base =
      std::filesystem::path(manifest_path).parent_path();
  std::vector<TrainingExample> out;
  for (const auto& entry : manifest.entries) {
    if (!split_filter.empty() && entry.split != split_filter) continue;
    const auto align_path = (base / entry.alignment_path).string();
    const auto feat_path = (base / entry.feature_path).string();
    const std::vector<WordAlignment> alignments = read_alignment_file(align_path);
    const std::vector<ProsodicFeatures> features = read_feature_file(feat_path);
    std::unordered_map<std::string, const ProsodicFeatures*> by_uid;
    for (const auto& f : features) by_uid[f.uid] = &f;
    for (const auto& a : alignments) {
      auto it = by_uid.find(a.uid);
      if (it == by_uid.end()) {
        throw std::runtime_error("manifest entry '" + entry.alignment_path +
                                 "': no feature record for uid '" + a.uid + "'");
      }
      if (!a.realized) {
        throw std::runtime_error("alignment '" + a.uid +
                                 "': missing realized stress label");
      }
      TrainingExample ex;
      ex.alignment = a;
      ex.features = *it->second;
      ex.label = *a.realized;
      ex.source = entry.source;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

// ---- gradient verification ----

namespace {

struct GradCheckInstance {
  Batch batch;
  bool train_mode = false;
  ModelConfig config;
  std::uint64_t dropout_seed = 0;
};

double instance_loss(const GradCheckInstance& inst, const ModelParameters& p) {
  long total_syllables = 0;
  for (const auto& label : inst.batch.labels) total_syllables += static_cast<long>(label.size());
  double total = 0.0;
  for (std::size_t e = 0; e < inst.batch.inputs.size(); ++e) {
    const std::uint64_t drop_seed =
        mix_seed(inst.dropout_seed, kStreamDropout, static_cast<std::uint64_t>(e));
    const ForwardResult res = forward(inst.batch.inputs[e], p, inst.config,
                                      inst.train_mode, drop_seed);
    for (Eigen::Index k = 0; k < res.posterior.rows(); ++k) {
      const int cls = inst.batch.labels[e].flags[static_cast<std::size_t>(k)] ? 1 : 0;
      total += -std::log(std::max(res.posterior(k, cls), kProbFloor));
    }
  }
  return total / static_cast<double>(total_syllables);
}

GradCheckInstance random_instance(std::uint64_t seed, bool train_mode,
                                  bool use_attention) {
  auto engine = make_engine(seed);
  GradCheckInstance inst;
  inst.train_mode = train_mode;
  inst.config.use_attention = use_attention;
  inst.config.dropout = train_mode ? 0.24 : 0.0;
  inst.dropout_seed = mix_seed(seed, 0xD0);

  const auto& lex = builtin_lexicon();
  std::uniform_int_distribution<std::size_t> pick(0, lex.size() - 1);
  std::uniform_int_distribution<int> nexamples(1, 3);
  const int n = nexamples(engine);
  std::vector<TrainingExample> examples;
  for (int e = 0; e < n; ++e) {
    const auto& [word, entry] = lex[pick(engine)];
    const LexiconEntry parsed = parse_lexicon_entry(entry);
    const int K = static_cast<int>(parsed.canonical.size());
    StressPattern realized;
    realized.flags.assign(static_cast<std::size_t>(K), 0);
    std::uniform_int_distribution<int> pos(0, K - 1);
    realized.flags[static_cast<std::size_t>(pos(engine))] = 1;

    SpeakerProfile speaker;
    speaker.id = "gradcheck";
    std::uniform_real_distribution<double> f0(120.0, 260.0);
    std::uniform_real_distribution<double> rate(0.85, 1.25);
    speaker.base_f0_hz = f0(engine);
    speaker.rate = rate(engine);
    speaker.jitter = 0.15;
    auto [alignment, features] =
        synthesize_word(word, entry, realized, speaker, StressEffects{},
                        mix_seed(seed, 0x5A, static_cast<std::uint64_t>(e)));

    StressPattern label;
    label.flags.assign(static_cast<std::size_t>(K), 0);
    label.flags[static_cast<std::size_t>(pos(engine))] = 1;

    TrainingExample ex;
    ex.alignment = std::move(alignment);
    ex.features = std::move(features);
    ex.label = std::move(label);
    examples.push_back(std::move(ex));
  }
  std::vector<Batch> batches =
      build_batches(examples, static_cast<int>(examples.size()));
  inst.batch = std::move(batches.front());
  return inst;
}

}  // namespace

GradCheckResult gradient_check(std::uint64_t seed, int cases, double h,
                               double tolerance) {
  GradCheckResult result;
  result.max_rel_error = 0.0;
  for (int c = 0; c < cases; ++c) {
    const bool train_mode = (c % 2) == 0;
    const bool use_attention = (c % 5) != 4;
    GradCheckInstance inst =
        random_instance(mix_seed(seed, 0x6C, static_cast<std::uint64_t>(c)),
                        train_mode, use_attention);
    ModelParameters params =
        init_parameters(inst.config, mix_seed(seed, 0x11, static_cast<std::uint64_t>(c)));

    // compute_gradients and instance_loss derive per-example dropout seeds
    // identically, so finite differences see the same masks.
    BatchGradients analytic = compute_gradients(inst.batch, params, inst.config,
                                                inst.dropout_seed, Exec::serial);

    GradCheckCase check;
    check.train_mode = train_mode;
    check.use_attention = use_attention;
    std::vector<Eigen::MatrixXd*> grads;
    visit_tensors(analytic.grads,
                  [&](const char*, Eigen::MatrixXd& m) { grads.push_back(&m); });
    std::size_t ti = 0;
    visit_tensors(params, [&](const char* name, Eigen::MatrixXd& w) {
      const Eigen::MatrixXd& g = *grads[ti++];
      double block_max = 0.0;
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index col = 0; col < w.cols(); ++col) {
          const double saved = w(r, col);
          w(r, col) = saved + h;
          const double up = instance_loss(inst, params);
          w(r, col) = saved - h;
          const double down = instance_loss(inst, params);
          w(r, col) = saved;
          const double fd = (up - down) / (2.0 * h);
          const double a = g(r, col);
          const double denom = std::max(std::abs(a), std::abs(fd));
          const double rel = denom < 1e-7 ? 0.0 : std::abs(a - fd) / denom;
          block_max = std::max(block_max, rel);
        }
      }
      check.blocks.push_back({name, block_max});
      check.max_rel_error = std::max(check.max_rel_error, block_max);
    });
    result.max_rel_error = std::max(result.max_rel_error, check.max_rel_error);
    result.cases.push_back(std::move(check));
  }
  result.passed = result.max_rel_error <= tolerance;
  return result;
}

}  // namespace stressdet
