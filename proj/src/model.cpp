// SPDX-License-Identifier: Apache-2.0
#include "stressdet/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "stressdet/arpabet.hpp"
#include "stressdet/rng.hpp"

namespace stressdet {

namespace {

constexpr double kRatioDenomFloor = 1e-6;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    Eigen::ArrayXd e = (logits.row(i).array() - m).exp();
    out.row(i) = (e / e.sum()).matrix();
  }
  return out;
}

}  // namespace

ModelParameters zero_parameters(const ModelConfig& cfg) {
  const int d = cfg.input_dim();
  const int g = cfg.gru_units;
  const int k = cfg.d_k();
  const int h = cfg.head_units;
  ModelParameters p;
  p.gru_wz = Eigen::MatrixXd::Zero(d, g);
  p.gru_uz = Eigen::MatrixXd::Zero(g, g);
  p.gru_bz = Eigen::MatrixXd::Zero(1, g);
  p.gru_wr = Eigen::MatrixXd::Zero(d, g);
  p.gru_ur = Eigen::MatrixXd::Zero(g, g);
  p.gru_br = Eigen::MatrixXd::Zero(1, g);
  p.gru_wh = Eigen::MatrixXd::Zero(d, g);
  p.gru_uh = Eigen::MatrixXd::Zero(g, g);
  p.gru_bh = Eigen::MatrixXd::Zero(1, g);
  p.key_frame_w = Eigen::MatrixXd::Zero(g, k);
  p.key_frame_b = Eigen::MatrixXd::Zero(1, k);
  p.key_phone_w = Eigen::MatrixXd::Zero(g, k);
  p.key_phone_b = Eigen::MatrixXd::Zero(1, k);
  p.hidden_w0 = Eigen::MatrixXd::Zero(9, h);
  p.hidden_b0 = Eigen::MatrixXd::Zero(1, h);
  p.hidden_w1 = Eigen::MatrixXd::Zero(h, h);
  p.hidden_b1 = Eigen::MatrixXd::Zero(1, h);
  p.hidden_w2 = Eigen::MatrixXd::Zero(h, h);
  p.hidden_b2 = Eigen::MatrixXd::Zero(1, h);
  p.out_w = Eigen::MatrixXd::Zero(h, 2);
  p.out_b = Eigen::MatrixXd::Zero(1, 2);
  return p;
}

ModelParameters init_parameters(const ModelConfig& cfg, std::uint64_t seed) {
  // Fan-scaled uniform init. A fixed +-0.1 range leaves the key projections
  // so close to zero that both attentions start uniform: every syllable then
  // pools identical features, the ratio layer emits all-ones and the
  // escape-time from that symmetric plateau blows up. Scaling by fan keeps
  // the attention logits O(1) from the start.
  ModelParameters p = zero_parameters(cfg);
  std::mt19937_64 engine(seed);
  visit_tensors(p, [&](const char*, Eigen::MatrixXd& m) {
    const double fan_in = static_cast<double>(m.rows());
    const double fan_out = static_cast<double>(m.cols());
    const double scale = m.rows() == 1
                             ? 0.1  // biases stay small
                             : std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        m(r, c) = dist(engine);
      }
    }
  });
  return p;
}

void validate_shapes(const ModelParameters& p, const ModelConfig& cfg) {
  const ModelParameters ref = zero_parameters(cfg);
  auto& mutable_p = const_cast<ModelParameters&>(p);
  auto& mutable_ref = const_cast<ModelParameters&>(ref);
  std::vector<std::pair<std::string, std::pair<Eigen::Index, Eigen::Index>>> want;
  visit_tensors(mutable_ref, [&](const char* name, Eigen::MatrixXd& m) {
    want.emplace_back(name, std::make_pair(m.rows(), m.cols()));
  });
  std::size_t i = 0;
  visit_tensors(mutable_p, [&](const char* name, Eigen::MatrixXd& m) {
    const auto& [wname, dims] = want[i++];
    if (m.rows() != dims.first || m.cols() != dims.second) {
      throw std::invalid_argument(
          std::string("tensor ") + name + " has shape " +
          std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
          ", config requires " + std::to_string(dims.first) + "x" +
          std::to_string(dims.second));
    }
    if (!m.allFinite()) {
      throw std::invalid_argument(std::string("tensor ") + name +
                                  " contains non-finite values");
    }
  });
}

ModelInput make_model_input(const WordAlignment& alignment,
                            const ProsodicFeatures& features) {
  const std::vector<SubPhoneme> subs = split_subphonemes(alignment);
  const int L = static_cast<int>(subs.size());
  const int T = features.frame_count();
  if (static_cast<int>(features.subphoneme_durations_s.size()) != L) {
    throw std::invalid_argument("word '" + alignment.word +
                                "': feature record has " +
                                std::to_string(features.subphoneme_durations_s.size()) +
                                " sub-phoneme durations, alignment implies " +
                                std::to_string(L));
  }
  ModelInput in;
  in.phoneme_ids.reserve(static_cast<std::size_t>(L));
  for (const auto& sp : subs) {
    const auto& ph = alignment.phonemes[static_cast<std::size_t>(sp.phoneme_index)];
    in.phoneme_ids.push_back(ph.id);
    in.syllable_indices.push_back(sp.syllable_index);
    in.vowel_flags.push_back(ph.is_vowel ? 1 : 0);
    in.right_half_flags.push_back(sp.half == Half::right ? 1 : 0);
  }
  const std::vector<double> f0 = scaled_f0(features);
  const std::vector<double> inten = scaled_intensity(features);
  in.frame_values.resize(T, 2);
  for (int t = 0; t < T; ++t) {
    in.frame_values(t, 0) = f0[static_cast<std::size_t>(t)];
    in.frame_values(t, 1) = inten[static_cast<std::size_t>(t)];
  }
  in.subphoneme_durations.resize(L);
  const std::vector<double> dur = scaled_durations(features);
  for (int i = 0; i < L; ++i) in.subphoneme_durations(i) = dur[static_cast<std::size_t>(i)];
  in.frame_to_subphoneme = features.frame_to_subphoneme;
  for (int idx : in.frame_to_subphoneme) {
    if (idx < 0 || idx >= L) {
      throw std::invalid_argument("word '" + alignment.word +
                                  "': frame map index out of range");
    }
  }
  in.syllable_count = alignment.syllable_count();
  in.valid_frames = T;
  in.valid_subphonemes = L;

  const double word_start = alignment.start_s();
  in.nuclei.resize(static_cast<std::size_t>(in.syllable_count));
  for (const auto& syl : alignment.syllables) {
    NucleusSpan span;
    const int left_sub = 2 * syl.nucleus;
    for (int t = 0; t < T; ++t) {
      const int m = in.frame_to_subphoneme[static_cast<std::size_t>(t)];
      if (m == left_sub || m == left_sub + 1) {
        if (span.first_frame < 0) span.first_frame = t;
        span.last_frame = t;
      }
    }
    const auto& ph = alignment.phonemes[static_cast<std::size_t>(syl.nucleus)];
    const double center = 0.5 * (ph.start_s + ph.end_s);
    int nearest = static_cast<int>(std::lround((center - word_start) / 0.010 - 0.5));
    span.fallback_frame = std::clamp(nearest, 0, T - 1);
    span.scaled_duration = ph.duration_s() / kDurationScale;
    in.nuclei[static_cast<std::size_t>(syl.index)] = span;
  }
  return in;
}

void pad_model_input(ModelInput& in, int frame_target, int subphoneme_target) {
  const int T = in.frame_count();
  const int L = in.subphoneme_count();
  if (frame_target < T || subphoneme_target < L) {
    throw std::invalid_argument("padding targets smaller than current size");
  }
  in.phoneme_ids.resize(static_cast<std::size_t>(subphoneme_target), arpabet::kPadId);
  in.syllable_indices.resize(static_cast<std::size_t>(subphoneme_target), 0);
  in.vowel_flags.resize(static_cast<std::size_t>(subphoneme_target), 0);
  in.right_half_flags.resize(static_cast<std::size_t>(subphoneme_target), 0);
  in.subphoneme_durations.conservativeResize(subphoneme_target);
  for (int i = L; i < subphoneme_target; ++i) in.subphoneme_durations(i) = 0.0;
  in.frame_values.conservativeResize(frame_target, 2);
  for (int t = T; t < frame_target; ++t) in.frame_values.row(t).setZero();
  in.frame_to_subphoneme.resize(static_cast<std::size_t>(frame_target), 0);
}

Eigen::MatrixXd DropoutSampler::mask(Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  if (rate_ <= 0.0) {
    m.setOnes();
    return m;
  }
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  const double scale = 1.0 / (1.0 - rate_);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = dist(engine_) < rate_ ? 0.0 : scale;
    }
  }
  return m;
}

AttentionResult dot_product_attention(const Eigen::MatrixXd& queries,
                                      const Eigen::MatrixXd& keys,
                                      const Eigen::MatrixXd& values,
                                      int valid_keys) {
  if (queries.cols() != keys.cols()) {
    throw std::invalid_argument("attention: query width " +
                                std::to_string(queries.cols()) +
                                " != key width " + std::to_string(keys.cols()));
  }
  if (keys.rows() != values.rows()) {
    throw std::invalid_argument("attention: key count != value count");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(queries.cols()));
  Eigen::MatrixXd logits = queries * keys.transpose() * scale;
  if (valid_keys >= 0 && valid_keys < keys.rows()) {
    const double neg_inf = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = valid_keys; j < logits.cols(); ++j) {
      logits.col(j).setConstant(neg_inf);
    }
  }
  AttentionResult res;
  res.weights = softmax_rows(logits);
  res.output = res.weights * values;
  return res;
}

Eigen::MatrixXd upsample_to_frames(const Eigen::MatrixXd& rows,
                                   const std::vector<int>& frame_to_subphoneme) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(frame_to_subphoneme.size()), rows.cols());
  for (std::size_t t = 0; t < frame_to_subphoneme.size(); ++t) {
    const int m = frame_to_subphoneme[t];
    if (m < 0 || m >= rows.rows()) {
      throw std::invalid_argument("upsample: frame map index out of range");
    }
    out.row(static_cast<Eigen::Index>(t)) = rows.row(m);
  }
  return out;
}

SubPhonemeEncoding encode_subphonemes(const ModelInput& in,
                                      const ModelConfig& cfg,
                                      const ModelParameters& p,
                                      DropoutSampler* dropout,
                                      ForwardCache* cache) {
  const int L = in.subphoneme_count();
  if (L == 0) throw std::invalid_argument("empty sub-phoneme sequence");
  const int D = cfg.input_dim();
  const int G = cfg.gru_units;

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(L, D);
  for (int i = 0; i < L; ++i) {
    const int ph = in.phoneme_ids[static_cast<std::size_t>(i)];
    const int syl = in.syllable_indices[static_cast<std::size_t>(i)];
    if (ph < 0 || ph >= cfg.phoneme_inventory) {
      throw std::invalid_argument("phoneme id " + std::to_string(ph) +
                                  " outside the inventory");
    }
    if (syl < 0 || syl >= cfg.max_syllables) {
      throw std::invalid_argument("syllable index " + std::to_string(syl) +
                                  " >= max_syllables (" +
                                  std::to_string(cfg.max_syllables) + ")");
    }
    x(i, ph) = 1.0;
    x(i, cfg.phoneme_inventory + syl) = 1.0;
    x(i, cfg.phoneme_inventory + cfg.max_syllables +
             (in.vowel_flags[static_cast<std::size_t>(i)] ? 1 : 0)) = 1.0;
    x(i, cfg.phoneme_inventory + cfg.max_syllables + 2 +
             (in.right_half_flags[static_cast<std::size_t>(i)] ? 1 : 0)) = 1.0;
  }

  Eigen::MatrixXd gate_z(L, G), gate_r(L, G), cand(L, G), h(L, G);
  Eigen::RowVectorXd h_prev = Eigen::RowVectorXd::Zero(G);
  for (int t = 0; t < L; ++t) {
    const Eigen::RowVectorXd xt = x.row(t);
    Eigen::RowVectorXd az = xt * p.gru_wz + h_prev * p.gru_uz + p.gru_bz;
    Eigen::RowVectorXd ar = xt * p.gru_wr + h_prev * p.gru_ur + p.gru_br;
    Eigen::RowVectorXd z(G), r(G);
    for (int j = 0; j < G; ++j) {
      z(j) = sigmoid(az(j));
      r(j) = sigmoid(ar(j));
    }
    const Eigen::RowVectorXd rh = r.cwiseProduct(h_prev);
    Eigen::RowVectorXd ah = xt * p.gru_wh + rh * p.gru_uh + p.gru_bh;
    Eigen::RowVectorXd hc = ah.array().tanh().matrix();
    Eigen::RowVectorXd ht =
        (Eigen::RowVectorXd::Ones(G) - z).cwiseProduct(h_prev) + z.cwiseProduct(hc);
    gate_z.row(t) = z;
    gate_r.row(t) = r;
    cand.row(t) = hc;
    h.row(t) = ht;
    h_prev = ht;
  }

  Eigen::MatrixXd gru_mask = dropout ? dropout->mask(L, G)
                                     : Eigen::MatrixXd::Ones(L, G);
  Eigen::MatrixXd h_dropped = h.cwiseProduct(gru_mask);

  SubPhonemeEncoding enc;
  enc.gru_output = h_dropped;
  enc.keys_frame = (h_dropped * p.key_frame_w).rowwise() + p.key_frame_b.row(0);
  enc.keys_phone = (h_dropped * p.key_phone_w).rowwise() + p.key_phone_b.row(0);

  if (cache) {
    cache->x = std::move(x);
    cache->gate_z = std::move(gate_z);
    cache->gate_r = std::move(gate_r);
    cache->cand = std::move(cand);
    cache->h = std::move(h);
    cache->gru_mask = std::move(gru_mask);
    cache->h_dropped = h_dropped;
    cache->keys_frame = enc.keys_frame;
    cache->keys_phone = enc.keys_phone;
  }
  return enc;
}

Eigen::MatrixXd pool_syllable_features(const ModelInput& in,
                                       const SubPhonemeEncoding& enc,
                                       const ModelConfig& cfg,
                                       ForwardCache* cache) {
  const int K = in.syllable_count;
  if (K > cfg.max_syllables) {
    throw std::invalid_argument("word has " + std::to_string(K) +
                                " syllables, model supports at most " +
                                std::to_string(cfg.max_syllables));
  }
  Eigen::MatrixXd queries = Eigen::MatrixXd::Zero(K, cfg.d_k());
  for (int k = 0; k < K; ++k) queries(k, k) = 1.0;

  const Eigen::MatrixXd frame_keys =
      upsample_to_frames(enc.keys_frame, in.frame_to_subphoneme);
  const AttentionResult frame_att = dot_product_attention(
      queries, frame_keys, in.frame_values, in.valid_frames);
  const AttentionResult phone_att = dot_product_attention(
      queries, enc.keys_phone, in.subphoneme_durations, in.valid_subphonemes);

  Eigen::MatrixXd pooled(K, 3);
  pooled.leftCols(2) = frame_att.output;
  pooled.col(2) = phone_att.output.col(0);

  if (cache) {
    cache->queries = std::move(queries);
    cache->att_frame = frame_att.weights;
    cache->att_phone = phone_att.weights;
    cache->pooled = pooled;
  }
  return pooled;
}

Eigen::MatrixXd nucleus_feature_matrix(const ModelInput& in) {
  const int K = in.syllable_count;
  Eigen::MatrixXd pooled(K, 3);
  for (int k = 0; k < K; ++k) {
    const NucleusSpan& span = in.nuclei[static_cast<std::size_t>(k)];
    double f0 = 0.0, inten = 0.0;
    if (span.first_frame >= 0) {
      const int n = span.last_frame - span.first_frame + 1;
      for (int t = span.first_frame; t <= span.last_frame; ++t) {
        f0 += in.frame_values(t, 0);
        inten += in.frame_values(t, 1);
      }
      f0 /= n;
      inten /= n;
    } else {
      f0 = in.frame_values(span.fallback_frame, 0);
      inten = in.frame_values(span.fallback_frame, 1);
    }
    pooled(k, 0) = f0;
    pooled(k, 1) = inten;
    pooled(k, 2) = span.scaled_duration;
  }
  return pooled;
}

Eigen::MatrixXd differential_bidirectional(const Eigen::MatrixXd& s) {
  const Eigen::Index K = s.rows();
  const Eigen::Index C = s.cols();
  Eigen::MatrixXd out(K, 3 * C);
  for (Eigen::Index k = 0; k < K; ++k) {
    for (Eigen::Index c = 0; c < C; ++c) {
      out(k, c) = s(k, c);
      out(k, C + c) =
          k > 0 ? s(k, c) / std::max(s(k - 1, c), kRatioDenomFloor) : 1.0;
      out(k, 2 * C + c) =
          k + 1 < K ? s(k, c) / std::max(s(k + 1, c), kRatioDenomFloor) : 1.0;
    }
  }
  return out;
}

Eigen::MatrixXd classify_head(const Eigen::MatrixXd& ratios,
                              const ModelParameters& p,
                              DropoutSampler* dropout, ForwardCache* cache) {
  const Eigen::Index K = ratios.rows();
  auto ones = [&](Eigen::Index r, Eigen::Index c) {
    return Eigen::MatrixXd::Ones(r, c);
  };
  Eigen::MatrixXd act0 =
      (((ratios * p.hidden_w0).rowwise() + p.hidden_b0.row(0)).array().tanh()).matrix();
  Eigen::MatrixXd mask0 = dropout ? dropout->mask(K, act0.cols()) : ones(K, act0.cols());
  Eigen::MatrixXd d0 = act0.cwiseProduct(mask0);
  Eigen::MatrixXd act1 =
      (((d0 * p.hidden_w1).rowwise() + p.hidden_b1.row(0)).array().tanh()).matrix();
  Eigen::MatrixXd mask1 = dropout ? dropout->mask(K, act1.cols()) : ones(K, act1.cols());
  Eigen::MatrixXd d1 = act1.cwiseProduct(mask1);
  Eigen::MatrixXd act2 =
      (((d1 * p.hidden_w2).rowwise() + p.hidden_b2.row(0)).array().tanh()).matrix();
  Eigen::MatrixXd mask2 = dropout ? dropout->mask(K, act2.cols()) : ones(K, act2.cols());
  Eigen::MatrixXd d2 = act2.cwiseProduct(mask2);
  Eigen::MatrixXd logits_raw = (d2 * p.out_w).rowwise() + p.out_b.row(0);
  Eigen::MatrixXd mask_out =
      dropout ? dropout->mask(K, logits_raw.cols()) : ones(K, logits_raw.cols());
  Eigen::MatrixXd logits = logits_raw.cwiseProduct(mask_out);
  Eigen::MatrixXd posterior = softmax_rows(logits);

  if (cache) {
    cache->ratios = ratios;
    cache->act0 = std::move(act0);
    cache->act1 = std::move(act1);
    cache->act2 = std::move(act2);
    cache->mask0 = std::move(mask0);
    cache->mask1 = std::move(mask1);
    cache->mask2 = std::move(mask2);
    cache->logits_raw = std::move(logits_raw);
    cache->mask_out = std::move(mask_out);
    cache->posterior = posterior;
  }
  return posterior;
}

ForwardResult forward(const ModelInput& in, const ModelParameters& p,
                      const ModelConfig& cfg, bool train_mode,
                      std::uint64_t dropout_seed, ForwardCache* cache) {
  if (in.syllable_count < 2) {
    throw std::invalid_argument("words must have at least two syllables");
  }
  DropoutSampler sampler(cfg.dropout, dropout_seed);
  DropoutSampler* drop = (train_mode && cfg.dropout > 0.0) ? &sampler : nullptr;

  ForwardCache local;
  ForwardCache* c = cache ? cache : &local;

  ForwardResult res;
  Eigen::MatrixXd pooled;
  if (cfg.use_attention) {
    const SubPhonemeEncoding enc = encode_subphonemes(in, cfg, p, drop, c);
    pooled = pool_syllable_features(in, enc, cfg, c);
    res.frame_attention = c->att_frame;
    res.phone_attention = c->att_phone;
  } else {
    if (in.syllable_count > cfg.max_syllables) {
      throw std::invalid_argument("word has " + std::to_string(in.syllable_count) +
                                  " syllables, model supports at most " +
                                  std::to_string(cfg.max_syllables));
    }
    pooled = nucleus_feature_matrix(in);
    c->pooled = pooled;
  }
  const Eigen::MatrixXd ratios = differential_bidirectional(pooled);
  res.posterior = classify_head(ratios, p, drop, c);
  res.syllable_features = std::move(pooled);
  return res;
}

}  // namespace stressdet
