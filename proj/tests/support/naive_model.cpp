// SPDX-License-Identifier: Apache-2.0
#include "naive_model.hpp"

#include <cmath>
#include <stdexcept>

namespace naive {

namespace {

using Mat = std::vector<std::vector<double>>;
using Vec = std::vector<double>;

Mat zeros(std::size_t rows, std::size_t cols) {
  return Mat(rows, Vec(cols, 0.0));
}

double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// y = x * W + b with W read element-wise out of the Eigen tensor.
Vec affine(const Vec& x, const Eigen::MatrixXd& w, const Eigen::MatrixXd& b) {
  Vec y(static_cast<std::size_t>(w.cols()), 0.0);
  for (std::size_t j = 0; j < y.size(); ++j) {
    double acc = b(0, static_cast<Eigen::Index>(j));
    for (std::size_t i = 0; i < x.size(); ++i) {
      acc += x[i] * w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    y[j] = acc;
  }
  return y;
}

void softmax_row(Vec& row) {
  double best = row[0];
  for (double v : row) best = std::max(best, v);
  double total = 0.0;
  for (double& v : row) {
    v = std::exp(v - best);
    total += v;
  }
  for (double& v : row) v /= total;
}

// softmax(Q K^t / sqrt(dk)) V with only the first valid_keys keys live.
Mat attention(const Mat& queries, const Mat& keys, const Mat& values,
              int valid_keys, Mat* weights_out) {
  const std::size_t nq = queries.size();
  const std::size_t nk = keys.size();
  const std::size_t dk = queries[0].size();
  const std::size_t dv = values[0].size();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  Mat weights = zeros(nq, nk);
  for (std::size_t q = 0; q < nq; ++q) {
    double best = -1e308;
    Vec logits(nk, -1e308);
    for (std::size_t k = 0; k < static_cast<std::size_t>(valid_keys); ++k) {
      double dot = 0.0;
      for (std::size_t d = 0; d < dk; ++d) dot += queries[q][d] * keys[k][d];
      logits[k] = dot * scale;
      best = std::max(best, logits[k]);
    }
    double total = 0.0;
    for (std::size_t k = 0; k < nk; ++k) {
      weights[q][k] = k < static_cast<std::size_t>(valid_keys)
                          ? std::exp(logits[k] - best)
                          : 0.0;
      total += weights[q][k];
    }
    for (std::size_t k = 0; k < nk; ++k) weights[q][k] /= total;
  }
  Mat out = zeros(nq, dv);
  for (std::size_t q = 0; q < nq; ++q) {
    for (std::size_t k = 0; k < nk; ++k) {
      for (std::size_t d = 0; d < dv; ++d) {
        out[q][d] += weights[q][k] * values[k][d];
      }
    }
  }
  if (weights_out) *weights_out = std::move(weights);
  return out;
}

}  // namespace

Result forward(const stressdet::ModelInput& input,
               const stressdet::ModelParameters& p,
               const stressdet::ModelConfig& cfg) {
  const int L = input.subphoneme_count();
  const int T = input.frame_count();
  const int K = input.syllable_count;
  const int G = cfg.gru_units;

  Result res;
  Mat pooled;

  if (cfg.use_attention) {
    // One-hot featurization.
    Mat x = zeros(static_cast<std::size_t>(L), static_cast<std::size_t>(cfg.input_dim()));
    for (int i = 0; i < L; ++i) {
      auto& row = x[static_cast<std::size_t>(i)];
      row[static_cast<std::size_t>(input.phoneme_ids[static_cast<std::size_t>(i)])] = 1.0;
      row[static_cast<std::size_t>(cfg.phoneme_inventory +
                                   input.syllable_indices[static_cast<std::size_t>(i)])] = 1.0;
      row[static_cast<std::size_t>(cfg.phoneme_inventory + cfg.max_syllables +
                                   (input.vowel_flags[static_cast<std::size_t>(i)] ? 1 : 0))] = 1.0;
      row[static_cast<std::size_t>(cfg.phoneme_inventory + cfg.max_syllables + 2 +
                                   (input.right_half_flags[static_cast<std::size_t>(i)] ? 1 : 0))] = 1.0;
    }

    // GRU: z/r gates, candidate, blend.
    Mat h = zeros(static_cast<std::size_t>(L), static_cast<std::size_t>(G));
    Vec h_prev(static_cast<std::size_t>(G), 0.0);
    for (int t = 0; t < L; ++t) {
      const Vec& xt = x[static_cast<std::size_t>(t)];
      Vec az = affine(xt, p.gru_wz, p.gru_bz);
      Vec ar = affine(xt, p.gru_wr, p.gru_br);
      for (int j = 0; j < G; ++j) {
        for (int i = 0; i < G; ++i) {
          az[static_cast<std::size_t>(j)] += h_prev[static_cast<std::size_t>(i)] * p.gru_uz(i, j);
          ar[static_cast<std::size_t>(j)] += h_prev[static_cast<std::size_t>(i)] * p.gru_ur(i, j);
        }
      }
      Vec z(static_cast<std::size_t>(G)), r(static_cast<std::size_t>(G));
      for (int j = 0; j < G; ++j) {
        z[static_cast<std::size_t>(j)] = sig(az[static_cast<std::size_t>(j)]);
        r[static_cast<std::size_t>(j)] = sig(ar[static_cast<std::size_t>(j)]);
      }
      Vec ah = affine(xt, p.gru_wh, p.gru_bh);
      for (int j = 0; j < G; ++j) {
        for (int i = 0; i < G; ++i) {
          ah[static_cast<std::size_t>(j)] +=
              r[static_cast<std::size_t>(i)] * h_prev[static_cast<std::size_t>(i)] * p.gru_uh(i, j);
        }
      }
      for (int j = 0; j < G; ++j) {
        const double cand = std::tanh(ah[static_cast<std::size_t>(j)]);
        h[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)] =
            (1.0 - z[static_cast<std::size_t>(j)]) * h_prev[static_cast<std::size_t>(j)] +
            z[static_cast<std::size_t>(j)] * cand;
      }
      h_prev = h[static_cast<std::size_t>(t)];
    }

    // Key projections (no dropout in the oracle; eval-mode comparison).
    Mat keys_frame(static_cast<std::size_t>(L)), keys_phone(static_cast<std::size_t>(L));
    for (int t = 0; t < L; ++t) {
      keys_frame[static_cast<std::size_t>(t)] =
          affine(h[static_cast<std::size_t>(t)], p.key_frame_w, p.key_frame_b);
      keys_phone[static_cast<std::size_t>(t)] =
          affine(h[static_cast<std::size_t>(t)], p.key_phone_w, p.key_phone_b);
    }

    // Upsample keys to frames, build one-hot queries.
    Mat frame_keys(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
      frame_keys[static_cast<std::size_t>(t)] =
          keys_frame[static_cast<std::size_t>(input.frame_to_subphoneme[static_cast<std::size_t>(t)])];
    }
    Mat queries = zeros(static_cast<std::size_t>(K), static_cast<std::size_t>(cfg.d_k()));
    for (int k = 0; k < K; ++k) queries[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)] = 1.0;

    Mat frame_values(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
      frame_values[static_cast<std::size_t>(t)] = {input.frame_values(t, 0),
                                                   input.frame_values(t, 1)};
    }
    Mat durations(static_cast<std::size_t>(L));
    for (int t = 0; t < L; ++t) durations[static_cast<std::size_t>(t)] = {input.subphoneme_durations(t)};

    const Mat pooled_fi =
        attention(queries, frame_keys, frame_values, input.valid_frames, &res.frame_attention);
    const Mat pooled_dur =
        attention(queries, keys_phone, durations, input.valid_subphonemes, &res.phone_attention);

    pooled = zeros(static_cast<std::size_t>(K), 3);
    for (int k = 0; k < K; ++k) {
      pooled[static_cast<std::size_t>(k)][0] = pooled_fi[static_cast<std::size_t>(k)][0];
      pooled[static_cast<std::size_t>(k)][1] = pooled_fi[static_cast<std::size_t>(k)][1];
      pooled[static_cast<std::size_t>(k)][2] = pooled_dur[static_cast<std::size_t>(k)][0];
    }
  } else {
    pooled = zeros(static_cast<std::size_t>(K), 3);
    for (int k = 0; k < K; ++k) {
      const auto& span = input.nuclei[static_cast<std::size_t>(k)];
      double f0 = 0.0, inten = 0.0;
      if (span.first_frame >= 0) {
        const int n = span.last_frame - span.first_frame + 1;
        for (int t = span.first_frame; t <= span.last_frame; ++t) {
          f0 += input.frame_values(t, 0);
          inten += input.frame_values(t, 1);
        }
        f0 /= n;
        inten /= n;
      } else {
        f0 = input.frame_values(span.fallback_frame, 0);
        inten = input.frame_values(span.fallback_frame, 1);
      }
      pooled[static_cast<std::size_t>(k)] = {f0, inten, span.scaled_duration};
    }
  }
  res.pooled = pooled;

  // Differential ratios: own features and quotients with both neighbors.
  Mat ratios = zeros(static_cast<std::size_t>(K), 9);
  for (int k = 0; k < K; ++k) {
    for (int c = 0; c < 3; ++c) {
      const double own = pooled[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)];
      ratios[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)] = own;
      ratios[static_cast<std::size_t>(k)][static_cast<std::size_t>(3 + c)] =
          k > 0 ? own / std::max(pooled[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(c)], 1e-6)
                : 1.0;
      ratios[static_cast<std::size_t>(k)][static_cast<std::size_t>(6 + c)] =
          k + 1 < K
              ? own / std::max(pooled[static_cast<std::size_t>(k + 1)][static_cast<std::size_t>(c)], 1e-6)
              : 1.0;
    }
  }

  // Head: three tanh layers, linear output, softmax.
  res.posterior.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    Vec a0 = affine(ratios[static_cast<std::size_t>(k)], p.hidden_w0, p.hidden_b0);
    for (double& v : a0) v = std::tanh(v);
    Vec a1 = affine(a0, p.hidden_w1, p.hidden_b1);
    for (double& v : a1) v = std::tanh(v);
    Vec a2 = affine(a1, p.hidden_w2, p.hidden_b2);
    for (double& v : a2) v = std::tanh(v);
    Vec logits = affine(a2, p.out_w, p.out_b);
    softmax_row(logits);
    res.posterior[static_cast<std::size_t>(k)] = logits;
  }
  return res;
}

}  // namespace naive
