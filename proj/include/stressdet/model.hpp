// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "stressdet/alignment.hpp"
#include "stressdet/prosody.hpp"

namespace stressdet {

struct ModelConfig {
  int max_syllables = 6;
  int gru_units = 4;
  int head_units = 4;
  double dropout = 0.24;
  int phoneme_inventory = 40;  // pad + 39 ARPAbet symbols
  bool use_attention = true;   // false: nucleus-mean baseline feeds the head

  // Key/query width equals max_syllables: queries are one-hot syllable
  // positions, so the dot product fixes d_k.
  int d_k() const { return max_syllables; }
  int input_dim() const { return phoneme_inventory + max_syllables + 4; }
};

/// All trainable tensors. Row-vector convention: y = x * W + b, biases are
/// 1 x n. The same struct doubles as the gradient accumulator.
struct ModelParameters {
  Eigen::MatrixXd gru_wz, gru_uz, gru_bz;
  Eigen::MatrixXd gru_wr, gru_ur, gru_br;
  Eigen::MatrixXd gru_wh, gru_uh, gru_bh;
  Eigen::MatrixXd key_frame_w, key_frame_b;
  Eigen::MatrixXd key_phone_w, key_phone_b;
  Eigen::MatrixXd hidden_w0, hidden_b0;
  Eigen::MatrixXd hidden_w1, hidden_b1;
  Eigen::MatrixXd hidden_w2, hidden_b2;
  Eigen::MatrixXd out_w, out_b;
};

/// Visits every tensor with a stable name, in a fixed order shared by
/// initialization, SGD, checkpoints and the gradient checker.
template <typename Params, typename Fn>
void visit_tensors(Params& p, Fn&& fn) {
  fn("gru.wz", p.gru_wz); fn("gru.uz", p.gru_uz); fn("gru.bz", p.gru_bz);
  fn("gru.wr", p.gru_wr); fn("gru.ur", p.gru_ur); fn("gru.br", p.gru_br);
  fn("gru.wh", p.gru_wh); fn("gru.uh", p.gru_uh); fn("gru.bh", p.gru_bh);
  fn("key_frame.w", p.key_frame_w); fn("key_frame.b", p.key_frame_b);
  fn("key_phone.w", p.key_phone_w); fn("key_phone.b", p.key_phone_b);
  fn("hidden0.w", p.hidden_w0); fn("hidden0.b", p.hidden_b0);
  fn("hidden1.w", p.hidden_w1); fn("hidden1.b", p.hidden_b1);
  fn("hidden2.w", p.hidden_w2); fn("hidden2.b", p.hidden_b2);
  fn("out.w", p.out_w); fn("out.b", p.out_b);
}

/// Uniform(-0.1, 0.1) initialization, deterministic in the seed.
ModelParameters init_parameters(const ModelConfig& config, std::uint64_t seed);
ModelParameters zero_parameters(const ModelConfig& config);

/// Checks every tensor shape against the config; throws on mismatch.
void validate_shapes(const ModelParameters& p, const ModelConfig& config);

/// One word, ready for the network: sub-phoneme symbol features plus the
/// scaled acoustic tracks. Positions at index >= valid_* are zero padding
/// and are masked out of the attention softmax.
struct NucleusSpan {
  int first_frame = -1;  // inclusive; -1 when no frame hits the nucleus
  int last_frame = -1;
  int fallback_frame = 0;  // nearest frame, used when the span is empty
  double scaled_duration = 0.0;
};

struct ModelInput {
  std::vector<int> phoneme_ids;
  std::vector<int> syllable_indices;
  std::vector<std::uint8_t> vowel_flags;
  std::vector<std::uint8_t> right_half_flags;
  Eigen::MatrixXd frame_values;          // T x 2: scaled F0, scaled intensity
  Eigen::VectorXd subphoneme_durations;  // L, scaled
  std::vector<int> frame_to_subphoneme;  // T
  std::vector<NucleusSpan> nuclei;       // per syllable
  int syllable_count = 0;
  int valid_frames = 0;
  int valid_subphonemes = 0;

  int frame_count() const { return static_cast<int>(frame_values.rows()); }
  int subphoneme_count() const { return static_cast<int>(phoneme_ids.size()); }
};

ModelInput make_model_input(const WordAlignment& alignment,
                            const ProsodicFeatures& features);

/// Extends the sequences to the given lengths with padding symbols / zero
/// rows; valid_* keep the original lengths.
void pad_model_input(ModelInput& input, int frame_target, int subphoneme_target);

/// Inverted-dropout mask source; masks are a deterministic function of the
/// seed and the draw order inside one forward pass.
class DropoutSampler {
 public:
  DropoutSampler(double rate, std::uint64_t seed) : rate_(rate), engine_(seed) {}
  Eigen::MatrixXd mask(Eigen::Index rows, Eigen::Index cols);

 private:
  double rate_;
  std::mt19937_64 engine_;
};

struct AttentionResult {
  Eigen::MatrixXd output;   // n_q x d_v
  Eigen::MatrixXd weights;  // n_q x n_k, rows sum to 1
};

/// softmax(Q K^T / sqrt(d_k)) V with d_k = Q.cols(). Key positions at
/// index >= valid_keys (when >= 0) receive -inf logits and weight 0.
AttentionResult dot_product_attention(const Eigen::MatrixXd& queries,
                                      const Eigen::MatrixXd& keys,
                                      const Eigen::MatrixXd& values,
                                      int valid_keys = -1);

/// Replicates sub-phoneme rows across their aligned frames.
Eigen::MatrixXd upsample_to_frames(const Eigen::MatrixXd& rows,
                                   const std::vector<int>& frame_to_subphoneme);

/// Everything the backward pass needs from one forward evaluation.
struct ForwardCache {
  Eigen::MatrixXd x;                       // L x D one-hot inputs
  Eigen::MatrixXd gate_z, gate_r, cand, h; // L x G
  Eigen::MatrixXd gru_mask;                // L x G dropout multipliers
  Eigen::MatrixXd h_dropped;               // L x G
  Eigen::MatrixXd keys_frame, keys_phone;  // L x d_k
  Eigen::MatrixXd queries;                 // K x d_k
  Eigen::MatrixXd att_frame, att_phone;    // weight matrices
  Eigen::MatrixXd pooled;                  // K x 3
  Eigen::MatrixXd ratios;                  // K x 9
  Eigen::MatrixXd act0, act1, act2;        // K x H tanh outputs (pre-dropout)
  Eigen::MatrixXd mask0, mask1, mask2;     // dropout multipliers
  Eigen::MatrixXd logits_raw;              // K x 2 pre-dropout
  Eigen::MatrixXd mask_out;                // K x 2
  Eigen::MatrixXd posterior;               // K x 2
};

struct SubPhonemeEncoding {
  Eigen::MatrixXd gru_output;  // L x G, after dropout when training
  Eigen::MatrixXd keys_frame;  // L x d_k
  Eigen::MatrixXd keys_phone;  // L x d_k
};

/// One-hot featurization -> single GRU layer -> one linear key projection
/// per attention. Throws when a syllable index >= max_syllables.
SubPhonemeEncoding encode_subphonemes(const ModelInput& input,
                                      const ModelConfig& config,
                                      const ModelParameters& params,
                                      DropoutSampler* dropout = nullptr,
                                      ForwardCache* cache = nullptr);

/// Both attentions: frame-level pools (F0, intensity), phoneme-level pools
/// durations; concatenation gives the K x 3 syllable feature matrix.
Eigen::MatrixXd pool_syllable_features(const ModelInput& input,
                                       const SubPhonemeEncoding& encoding,
                                       const ModelConfig& config,
                                       ForwardCache* cache = nullptr);

/// Nucleus-mean syllable features for the no-attention baseline.
Eigen::MatrixXd nucleus_feature_matrix(const ModelInput& input);

/// K x 9: own features, own/left-neighbor, own/right-neighbor ratios.
/// Word-edge ratios are 1; denominators clamp at 1e-6. No parameters.
Eigen::MatrixXd differential_bidirectional(const Eigen::MatrixXd& syllable_features);

/// Three tanh dense layers then a linear 2-unit layer, dropout on each
/// during training, row-wise softmax over the two classes.
Eigen::MatrixXd classify_head(const Eigen::MatrixXd& ratios,
                              const ModelParameters& params,
                              DropoutSampler* dropout = nullptr,
                              ForwardCache* cache = nullptr);

struct ForwardResult {
  Eigen::MatrixXd posterior;          // K x 2 (columns: unstressed, stressed)
  Eigen::MatrixXd frame_attention;    // K x T (empty for the baseline)
  Eigen::MatrixXd phone_attention;    // K x L (empty for the baseline)
  Eigen::MatrixXd syllable_features;  // K x 3
};

/// Full forward pass. train_mode enables dropout with masks derived from
/// dropout_seed; inference is deterministic. Pass a cache to later call
/// backward() on the same evaluation.
ForwardResult forward(const ModelInput& input, const ModelParameters& params,
                      const ModelConfig& config, bool train_mode = false,
                      std::uint64_t dropout_seed = 0,
                      ForwardCache* cache = nullptr);

/// Accumulates exact loss gradients into grad, given the gradient of the
/// loss with respect to the post-dropout output logits (softmax and NLL
/// fold into (posterior - onehot) / count there).
void backward(const ModelInput& input, const ModelParameters& params,
              const ModelConfig& config, const ForwardCache& cache,
              const Eigen::MatrixXd& dlogits, ModelParameters& grad);

}  // namespace stressdet
