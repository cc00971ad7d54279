// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "stressdet/model.hpp"

namespace stressdet {

struct Checkpoint {
  ModelConfig config;
  ModelParameters params;
};

/// Versioned JSON document: config, named row-major weight tensors and a
/// content checksum. Loading validates the checksum and every tensor shape
/// against the stored config.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Attention weights as CSV, one row per syllable, one column per frame
/// (or sub-phoneme) for heatmap rendering.
void write_attention_csv(const Eigen::MatrixXd& weights, const std::string& path);

}  // namespace stressdet
