// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace stressdet {

/// Mono 16 kHz audio in [-1, 1]. The pipeline rejects anything else at
/// load time rather than resampling.
struct AudioSignal {
  std::vector<double> samples;
  int sample_rate = 16000;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

constexpr int kRequiredSampleRate = 16000;

/// Reads a 16-bit PCM mono RIFF/WAVE file. Throws std::runtime_error with
/// an explicit message (including a resample hint) on any other format.
AudioSignal read_wav(const std::string& path);

/// Writes 16-bit PCM mono. Used by the fixture generators and tests.
void write_wav(const AudioSignal& audio, const std::string& path);

}  // namespace stressdet
