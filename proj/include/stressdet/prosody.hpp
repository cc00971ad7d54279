// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stressdet/alignment.hpp"
#include "stressdet/audio.hpp"
#include "stressdet/parallel.hpp"

namespace stressdet {

/// 10 ms hop / 40 ms analysis window, frames centered inside the span.
struct FrameGrid {
  double start_s = 0.0;
  int frame_count = 0;
  double hop_s = 0.010;
  double window_s = 0.040;

  double center_s(int i) const { return start_s + (i + 0.5) * hop_s; }
};

/// Grid covering [start, end) with frame_count = floor(duration / hop).
FrameGrid word_frame_grid(double start_s, double end_s);

struct PitchConfig {
  double min_f0_hz = 75.0;
  double max_f0_hz = 500.0;
  double voicing_threshold = 0.45;  // normalized autocorrelation peak
  double silence_rms_floor = 1e-4;
  double octave_cost = 0.01;        // per octave above the smallest lag
  double unvoiced_fill_hz = 100.0;  // used when a word has no voiced frame
};

struct PitchTrack {
  std::vector<double> f0_hz;        // 0 placeholder on unvoiced frames
  std::vector<std::uint8_t> voiced;
};

/// Autocorrelation pitch per frame. Peak picking prefers the smallest lag
/// among near-equal local maxima (octave cost) and refines the winning lag
/// parabolically. Frames below the silence floor or peak threshold are
/// unvoiced. Throws if the audio is shorter than one analysis window.
PitchTrack compute_f0(const AudioSignal& audio, const FrameGrid& grid,
                      const PitchConfig& config = {},
                      Exec exec = Exec::parallel);

/// Linear interpolation across unvoiced gaps; leading/trailing gaps hold
/// the nearest voiced value. Returns true when the track had no voiced
/// frame at all and was filled with config.unvoiced_fill_hz.
bool interpolate_unvoiced(std::vector<double>& f0_hz,
                          const std::vector<std::uint8_t>& voiced,
                          double fill_hz = 100.0);

/// Per-frame 20*log10(RMS + 1e-10) + 100, clamped to >= 0. Positive-shifted
/// dB relative to full scale; absolute SPL calibration is not attempted.
std::vector<double> compute_intensity(const AudioSignal& audio,
                                      const FrameGrid& grid,
                                      Exec exec = Exec::parallel);

/// Frame-level F0/intensity plus per-sub-phoneme durations for one word.
/// Tracks are stored in physical units; the model consumes the scaled_*
/// views below.
struct ProsodicFeatures {
  std::string uid;
  std::vector<double> f0_hz;
  std::vector<double> intensity_db;
  std::vector<std::uint8_t> voiced;
  std::vector<double> subphoneme_durations_s;
  std::vector<int> frame_to_subphoneme;
  bool f0_fallback = false;  // no voiced frame; track filled with a default

  int frame_count() const { return static_cast<int>(f0_hz.size()); }
};

// Fixed scaling that brings the three feature families to comparable,
// strictly positive magnitudes for the ratio layer.
constexpr double kF0Scale = 500.0;        // Hz
constexpr double kIntensityScale = 100.0; // dB
constexpr double kDurationScale = 0.5;    // seconds

std::vector<double> scaled_f0(const ProsodicFeatures& f);
std::vector<double> scaled_intensity(const ProsodicFeatures& f);
std::vector<double> scaled_durations(const ProsodicFeatures& f);

/// Runs pitch, interpolation and intensity over the word's span and maps
/// every frame center to its sub-phoneme (the last sub-phoneme absorbs
/// tail frames). Throws when the alignment lies outside the audio or the
/// span is shorter than one frame.
ProsodicFeatures extract_features(const AudioSignal& audio,
                                  const WordAlignment& alignment,
                                  const PitchConfig& config = {},
                                  Exec exec = Exec::parallel);

/// Line-delimited JSON feature records, floats at 6 significant digits;
/// write -> read -> write is byte-identical.
std::vector<ProsodicFeatures> read_feature_file(const std::string& path);
void write_feature_file(const std::vector<ProsodicFeatures>& records,
                        const std::string& path);

std::string features_to_json_line(const ProsodicFeatures& f);
ProsodicFeatures features_from_json_line(const std::string& line);

/// Rounds to `digits` significant decimal digits (the feature-file grid).
double round_sig(double value, int digits);

}  // namespace stressdet
