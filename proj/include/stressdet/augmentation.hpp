// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stressdet/parallel.hpp"
#include "stressdet/training.hpp"

namespace stressdet {

/// Stand-in for a voice: pitch register, speaking rate, loudness and a
/// master noise scale multiplying all jitter components.
struct SpeakerProfile {
  std::string id;
  double base_f0_hz = 180.0;     // [75, 400]
  double rate = 1.0;             // [0.7, 1.4] duration multiplier
  double base_intensity_db = 65.0;
  double jitter = 0.12;          // [0, 0.3] relative-noise std
};

/// How realized stress shapes prosody. The magnitudes are engineering
/// defaults, configurable per corpus; stressed syllables come out longer,
/// louder and higher-pitched, unstressed canonical vowels may reduce to
/// schwa in the transcript.
struct StressEffects {
  double duration_mult = 1.5;     // on the stressed syllable's nucleus
  double f0_mult = 1.25;          // plateau over stressed syllables
  double intensity_add_db = 6.0;  // plateau over stressed syllables
  double reduction_prob = 0.8;    // schwa substitution, keyed on canonical

  // Stress also stretches the rest of its syllable (onset/coda), a cue a
  // fixed nucleus region never sees.
  double consonant_duration_mult = 1.55;

  double declination = 0.05;      // relative F0 drop across the word
  double vowel_base_s = 0.090;
  double consonant_base_s = 0.060;

  // Noise shape; each sigma scales with the speaker's jitter. Segment
  // (per-phoneme) noise dominates frame noise: a single fixed region
  // inherits its segment's offset in full, pooling across a syllable
  // averages it away.
  double duration_jitter = 2.6;        // lognormal sigma per phoneme
  double segment_f0_jitter = 1.4;      // lognormal sigma per phoneme
  double frame_f0_jitter = 0.15;       // lognormal sigma per frame
  double segment_intensity_db = 38.0;  // additive dB sigma per phoneme
  double frame_intensity_db = 4.0;     // additive dB sigma per frame
};

struct CorpusSpec {
  std::string name = "corpus";
  Source source = Source::human;
  int speakers = 1;
  int total_words = 100;
  double error_rate = 0.5;  // probability a realized pattern differs
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> lexicon;  // (word, entry)
  std::optional<SpeakerProfile> fixed_speaker;  // single-voice corpora
  StressEffects effects;
};

/// The built-in multi-syllable word list used when a spec has no lexicon.
const std::vector<std::pair<std::string, std::string>>& builtin_lexicon();

/// Parses a corpus spec JSON document (all fields optional except name).
CorpusSpec corpus_spec_from_json_file(const std::string& path);

/// Deterministically renders one word: durations, an F0 contour with a
/// raised plateau over realized-stressed syllables plus declination, an
/// intensity track, and schwa reduction of canonically unstressed vowels
/// in the transcript. Same seed, same output.
std::pair<WordAlignment, ProsodicFeatures> synthesize_word(
    const std::string& word, const std::string& lexicon_entry,
    const StressPattern& realized, const SpeakerProfile& speaker,
    const StressEffects& effects, std::uint64_t seed);

struct CorpusSummary {
  std::string name;
  int speakers = 0;
  int words = 0;
  int unique_words = 0;
  int stress_errors = 0;
};

struct GeneratedCorpus {
  std::vector<TrainingExample> examples;
  std::vector<SpeakerProfile> speaker_profiles;
  CorpusSummary summary;
};

/// Draws realized patterns (canonical with probability 1 - error_rate,
/// otherwise a uniformly random different single-stress pattern) and
/// renders every token with a per-token derived seed, so generation is
/// reproducible and parallelizable.
GeneratedCorpus generate_corpus(const CorpusSpec& spec,
                                Exec exec = Exec::parallel);

/// Writes alignments.jsonl, features.jsonl and manifest.json under dir.
void write_corpus(const GeneratedCorpus& corpus, const std::string& dir,
                  const std::string& split = "train");

}  // namespace stressdet
