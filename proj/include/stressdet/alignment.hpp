// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace stressdet {

enum class Half : std::uint8_t { left = 0, right = 1 };
enum class Source : std::uint8_t { human = 0, synthetic = 1 };

std::string to_string(Source s);
Source source_from_string(const std::string& s);

/// One aligned phoneme. Symbols come from the fixed ARPAbet inventory;
/// intervals of consecutive phonemes in a word are contiguous.
struct Phoneme {
  int id = 0;          // arpabet id, 0 reserved for padding
  bool is_vowel = false;
  double start_s = 0.0;
  double end_s = 0.0;

  double duration_s() const { return end_s - start_s; }
};

/// Temporal half of a phoneme; the key-sequence granularity of the model.
struct SubPhoneme {
  int phoneme_index = 0;
  Half half = Half::left;
  int syllable_index = 0;
  double start_s = 0.0;
  double end_s = 0.0;

  double duration_s() const { return end_s - start_s; }
};

/// Contiguous phoneme span holding exactly one vowel (the nucleus).
struct Syllable {
  int index = 0;
  int first_phoneme = 0;
  int last_phoneme = 0;  // inclusive
  int nucleus = 0;       // absolute phoneme index of the span's vowel
};

/// Per-syllable stressed/unstressed flags. Canonical patterns carry
/// exactly one stressed syllable; realized patterns are unconstrained.
struct StressPattern {
  std::vector<std::uint8_t> flags;

  std::size_t size() const { return flags.size(); }
  int stressed_count() const;
  bool operator==(const StressPattern&) const = default;
};

struct WordAlignment {
  std::string word;
  std::string uid;         // stable per-token id used to join feature records
  std::string speaker_id;
  std::vector<Phoneme> phonemes;
  std::vector<Syllable> syllables;
  StressPattern canonical;
  std::optional<StressPattern> realized;
  Source source = Source::human;

  int syllable_count() const { return static_cast<int>(syllables.size()); }
  double start_s() const { return phonemes.front().start_s; }
  double end_s() const { return phonemes.back().end_s; }
  double duration_s() const { return end_s() - start_s(); }
};

struct LexiconEntry {
  std::vector<int> phoneme_ids;  // digits stripped
  StressPattern canonical;
};

/// Parses a stress-marked ARPAbet string ("G AA1 R AA0 ZH"). Digit 1 maps
/// to stressed; digits 0 and 2 map to unstressed. Rejects unknown symbols,
/// vowels without a digit, and entries with fewer than two vowels.
LexiconEntry parse_lexicon_entry(const std::string& entry);

/// Groups phonemes into one syllable per vowel. Consonant runs attach to
/// the following vowel's syllable; trailing consonants join the last one.
std::vector<Syllable> syllabify(const std::vector<Phoneme>& phonemes);

/// Splits every phoneme at its temporal midpoint, two sub-phonemes per
/// phoneme, each inheriting the parent's syllable index.
std::vector<SubPhoneme> split_subphonemes(const WordAlignment& alignment);

/// Checks all structural invariants (intervals, syllable partition,
/// canonical pattern shape); throws std::invalid_argument on violation.
void validate_alignment(const WordAlignment& alignment);

/// Line-delimited JSON alignment files, one word per record.
std::vector<WordAlignment> read_alignment_file(const std::string& path);
void write_alignment_file(const std::vector<WordAlignment>& alignments,
                          const std::string& path);

std::string alignment_to_json_line(const WordAlignment& alignment);
WordAlignment alignment_from_json_line(const std::string& line);

}  // namespace stressdet
