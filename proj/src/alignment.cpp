// SPDX-License-Identifier: Apache-2.0
#include "stressdet/alignment.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "stressdet/arpabet.hpp"

namespace stressdet {

using nlohmann::json;

std::string to_string(Source s) {
  return s == Source::human ? "human" : "synthetic";
}

Source source_from_string(const std::string& s) {
  if (s == "human") return Source::human;
  if (s == "synthetic") return Source::synthetic;
  throw std::invalid_argument("unknown source tag '" + s + "'");
}

int StressPattern::stressed_count() const {
  int n = 0;
  for (auto f : flags) n += (f != 0);
  return n;
}

LexiconEntry parse_lexicon_entry(const std::string& entry) {
  LexiconEntry out;
  std::istringstream iss(entry);
  std::string tok;
  while (iss >> tok) {
    char digit = '\0';
    if (!tok.empty() && std::isdigit(static_cast<unsigned char>(tok.back()))) {
      digit = tok.back();
      tok.pop_back();
    }
    auto id = arpabet::symbol_id(tok);
    if (!id) {
      throw std::invalid_argument("unknown ARPAbet symbol '" + tok +
                                  "' in entry '" + entry + "'");
    }
    const bool vowel = arpabet::is_vowel_id(*id);
    if (vowel) {
      if (digit == '\0') {
        throw std::invalid_argument("vowel '" + tok +
                                    "' missing stress digit in entry '" +
                                    entry + "'");
      }
      if (digit != '0' && digit != '1' && digit != '2') {
        throw std::invalid_argument("invalid stress digit '" +
                                    std::string(1, digit) + "' in entry '" +
                                    entry + "'");
      }
      out.canonical.flags.push_back(digit == '1' ? 1 : 0);
    } else if (digit != '\0') {
      throw std::invalid_argument("unknown ARPAbet symbol '" + tok + digit +
                                  "' in entry '" + entry + "'");
    }
    out.phoneme_ids.push_back(*id);
  }
  if (out.canonical.size() < 2) {
    throw std::invalid_argument("entry '" + entry +
                                "' has fewer than two vowels (one-syllable "
                                "words are not supported)");
  }
  return out;
}

std::vector<Syllable> syllabify(const std::vector<Phoneme>& phonemes) {
  std::vector<int> nuclei;
  for (int i = 0; i < static_cast<int>(phonemes.size()); ++i) {
    if (phonemes[i].is_vowel) nuclei.push_back(i);
  }
  if (nuclei.empty()) {
    throw std::invalid_argument("cannot syllabify a word with zero vowels");
  }
  std::vector<Syllable> out(nuclei.size());
  int start = 0;
  for (int k = 0; k < static_cast<int>(nuclei.size()); ++k) {
    const bool last = k + 1 == static_cast<int>(nuclei.size());
    // Span runs through the nucleus; following consonants belong to the
    // next syllable (onset assignment) except at the end of the word.
    const int end = last ? static_cast<int>(phonemes.size()) - 1 : nuclei[k];
    out[k] =
        Syllable{.index = k, .first_phoneme = start, .last_phoneme = end,
                 .nucleus = nuclei[k]};
    start = end + 1;
  }
  return out;
}

std::vector<SubPhoneme> split_subphonemes(const WordAlignment& alignment) {
  std::vector<int> syllable_of(alignment.phonemes.size(), 0);
  for (const auto& syl : alignment.syllables) {
    for (int p = syl.first_phoneme; p <= syl.last_phoneme; ++p) {
      syllable_of[static_cast<std::size_t>(p)] = syl.index;
    }
  }
  std::vector<SubPhoneme> out;
  out.reserve(alignment.phonemes.size() * 2);
  for (int i = 0; i < static_cast<int>(alignment.phonemes.size()); ++i) {
    const auto& ph = alignment.phonemes[static_cast<std::size_t>(i)];
    const double mid = ph.start_s + 0.5 * (ph.end_s - ph.start_s);
    const int syl = syllable_of[static_cast<std::size_t>(i)];
    out.push_back({i, Half::left, syl, ph.start_s, mid});
    out.push_back({i, Half::right, syl, mid, ph.end_s});
  }
  return out;
}

void validate_alignment(const WordAlignment& a) {
  const std::string where = "word '" + a.word + "'";
  if (a.phonemes.empty()) {
    throw std::invalid_argument(where + ": no phonemes");
  }
  for (std::size_t i = 0; i < a.phonemes.size(); ++i) {
    const auto& ph = a.phonemes[i];
    if (ph.id <= 0 || ph.id >= arpabet::kInventorySize) {
      throw std::invalid_argument(where + ": phoneme " + std::to_string(i) +
                                  " has invalid symbol id");
    }
    if (ph.is_vowel != arpabet::is_vowel_id(ph.id)) {
      throw std::invalid_argument(where + ": phoneme " + std::to_string(i) +
                                  " vowel flag disagrees with inventory");
    }
    if (!(ph.end_s > ph.start_s)) {
      throw std::invalid_argument(
          where + ": phoneme " + std::to_string(i) + " ('" +
          arpabet::symbol_name(ph.id) + "') has end <= start");
    }
    if (i > 0 && std::abs(ph.start_s - a.phonemes[i - 1].end_s) > 1e-9) {
      throw std::invalid_argument(where + ": phoneme " + std::to_string(i) +
                                  " does not start where its predecessor "
                                  "ends");
    }
  }
  if (a.syllables.size() < 2) {
    throw std::invalid_argument(where + ": fewer than two syllables");
  }
  int expect_first = 0;
  for (std::size_t k = 0; k < a.syllables.size(); ++k) {
    const auto& syl = a.syllables[k];
    if (syl.index != static_cast<int>(k) || syl.first_phoneme != expect_first ||
        syl.last_phoneme < syl.first_phoneme) {
      throw std::invalid_argument(where + ": syllable spans do not partition "
                                          "the phoneme sequence");
    }
    int vowels = 0;
    for (int p = syl.first_phoneme; p <= syl.last_phoneme; ++p) {
      vowels += a.phonemes[static_cast<std::size_t>(p)].is_vowel ? 1 : 0;
    }
    if (vowels != 1 ||
        !a.phonemes[static_cast<std::size_t>(syl.nucleus)].is_vowel) {
      throw std::invalid_argument(where + ": syllable " + std::to_string(k) +
                                  " does not contain exactly one vowel");
    }
    expect_first = syl.last_phoneme + 1;
  }
  if (expect_first != static_cast<int>(a.phonemes.size())) {
    throw std::invalid_argument(where +
                                ": syllables do not cover all phonemes");
  }
  if (a.canonical.size() != a.syllables.size()) {
    throw std::invalid_argument(where + ": canonical pattern length " +
                                std::to_string(a.canonical.size()) +
                                " != syllable count " +
                                std::to_string(a.syllables.size()));
  }
  if (a.canonical.stressed_count() != 1) {
    throw std::invalid_argument(where + ": canonical pattern must mark "
                                        "exactly one stressed syllable");
  }
  if (a.realized && a.realized->size() != a.syllables.size()) {
    throw std::invalid_argument(where + ": realized pattern length mismatch");
  }
}

namespace {

json pattern_to_json(const StressPattern& p) {
  json arr = json::array();
  for (auto f : p.flags) arr.push_back(static_cast<int>(f));
  return arr;
}

StressPattern pattern_from_json(const json& arr) {
  StressPattern p;
  for (const auto& v : arr) {
    const int f = v.get<int>();
    if (f != 0 && f != 1) {
      throw std::invalid_argument("stress flags must be 0 or 1");
    }
    p.flags.push_back(static_cast<std::uint8_t>(f));
  }
  return p;
}

}  // namespace

std::string alignment_to_json_line(const WordAlignment& a) {
  json rec;
  rec["word"] = a.word;
  rec["uid"] = a.uid;
  rec["speaker_id"] = a.speaker_id;
  json phones = json::array();
  for (const auto& ph : a.phonemes) {
    phones.push_back({{"symbol", arpabet::symbol_name(ph.id)},
                      {"start_s", ph.start_s},
                      {"end_s", ph.end_s}});
  }
  rec["phones"] = std::move(phones);
  rec["canonical"] = pattern_to_json(a.canonical);
  if (a.realized) rec["realized"] = pattern_to_json(*a.realized);
  rec["source"] = to_string(a.source);
  return rec.dump();
}

WordAlignment alignment_from_json_line(const std::string& line) {
  const json rec = json::parse(line);
  WordAlignment a;
  a.word = rec.at("word").get<std::string>();
  a.uid = rec.value("uid", "");
  a.speaker_id = rec.value("speaker_id", "");
  for (const auto& ph : rec.at("phones")) {
    const auto symbol = ph.at("symbol").get<std::string>();
    auto id = arpabet::symbol_id(symbol);
    if (!id) {
      throw std::invalid_argument("word '" + a.word +
                                  "': unknown phoneme symbol '" + symbol +
                                  "'");
    }
    a.phonemes.push_back(Phoneme{.id = *id,
                                 .is_vowel = arpabet::is_vowel_id(*id),
                                 .start_s = ph.at("start_s").get<double>(),
                                 .end_s = ph.at("end_s").get<double>()});
  }
  a.syllables = syllabify(a.phonemes);
  a.canonical = pattern_from_json(rec.at("canonical"));
  if (rec.contains("realized")) {
    a.realized = pattern_from_json(rec.at("realized"));
  }
  a.source = source_from_string(rec.value("source", "human"));
  validate_alignment(a);
  return a;
}

std::vector<WordAlignment> read_alignment_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open alignment file '" + path + "'");
  }
  std::vector<WordAlignment> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(alignment_from_json_line(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ": record " + std::to_string(lineno) +
                               ": " + e.what());
    }
  }
  return out;
}

void write_alignment_file(const std::vector<WordAlignment>& alignments,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write alignment file '" + path + "'");
  }
  for (const auto& a : alignments) {
    validate_alignment(a);
    out << alignment_to_json_line(a) << '\n';
  }
  if (!out) {
    throw std::runtime_error("short write to alignment file '" + path + "'");
  }
}

}  // namespace stressdet
