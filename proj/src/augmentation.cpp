// SPDX-License-Identifier: Apache-2.0
#include "stressdet/augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "stressdet/arpabet.hpp"
#include "stressdet/rng.hpp"

namespace stressdet {

using nlohmann::json;

namespace {

constexpr std::uint64_t kStreamSpeaker = 0x53504b52;
constexpr std::uint64_t kStreamToken = 0x544f4b4e;
constexpr std::uint64_t kStreamSynth = 0x53594e54;

}  // namespace

const std::vector<std::pair<std::string, std::string>>& builtin_lexicon() {
  static const std::vector<std::pair<std::string, std::string>> lex = {
      {"about", "AH0 B AW1 T"},
      {"ago", "AH0 G OW1"},
      {"allow", "AH0 L AW1"},
      {"attack", "AH0 T AE1 K"},
      {"balloon", "B AH0 L UW1 N"},
      {"begin", "B IH0 G IH1 N"},
      {"believe", "B IH0 L IY1 V"},
      {"complete", "K AH0 M P L IY1 T"},
      {"control", "K AH0 N T R OW1 L"},
      {"decide", "D IH0 S AY1 D"},
      {"effect", "IH0 F EH1 K T"},
      {"event", "IH0 V EH1 N T"},
      {"forget", "F ER0 G EH1 T"},
      {"garage", "G ER0 AA1 ZH"},
      {"guitar", "G IH0 T AA1 R"},
      {"hotel", "HH OW0 T EH1 L"},
      {"machine", "M AH0 SH IY1 N"},
      {"mistake", "M IH0 S T EY1 K"},
      {"perhaps", "P ER0 HH AE1 P S"},
      {"police", "P AH0 L IY1 S"},
      {"prepare", "P R IH0 P EH1 R"},
      {"protect", "P R AH0 T EH1 K T"},
      {"receive", "R IH0 S IY1 V"},
      {"remind", "R IH0 M AY1 N D"},
      {"report", "R IH0 P AO1 R T"},
      {"respect", "R IH0 S P EH1 K T"},
      {"return", "R IH0 T ER1 N"},
      {"succeed", "S AH0 K S IY1 D"},
      {"suggest", "S AH0 G JH EH1 S T"},
      {"support", "S AH0 P AO1 R T"},
      {"surprise", "S ER0 P R AY1 Z"},
      {"survive", "S ER0 V AY1 V"},
      {"answer", "AE1 N S ER0"},
      {"better", "B EH1 T ER0"},
      {"pencil", "P EH1 N S AH0 L"},
      {"carry", "K AE1 R IY0"},
      {"center", "S EH1 N T ER0"},
      {"children", "CH IH1 L D R AH0 N"},
      {"coffee", "K AA1 F IY0"},
      {"corner", "K AO1 R N ER0"},
      {"doctor", "D AA1 K T ER0"},
      {"early", "ER1 L IY0"},
      {"father", "F AA1 DH ER0"},
      {"finger", "F IH1 NG G ER0"},
      {"flower", "F L AW1 ER0"},
      {"forest", "F AO1 R AH0 S T"},
      {"garden", "G AA1 R D AH0 N"},
      {"happy", "HH AE1 P IY0"},
      {"interest", "IH1 N T R AH0 S T"},
      {"kitchen", "K IH1 CH AH0 N"},
      {"language", "L AE1 NG G W AH0 JH"},
      {"letter", "L EH1 T ER0"},
      {"listen", "L IH1 S AH0 N"},
      {"market", "M AA1 R K AH0 T"},
      {"morning", "M AO1 R N IH0 NG"},
      {"mountain", "M AW1 N T AH0 N"},
      {"music", "M Y UW1 Z IH0 K"},
      {"reason", "R IY1 Z AH0 N"},
      {"office", "AO1 F AH0 S"},
      {"open", "OW1 P AH0 N"},
      {"paper", "P EY1 P ER0"},
      {"people", "P IY1 P AH0 L"},
      {"picture", "P IH1 K CH ER0"},
      {"present", "P R EH1 Z AH0 N T"},
      {"problem", "P R AA1 B L AH0 M"},
      {"question", "K W EH1 S CH AH0 N"},
      {"record", "R EH1 K ER0 D"},
      {"river", "R IH1 V ER0"},
      {"sister", "S IH1 S T ER0"},
      {"season", "S IY1 Z AH0 N"},
      {"silver", "S IH1 L V ER0"},
      {"table", "T EY1 B AH0 L"},
      {"teacher", "T IY1 CH ER0"},
      {"temperature", "T EH1 M P R AH0 CH ER0"},
      {"water", "W AO1 T ER0"},
      {"window", "W IH1 N D OW0"},
      {"winter", "W IH1 N T ER0"},
      {"yellow", "Y EH1 L OW0"},
      {"animal", "AE1 N AH0 M AH0 L"},
      {"area", "EH1 R IY0 AH0"},
      {"attention", "AH0 T EH1 N SH AH0 N"},
      {"banana", "B AH0 N AE1 N AH0"},
      {"beautiful", "B Y UW1 T AH0 F AH0 L"},
      {"camera", "K AE1 M ER0 AH0"},
      {"melody", "M EH1 L AH0 D IY0"},
      {"computer", "K AH0 M P Y UW1 T ER0"},
      {"consider", "K AH0 N S IH1 D ER0"},
      {"develop", "D IH0 V EH1 L AH0 P"},
      {"different", "D IH1 F ER0 AH0 N T"},
      {"eleven", "IH0 L EH1 V AH0 N"},
      {"energy", "EH1 N ER0 JH IY0"},
      {"engineer", "EH2 N JH AH0 N IH1 R"},
      {"example", "IH0 G Z AE1 M P AH0 L"},
      {"family", "F AE1 M AH0 L IY0"},
      {"building", "B IH1 L D IH0 NG"},
      {"history", "HH IH1 S T ER0 IY0"},
      {"hospital", "HH AA1 S P IH0 T AH0 L"},
      {"however", "HH AW0 EH1 V ER0"},
      {"important", "IH0 M P AO1 R T AH0 N T"},
      {"industry", "IH1 N D AH0 S T R IY0"},
      {"magazine", "M AE1 G AH0 Z IY2 N"},
      {"medicine", "M EH1 D AH0 S AH0 N"},
      {"musician", "M Y UW0 Z IH1 SH AH0 N"},
      {"natural", "N AE1 CH ER0 AH0 L"},
      {"opposite", "AA1 P AH0 Z AH0 T"},
      {"position", "P AH0 Z IH1 SH AH0 N"},
      {"potato", "P AH0 T EY1 T OW2"},
      {"president", "P R EH1 Z AH0 D AH0 N T"},
      {"professor", "P R AH0 F EH1 S ER0"},
      {"quality", "K W AA1 L AH0 T IY0"},
      {"remember", "R IH0 M EH1 M B ER0"},
      {"several", "S EH1 V ER0 AH0 L"},
      {"telephone", "T EH1 L AH0 F OW2 N"},
      {"together", "T AH0 G EH1 DH ER0"},
      {"tomorrow", "T AH0 M AA1 R OW0"},
      {"umbrella", "AH0 M B R EH1 L AH0"},
      {"understand", "AH2 N D ER0 S T AE1 N D"},
      {"visitor", "V IH1 Z IH0 T ER0"},
      {"volunteer", "V AA2 L AH0 N T IH1 R"},
      {"yesterday", "Y EH1 S T ER0 D EY2"},
      {"america", "AH0 M EH1 R AH0 K AH0"},
      {"community", "K AH0 M Y UW1 N AH0 T IY0"},
      {"democracy", "D IH0 M AA1 K R AH0 S IY0"},
      {"economy", "IH0 K AA1 N AH0 M IY0"},
      {"education", "EH2 JH AH0 K EY1 SH AH0 N"},
      {"experience", "IH0 K S P IH1 R IY0 AH0 N S"},
      {"geography", "JH IY0 AA1 G R AH0 F IY0"},
      {"information", "IH2 N F ER0 M EY1 SH AH0 N"},
      {"intelligent", "IH0 N T EH1 L AH0 JH AH0 N T"},
      {"material", "M AH0 T IH1 R IY0 AH0 L"},
      {"necessary", "N EH1 S AH0 S EH2 R IY0"},
      {"ordinary", "AO1 R D AH0 N EH2 R IY0"},
      {"particular", "P ER0 T IH1 K Y AH0 L ER0"},
      {"photography", "F AH0 T AA1 G R AH0 F IY0"},
      {"political", "P AH0 L IH1 T AH0 K AH0 L"},
      {"security", "S IH0 K Y UH1 R AH0 T IY0"},
      {"technology", "T EH0 K N AA1 L AH0 JH IY0"},
      {"television", "T EH1 L AH0 V IH2 ZH AH0 N"},
      {"communication", "K AH0 M Y UW2 N AH0 K EY1 SH AH0 N"},
      {"electricity", "IH0 L EH0 K T R IH1 S AH0 T IY0"},
      {"examination", "IH0 G Z AE2 M AH0 N EY1 SH AH0 N"},
      {"international", "IH2 N T ER0 N AE1 SH AH0 N AH0 L"},
      {"opportunity", "AA2 P ER0 T UW1 N AH0 T IY0"},
      {"organization", "AO2 R G AH0 N AH0 Z EY1 SH AH0 N"},
      {"personality", "P ER2 S AH0 N AE1 L AH0 T IY0"},
      {"possibility", "P AA2 S AH0 B IH1 L AH0 T IY0"},
      {"pronunciation", "P R OW0 N AH2 N S IY0 EY1 SH AH0 N"},
      {"university", "Y UW2 N AH0 V ER1 S AH0 T IY0"},
  };
  return lex;
}

std::pair<WordAlignment, ProsodicFeatures> synthesize_word(
    const std::string& word, const std::string& lexicon_entry,
    const StressPattern& realized, const SpeakerProfile& speaker,
    const StressEffects& effects, std::uint64_t seed) {
  const LexiconEntry parsed = parse_lexicon_entry(lexicon_entry);
  const int K = static_cast<int>(parsed.canonical.size());
  if (static_cast<int>(realized.size()) != K) {
    throw std::invalid_argument("word '" + word + "': realized pattern has " +
                                std::to_string(realized.size()) +
                                " syllables, entry has " + std::to_string(K));
  }

  auto engine = make_engine(seed);
  const int P = static_cast<int>(parsed.phoneme_ids.size());

  // Syllable structure needs only the vowel positions (stable under
  // reduction, schwa is itself a vowel); real intervals are filled in
  // after the durations are drawn.
  std::vector<Phoneme> phonemes(static_cast<std::size_t>(P));
  for (int i = 0; i < P; ++i) {
    phonemes[static_cast<std::size_t>(i)].id = parsed.phoneme_ids[static_cast<std::size_t>(i)];
    phonemes[static_cast<std::size_t>(i)].is_vowel =
        arpabet::is_vowel_id(parsed.phoneme_ids[static_cast<std::size_t>(i)]);
    phonemes[static_cast<std::size_t>(i)].start_s = 0.1 * i;
    phonemes[static_cast<std::size_t>(i)].end_s = 0.1 * (i + 1);
  }
  std::vector<Syllable> syllables = syllabify(phonemes);

  // Transcript vowel reduction keyed on the CANONICAL pattern: an L2
  // speaker reads the canonical spelling even when the prosody is wrong.
  for (const auto& syl : syllables) {
    if (parsed.canonical.flags[static_cast<std::size_t>(syl.index)]) continue;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(engine) < effects.reduction_prob) {
      phonemes[static_cast<std::size_t>(syl.nucleus)].id = arpabet::schwa_id();
    }
  }

  std::vector<int> syllable_of(static_cast<std::size_t>(P), 0);
  std::vector<bool> is_stressed_nucleus(static_cast<std::size_t>(P), false);
  std::vector<bool> in_stressed_syllable(static_cast<std::size_t>(P), false);
  for (const auto& syl : syllables) {
    const bool stressed = realized.flags[static_cast<std::size_t>(syl.index)] != 0;
    for (int p = syl.first_phoneme; p <= syl.last_phoneme; ++p) {
      syllable_of[static_cast<std::size_t>(p)] = syl.index;
      in_stressed_syllable[static_cast<std::size_t>(p)] = stressed;
    }
    if (stressed) {
      is_stressed_nucleus[static_cast<std::size_t>(syl.nucleus)] = true;
    }
  }

  // Durations: base x rate x lognormal jitter, stressed nuclei lengthened.
  const double sigma_dur = speaker.jitter * effects.duration_jitter;
  std::vector<double> durations(static_cast<std::size_t>(P));
  for (int i = 0; i < P; ++i) {
    const double g = gaussian(engine);
    double d = (phonemes[static_cast<std::size_t>(i)].is_vowel
                    ? effects.vowel_base_s
                    : effects.consonant_base_s) *
               speaker.rate;
    d *= std::exp(sigma_dur * g);
    if (is_stressed_nucleus[static_cast<std::size_t>(i)]) {
      d *= effects.duration_mult;
    } else if (in_stressed_syllable[static_cast<std::size_t>(i)]) {
      d *= effects.consonant_duration_mult;
    }
    durations[static_cast<std::size_t>(i)] = d;
  }
  double t = 0.0;
  for (int i = 0; i < P; ++i) {
    phonemes[static_cast<std::size_t>(i)].start_s = t;
    t += durations[static_cast<std::size_t>(i)];
    phonemes[static_cast<std::size_t>(i)].end_s = t;
  }
  const double word_duration = t;

  // Per-phoneme micro-prosody offsets.
  const double sigma_seg_f0 = speaker.jitter * effects.segment_f0_jitter;
  const double sigma_seg_int = speaker.jitter * effects.segment_intensity_db;
  std::vector<double> segment_f0(static_cast<std::size_t>(P));
  std::vector<double> segment_int(static_cast<std::size_t>(P));
  for (int i = 0; i < P; ++i) segment_f0[static_cast<std::size_t>(i)] = std::exp(sigma_seg_f0 * gaussian(engine));
  for (int i = 0; i < P; ++i) segment_int[static_cast<std::size_t>(i)] = sigma_seg_int * gaussian(engine);

  WordAlignment alignment;
  alignment.word = word;
  alignment.speaker_id = speaker.id;
  alignment.phonemes = phonemes;
  alignment.syllables = syllables;
  alignment.canonical = parsed.canonical;
  alignment.realized = realized;
  alignment.source = Source::synthetic;

  const std::vector<SubPhoneme> subs = split_subphonemes(alignment);

  ProsodicFeatures features;
  const FrameGrid grid = word_frame_grid(0.0, word_duration);
  const int T = grid.frame_count;
  features.f0_hz.resize(static_cast<std::size_t>(T));
  features.intensity_db.resize(static_cast<std::size_t>(T));
  features.voiced.assign(static_cast<std::size_t>(T), 1);
  features.subphoneme_durations_s.reserve(subs.size());
  for (const auto& sp : subs) features.subphoneme_durations_s.push_back(sp.duration_s());
  features.frame_to_subphoneme.resize(static_cast<std::size_t>(T));

  const double sigma_frame_f0 = speaker.jitter * effects.frame_f0_jitter;
  const double sigma_frame_int = speaker.jitter * effects.frame_intensity_db;
  int cursor = 0;
  const int last_sub = static_cast<int>(subs.size()) - 1;
  for (int i = 0; i < T; ++i) {
    const double tc = grid.center_s(i);
    while (cursor < last_sub && tc >= subs[static_cast<std::size_t>(cursor)].end_s) ++cursor;
    features.frame_to_subphoneme[static_cast<std::size_t>(i)] = cursor;
    const int ph = subs[static_cast<std::size_t>(cursor)].phoneme_index;
    const int syl = syllable_of[static_cast<std::size_t>(ph)];
    const bool stressed = realized.flags[static_cast<std::size_t>(syl)] != 0;

    double f0 = speaker.base_f0_hz;
    if (stressed) f0 *= effects.f0_mult;
    f0 *= 1.0 - effects.declination * (tc / word_duration);
    f0 *= segment_f0[static_cast<std::size_t>(ph)];
    f0 *= std::exp(sigma_frame_f0 * gaussian(engine));
    features.f0_hz[static_cast<std::size_t>(i)] = f0;

    double inten = speaker.base_intensity_db;
    if (stressed) inten += effects.intensity_add_db;
    inten += segment_int[static_cast<std::size_t>(ph)];
    inten += sigma_frame_int * gaussian(engine);
    features.intensity_db[static_cast<std::size_t>(i)] = std::max(inten, 0.0);
  }

  return {std::move(alignment), std::move(features)};
}

GeneratedCorpus generate_corpus(const CorpusSpec& spec, Exec exec) {
  const auto& lexicon = spec.lexicon.empty() ? builtin_lexicon() : spec.lexicon;
  if (lexicon.empty()) throw std::invalid_argument("corpus spec '" + spec.name + "': empty word list");
  if (spec.total_words < 1) throw std::invalid_argument("corpus spec '" + spec.name + "': total_words must be >= 1");
  if (spec.speakers < 1) throw std::invalid_argument("corpus spec '" + spec.name + "': speakers must be >= 1");
  if (spec.error_rate < 0.0 || spec.error_rate > 1.0) {
    throw std::invalid_argument("corpus spec '" + spec.name + "': error rate outside [0, 1]");
  }

  GeneratedCorpus corpus;
  corpus.speaker_profiles.resize(static_cast<std::size_t>(spec.speakers));
  for (int s = 0; s < spec.speakers; ++s) {
    SpeakerProfile prof;
    if (spec.fixed_speaker) {
      prof = *spec.fixed_speaker;
    } else {
      auto engine = make_engine(mix_seed(spec.seed, kStreamSpeaker, static_cast<std::uint64_t>(s)));
      std::uniform_real_distribution<double> f0(110.0, 280.0);
      std::uniform_real_distribution<double> rate(0.8, 1.3);
      std::uniform_real_distribution<double> inten(55.0, 75.0);
      std::uniform_real_distribution<double> jit(0.08, 0.18);
      prof.base_f0_hz = f0(engine);
      prof.rate = rate(engine);
      prof.base_intensity_db = inten(engine);
      prof.jitter = jit(engine);
    }
    char id[64];
    std::snprintf(id, sizeof(id), "%s_spk%03d", spec.name.c_str(), s);
    prof.id = id;
    corpus.speaker_profiles[static_cast<std::size_t>(s)] = std::move(prof);
  }

  corpus.examples.resize(static_cast<std::size_t>(spec.total_words));
  parallel_for(exec, spec.total_words, [&](std::ptrdiff_t i) {
    auto engine = make_engine(mix_seed(spec.seed, kStreamToken, static_cast<std::uint64_t>(i)));
    std::uniform_int_distribution<std::size_t> pick(0, lexicon.size() - 1);
    const std::size_t word_idx = pick(engine);
    const auto& [word, entry] = lexicon[word_idx];
    const LexiconEntry parsed = parse_lexicon_entry(entry);
    const int K = static_cast<int>(parsed.canonical.size());
    int canonical_pos = 0;
    for (int k = 0; k < K; ++k) {
      if (parsed.canonical.flags[static_cast<std::size_t>(k)]) canonical_pos = k;
    }

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    StressPattern realized = parsed.canonical;
    if (unit(engine) < spec.error_rate) {
      std::uniform_int_distribution<int> shift(0, K - 2);
      int pos = shift(engine);
      if (pos >= canonical_pos) ++pos;  // uniform over the K-1 other positions
      realized.flags.assign(static_cast<std::size_t>(K), 0);
      realized.flags[static_cast<std::size_t>(pos)] = 1;
    }

    const int speaker_idx = static_cast<int>(i) % spec.speakers;
    const SpeakerProfile& speaker =
        corpus.speaker_profiles[static_cast<std::size_t>(speaker_idx)];
    auto [alignment, features] =
        synthesize_word(word, entry, realized, speaker, spec.effects,
                        mix_seed(spec.seed, kStreamSynth, static_cast<std::uint64_t>(i)));
    char uid[160];
    std::snprintf(uid, sizeof(uid), "%s_%06d_%s", speaker.id.c_str(),
                  static_cast<int>(i), word.c_str());
    alignment.uid = uid;
    alignment.source = spec.source;
    features.uid = uid;

    TrainingExample ex;
    ex.label = *alignment.realized;
    ex.alignment = std::move(alignment);
    ex.features = std::move(features);
    ex.source = spec.source;
    corpus.examples[static_cast<std::size_t>(i)] = std::move(ex);
  });

  std::set<std::string> unique_words;
  int errors = 0;
  for (const auto& ex : corpus.examples) {
    unique_words.insert(ex.alignment.word);
    if (ex.label != ex.alignment.canonical) ++errors;
  }
  corpus.summary = CorpusSummary{spec.name, spec.speakers, spec.total_words,
                                 static_cast<int>(unique_words.size()), errors};
  return corpus;
}

void write_corpus(const GeneratedCorpus& corpus, const std::string& dir,
                  const std::string& split) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<WordAlignment> alignments;
  std::vector<ProsodicFeatures> features;
  alignments.reserve(corpus.examples.size());
  for (const auto& ex : corpus.examples) {
    alignments.push_back(ex.alignment);
    features.push_back(ex.features);
  }
  write_alignment_file(alignments, (fs::path(dir) / "alignments.jsonl").string());
  write_feature_file(features, (fs::path(dir) / "features.jsonl").string());
  Manifest manifest;
  ManifestEntry entry;
  entry.alignment_path = "alignments.jsonl";
  entry.feature_path = "features.jsonl";
  entry.source = corpus.examples.empty() ? Source::human : corpus.examples.front().source;
  entry.split = split;
  manifest.entries.push_back(std::move(entry));
  write_manifest(manifest, (fs::path(dir) / "manifest.json").string());
}

CorpusSpec corpus_spec_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus spec '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw std::runtime_error("corpus spec '" + path + "': " + e.what());
  }
  CorpusSpec spec;
  spec.name = doc.value("name", "corpus");
  spec.source = source_from_string(doc.value("source", "human"));
  spec.speakers = doc.value("speakers", 1);
  spec.total_words = doc.value("total_words", 100);
  spec.error_rate = doc.value("error_rate", 0.05);
  spec.seed = doc.value("seed", 0ULL);

  const std::set<std::string> known = {
      "name", "source", "speakers", "total_words", "error_rate",
      "seed", "lexicon", "lexicon_file", "effects", "speaker"};
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!known.count(it.key())) {
      throw std::runtime_error("corpus spec '" + path + "': unknown key '" +
                               it.key() + "'");
    }
  }

  auto parse_lexicon_line = [&](const std::string& line) {
    const auto space = line.find(' ');
    if (space == std::string::npos) {
      throw std::runtime_error("corpus spec '" + path + "': lexicon line '" +
                               line + "' has no transcription");
    }
    spec.lexicon.emplace_back(line.substr(0, space), line.substr(space + 1));
  };
  const bool lexicon_given = doc.contains("lexicon") || doc.contains("lexicon_file");
  if (doc.contains("lexicon")) {
    for (const auto& item : doc.at("lexicon")) parse_lexicon_line(item.get<std::string>());
  }
  if (doc.contains("lexicon_file")) {
    const auto lex_path = std::filesystem::path(path).parent_path() /
                          doc.at("lexicon_file").get<std::string>();
    std::ifstream lex(lex_path);
    if (!lex) throw std::runtime_error("cannot open lexicon file '" + lex_path.string() + "'");
    std::string line;
    while (std::getline(lex, line)) {
      if (!line.empty()) parse_lexicon_line(line);
    }
  }
  if (lexicon_given && spec.lexicon.empty()) {
    throw std::runtime_error("corpus spec '" + path + "': empty word list");
  }

  if (doc.contains("effects")) {
    const json& e = doc.at("effects");
    StressEffects fx;
    fx.duration_mult = e.value("duration_mult", fx.duration_mult);
    fx.f0_mult = e.value("f0_mult", fx.f0_mult);
    fx.intensity_add_db = e.value("intensity_add_db", fx.intensity_add_db);
    fx.reduction_prob = e.value("reduction_prob", fx.reduction_prob);
    fx.consonant_duration_mult =
        e.value("consonant_duration_mult", fx.consonant_duration_mult);
    fx.declination = e.value("declination", fx.declination);
    fx.vowel_base_s = e.value("vowel_base_s", fx.vowel_base_s);
    fx.consonant_base_s = e.value("consonant_base_s", fx.consonant_base_s);
    fx.duration_jitter = e.value("duration_jitter", fx.duration_jitter);
    fx.segment_f0_jitter = e.value("segment_f0_jitter", fx.segment_f0_jitter);
    fx.frame_f0_jitter = e.value("frame_f0_jitter", fx.frame_f0_jitter);
    fx.segment_intensity_db = e.value("segment_intensity_db", fx.segment_intensity_db);
    fx.frame_intensity_db = e.value("frame_intensity_db", fx.frame_intensity_db);
    spec.effects = fx;
  }
  if (doc.contains("speaker")) {
    const json& s = doc.at("speaker");
    SpeakerProfile prof;
    prof.base_f0_hz = s.value("base_f0_hz", prof.base_f0_hz);
    prof.rate = s.value("rate", prof.rate);
    prof.base_intensity_db = s.value("base_intensity_db", prof.base_intensity_db);
    prof.jitter = s.value("jitter", prof.jitter);
    if (prof.base_f0_hz < 75.0 || prof.base_f0_hz > 400.0) {
      throw std::runtime_error("corpus spec '" + path + "': base_f0_hz outside [75, 400]");
    }
    if (prof.rate < 0.7 || prof.rate > 1.4) {
      throw std::runtime_error("corpus spec '" + path + "': rate outside [0.7, 1.4]");
    }
    if (prof.jitter < 0.0 || prof.jitter > 0.3) {
      throw std::runtime_error("corpus spec '" + path + "': jitter outside [0, 0.3]");
    }
    spec.fixed_speaker = prof;
  }
  return spec;
}

}  // namespace stressdet
