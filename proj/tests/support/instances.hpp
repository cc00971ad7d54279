// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <utility>

#include "stressdet/augmentation.hpp"
#include "stressdet/model.hpp"
#include "stressdet/rng.hpp"

namespace testing_support {

/// Random but structurally valid word rendered by the prosody generator,
/// handy wherever a test needs a realistic (alignment, features) pair.
inline std::pair<stressdet::WordAlignment, stressdet::ProsodicFeatures>
random_word(std::uint64_t seed) {
  using namespace stressdet;
  auto engine = make_engine(seed);
  const auto& lexicon = builtin_lexicon();
  std::uniform_int_distribution<std::size_t> pick(0, lexicon.size() - 1);
  const auto& [word, entry] = lexicon[pick(engine)];
  const LexiconEntry parsed = parse_lexicon_entry(entry);
  const int k = static_cast<int>(parsed.canonical.size());
  StressPattern realized;
  realized.flags.assign(static_cast<std::size_t>(k), 0);
  std::uniform_int_distribution<int> pos(0, k - 1);
  realized.flags[static_cast<std::size_t>(pos(engine))] = 1;

  SpeakerProfile speaker;
  speaker.id = "inst";
  std::uniform_real_distribution<double> f0(110.0, 270.0);
  std::uniform_real_distribution<double> rate(0.8, 1.3);
  std::uniform_real_distribution<double> jit(0.05, 0.2);
  speaker.base_f0_hz = f0(engine);
  speaker.rate = rate(engine);
  speaker.jitter = jit(engine);
  return synthesize_word(word, entry, realized, speaker, StressEffects{},
                         mix_seed(seed, 0xABCD));
}

inline stressdet::ModelInput random_input(std::uint64_t seed) {
  auto [alignment, features] = random_word(seed);
  return stressdet::make_model_input(alignment, features);
}

}  // namespace testing_support
