// SPDX-License-Identifier: Apache-2.0
#include "stressdet/arpabet.hpp"

#include <array>
#include <cstdlib>
#include <unordered_map>
#include <vector>

namespace stressdet::arpabet {

namespace {

// Alphabetical; ids 1..39. Vowel set per the CMU convention.
const std::array<const char*, 39> kSymbols = {
    "AA", "AE", "AH", "AO", "AW", "AY", "B",  "CH", "D",  "DH",
    "EH", "ER", "EY", "F",  "G",  "HH", "IH", "IY", "JH", "K",
    "L",  "M",  "N",  "NG", "OW", "OY", "P",  "R",  "S",  "SH",
    "T",  "TH", "UH", "UW", "V",  "W",  "Y",  "Z",  "ZH"};

const std::array<const char*, 15> kVowels = {"AA", "AE", "AH", "AO", "AW",
                                             "AY", "EH", "ER", "EY", "IH",
                                             "IY", "OW", "OY", "UH", "UW"};

struct Tables {
  std::unordered_map<std::string, int> id_of;
  std::vector<std::string> name_of;
  std::vector<bool> vowel_of;

  Tables() {
    name_of.reserve(kInventorySize);
    vowel_of.assign(kInventorySize, false);
    name_of.emplace_back(kPadSymbol);
    for (int i = 0; i < static_cast<int>(kSymbols.size()); ++i) {
      name_of.emplace_back(kSymbols[i]);
      id_of.emplace(kSymbols[i], i + 1);
    }
    for (const char* v : kVowels) {
      vowel_of[id_of.at(v)] = true;
    }
  }
};

const Tables& tables() {
  static const Tables t;
  return t;
}

}  // namespace

std::optional<int> symbol_id(std::string_view symbol) {
  const auto& t = tables();
  auto it = t.id_of.find(std::string(symbol));
  if (it == t.id_of.end()) return std::nullopt;
  return it->second;
}

const std::string& symbol_name(int id) {
  const auto& t = tables();
  if (id < 0 || id >= kInventorySize) std::abort();
  return t.name_of[static_cast<std::size_t>(id)];
}

bool is_vowel_id(int id) {
  const auto& t = tables();
  if (id < 0 || id >= kInventorySize) return false;
  return t.vowel_of[static_cast<std::size_t>(id)];
}

bool is_vowel_symbol(std::string_view symbol) {
  auto id = symbol_id(symbol);
  return id.has_value() && is_vowel_id(*id);
}

int schwa_id() { return *symbol_id("AH"); }

}  // namespace stressdet::arpabet
