// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace stressdet::arpabet {

/// 39 ARPAbet symbols plus one reserved padding symbol at id 0.
/// Ids are stable across runs; the model one-hot encodes them.
constexpr int kPadId = 0;
constexpr int kInventorySize = 40;  // pad + 39 symbols

inline constexpr std::string_view kPadSymbol = "<pad>";

/// Returns the id of a bare (digit-free) symbol, or nullopt if unknown.
std::optional<int> symbol_id(std::string_view symbol);

/// Inverse of symbol_id; aborts on out-of-range ids.
const std::string& symbol_name(int id);

bool is_vowel_symbol(std::string_view symbol);
bool is_vowel_id(int id);

/// Schwa, the reduction target for unstressed vowels.
int schwa_id();

}  // namespace stressdet::arpabet
