/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace tad {

/// Look-alike codepoints folded to lowercase ASCII before matching.
struct ConfusablesTable {
    std::map<char32_t, std::string> targets;
    int version = 1;

    /// The table shipped in data/confusables.tsv.
    static const ConfusablesTable& builtin();
    /// Lines of "U+XXXX<TAB>target[<TAB>comment]"; '#' starts a comment line.
    static ConfusablesTable parse_tsv(std::string_view tsv);

    const std::string* find(char32_t cp) const {
        auto it = targets.find(cp);
        return it == targets.end() ? nullptr : &it->second;
    }
};

namespace utf8 {

/// Decodes one codepoint at `pos`. On malformed input returns false and
/// sets `length` to 1 so the byte can be passed through untouched.
bool decode(std::string_view s, std::size_t pos, char32_t& cp, std::size_t& length);
void append(std::string& out, char32_t cp);
std::u32string to_u32(std::string_view s);

}  // namespace utf8

/// Simple case folding for ASCII, Latin-1, Greek and Cyrillic capitals.
char32_t simple_lower(char32_t cp);

/// Lowercases and folds confusables. Idempotent; bytes that are not valid
/// UTF-8 pass through unchanged.
std::string normalize_text(std::string_view text, const ConfusablesTable& table = ConfusablesTable::builtin());

struct Token {
    std::string text;   // normalized form
    std::size_t begin;  // byte span in the original text
    std::size_t end;
};

/// Splits on whitespace and punctuation. A hyphen stays inside a token when
/// it joins a word character to a digit ("covid-19"); an apostrophe stays
/// when it sits between two word characters ("don't").
std::vector<Token> tokenize(std::string_view text, const ConfusablesTable& table = ConfusablesTable::builtin());

inline bool has_prefix(std::string_view token, std::string_view stem) {
    return !stem.empty() && token.size() >= stem.size() && token.compare(0, stem.size(), stem) == 0;
}

}  // namespace tad
