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

#include "tad/text.hpp"

#include <cctype>

#include "tad/builtin_data.hpp"
#include "tad/common.hpp"

namespace tad {

namespace utf8 {

bool decode(std::string_view s, std::size_t pos, char32_t& cp, std::size_t& length) {
    const auto b0 = static_cast<unsigned char>(s[pos]);
    length = 1;
    if (b0 < 0x80) {
        cp = b0;
        return true;
    }
    std::size_t need;
    char32_t min;
    if ((b0 & 0xE0) == 0xC0) {
        need = 1;
        cp = b0 & 0x1F;
        min = 0x80;
    } else if ((b0 & 0xF0) == 0xE0) {
        need = 2;
        cp = b0 & 0x0F;
        min = 0x800;
    } else if ((b0 & 0xF8) == 0xF0) {
        need = 3;
        cp = b0 & 0x07;
        min = 0x10000;
    } else {
        return false;
    }
    if (pos + need >= s.size()) return false;
    for (std::size_t i = 1; i <= need; ++i) {
        const auto b = static_cast<unsigned char>(s[pos + i]);
        if ((b & 0xC0) != 0x80) return false;
        cp = (cp << 6) | (b & 0x3F);
    }
    if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    length = need + 1;
    return true;
}

void append(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::u32string to_u32(std::string_view s) {
    std::u32string out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        char32_t cp;
        std::size_t len;
        if (!decode(s, pos, cp, len)) cp = static_cast<unsigned char>(s[pos]) | 0xDC00;  // lone byte marker
        out.push_back(cp);
        pos += len;
    }
    return out;
}

}  // namespace utf8

const ConfusablesTable& ConfusablesTable::builtin() {
    static const ConfusablesTable table = parse_tsv(builtin::confusables_tsv());
    return table;
}

ConfusablesTable ConfusablesTable::parse_tsv(std::string_view tsv) {
    ConfusablesTable table;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < tsv.size()) {
        std::size_t eol = tsv.find('\n', pos);
        if (eol == std::string_view::npos) eol = tsv.size();
        std::string_view line = tsv.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (line[0] == '#') {
            constexpr std::string_view kVersion = "# version ";
            if (line.substr(0, kVersion.size()) == kVersion) table.version = std::stoi(std::string(line.substr(kVersion.size())));
            continue;
        }
        const std::size_t tab = line.find('\t');
        if (tab == std::string_view::npos || line.substr(0, 2) != "U+") throw ParseError(line_no, "expected U+XXXX<TAB>target");
        const std::string hex(line.substr(2, tab - 2));
        std::string_view rest = line.substr(tab + 1);
        const std::size_t tab2 = rest.find('\t');
        std::string target(rest.substr(0, tab2));
        if (target.empty()) throw ParseError(line_no, "empty target");
        for (char& c : target) {
            if (static_cast<unsigned char>(c) >= 0x80) throw ParseError(line_no, "target must be ASCII");
            c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
        table.targets[static_cast<char32_t>(std::stoul(hex, nullptr, 16))] = std::move(target);
    }
    return table;
}

char32_t simple_lower(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 32;
    if (cp < 0x80) return cp;
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 32;
    if (cp >= 0x391 && cp <= 0x3AB && cp != 0x3A2) return cp + 32;
    if (cp >= 0x410 && cp <= 0x42F) return cp + 32;
    if (cp >= 0x400 && cp <= 0x40F) return cp + 80;
    if (cp >= 0xFF21 && cp <= 0xFF3A) return cp + 32;
    return cp;
}

namespace {

// One source codepoint (or stray byte) after folding.
struct Unit {
    std::string norm;
    char32_t first;  // first codepoint of norm, or 0 for a stray byte
    std::size_t begin;
    std::size_t end;
};

template <typename Fn>
void for_each_unit(std::string_view text, const ConfusablesTable& table, Fn&& fn) {
    std::size_t pos = 0;
    Unit unit;
    while (pos < text.size()) {
        char32_t cp;
        std::size_t len;
        unit.norm.clear();
        unit.begin = pos;
        if (!utf8::decode(text, pos, cp, len)) {
            unit.norm.push_back(text[pos]);
            unit.first = 0;
        } else if (const std::string* t = table.find(cp)) {
            unit.norm = *t;
            unit.first = static_cast<unsigned char>((*t)[0]);
        } else {
            const char32_t lower = simple_lower(cp);
            if (const std::string* t2 = table.find(lower)) {
                unit.norm = *t2;
                unit.first = static_cast<unsigned char>((*t2)[0]);
            } else {
                utf8::append(unit.norm, lower);
                unit.first = lower;
            }
        }
        pos += len;
        unit.end = pos;
        fn(unit);
    }
}

bool is_separator(char32_t cp) {
    if (cp == 0) return true;  // stray byte
    if (cp < 0x80) return !std::isalnum(static_cast<int>(cp));
    if (cp == 0x85 || cp == 0xA0 || cp == 0xD7 || cp == 0xF7) return true;
    if (cp >= 0xA1 && cp <= 0xBF) return cp != 0xAA && cp != 0xB5 && cp != 0xBA;
    if (cp == 0x1680 || (cp >= 0x2000 && cp <= 0x206F)) return true;  // spaces and general punctuation
    if (cp >= 0x2190 && cp <= 0x2BFF) return true;                     // arrows, symbols, dingbats
    if (cp >= 0x3000 && cp <= 0x3003) return true;
    if ((cp >= 0xFF01 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20) || (cp >= 0xFF3B && cp <= 0xFF40) ||
        (cp >= 0xFF5B && cp <= 0xFF65)) {
        return true;
    }
    if (cp >= 0x1F000 && cp <= 0x1FAFF) return true;  // emoji
    if (cp == 0xFE0F || cp == 0xFEFF) return true;
    return false;
}

bool is_word(char32_t cp) { return !is_separator(cp); }
bool is_ascii_digit(char32_t cp) { return cp >= '0' && cp <= '9'; }
bool is_apostrophe(char32_t cp) { return cp == '\'' || cp == 0x2019; }

}  // namespace

std::string normalize_text(std::string_view text, const ConfusablesTable& table) {
    std::string out;
    out.reserve(text.size());
    for_each_unit(text, table, [&](const Unit& u) { out += u.norm; });
    return out;
}

std::vector<Token> tokenize(std::string_view text, const ConfusablesTable& table) {
    std::vector<Unit> units;
    for_each_unit(text, table, [&](const Unit& u) { units.push_back(u); });

    std::vector<Token> tokens;
    Token current{{}, 0, 0};
    bool open = false;
    auto close = [&] {
        if (open) tokens.push_back(std::move(current));
        current = Token{{}, 0, 0};
        open = false;
    };
    for (std::size_t i = 0; i < units.size(); ++i) {
        const Unit& u = units[i];
        bool joins = is_word(u.first);
        if (!joins && open && i + 1 < units.size()) {
            const char32_t next = units[i + 1].first;
            if (u.first == '-') joins = is_ascii_digit(next);
            else if (is_apostrophe(u.first)) joins = is_word(next);
        }
        if (!joins) {
            close();
            continue;
        }
        if (!open) {
            current.begin = u.begin;
            open = true;
        }
        current.text += u.norm;
        current.end = u.end;
    }
    close();
    return tokens;
}

}  // namespace tad
