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

#include "tad/ingest.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>

#include "tad/builtin_data.hpp"

namespace tad {

using nlohmann::json;

namespace {

const json& require(const json& obj, const char* field) {
    auto it = obj.find(field);
    if (it == obj.end() || it->is_null()) throw SchemaError(field, "missing");
    return *it;
}

std::string require_string(const json& obj, const char* field) {
    const json& v = require(obj, field);
    if (!v.is_string()) throw SchemaError(field, "expected string");
    return v.get<std::string>();
}

std::int64_t count_field(const json& obj, const char* field) {
    auto it = obj.find(field);
    if (it == obj.end() || it->is_null()) return 0;
    if (it->is_number_unsigned()) return static_cast<std::int64_t>(it->get<std::uint64_t>());
    if (it->is_number_integer()) {
        const auto v = it->get<std::int64_t>();
        if (v < 0) throw SchemaError(field, "must be non-negative");
        return v;
    }
    throw SchemaError(field, "expected integer");
}

std::optional<std::string> optional_string(const json& obj, const char* field) {
    auto it = obj.find(field);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw SchemaError(field, "expected string");
    return it->get<std::string>();
}

std::optional<std::string> parse_lang(const json& obj) {
    auto lang = optional_string(obj, "lang");
    if (!lang || *lang == "und" || lang->empty()) return std::nullopt;
    if (lang->size() != 2 || !std::isalpha(static_cast<unsigned char>((*lang)[0])) ||
        !std::isalpha(static_cast<unsigned char>((*lang)[1]))) {
        throw SchemaError("lang", "expected a 2-letter code");
    }
    for (char& c : *lang) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return lang;
}

std::string codepoint_key(char32_t cp) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "U+%04X", static_cast<unsigned>(cp));
    return buf;
}

}  // namespace

DocumentRecord parse_record(std::string_view line, std::size_t line_no) {
    json obj;
    try {
        obj = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(line_no, e.what());
    }
    if (!obj.is_object()) throw ParseError(line_no, "expected a JSON object");

    DocumentRecord r;
    r.id = require_string(obj, "id");
    if (r.id.empty()) throw SchemaError("id", "empty");
    const std::string ts = require_string(obj, "timestamp");
    auto instant = parse_rfc3339(ts);
    if (!instant) throw SchemaError("timestamp", "not RFC 3339: '" + ts + "'");
    r.timestamp = *instant;
    r.text = require_string(obj, "text");
    r.lang = parse_lang(obj);
    r.likes = count_field(obj, "likes");
    r.shares = count_field(obj, "shares");
    r.retweets = count_field(obj, "retweets");
    if (auto it = obj.find("deleted"); it != obj.end() && !it->is_null()) {
        if (!it->is_boolean()) throw SchemaError("deleted", "expected boolean");
        r.deleted = it->get<bool>();
    }
    r.source_url = optional_string(obj, "source_url");
    if (auto label = optional_string(obj, "label")) {
        r.label = parse_label(*label);
        if (!r.label) throw SchemaError("label", "expected 'fake' or 'real'");
    }
    return r;
}

json to_json(const DocumentRecord& r) {
    json j = {{"id", r.id},
              {"timestamp", format_rfc3339(r.timestamp)},
              {"text", r.text},
              {"likes", r.likes},
              {"shares", r.shares},
              {"retweets", r.retweets},
              {"deleted", r.deleted}};
    if (r.lang) j["lang"] = *r.lang;
    if (r.source_url) j["source_url"] = *r.source_url;
    if (r.label) j["label"] = std::string(to_string(*r.label));
    return j;
}

std::string to_jsonl(const DocumentRecord& record) {
    // Invalid UTF-8 survives the round trip as-is.
    return to_json(record).dump(-1, ' ', false, json::error_handler_t::ignore);
}

json to_json(const RejectedLine& reject) {
    return {{"line_no", reject.line_no}, {"reason", reject.reason}, {"raw", reject.raw}};
}

ReadResult read_records(std::istream& in, bool lenient) {
    ReadResult out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        try {
            out.records.push_back(parse_record(line, line_no));
        } catch (const SchemaError& e) {
            out.rejects.push_back({line_no, e.what(), line});
        } catch (const ParseError& e) {
            if (!lenient) throw;
            out.rejects.push_back({line_no, e.what(), line});
        }
    }
    return out;
}

ReadResult read_records_file(const std::filesystem::path& path, bool lenient) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return read_records(in, lenient);
}

// ---------------------------------------------------------------------------

bool KeywordSpec::applies_to(const std::optional<std::string>& lang) const {
    if (languages.empty()) return true;
    if (!lang) return false;
    for (const auto& l : languages) {
        if (l == *lang) return true;
    }
    return false;
}

FilterConfig FilterConfig::builtin() {
    return from_json(json::parse(builtin::filter_default_json()));
}

FilterConfig FilterConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
    FilterConfig cfg;
    try {
        cfg.version = j.at("version").get<std::int64_t>();
        const json conf = j.value("confusables", json("confusables.tsv"));  // absent: shipped table
        if (conf.is_string()) {
            const std::string name = conf.get<std::string>();
            if (!j.contains("confusables") || (base_dir.empty() && name == "confusables.tsv")) {
                cfg.confusables = ConfusablesTable::builtin();
            } else {
                const auto path = base_dir / name;
                std::ifstream in(path, std::ios::binary);
                if (!in) throw ConfigError("cannot open confusables table " + path.string());
                std::stringstream ss;
                ss << in.rdbuf();
                cfg.confusables = ConfusablesTable::parse_tsv(ss.str());
            }
        } else if (conf.is_object()) {
            for (const auto& [key, target] : conf.items()) {
                if (key.size() < 3 || key.compare(0, 2, "U+") != 0) throw ConfigError("bad confusable key " + key);
                cfg.confusables.targets[static_cast<char32_t>(std::stoul(key.substr(2), nullptr, 16))] =
                    target.get<std::string>();
            }
            cfg.confusables.version = j.value("confusables_version", 1);
        } else {
            throw ConfigError("confusables must be a path or an object");
        }
        for (const json& s : j.at("specs")) {
            KeywordSpec spec;
            spec.base = s.at("base").get<std::string>();
            spec.variations = s.value("variations", std::vector<std::string>{});
            spec.languages = s.value("languages", std::vector<std::string>{});
            const std::string added = s.value("added_at", std::string("1970-01-01T00:00:00Z"));
            auto t = parse_rfc3339(added);
            if (!t) throw ConfigError("bad added_at '" + added + "'");
            spec.added_at = *t;
            cfg.specs.push_back(std::move(spec));
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("filter config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

FilterConfig FilterConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open filter config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return from_json(j, path.parent_path());
}

json FilterConfig::to_json() const {
    json conf = json::object();
    for (const auto& [cp, target] : confusables.targets) conf[codepoint_key(cp)] = target;
    json specs_json = json::array();
    for (const auto& s : specs) {
        specs_json.push_back({{"base", s.base},
                              {"variations", s.variations},
                              {"languages", s.languages},
                              {"added_at", format_rfc3339(s.added_at)}});
    }
    return {{"version", version},
            {"confusables", conf},
            {"confusables_version", confusables.version},
            {"specs", specs_json}};
}

void FilterConfig::validate() const {
    auto check = [&](const std::string& stem) {
        if (stem.empty()) throw ConfigError("empty keyword stem");
        for (unsigned char c : stem) {
            if (std::isspace(c)) throw ConfigError("keyword stem '" + stem + "' contains whitespace");
        }
        if (normalize_text(stem, confusables) != stem) throw ConfigError("keyword stem '" + stem + "' is not lowercase");
    };
    for (const auto& s : specs) {
        check(s.base);
        for (const auto& v : s.variations) check(v);
    }
}

namespace {

// A stem that tokenizes into several parts ("chauve-souris") matches a run of
// tokens: every part but the last exactly, the last as a prefix.
bool stem_matches_at(const std::vector<Token>& toks, std::size_t at, const std::string& stem,
                     const ConfusablesTable& table) {
    if (stem.find_first_of("-'") == std::string::npos) return has_prefix(toks[at].text, stem);
    const std::vector<Token> parts = tokenize(stem, table);
    if (parts.size() <= 1) return has_prefix(toks[at].text, stem);
    if (at + parts.size() > toks.size()) return false;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (toks[at + i].text != parts[i].text) return false;
    }
    return has_prefix(toks[at + parts.size() - 1].text, parts.back().text);
}

}  // namespace

std::vector<std::string> match_keywords(std::string_view text, const FilterConfig& config,
                                        const std::optional<std::string>& lang) {
    std::vector<std::string> out;
    std::vector<bool> seen(config.specs.size(), false);
    const std::vector<Token> toks = tokenize(text, config.confusables);
    for (std::size_t t = 0; t < toks.size(); ++t) {
        for (std::size_t i = 0; i < config.specs.size(); ++i) {
            const KeywordSpec& spec = config.specs[i];
            if (seen[i] || !spec.applies_to(lang)) continue;
            bool hit = stem_matches_at(toks, t, spec.base, config.confusables);
            for (std::size_t v = 0; !hit && v < spec.variations.size(); ++v) {
                hit = stem_matches_at(toks, t, spec.variations[v], config.confusables);
            }
            if (!hit) continue;
            seen[i] = true;
            // Two specs may share a base stem.
            bool dup = false;
            for (const auto& b : out) dup = dup || b == spec.base;
            if (!dup) out.push_back(spec.base);
        }
    }
    return out;
}

FilterPartition filter_stream(const std::vector<DocumentRecord>& records, const FilterConfig& config) {
    FilterPartition p;
    for (const auto& r : records) {
        (match_keywords(r, config).empty() ? p.unfiltered : p.filtered).push_back(r.id);
    }
    return p;
}

}  // namespace tad
