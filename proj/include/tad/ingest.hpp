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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tad/common.hpp"
#include "tad/text.hpp"

namespace tad {

struct DocumentRecord {
    std::string id;
    Instant timestamp{};
    std::string text;
    std::optional<std::string> lang;
    std::int64_t likes = 0;
    std::int64_t shares = 0;
    std::int64_t retweets = 0;
    bool deleted = false;
    std::optional<std::string> source_url;
    // Ground truth, present only on simulated streams and labeled corpora.
    std::optional<Label> label;

    bool operator==(const DocumentRecord&) const = default;
};

/// Parses one JSONL line. Throws ParseError on malformed JSON and
/// SchemaError on missing or ill-typed fields (including a timestamp that is
/// not RFC 3339).
DocumentRecord parse_record(std::string_view line, std::size_t line_no = 1);

nlohmann::json to_json(const DocumentRecord& record);
/// Compact single-line serialization with a fixed key order.
std::string to_jsonl(const DocumentRecord& record);

struct RejectedLine {
    std::size_t line_no;
    std::string reason;
    std::string raw;
};

nlohmann::json to_json(const RejectedLine& reject);

struct ReadResult {
    std::vector<DocumentRecord> records;
    std::vector<RejectedLine> rejects;
};

/// Reads a JSONL stream. Lines with schema problems are quarantined in
/// `rejects`; malformed JSON is rethrown as ParseError unless `lenient`.
/// Blank lines are skipped.
ReadResult read_records(std::istream& in, bool lenient = false);
ReadResult read_records_file(const std::filesystem::path& path, bool lenient = false);

// ---------------------------------------------------------------------------
// Keyword filtering

struct KeywordSpec {
    std::string base;
    std::vector<std::string> variations;
    std::vector<std::string> languages;  // empty: applies to every record
    Instant added_at{};

    bool applies_to(const std::optional<std::string>& lang) const;
    bool operator==(const KeywordSpec&) const = default;
};

struct FilterConfig {
    std::vector<KeywordSpec> specs;
    ConfusablesTable confusables;
    std::int64_t version = 1;

    /// data/filter_default.json with the shipped confusables table.
    static FilterConfig builtin();
    /// `base_dir` resolves a relative confusables path; when it is empty a
    /// bare "confusables.tsv" means the shipped table.
    static FilterConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    static FilterConfig load(const std::filesystem::path& path);

    /// Self-contained form with the confusables table inlined.
    nlohmann::json to_json() const;
    /// Throws ConfigError if a stem is empty, not normalized, or has whitespace.
    void validate() const;
};

/// Base stems of every spec with a stem that prefixes some token of the
/// normalized text. Deduplicated, ordered by the first matching token and
/// then by spec order. `lang` gates language-specific specs.
std::vector<std::string> match_keywords(std::string_view text, const FilterConfig& config,
                                        const std::optional<std::string>& lang = std::nullopt);

inline std::vector<std::string> match_keywords(const DocumentRecord& record, const FilterConfig& config) {
    return match_keywords(record.text, config, record.lang);
}

struct FilterPartition {
    std::vector<std::string> filtered;
    std::vector<std::string> unfiltered;
};

/// Ids in input order.
FilterPartition filter_stream(const std::vector<DocumentRecord>& records, const FilterConfig& config);

}  // namespace tad
