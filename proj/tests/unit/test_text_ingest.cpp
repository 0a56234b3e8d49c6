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

#include <doctest.h>

#include <set>
#include <sstream>

#include "oracles.hpp"
#include "tad/ingest.hpp"
#include "tad/text.hpp"

using namespace tad;
using Strings = std::vector<std::string>;

TEST_CASE("normalize_text examples") {
    CHECK(normalize_text("COVID-19") == "covid-19");
    CHECK(normalize_text("\xD0\xA1OVID") == "covid");
    CHECK(normalize_text("plandemic") == "plandemic");
    CHECK(normalize_text("\xEF\xBC\xA3\xEF\xBC\xAF") == "co");  // fullwidth capitals
    CHECK(normalize_text("caf\xC3\x89") == "caf\xC3\xA9");
    // Invalid bytes survive untouched.
    CHECK(normalize_text(std::string("a\xFF" "b")) == std::string("a\xFF" "b"));
}

TEST_CASE("normalize_text is idempotent on random codepoints") {
    Rng rng(5);
    const std::vector<std::pair<char32_t, char32_t>> ranges = {
        {0x20, 0x7E}, {0xA0, 0x24F}, {0x370, 0x3FF}, {0x400, 0x4FF}, {0x2000, 0x206F}, {0xFF00, 0xFF65}, {0x1F600, 0x1F64F}};
    for (int i = 0; i < 3000; ++i) {
        std::string s;
        const auto n = rng.below(30);
        for (std::uint64_t j = 0; j < n; ++j) {
            const auto& r = ranges[rng.below(ranges.size())];
            utf8::append(s, static_cast<char32_t>(r.first + rng.below(r.second - r.first + 1)));
        }
        if (rng.bernoulli(0.1)) s += static_cast<char>(0x80 + rng.below(0x40));  // stray continuation byte
        const std::string once = normalize_text(s);
        CHECK(normalize_text(once) == once);
    }
}

TEST_CASE("tokenize keeps digit hyphens and inner apostrophes") {
    Strings got;
    for (const auto& t : tokenize("COVID-19, don't  stop-it 'quoted' x-")) got.push_back(t.text);
    CHECK(got == Strings{"covid-19", "don't", "stop", "it", "quoted", "x"});
    const std::string text = "a \xD0\xA1OVID b";
    const auto toks = tokenize(text);
    REQUIRE(toks.size() == 3);
    CHECK(text.substr(toks[1].begin, toks[1].end - toks[1].begin) == "\xD0\xA1OVID");
}

TEST_CASE("match_keywords examples against the default config") {
    const FilterConfig& cfg = FilterConfig::builtin();
    CHECK(match_keywords("New COVID19 variant found", cfg) == Strings{"covid", "virus"});
    CHECK(match_keywords("quarantining at home", cfg) == Strings{"quarantin"});
    CHECK(match_keywords("the weather is nice", cfg).empty());
    CHECK(match_keywords("Corona", cfg) == Strings{"covid"});
    CHECK(match_keywords("N95", cfg) == Strings{"mask"});
    CHECK(match_keywords("\xD0\xA1OVID", cfg) == Strings{"covid"});
    CHECK(match_keywords("covid-19 covid", cfg) == Strings{"covid"});
    // Language-gated specs.
    CHECK(match_keywords("la vacuna", cfg, std::string("es")) == Strings{"vacun"});
    CHECK(match_keywords("la vacuna", cfg).empty());
    CHECK(match_keywords("une chauve-souris", cfg, std::string("fr")) == Strings{"canular"});
    CHECK(match_keywords("une chauve qui", cfg, std::string("fr")).empty());
}

TEST_CASE("match_keywords agrees with the brute-force oracle on fuzzed text") {
    const FilterConfig& cfg = FilterConfig::builtin();
    Rng rng(2024);
    int with_hits = 0;
    for (int i = 0; i < 10000; ++i) {
        const auto [raw, norm] = oracle::fuzz_text(rng);
        const std::optional<std::string> lang = rng.bernoulli(0.3) ? std::optional<std::string>("fr") : std::nullopt;
        const auto expect = oracle::match_keywords(norm, cfg, lang);
        const auto got = match_keywords(raw, cfg, lang);
        if (got != expect) FAIL_CHECK("mismatch on: " << raw);
        with_hits += expect.empty() ? 0 : 1;
    }
    CHECK(with_hits > 1000);
}

TEST_CASE("parse_record defaults and errors") {
    const auto r = parse_record(R"({"id":"1","timestamp":"2020-01-25T00:00:00Z","text":"hello"})");
    CHECK(r.id == "1");
    CHECK(r.likes == 0);
    CHECK(r.shares == 0);
    CHECK(r.retweets == 0);
    CHECK_FALSE(r.deleted);
    CHECK_FALSE(r.lang);
    CHECK_FALSE(r.source_url);

    CHECK_THROWS_AS(parse_record("not json", 7), ParseError);
    try {
        parse_record(R"({"id":"1","text":"x"})");
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(e.field() == "timestamp");
    }
    CHECK_THROWS_AS(parse_record(R"({"id":"","timestamp":"2020-01-25T00:00:00Z","text":"x"})"), SchemaError);
    CHECK_THROWS_AS(parse_record(R"({"id":"1","timestamp":"2020-13-25T00:00:00Z","text":"x"})"), SchemaError);
    CHECK_THROWS_AS(parse_record(R"({"id":"1","timestamp":"2020-01-25T00:00:00Z","text":"x","likes":-1})"), SchemaError);
    CHECK_THROWS_AS(parse_record(R"({"id":"1","timestamp":"2020-01-25T00:00:00Z","text":5})"), SchemaError);
}

TEST_CASE("records round-trip through JSONL") {
    DocumentRecord r;
    r.id = "x\"1";
    r.timestamp = *parse_rfc3339("2021-06-01T12:00:00Z");
    r.text = "line\nbreak \xE2\x9C\x93";
    r.lang = "en";
    r.likes = 3;
    r.deleted = true;
    r.source_url = "http://example.org";
    r.label = Label::fake;
    CHECK(parse_record(to_jsonl(r)) == r);
}

TEST_CASE("read_records quarantines schema errors and rethrows parse errors") {
    std::istringstream in(
        "{\"id\":\"a\",\"timestamp\":\"2020-01-01T00:00:00Z\",\"text\":\"covid\"}\n"
        "\n"
        "{\"id\":\"b\",\"timestamp\":\"not a time\",\"text\":\"x\"}\n"
        "{\"id\":\"c\",\"timestamp\":\"2020-01-02T00:00:00Z\",\"text\":\"y\"}\n");
    const ReadResult rr = read_records(in);
    REQUIRE(rr.records.size() == 2);
    REQUIRE(rr.rejects.size() == 1);
    CHECK(rr.rejects[0].line_no == 3);
    CHECK(rr.rejects[0].raw.find("not a time") != std::string::npos);

    std::istringstream bad("{\"id\":\"a\",\"timestamp\":\"2020-01-01T00:00:00Z\",\"text\":\"x\"}\n{oops\n");
    try {
        read_records(bad);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line_no() == 2);
    }
    std::istringstream bad2("{oops\n");
    CHECK(read_records(bad2, true).rejects.size() == 1);
}

TEST_CASE("filter_stream partitions exhaustively") {
    const FilterConfig& cfg = FilterConfig::builtin();
    auto rec = [](std::string id, std::string text) {
        DocumentRecord r;
        r.id = std::move(id);
        r.text = std::move(text);
        return r;
    };
    const std::vector<DocumentRecord> three = {rec("1", "mask up"), rec("2", "nice day"), rec("3", "hello")};
    const auto p = filter_stream(three, cfg);
    CHECK(p.filtered == Strings{"1"});
    CHECK(p.unfiltered == Strings{"2", "3"});
    CHECK(filter_stream({}, cfg).filtered.empty());
    const auto all = filter_stream({rec("1", "covid"), rec("2", "vaccine")}, cfg);
    CHECK(all.filtered.size() == 2);
    CHECK(all.unfiltered.empty());

    Rng rng(8);
    std::vector<DocumentRecord> many;
    for (int i = 0; i < 500; ++i) many.push_back(rec(std::to_string(i), oracle::fuzz_text(rng).first));
    const auto q = filter_stream(many, cfg);
    CHECK(q.filtered.size() + q.unfiltered.size() == many.size());
    std::set<std::string> a(q.filtered.begin(), q.filtered.end());
    for (const auto& id : q.unfiltered) CHECK(a.count(id) == 0);
}

TEST_CASE("filter config loading and validation") {
    const FilterConfig& d = FilterConfig::builtin();
    CHECK_NOTHROW(d.validate());
    CHECK(d.version == 1);
    CHECK(d.specs.size() >= 11);

    const auto j = nlohmann::json::parse(R"({
        "version": 3,
        "confusables": {"U+0430": "a"},
        "specs": [{"base": "monkey", "variations": ["pox"], "languages": [], "added_at": "2022-05-01T00:00:00Z"}]})");
    const FilterConfig c = FilterConfig::from_json(j);
    CHECK(c.version == 3);
    CHECK(match_keywords("m\xD0\xBEnkey", c).empty());  // Cyrillic o is not in this table
    CHECK(match_keywords("monkeypox", c) == Strings{"monkey"});
    CHECK(FilterConfig::from_json(c.to_json()).to_json() == c.to_json());

    auto bad = j;
    bad["specs"][0]["base"] = "Monkey";
    CHECK_THROWS_AS(FilterConfig::from_json(bad).validate(), ConfigError);
    bad["specs"][0]["base"] = "two words";
    CHECK_THROWS_AS(FilterConfig::from_json(bad).validate(), ConfigError);
}
