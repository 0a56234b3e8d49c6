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

#include <sys/wait.h>
#include <unistd.h>

#include <fstream>

#include "oracles.hpp"
#include "tad/refilter.hpp"
#include "tad/store.hpp"

using namespace tad;
using nlohmann::json;

namespace {

DocumentRecord rec(const std::string& id, const std::string& when, const std::string& text) {
    DocumentRecord r;
    r.id = id;
    r.timestamp = parse_rfc3339(when).value();
    r.text = text;
    r.lang = "en";
    return r;
}

std::vector<DocumentRecord> sample_records() {
    return {rec("a", "2020-01-05T10:00:00Z", "covid is spreading"),
            rec("b", "2020-01-06T10:00:00Z", "monkeypox rumor"),
            rec("c", "2020-01-07T10:00:00Z", "nice weather today"),
            rec("d", "2020-02-01T00:00:00Z", "new vaccine trial"),
            rec("e", "2020-02-03T00:00:00Z", "monkey business at the zoo"),
            rec("f", "2020-02-04T00:00:00Z", "traffic update")};
}

// The shipped config already lists "monkey"; start from one without it.
FilterConfig base_filter() {
    FilterConfig f = FilterConfig::builtin();
    for (auto& spec : f.specs) std::erase(spec.variations, "monkey");
    return f;
}

// Ingest plus fixed windows, straight through the store API.
void populate(const fs::path& root, const FilterConfig& filter = base_filter()) {
    WindowStore s = WindowStore::create(root, filter);
    const auto records = sample_records();
    s.write_records(records);
    const auto part = filter_stream(records, s.filter());
    s.write_partition(part);
    const std::unordered_set<std::string> filtered(part.filtered.begin(), part.filtered.end());
    s.replace_windows(assign_fixed_windows(records, filtered), records);
}

FilterConfig with_stem(std::string stem, std::int64_t version) {
    FilterConfig f = base_filter();
    KeywordSpec k;
    k.base = std::move(stem);
    f.specs.push_back(k);
    f.version = version;
    return f;
}

// Everything a reader of the store can observe, as text.
std::string snapshot(const fs::path& root) {
    WindowStore s = WindowStore::open(root);
    json j;
    j["version"] = s.filter().version;
    j["partition"] = {{"filtered", s.partition().filtered}, {"unfiltered", s.partition().unfiltered}};
    for (const auto& w : s.windows()) j["windows"][w.window_id] = s.manifest(w.window_id).to_json();
    return j.dump();
}

int run_child(const std::function<void()>& body) {
    const pid_t pid = ::fork();
    if (pid == 0) {
        try {
            body();
        } catch (...) {
            ::_exit(3);
        }
        ::_exit(0);
    }
    int status = 0;
    ::waitpid(pid, &status, 0);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("atomic_write replaces whole files") {
    oracle::TempDir dir;
    const auto p = dir / "f.txt";
    CHECK(atomic_write(p, "one"));
    CHECK(read_file(p) == "one");
    CHECK_FALSE(atomic_write(p, "one"));
    CHECK(atomic_write(p, "two"));
    CHECK(read_file(p) == "two");
    CHECK(json_text(json{{"b", 1}, {"a", 2}}) == "{\n  \"a\": 2,\n  \"b\": 1\n}\n");
}

TEST_CASE("a crash before rename leaves the old file and only a temp file") {
    oracle::TempDir dir;
    const auto p = dir / "f.txt";
    atomic_write(p, "old");
    const int code = run_child([&] {
        set_write_fault_hook([](const fs::path&) { ::_exit(9); });
        atomic_write(p, "new");
    });
    CHECK(code == 9);
    CHECK(read_file(p) == "old");
    std::size_t temps = 0;
    for (const auto& e : fs::directory_iterator(dir.path())) temps += e.path().filename().string().find(".tmp.") != std::string::npos;
    CHECK(temps == 1);
}

TEST_CASE("store lock") {
    oracle::TempDir dir;
    populate(dir.path());
    {
        WindowStore a = WindowStore::open(dir.path());
        CHECK_THROWS_AS(WindowStore::open(dir.path()), StoreError);
    }
    CHECK_NOTHROW(WindowStore::open(dir.path()));
    // A lock left by a dead process is taken over.
    const pid_t pid = ::fork();
    if (pid == 0) ::_exit(0);
    ::waitpid(pid, nullptr, 0);
    std::ofstream(dir / ".lock") << pid << "\n";
    CHECK_NOTHROW(WindowStore::open(dir.path()));
    CHECK_THROWS_AS(WindowStore::open(dir / "nothing-here"), StoreError);
}

TEST_CASE("open removes temp files") {
    oracle::TempDir dir;
    populate(dir.path());
    std::ofstream(dir / "windows" / "2020-01" / "manifest.json.tmp.12345") << "partial";
    WindowStore::open(dir.path());
    CHECK_FALSE(fs::exists(dir / "windows" / "2020-01" / "manifest.json.tmp.12345"));
}

TEST_CASE("create over a half-made store removes its temp file") {
    oracle::TempDir dir;
    fs::create_directories(dir.path());
    std::ofstream(dir / "store.json.tmp.12345") << "{\"format";
    WindowStore::create(dir.path(), base_filter());
    CHECK_FALSE(fs::exists(dir / "store.json.tmp.12345"));
    CHECK(fs::exists(dir / "store.json"));
}

TEST_CASE("store round-trip") {
    oracle::TempDir dir;
    populate(dir.path());
    WindowStore s = WindowStore::open(dir.path());
    CHECK(s.records() == sample_records());
    REQUIRE(s.windows().size() == 2);
    CHECK(s.windows()[0].window_id == "2020-01");
    const auto m = s.manifest("2020-01");
    CHECK(m.window.filtered_ids == std::vector<std::string>{"a"});
    CHECK(m.window.unfiltered_ids == std::vector<std::string>{"b", "c"});
    CHECK(s.window_records("2020-02").size() == 3);
    CHECK_THROWS_AS(s.window_dir("../x"), StoreError);
    CHECK_THROWS_AS(s.manifest("2021-01"), StoreError);
    const auto back = WindowManifest::from_json(m.to_json());
    CHECK(back.to_json() == m.to_json());
    json bad = m.to_json();
    bad["counts"]["filtered"] = 7;
    CHECK_THROWS(WindowManifest::from_json(bad));
}

TEST_CASE("replace_windows drops stale artifacts and windows") {
    oracle::TempDir dir;
    populate(dir.path());
    WindowStore s = WindowStore::open(dir.path());
    atomic_write(s.window_dir("2020-01") / "model.json", "{}");
    atomic_write(s.window_dir("2020-02") / "model.json", "{}");
    auto records = sample_records();
    records.pop_back();  // 2020-02 changes
    records.push_back(rec("g", "2020-03-01T00:00:00Z", "covid"));
    const std::unordered_set<std::string> filtered = {"a", "d", "g"};
    s.replace_windows(assign_fixed_windows(records, filtered), records);
    CHECK(fs::exists(s.window_dir("2020-01") / "model.json"));
    CHECK_FALSE(fs::exists(s.window_dir("2020-02") / "model.json"));
    CHECK(s.has_window("2020-03"));
    s.replace_windows(assign_fixed_windows({records[0]}, filtered), {records[0]});
    CHECK_FALSE(fs::exists(s.window_dir("2020-03")));
    CHECK(s.windows().size() == 1);
}

TEST_CASE("refilter moves newly matching records") {
    oracle::TempDir dir;
    populate(dir.path());
    WindowStore s = WindowStore::open(dir.path());
    const auto rep = refilter(s, with_stem("monkey", 2));
    CHECK(rep.old_version == 1);
    CHECK(rep.new_version == 2);
    CHECK(rep.moved_ids == std::vector<std::string>{"b", "e"});
    REQUIRE(rep.windows.size() == 2);
    CHECK(rep.windows[0].moved_ids == std::vector<std::string>{"b"});
    const auto m = s.manifest("2020-01");
    CHECK(m.window.filtered_ids == std::vector<std::string>{"a", "b"});
    CHECK(m.window.unfiltered_ids == std::vector<std::string>{"c"});
    CHECK(m.config_version == 2);
    CHECK(s.filter().version == 2);
}

TEST_CASE("refilter: single old record example") {
    oracle::TempDir dir;
    {
        WindowStore s = WindowStore::create(dir.path(), base_filter());
        const std::vector<DocumentRecord> records = {rec("x", "2019-12-30T00:00:00Z", "monkeypox rumor"),
                                                     rec("y", "2020-01-02T00:00:00Z", "weather")};
        s.write_records(records);
        s.write_partition(filter_stream(records, s.filter()));
        s.replace_windows(assign_fixed_windows(records, {}), records);
    }
    WindowStore s = WindowStore::open(dir.path());
    const auto rep = refilter(s, with_stem("monkey", 2));
    REQUIRE(rep.moved_ids.size() == 1);
    CHECK(rep.windows.at(0).window_id == "2019-12");
    CHECK(rep.windows.at(0).moved_ids == std::vector<std::string>{"x"});
}

TEST_CASE("refilter versions and no-op configs") {
    oracle::TempDir dir;
    populate(dir.path());
    WindowStore s = WindowStore::open(dir.path());
    refilter(s, with_stem("monkey", 2));
    CHECK_THROWS_AS(refilter(s, with_stem("monkey", 2)), VersionError);
    CHECK_THROWS_AS(refilter(s, with_stem("monkey", 1)), VersionError);
    const auto rep = refilter(s, with_stem("zzqx", 3));
    CHECK(rep.moved_ids.empty());
    for (const auto& w : rep.windows) CHECK(w.moved_ids.empty());
    CHECK(s.filter().version == 3);
}

TEST_CASE("refilter never shrinks the filtered set") {
    oracle::TempDir dir;
    populate(dir.path());
    WindowStore s = WindowStore::open(dir.path());
    // A config without any of the old stems still keeps "a" and "d".
    FilterConfig narrow;
    narrow.confusables = FilterConfig::builtin().confusables;
    KeywordSpec k;
    k.base = "traffic";
    narrow.specs = {k};
    narrow.version = 2;
    const auto before = s.partition().filtered;
    refilter(s, narrow);
    const auto after = s.partition().filtered;
    for (const auto& id : before) CHECK(std::find(after.begin(), after.end(), id) != after.end());
    CHECK(after.size() == before.size() + 1);
    CHECK(s.manifest("2020-02").window.filtered_ids == std::vector<std::string>{"d", "f"});
}

TEST_CASE("refilter moved ids leave the extended set") {
    oracle::TempDir dir;
    populate(dir.path());
    WindowStore s = WindowStore::open(dir.path());
    auto m = s.manifest("2020-01");
    m.window.extended_ids = {"b", "c"};
    s.write_manifest(m);
    refilter(s, with_stem("monkey", 2));
    CHECK(s.manifest("2020-01").window.extended_ids == std::vector<std::string>{"c"});
}

TEST_CASE("refilter survives a crash at every write") {
    oracle::TempDir clean;
    populate(clean.path());
    {
        WindowStore s = WindowStore::open(clean.path());
        refilter(s, with_stem("monkey", 2));
    }
    const std::string expect = snapshot(clean.path());

    bool finished = false;
    for (int crash_at = 1; !finished && crash_at < 50; ++crash_at) {
        oracle::TempDir dir;
        populate(dir.path());
        const int code = run_child([&] {
            int writes = 0;
            set_write_fault_hook([&](const fs::path&) {
                if (++writes == crash_at) ::_exit(9);
            });
            WindowStore s = WindowStore::open(dir.path());
            refilter(s, with_stem("monkey", 2));
        });
        REQUIRE((code == 9 || code == 0));
        finished = code == 0;
        // Recovery: reopen and rerun, unless the commit already landed.
        {
            WindowStore s = WindowStore::open(dir.path());
            if (s.filter().version < 2) refilter(s, with_stem("monkey", 2));
        }
        CHECK(snapshot(dir.path()) == expect);
    }
    CHECK(finished);
}

TEST_CASE("store root resolution") {
    CHECK(resolve_store_root(std::string("/tmp/x")) == fs::path("/tmp/x"));
    ::setenv("TAD_STORE", "/tmp/y", 1);
    CHECK(resolve_store_root(std::nullopt) == fs::path("/tmp/y"));
    ::unsetenv("TAD_STORE");
    CHECK_THROWS_AS(resolve_store_root(std::nullopt), ConfigError);
}
