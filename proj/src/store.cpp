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

#include "tad/store.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace tad {

using nlohmann::json;

namespace {

WriteFaultHook g_fault_hook;

constexpr std::string_view kTempMarker = ".tmp.";

void write_all(int fd, std::string_view content, const fs::path& path) {
    const char* p = content.data();
    std::size_t left = content.size();
    while (left > 0) {
        const ssize_t n = ::write(fd, p, left);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw IoError("write " + path.string() + ": " + std::strerror(errno));
        }
        p += n;
        left -= static_cast<std::size_t>(n);
    }
}

void fsync_dir(const fs::path& dir) {
    const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
    if (fd < 0) return;
    ::fsync(fd);
    ::close(fd);
}

}  // namespace

void set_write_fault_hook(WriteFaultHook hook) { g_fault_hook = std::move(hook); }

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool atomic_write(const fs::path& path, std::string_view content) {
    std::error_code ec;
    if (fs::exists(path, ec) && fs::file_size(path, ec) == content.size() && read_file(path) == content) return false;
    fs::create_directories(path.parent_path());

    const fs::path tmp = path.string() + std::string(kTempMarker) + std::to_string(::getpid());
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd < 0) throw IoError("open " + tmp.string() + ": " + std::strerror(errno));
    try {
        write_all(fd, content, tmp);
    } catch (...) {
        ::close(fd);
        ::unlink(tmp.c_str());
        throw;
    }
    if (::fsync(fd) != 0 || ::close(fd) != 0) {
        ::unlink(tmp.c_str());
        throw IoError("flush " + tmp.string() + ": " + std::strerror(errno));
    }
    if (g_fault_hook) g_fault_hook(path);
    if (::rename(tmp.c_str(), path.c_str()) != 0) {
        ::unlink(tmp.c_str());
        throw IoError("rename " + tmp.string() + ": " + std::strerror(errno));
    }
    fsync_dir(path.parent_path());
    return true;
}

std::string json_text(const json& j) { return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n"; }

StoreLock::StoreLock(fs::path path) : path_(std::move(path)) {
    for (int attempt = 0; attempt < 2; ++attempt) {
        const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
        if (fd >= 0) {
            const std::string pid = std::to_string(::getpid()) + "\n";
            write_all(fd, pid, path_);
            ::close(fd);
            return;
        }
        if (errno != EEXIST) throw StoreError("cannot create lock " + path_.string() + ": " + std::strerror(errno));
        // Take over a lock whose owner is gone.
        std::ifstream in(path_);
        long owner = 0;
        in >> owner;
        if (owner > 0 && (::kill(static_cast<pid_t>(owner), 0) == 0 || errno != ESRCH)) break;
        ::unlink(path_.c_str());
    }
    throw StoreError("store is locked by another process (" + path_.string() + ")");
}

StoreLock::~StoreLock() { ::unlink(path_.c_str()); }

// ---------------------------------------------------------------------------

json WindowManifest::to_json() const {
    const Window& w = window;
    json j;
    j["window_id"] = w.window_id;
    j["start"] = format_rfc3339(w.start);
    j["end"] = format_rfc3339(w.end);
    j["counts"] = {{"filtered", w.filtered_ids.size()},
                   {"unfiltered", w.unfiltered_ids.size()},
                   {"extended", w.extended_ids.size()}};
    j["filtered_ids"] = w.filtered_ids;
    j["unfiltered_ids"] = w.unfiltered_ids;
    j["extended_ids"] = w.extended_ids;
    j["model_ref"] = w.model_ref ? json(*w.model_ref) : json(nullptr);
    j["parent_embedder"] = w.parent_embedder ? w.parent_embedder->to_json() : json(nullptr);
    j["embedder"] = embedder ? embedder->to_json() : json(nullptr);
    j["config_version"] = config_version;
    return j;
}

WindowManifest WindowManifest::from_json(const json& j) {
    WindowManifest m;
    try {
        Window& w = m.window;
        w.window_id = j.at("window_id").get<std::string>();
        const auto start = parse_rfc3339(j.at("start").get<std::string>());
        const auto end = parse_rfc3339(j.at("end").get<std::string>());
        if (!start || !end) throw StoreError("manifest " + w.window_id + ": bad bounds");
        w.start = *start;
        w.end = *end;
        w.filtered_ids = j.at("filtered_ids").get<std::vector<std::string>>();
        w.unfiltered_ids = j.at("unfiltered_ids").get<std::vector<std::string>>();
        w.extended_ids = j.at("extended_ids").get<std::vector<std::string>>();
        if (!j.at("model_ref").is_null()) w.model_ref = j["model_ref"].get<std::string>();
        if (!j.at("parent_embedder").is_null()) w.parent_embedder = EmbedderDescriptor::from_json(j["parent_embedder"]);
        if (j.contains("embedder") && !j["embedder"].is_null()) m.embedder = EmbedderDescriptor::from_json(j["embedder"]);
        m.config_version = j.at("config_version").get<std::int64_t>();
        const json& c = j.at("counts");
        if (c.at("filtered").get<std::size_t>() != w.filtered_ids.size() ||
            c.at("unfiltered").get<std::size_t>() != w.unfiltered_ids.size() ||
            c.at("extended").get<std::size_t>() != w.extended_ids.size()) {
            throw StoreError("manifest " + w.window_id + ": counts disagree with id lists");
        }
    } catch (const json::exception& e) {
        throw StoreError(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

// ---------------------------------------------------------------------------

namespace {

void remove_temp_files(const fs::path& root) {
    std::vector<fs::path> stale;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file() && e.path().filename().string().find(kTempMarker) != std::string::npos) {
            stale.push_back(e.path());
        }
    }
    for (const auto& p : stale) fs::remove(p);
}

std::string records_text(const std::vector<DocumentRecord>& records) {
    std::string out;
    for (const auto& r : records) out += to_jsonl(r) + "\n";
    return out;
}

std::vector<DocumentRecord> load_jsonl(const fs::path& path) {
    if (!fs::exists(path)) return {};
    ReadResult rr = read_records_file(path);
    if (!rr.rejects.empty()) throw StoreError(path.string() + ": corrupt line " + std::to_string(rr.rejects[0].line_no));
    return std::move(rr.records);
}

}  // namespace

WindowStore WindowStore::create(const fs::path& root, const FilterConfig& filter) {
    if (!fs::exists(root / "store.json")) {
        fs::create_directories(root / "ingest");
        fs::create_directories(root / "windows");
        WindowStore s;
        s.root_ = root;
        s.lock_ = std::make_unique<StoreLock>(root / ".lock");
        remove_temp_files(root);  // a crash mid-create can leave store.json.tmp behind
        s.filter_ = filter;
        s.save();
        return s;
    }
    return open(root);
}

WindowStore WindowStore::open(const fs::path& root) {
    if (!fs::exists(root / "store.json")) throw StoreError("no store at " + root.string());
    WindowStore s;
    s.root_ = root;
    s.lock_ = std::make_unique<StoreLock>(root / ".lock");
    remove_temp_files(root);
    s.load();
    return s;
}

WindowStore::~WindowStore() = default;

void WindowStore::load() {
    json j;
    try {
        j = json::parse(read_file(root_ / "store.json"));
        if (j.at("format_version").get<int>() != kFormatVersion) throw StoreError("unsupported store format");
        filter_ = FilterConfig::from_json(j.at("filter"));
        index_.clear();
        for (const auto& e : j.at("windows")) {
            WindowIndexEntry w;
            w.window_id = e.at("window_id").get<std::string>();
            w.start = parse_rfc3339(e.at("start").get<std::string>()).value();
            w.end = parse_rfc3339(e.at("end").get<std::string>()).value();
            index_.push_back(std::move(w));
        }
    } catch (const json::exception& e) {
        throw StoreError(std::string("malformed store.json: ") + e.what());
    } catch (const std::bad_optional_access&) {
        throw StoreError("malformed store.json: bad window bounds");
    }
}

void WindowStore::save() const {
    json windows = json::array();
    for (const auto& w : index_) {
        windows.push_back({{"window_id", w.window_id}, {"start", format_rfc3339(w.start)}, {"end", format_rfc3339(w.end)}});
    }
    const json j = {{"format_version", kFormatVersion},
                    {"config_version", filter_.version},
                    {"filter", filter_.to_json()},
                    {"windows", windows}};
    atomic_write(root_ / "store.json", json_text(j));
}

fs::path WindowStore::window_dir(const std::string& window_id) const {
    if (window_id.empty() || window_id.find('/') != std::string::npos || window_id[0] == '.') {
        throw StoreError("invalid window id '" + window_id + "'");
    }
    return root_ / "windows" / window_id;
}

void WindowStore::set_filter(FilterConfig filter) {
    filter_ = std::move(filter);
    save();
}

bool WindowStore::has_window(const std::string& window_id) const {
    return std::any_of(index_.begin(), index_.end(), [&](const auto& w) { return w.window_id == window_id; });
}

std::vector<DocumentRecord> WindowStore::records() const { return load_jsonl(root_ / "ingest" / "records.jsonl"); }

void WindowStore::write_records(const std::vector<DocumentRecord>& records) {
    atomic_write(root_ / "ingest" / "records.jsonl", records_text(records));
}

FilterPartition WindowStore::partition() const {
    const fs::path p = root_ / "ingest" / "partition.json";
    if (!fs::exists(p)) return {};
    try {
        const json j = json::parse(read_file(p));
        return {j.at("filtered").get<std::vector<std::string>>(), j.at("unfiltered").get<std::vector<std::string>>()};
    } catch (const json::exception& e) {
        throw StoreError(std::string("malformed partition.json: ") + e.what());
    }
}

void WindowStore::write_partition(const FilterPartition& p) {
    const json j = {{"filtered", p.filtered}, {"unfiltered", p.unfiltered}};
    atomic_write(root_ / "ingest" / "partition.json", json_text(j));
}

void WindowStore::append_rejects(const std::vector<RejectedLine>& rejects) {
    if (rejects.empty()) return;
    const fs::path p = root_ / "rejects.jsonl";
    std::string text = fs::exists(p) ? read_file(p) : std::string();
    for (const auto& r : rejects) {
        const std::string line = tad::to_json(r).dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
        // Re-ingesting the same file must not duplicate entries.
        if (text.find(line) == std::string::npos) text += line;
    }
    atomic_write(p, text);
}

WindowManifest WindowStore::manifest(const std::string& window_id) const {
    const fs::path p = window_dir(window_id) / "manifest.json";
    if (!has_window(window_id) || !fs::exists(p)) throw StoreError("unknown window '" + window_id + "'");
    try {
        return WindowManifest::from_json(json::parse(read_file(p)));
    } catch (const json::exception& e) {
        throw StoreError("malformed manifest for " + window_id + ": " + e.what());
    }
}

std::vector<DocumentRecord> WindowStore::window_records(const std::string& window_id) const {
    if (!has_window(window_id)) throw StoreError("unknown window '" + window_id + "'");
    return load_jsonl(window_dir(window_id) / "records.jsonl");
}

void WindowStore::write_manifest(const WindowManifest& m) {
    atomic_write(window_dir(m.window.window_id) / "manifest.json", json_text(m.to_json()));
}

void WindowStore::replace_windows(const std::vector<Window>& windows, const std::vector<DocumentRecord>& records) {
    std::unordered_map<std::string, const DocumentRecord*> by_id;
    std::unordered_map<const DocumentRecord*, std::size_t> input_pos;
    for (std::size_t i = 0; i < records.size(); ++i) {
        by_id.emplace(records[i].id, &records[i]);
        input_pos[&records[i]] = i;
    }

    std::vector<std::string> keep;
    for (const auto& w : windows) {
        keep.push_back(w.window_id);
        const fs::path dir = window_dir(w.window_id);
        WindowManifest m;
        m.window = w;
        m.config_version = filter_.version;
        if (fs::exists(dir / "manifest.json")) {
            const WindowManifest old = WindowManifest::from_json(json::parse(read_file(dir / "manifest.json")));
            if (old.window.filtered_ids == w.filtered_ids && old.window.unfiltered_ids == w.unfiltered_ids &&
                old.window.start == w.start && old.window.end == w.end) {
                m = old;  // unchanged, derived artifacts stay valid
            } else {
                for (const char* stale : {"vectors.bin", "model.json", "assignments.tsv", "labels.jsonl"}) fs::remove(dir / stale);
                fs::remove_all(dir / "reports");
                fs::remove_all(dir / "oracle");
            }
        }
        // Window order: time, then input order, matching the id lists.
        std::vector<std::pair<Instant, std::pair<std::size_t, const DocumentRecord*>>> rows;
        std::size_t pos = 0;
        for (const auto* ids : {&w.filtered_ids, &w.unfiltered_ids}) {
            for (const auto& id : *ids) {
                auto it = by_id.find(id);
                if (it == by_id.end()) throw StoreError("window " + w.window_id + " references unknown record " + id);
                rows.push_back({it->second->timestamp, {pos++, it->second}});
            }
        }
        std::stable_sort(rows.begin(), rows.end(), [&](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first < b.first;
            return input_pos[a.second.second] < input_pos[b.second.second];
        });
        std::string text;
        for (const auto& r : rows) text += to_jsonl(*r.second.second) + "\n";
        atomic_write(dir / "records.jsonl", text);
        write_manifest(m);
    }

    const fs::path wroot = root_ / "windows";
    if (fs::exists(wroot)) {
        std::vector<fs::path> gone;
        for (const auto& e : fs::directory_iterator(wroot)) {
            if (std::find(keep.begin(), keep.end(), e.path().filename().string()) == keep.end()) gone.push_back(e.path());
        }
        for (const auto& p : gone) fs::remove_all(p);
    }

    index_.clear();
    for (const auto& w : windows) index_.push_back({w.window_id, w.start, w.end});
    std::stable_sort(index_.begin(), index_.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
    save();
}

fs::path resolve_store_root(const std::optional<std::string>& flag) {
    if (flag && !flag->empty()) return *flag;
    if (const char* env = std::getenv("TAD_STORE"); env && *env) return env;
    throw ConfigError("no store given: pass --store or set TAD_STORE");
}

}  // namespace tad
