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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tad/common.hpp"
#include "tad/embedding.hpp"
#include "tad/ingest.hpp"
#include "tad/windowing.hpp"

namespace tad {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Files

/// Called after a temp file is flushed and before it replaces the target.
/// Tests use it to kill the process mid-write.
using WriteFaultHook = std::function<void(const fs::path& target)>;
void set_write_fault_hook(WriteFaultHook hook);

/// Writes `content` to a sibling temp file, fsyncs, then renames over
/// `path`. Returns false, leaving the file untouched, when the content is
/// already identical.
bool atomic_write(const fs::path& path, std::string_view content);
std::string read_file(const fs::path& path);

/// Pretty JSON with a trailing newline; keys come out sorted.
std::string json_text(const nlohmann::json& j);

/// O_EXCL lock file. A lock left behind by a dead process is taken over.
class StoreLock {
public:
    explicit StoreLock(fs::path path);
    ~StoreLock();
    StoreLock(const StoreLock&) = delete;
    StoreLock& operator=(const StoreLock&) = delete;

private:
    fs::path path_;
};

// ---------------------------------------------------------------------------
// Store

struct WindowManifest {
    Window window;
    std::int64_t config_version = 0;
    std::optional<EmbedderDescriptor> embedder;

    nlohmann::json to_json() const;
    static WindowManifest from_json(const nlohmann::json& j);
};

struct WindowIndexEntry {
    std::string window_id;
    Instant start{};
    Instant end{};
};

/// Directory layout:
///   store.json                     format, filter config, window index
///   rejects.jsonl                  quarantined input lines
///   ingest/records.jsonl           every accepted record, ingestion order
///   ingest/partition.json          filtered / unfiltered ids
///   windows/<id>/manifest.json     ids, counts, model ref, embedder
///   windows/<id>/records.jsonl     the window's records, window order
///   windows/<id>/vectors.bin       one row per records.jsonl line
///   windows/<id>/model.json        cluster model
///   windows/<id>/assignments.tsv   filtered id, cluster
///   windows/<id>/labels.jsonl      aggregated labels
///   windows/<id>/reports/          density.json
///   windows/<id>/oracle/           selection, batch, annotations, agreement
class WindowStore {
public:
    static constexpr int kFormatVersion = 1;

    /// Creates the layout if needed, then opens.
    static WindowStore create(const fs::path& root, const FilterConfig& filter = FilterConfig::builtin());
    /// Throws StoreError when `root` holds no store. Takes the lock and
    /// removes temp files left by an interrupted write.
    static WindowStore open(const fs::path& root);

    WindowStore(WindowStore&&) noexcept = default;
    WindowStore& operator=(WindowStore&&) noexcept = default;
    ~WindowStore();

    const fs::path& root() const { return root_; }
    fs::path window_dir(const std::string& window_id) const;

    const FilterConfig& filter() const { return filter_; }
    void set_filter(FilterConfig filter);
    const std::vector<WindowIndexEntry>& windows() const { return index_; }
    bool has_window(const std::string& window_id) const;

    std::vector<DocumentRecord> records() const;
    void write_records(const std::vector<DocumentRecord>& records);
    FilterPartition partition() const;
    void write_partition(const FilterPartition& p);
    void append_rejects(const std::vector<RejectedLine>& rejects);

    WindowManifest manifest(const std::string& window_id) const;
    std::vector<DocumentRecord> window_records(const std::string& window_id) const;

    /// Replaces the window set. Directories of windows no longer present are
    /// removed; kept windows whose id lists change lose derived artifacts.
    void replace_windows(const std::vector<Window>& windows, const std::vector<DocumentRecord>& records);
    void write_manifest(const WindowManifest& m);

    /// Writes store.json.
    void save() const;

private:
    WindowStore() = default;
    void load();

    fs::path root_;
    FilterConfig filter_;
    std::vector<WindowIndexEntry> index_;
    std::unique_ptr<StoreLock> lock_;
};

/// --store value, else $TAD_STORE. Throws ConfigError when neither is set.
fs::path resolve_store_root(const std::optional<std::string>& flag);

}  // namespace tad
