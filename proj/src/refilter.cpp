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

#include "tad/refilter.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace tad {

using nlohmann::json;

json RefilterReport::to_json() const {
    json w = json::array();
    std::size_t total = 0;
    for (const auto& d : windows) {
        w.push_back({{"window_id", d.window_id}, {"moved", d.moved_ids.size()}, {"moved_ids", d.moved_ids}});
        total += d.moved_ids.size();
    }
    return {{"old_version", old_version},
            {"new_version", new_version},
            {"moved", moved_ids.size()},
            {"moved_in_windows", total},
            {"moved_ids", moved_ids},
            {"windows", w}};
}

RefilterReport refilter(WindowStore& store, const FilterConfig& config) {
    config.validate();
    RefilterReport rep;
    rep.old_version = store.filter().version;
    rep.new_version = config.version;
    if (config.version <= store.filter().version) {
        throw VersionError("filter version " + std::to_string(config.version) + " is not newer than stored version " +
                           std::to_string(store.filter().version));
    }

    const std::vector<DocumentRecord> records = store.records();
    std::unordered_map<std::string, const DocumentRecord*> by_id;
    for (const auto& r : records) by_id.emplace(r.id, &r);

    FilterPartition part = store.partition();
    std::unordered_set<std::string> moved;
    std::vector<std::string> still;
    for (const auto& id : part.unfiltered) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw StoreError("partition references unknown record " + id);
        if (!match_keywords(*it->second, config).empty()) {
            moved.insert(id);
            rep.moved_ids.push_back(id);
        } else {
            still.push_back(id);
        }
    }

    // Filtered ids keep ingestion order.
    std::unordered_set<std::string> filtered(part.filtered.begin(), part.filtered.end());
    filtered.insert(moved.begin(), moved.end());
    part.filtered.clear();
    for (const auto& r : records) {
        if (filtered.count(r.id)) part.filtered.push_back(r.id);
    }
    part.unfiltered = std::move(still);

    for (const auto& entry : store.windows()) {
        WindowManifest m = store.manifest(entry.window_id);
        Window& w = m.window;
        WindowDelta d;
        d.window_id = w.window_id;
        std::vector<std::string> keep;
        for (const auto& id : w.unfiltered_ids) (moved.count(id) ? d.moved_ids : keep).push_back(id);
        if (!d.moved_ids.empty()) {
            // Rebuild the filtered list in window order.
            std::unordered_set<std::string> now(w.filtered_ids.begin(), w.filtered_ids.end());
            now.insert(d.moved_ids.begin(), d.moved_ids.end());
            std::vector<std::string> ordered;
            for (const auto& r : store.window_records(w.window_id)) {
                if (now.count(r.id)) ordered.push_back(r.id);
            }
            w.filtered_ids = std::move(ordered);
            w.unfiltered_ids = std::move(keep);
            std::erase_if(w.extended_ids, [&](const std::string& id) { return moved.count(id) > 0; });
        }
        m.config_version = config.version;
        store.write_manifest(m);
        rep.windows.push_back(std::move(d));
    }

    store.write_partition(part);
    store.set_filter(config);
    return rep;
}

}  // namespace tad
