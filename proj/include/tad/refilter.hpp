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
#include <string>
#include <vector>

#include <json.hpp>

#include "tad/ingest.hpp"
#include "tad/store.hpp"

namespace tad {

struct WindowDelta {
    std::string window_id;
    std::vector<std::string> moved_ids;  // window order
};

struct RefilterReport {
    std::int64_t old_version = 0;
    std::int64_t new_version = 0;
    std::vector<WindowDelta> windows;
    std::vector<std::string> moved_ids;  // every move, ingestion order

    nlohmann::json to_json() const;
};

/// Re-matches every unfiltered record against `config` and moves hits to the
/// filtered set, in the ingest partition and in each window. Moved ids leave
/// the window's extended set. Nothing ever leaves a filtered set. Throws
/// VersionError unless config.version exceeds the stored version.
RefilterReport refilter(WindowStore& store, const FilterConfig& config);

}  // namespace tad
