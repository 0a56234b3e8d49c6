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
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "tad/common.hpp"
#include "tad/density.hpp"
#include "tad/embedding.hpp"
#include "tad/ingest.hpp"

namespace tad {

struct WindowSpec {
    enum class Mode { fixed, adaptive };
    Mode mode = Mode::fixed;
    double overlap_threshold = 0.5;  // adaptive only
    std::size_t min_fit_samples = 50;
    std::vector<int> k_grid = kDefaultKGrid;
    std::uint64_t seed = kDefaultSeed;

    /// Throws ConfigError unless the threshold lies in [0, 1).
    void validate() const;
};

struct Window {
    std::string window_id;
    Instant start{};
    Instant end{};  // exclusive
    std::vector<std::string> filtered_ids;
    std::vector<std::string> unfiltered_ids;
    std::vector<std::string> extended_ids;
    std::optional<std::string> model_ref;
    std::optional<EmbedderDescriptor> parent_embedder;

    bool contains(Instant t) const { return start <= t && t < end; }
};

/// One window per UTC calendar month holding at least one record, in time
/// order, ids "YYYY-MM". Within a window ids follow (timestamp, input order).
std::vector<Window> assign_fixed_windows(const std::vector<DocumentRecord>& records,
                                         const std::unordered_set<std::string>& filtered = {});

/// Per-day relevance with respect to the latest fitted day.
struct DayOverlap {
    Instant day{};
    std::size_t samples = 0;
    std::optional<double> overlap;  // absent when the day was merged without a test
    bool boundary = false;
};

struct AdaptiveResult {
    std::vector<Window> windows;
    std::vector<DayOverlap> days;
};

/// Groups filtered records by UTC day. A day is compared against the model of
/// the most recent earlier day that had at least min_fit_samples filtered
/// records; an overlap strictly below the threshold opens a new window at
/// that day. Days too small to fit are merged into the current window.
AdaptiveResult detect_adaptive_windows(const std::vector<DocumentRecord>& records,
                                       const std::unordered_set<std::string>& filtered, const WindowSpec& spec,
                                       const Embedder& embedder);

}  // namespace tad
