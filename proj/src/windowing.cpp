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

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>

#include "tad/windowing.hpp"

namespace tad {

namespace {

struct Day {
    Instant start;
    std::vector<std::size_t> members;  // all records, time order
    std::vector<std::string> texts;    // filtered texts only
};

std::string adaptive_id(std::size_t n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "adaptive-%04zu", n);
    return buf;
}

}  // namespace

AdaptiveResult detect_adaptive_windows(const std::vector<DocumentRecord>& records,
                                       const std::unordered_set<std::string>& filtered, const WindowSpec& spec,
                                       const Embedder& embedder) {
    spec.validate();
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return records[a].timestamp < records[b].timestamp; });

    std::map<Instant, Day> by_day;
    for (std::size_t i : order) {
        const Instant d = day_floor(records[i].timestamp);
        Day& day = by_day.try_emplace(d, Day{d, {}, {}}).first->second;
        day.members.push_back(i);
        if (filtered.count(records[i].id)) day.texts.push_back(records[i].text);
    }

    AdaptiveResult result;
    std::optional<ClusterModel> reference;
    for (auto& [start, day] : by_day) {
        DayOverlap info;
        info.day = start;
        info.samples = day.texts.size();
        const bool fits = day.texts.size() >= spec.min_fit_samples;
        PointMatrix vectors;
        if (fits) {
            vectors = embedder.embed(day.texts);
            if (reference) {
                info.overlap = relevance_overlap(vectors, *reference);
                info.boundary = *info.overlap < spec.overlap_threshold;
            }
        }
        if (result.windows.empty() || info.boundary) {
            Window w;
            w.window_id = adaptive_id(result.windows.size() + 1);
            w.start = start;
            result.windows.push_back(std::move(w));
        }
        Window& w = result.windows.back();
        w.end = start + std::chrono::days{1};
        for (std::size_t i : day.members) {
            (filtered.count(records[i].id) ? w.filtered_ids : w.unfiltered_ids).push_back(records[i].id);
        }
        if (fits) {
            const auto days_since_epoch = static_cast<std::uint64_t>(start.time_since_epoch().count() / 86400);
            reference = fit_density(vectors, spec.k_grid, mix(spec.seed, days_since_epoch));
        }
        result.days.push_back(info);
    }
    return result;
}

}  // namespace tad
