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

void WindowSpec::validate() const {
    if (mode == Mode::adaptive && !(overlap_threshold >= 0.0 && overlap_threshold < 1.0)) {
        throw ConfigError("overlap_threshold must lie in [0, 1)");
    }
    if (min_fit_samples < 2) throw ConfigError("min_fit_samples must be at least 2");
}

std::vector<Window> assign_fixed_windows(const std::vector<DocumentRecord>& records,
                                         const std::unordered_set<std::string>& filtered) {
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return records[a].timestamp < records[b].timestamp; });

    std::map<std::pair<int, unsigned>, Window> months;
    for (std::size_t i : order) {
        const DocumentRecord& r = records[i];
        const CivilDate d = civil_from_instant(r.timestamp);
        auto [it, fresh] = months.try_emplace({d.year, d.month});
        Window& w = it->second;
        if (fresh) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%04d-%02u", d.year, d.month);
            w.window_id = buf;
            w.start = instant_from_civil(d.year, d.month, 1);
            w.end = d.month == 12 ? instant_from_civil(d.year + 1, 1, 1) : instant_from_civil(d.year, d.month + 1, 1);
        }
        (filtered.count(r.id) ? w.filtered_ids : w.unfiltered_ids).push_back(r.id);
    }
    std::vector<Window> out;
    out.reserve(months.size());
    for (auto& [key, w] : months) out.push_back(std::move(w));
    return out;
}

}  // namespace tad
