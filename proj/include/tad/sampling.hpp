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
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "tad/common.hpp"
#include "tad/density.hpp"
#include "tad/embedding.hpp"
#include "tad/ingest.hpp"

namespace tad {

struct BinPlan {
    int cluster = 0;
    std::size_t members = 0;
    std::size_t bins = 0;
    std::vector<double> edges;  // bins + 1 distance boundaries
};

struct OracleSelection {
    std::string window_id;
    std::vector<std::string> candidate_ids;  // sorted
    std::vector<BinPlan> bin_plan;
    std::uint64_t seed = 0;
    std::size_t requested = 0;
    bool short_window = false;  // pool smaller than the request

    nlohmann::json to_json() const;
    static OracleSelection from_json(const nlohmann::json& j);
};

/// Largest-remainder allocation of `budget` over cluster sizes with at least
/// one slot per non-empty cluster and no cluster above its size.
std::vector<std::size_t> allocate_bins(const std::vector<std::size_t>& sizes, std::size_t budget);

namespace detail {
OracleSelection select_representatives(std::string window_id, const std::vector<std::string>& ids,
                                       const CenterMatrix& vectors, const ClusterModel& model,
                                       std::size_t candidate_count, std::uint64_t seed);
}

/// Distance-binned representatives. Each pool row joins its nearest center;
/// each cluster's bins split its members (sorted by distance, then id) into
/// equal-count runs and contribute the member nearest the run's median
/// distance. A pool no larger than the request is taken whole.
template <typename Derived>
OracleSelection select_representatives(std::string window_id, const std::vector<std::string>& ids,
                                       const Eigen::MatrixBase<Derived>& vectors, const ClusterModel& model,
                                       std::size_t candidate_count = 500, std::uint64_t seed = kDefaultSeed) {
    return detail::select_representatives(std::move(window_id), ids, vectors.template cast<double>(), model,
                                          candidate_count, seed);
}

/// CSV with record_id, text, likes, shares, retweets, deleted. Throws
/// StoreError when a candidate is missing from `records`.
std::string export_annotation_batch(const OracleSelection& selection,
                                    const std::unordered_map<std::string, const DocumentRecord*>& records);

struct AnnotationRecord {
    std::string record_id;
    std::string annotator_id;
    Label label = Label::real;
    Instant annotated_at{};

    bool operator==(const AnnotationRecord&) const = default;
};

nlohmann::json to_json(const AnnotationRecord& a);
AnnotationRecord annotation_from_json(const nlohmann::json& j);

/// Reads annotation CSVs (the export columns plus annotator_id, label,
/// annotated_at). Keeps the latest submission per (record, annotator).
/// Unknown labels throw LabelError with the 1-based data row; two different
/// labels at the same instant throw ConflictError. Sorted by record, then
/// annotator.
std::vector<AnnotationRecord> import_annotations(const std::vector<std::string>& csv_files);

struct AgreementReport {
    std::vector<std::string> accepted_ids;
    std::vector<std::string> rejected_ids;
    std::vector<std::string> incomplete_ids;
    std::vector<std::string> final_oracle_ids;
    std::map<std::string, Label> labels;  // accepted id -> unanimous label
    std::size_t final_fake = 0;
    std::size_t final_real = 0;
    std::size_t target = 0;
    bool balanced = false;
    bool short_of_target = false;

    nlohmann::json to_json() const;
};

/// Unanimous candidates among those with exactly `annotators` votes, then a
/// seeded cut to `target` (balanced per class when asked, topping up from the
/// larger class).
AgreementReport resolve_agreement(const std::vector<AnnotationRecord>& annotations, std::size_t target = 400,
                                  bool balance = true, std::uint64_t seed = kDefaultSeed, std::size_t annotators = 5);

}  // namespace tad
