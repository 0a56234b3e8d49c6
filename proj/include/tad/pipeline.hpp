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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tad/common.hpp"
#include "tad/embedding.hpp"
#include "tad/refresh.hpp"
#include "tad/store.hpp"
#include "tad/weaklabel.hpp"
#include "tad/windowing.hpp"

namespace tad {

struct PipelineConfig {
    std::uint64_t seed = kDefaultSeed;
    std::optional<fs::path> filter_path;   // absent: shipped default
    std::optional<fs::path> lexicon_dir;   // swear.txt, second_person.txt, adverbs.txt, sentiment.tsv
    WindowSpec window;
    EmbedderDescriptor embedder;
    bool semantic_mask = true;
    std::size_t candidate_count = 500;
    std::size_t oracle_target = 400;
    bool oracle_balance = true;
    std::size_t annotators = 5;
    std::string aggregation = "em";        // majority | weighted | em
    DriftStreamConfig drift;
    std::vector<std::string> schemes = {"static", "slow", "fast", "ceiling"};
    ClassifierKind classifier = ClassifierKind::centroid;
    std::map<std::string, std::vector<std::string>> similarity_groups;

    /// Relative paths resolve against `base_dir`. Unknown keys are rejected.
    static PipelineConfig from_json(const nlohmann::json& j, const fs::path& base_dir = {});
    static PipelineConfig load(const fs::path& path);
    nlohmann::json to_json() const;
    /// hex of the canonical (sorted-key) serialization.
    std::string hash() const;
    /// Throws ConfigError for missing files or out-of-range values.
    void validate() const;

    FilterConfig filter() const;
    Lexicons lexicons() const;
    /// Seed for a named purpose: mix(seed, purpose).
    std::uint64_t seed_for(std::string_view purpose) const { return mix(seed, purpose); }
};

/// Masked descriptor (stems from `filter`) when masking is on, else the
/// configured one.
EmbedderDescriptor pipeline_embedder(const PipelineConfig& cfg, const FilterConfig& filter, bool masked);

// Each step returns the JSON summary the CLI prints.

nlohmann::json run_ingest(WindowStore& store, const fs::path& input, bool lenient);
nlohmann::json run_window(WindowStore& store, const PipelineConfig& cfg, WindowSpec::Mode mode);
nlohmann::json run_extend(WindowStore& store, const PipelineConfig& cfg, const std::string& window_id);
nlohmann::json run_oracle_export(WindowStore& store, const PipelineConfig& cfg, const std::string& window_id);
nlohmann::json run_oracle_import(WindowStore& store, const std::string& window_id, const std::vector<fs::path>& files);
nlohmann::json run_oracle_resolve(WindowStore& store, const PipelineConfig& cfg, const std::string& window_id);
/// Experts are the three lexicon labeling functions plus any long-form
/// vote files.
nlohmann::json run_label(WindowStore& store, const PipelineConfig& cfg, const std::string& window_id,
                         const std::string& method, const std::vector<fs::path>& vote_files);
nlohmann::json run_simulate(const PipelineConfig& cfg, const fs::path& out_dir);
nlohmann::json run_evaluate_schemes(const PipelineConfig& cfg, const fs::path& out_dir);
nlohmann::json run_evaluate_corpora(const PipelineConfig& cfg, const std::vector<std::pair<std::string, fs::path>>& corpora,
                                    const fs::path& out_dir);
/// Collates per-window density and label reports plus evaluation CSVs into
/// <store>/reports.
nlohmann::json run_report(WindowStore& store);

}  // namespace tad
