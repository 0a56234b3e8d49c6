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
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "tad/common.hpp"
#include "tad/embedding.hpp"
#include "tad/ingest.hpp"

namespace tad {

// ---------------------------------------------------------------------------
// Synthetic drifting streams

struct DriftStreamConfig {
    int windows = 10;
    int samples = 2000;          // per window, split evenly between classes
    double novel_fraction = 0.6; // share of each document's tokens from the novel pools
    int rotation_period = 1;     // windows per novel-vocabulary replacement
    std::uint64_t seed = kDefaultSeed;

    int tokens_per_doc = 12;
    int persistent_pool = 30;      // per class, stable across windows
    int real_novel_pool = 200;     // real novel content is diffuse
    int fake_novel_pool = 200;     // fringe vocabulary for mutated campaign tokens
    int campaign_templates = 1;    // fake novel content repeats a few templates
    double campaign_mutation = 0.12;
    double style_fake = 0.3;       // chance of one lexicon style token per document
    double style_real = 0.1;
    double keyword_rate = 0.0;     // chance of one filter keyword per document, either class
    int start_year = 2020;
    unsigned start_month = 1;

    nlohmann::json to_json() const;
    static DriftStreamConfig from_json(const nlohmann::json& j);
    void validate() const;
};

struct LabeledWindow {
    std::string window_id;
    std::vector<DocumentRecord> records;  // every record carries a label
};

struct DriftStream {
    DriftStreamConfig config;
    std::vector<LabeledWindow> windows;
    std::set<std::string> persistent_tokens;  // union of both classes' stable pools
};

/// Each document mixes round((1 - rho) * L) tokens from its class's
/// persistent pool with round(rho * L) tokens from the class's current novel
/// content: a few mutated templates for fake, a wide pool for real. Window w
/// is stamped inside calendar month start + w.
DriftStream generate_drift_stream(const DriftStreamConfig& config);

/// Share of the time-pooled class signal carried by the persistent pools:
/// ||dP_persistent||^2 / ||dP_total||^2 over class-conditional token
/// distributions measured on the stream.
double persistent_signal_share(const DriftStream& stream);

// ---------------------------------------------------------------------------
// Classifier

enum class ClassifierKind { centroid, centroid_social, centroid_social_lf };

std::string_view to_string(ClassifierKind kind);
ClassifierKind parse_classifier_kind(std::string_view text);

/// Embedding-independent side features of one record.
struct SideFeatures {
    Eigen::Vector4d social;  // log1p likes, shares, retweets; sentiment
    Eigen::Vector3d lf;      // swear, second-person, adverb counts
};

SideFeatures side_features(const DocumentRecord& record);

struct ClassifierState {
    ClassifierKind kind = ClassifierKind::centroid;
    Eigen::Index embedding_dim = 0;
    Eigen::VectorXd social_mean, social_scale;  // scale = 1 / (std * sqrt(4))
    Eigen::VectorXd lf_mean, lf_scale;
    Eigen::RowVectorXd centroid_fake, centroid_real;
    std::vector<std::string> trained_on;
    std::optional<EmbedderDescriptor> embedder;

    Eigen::Index feature_dim() const;
    /// Nearest centroid; equal distances go to fake.
    Label predict(const Eigen::Ref<const Eigen::RowVectorXf>& embedding, const SideFeatures& side) const;
    nlohmann::json to_json() const;
};

/// One training example, borrowed.
struct Example {
    const float* embedding;
    const SideFeatures* side;
    Label label;
};

/// Class means of the feature vectors. Side blocks are z-scored on the
/// training pool and scaled by 1/sqrt(block size). Throws MissingClassError
/// when a class is absent.
ClassifierState train_window_classifier(const std::vector<Example>& pool, Eigen::Index embedding_dim,
                                        ClassifierKind kind);

// ---------------------------------------------------------------------------
// Update schemes

struct UpdateScheme {
    enum class Kind { static_, slow, fast, ceiling };
    Kind kind = Kind::static_;
    int refresh_every = 1;
    int memory = 1;
    bool warm_start = true;
    int static_windows = 3;

    static UpdateScheme static_scheme() { return {Kind::static_, 1, 3, false, 3}; }
    static UpdateScheme slow() { return {Kind::slow, 2, 2, true, 3}; }
    static UpdateScheme fast() { return {Kind::fast, 1, 1, true, 3}; }
    /// Trains on the current window's own training half.
    static UpdateScheme ceiling() { return {Kind::ceiling, 1, 1, false, 3}; }
    static UpdateScheme parse(std::string_view name);

    std::string name() const;
    nlohmann::json to_json() const;
};

struct WindowAccuracy {
    int window_index = 0;
    std::string window_id;
    double accuracy = 0.0;
    std::size_t n_eval = 0;
};

struct EvalReport {
    std::string scheme;
    ClassifierKind kind = ClassifierKind::centroid;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::vector<WindowAccuracy> windows;

    double mean(int from = 0, int to = -1) const;  // over window indices [from, to]
    /// scheme, window_index, window_id, accuracy, n_eval, seed, config_hash
    std::string to_csv(bool header = true) const;
    /// window_index, window_id, scheme, accuracy
    std::string to_plot_tsv(bool header = true) const;
};

/// Runs schemes over one stream, caching embeddings per (embedder, window).
/// Each window is split 50/50 into train and eval halves with a seed derived
/// from (seed, window index); the split is shared by every scheme.
class RefreshHarness {
public:
    RefreshHarness(const DriftStream& stream, EmbedderDescriptor base, std::uint64_t seed);
    ~RefreshHarness();

    EvalReport run(const UpdateScheme& scheme, ClassifierKind kind = ClassifierKind::centroid);

    /// Extra labeled records added to the static scheme's training pool.
    void add_static_training(std::vector<DocumentRecord> records);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

EvalReport apply_scheme(const DriftStream& stream, const UpdateScheme& scheme, ClassifierKind kind,
                        std::uint64_t seed, const EmbedderDescriptor& base = {});

// ---------------------------------------------------------------------------
// Cross-corpus protocol

struct NamedCorpus {
    std::string name;
    std::vector<DocumentRecord> train;
    std::vector<DocumentRecord> test;
};

/// Reads <dir>/train.jsonl and <dir>/test.jsonl; every record needs a label.
NamedCorpus load_corpus(const std::string& name, const std::filesystem::path& dir);

/// One window of a drift stream, split 50/50 into train and test.
NamedCorpus corpus_from_stream(const std::string& name, const DriftStreamConfig& config);

struct CorpusSummary {
    std::string name;
    double same = 0.0;
    std::optional<double> cross;
    std::optional<double> similar;
};

struct CrossCorpusResult {
    std::vector<std::string> names;
    std::vector<std::vector<double>> accuracy;  // [train][test]
    std::vector<CorpusSummary> summary;
    std::vector<std::string> warnings;

    std::string matrix_csv() const;
    std::string summary_csv() const;
};

CrossCorpusResult cross_corpus_eval(const std::vector<NamedCorpus>& corpora,
                                    const std::map<std::string, std::vector<std::string>>& similarity_groups,
                                    ClassifierKind kind, const EmbedderDescriptor& embedder = {});

}  // namespace tad
