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
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "tad/common.hpp"

namespace tad {

/// +1 fake, -1 real, 0 abstain.
enum Vote : std::int8_t { kReal = -1, kAbstain = 0, kFake = 1 };

inline Vote vote_of(Label l) { return l == Label::fake ? kFake : kReal; }

using VoteMatrix = Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic>;

struct ExpertLabelMatrix {
    std::vector<std::string> record_ids;
    std::vector<std::string> expert_ids;
    VoteMatrix votes;  // records x experts

    /// Long-form CSV: record_id, expert_id, vote (fake | real | abstain).
    /// Missing cells are abstentions. Row and column order follow first
    /// appearance.
    static ExpertLabelMatrix from_csv(std::string_view text);
    std::string to_csv() const;
    void validate() const;
};

// ---------------------------------------------------------------------------
// Lexicon labeling functions

struct Lexicons {
    std::unordered_set<std::string> swear;
    std::unordered_set<std::string> second_person;
    std::unordered_set<std::string> adverbs;
    std::unordered_set<std::string> adverb_exceptions;
    std::unordered_map<std::string, double> sentiment;

    static const Lexicons& builtin();
    static Lexicons parse(std::string_view swear, std::string_view second_person, std::string_view adverbs,
                          std::string_view sentiment);

    /// Closed list, or "-ly" with at least five characters unless excepted.
    bool is_adverb(const std::string& token) const;
};

struct LfThresholds {
    double swear = 0.02;
    double second_person = 0.08;
    double adverb = 0.12;
};

struct LexiconVotes {
    Vote swear = kAbstain;
    Vote second_person = kAbstain;
    Vote adverb = kAbstain;
    std::size_t tokens = 0;
    std::size_t swear_count = 0;
    std::size_t second_person_count = 0;
    std::size_t adverb_count = 0;
    double sentiment = 0.0;  // mean polarity of lexicon hits, in [-1, 1]
};

/// The three rate-threshold labeling functions plus a sentiment score.
/// Each function votes fake when its rate strictly exceeds the threshold
/// and abstains otherwise.
LexiconVotes lexicon_experts(std::string_view text, const Lexicons& lex = Lexicons::builtin(),
                             const LfThresholds& thresholds = {});

inline const std::vector<std::string> kLexiconExpertIds = {"lf_swear", "lf_second_person", "lf_adverb"};

// ---------------------------------------------------------------------------
// Aggregation

struct AggregatedLabel {
    std::string record_id;
    std::optional<Label> label;  // nullopt: unlabeled
    double confidence = 0.0;
    std::string method;

    nlohmann::json to_json() const;
};

struct ExpertWeight {
    std::string expert_id;
    double accuracy = 0.5;
    std::size_t support = 0;
};

/// Most non-abstain votes wins; confidence is the winning share. Exact ties
/// and all-abstain rows are unlabeled.
std::vector<AggregatedLabel> majority_vote(const ExpertLabelMatrix& m);

/// Laplace-smoothed accuracy of each expert on the oracle items it voted on.
std::vector<ExpertWeight> calibrate_weights(const ExpertLabelMatrix& m, const std::map<std::string, Label>& oracle);

/// Log-odds vote with weights clipped to [0.01, 0.99]; confidence is
/// 2*sigmoid(|score|) - 1.
std::vector<AggregatedLabel> weighted_vote(const ExpertLabelMatrix& m, const std::vector<ExpertWeight>& weights);

struct EmOptions {
    int max_iters = 1000;
    double tol = 1e-6;
    std::uint64_t seed = kDefaultSeed;
};

struct EmResult {
    std::vector<AggregatedLabel> labels;
    std::vector<ExpertWeight> weights;
    std::vector<double> posterior;  // P(fake | votes), per record
    double prior_fake = 0.5;
    // Log-likelihood plus the Beta(2,2) log-prior terms, once per iteration.
    std::vector<double> objective;
    int iterations = 0;
    bool converged = false;
    bool fallback_to_majority = false;
};

/// Two-class Dawid-Skene with one accuracy per expert. Accuracies and the
/// class prior are MAP estimates under Beta(2,2), which is the +1/+2
/// smoothing of the M-step. Starts from the soft majority.
EmResult em_latent_labels(const ExpertLabelMatrix& m, const EmOptions& options = {});

}  // namespace tad
