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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "tad/common.hpp"
#include "tad/text.hpp"

namespace tad {

struct FilterConfig;

/// One embedding per row.
using PointMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct MaskPolicy {
    bool enabled = false;
    std::string mask_token = "[MASK]";
    std::vector<std::string> stems;

    /// Every base and variation stem of the filter config.
    static MaskPolicy from_filter(const FilterConfig& config);

    bool masks(std::string_view normalized_token) const;
    nlohmann::json to_json() const;
    static MaskPolicy from_json(const nlohmann::json& j);
    bool operator==(const MaskPolicy&) const = default;
};

/// Whole-token replacement. Separators and unmasked tokens are kept
/// byte-for-byte.
std::string apply_semantic_mask(std::string_view text, const MaskPolicy& policy,
                                const ConfusablesTable& table = ConfusablesTable::builtin());

enum class EmbedderKind { hashed_ngram, remote };

struct EmbedderDescriptor {
    EmbedderKind kind = EmbedderKind::hashed_ngram;
    int dim = 256;
    std::uint64_t seed = kDefaultSeed;
    std::string endpoint;
    MaskPolicy mask;
    std::optional<std::string> parent;
    // Hashes of every ancestor, oldest first. Not part of hash().
    std::vector<std::string> lineage;

    nlohmann::json to_json() const;
    static EmbedderDescriptor from_json(const nlohmann::json& j);
    /// Content hash over kind, dim, seed, endpoint, mask policy and parent.
    std::string hash() const;
    bool operator==(const EmbedderDescriptor&) const = default;
};

/// Warm-start successor for a window: parent = hash(prior), lineage extended,
/// seed evolved as mix(seed, window_id). Throws LineageError if the prior
/// lineage already revisits a descriptor.
EmbedderDescriptor derive_window_embedder(const EmbedderDescriptor& prior, std::string_view window_id);

/// Embedders are immutable after construction and safe to share.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual const EmbedderDescriptor& descriptor() const = 0;
    int dim() const { return descriptor().dim; }
    /// One unit-norm row per text (zero row for text without tokens).
    virtual PointMatrix embed(const std::vector<std::string>& texts) const = 0;
};

class HashedNgramEmbedder final : public Embedder {
public:
    static constexpr int kMinGram = 3;
    static constexpr int kMaxGram = 5;

    explicit HashedNgramEmbedder(EmbedderDescriptor desc,
                                 const ConfusablesTable& table = ConfusablesTable::builtin());

    const EmbedderDescriptor& descriptor() const override { return desc_; }
    PointMatrix embed(const std::vector<std::string>& texts) const override;
    Eigen::VectorXf embed_one(std::string_view text) const;

    /// Normalized tokens after masking; a masked token is the normalized
    /// mask token and is never split further.
    std::vector<std::string> tokens(std::string_view text) const;

private:
    EmbedderDescriptor desc_;
    const ConfusablesTable* table_;
    std::string mask_norm_;
};

struct RemoteOptions {
    std::size_t batch_size = 64;
    int max_retries = 3;
    std::chrono::milliseconds backoff{50};
    std::chrono::seconds timeout{30};
};

/// Client for the embedding service: GET /info, POST /embed, POST /warmstart.
class RemoteEmbedder final : public Embedder {
public:
    RemoteEmbedder(EmbedderDescriptor desc, RemoteOptions options = {});

    const EmbedderDescriptor& descriptor() const override { return desc_; }
    PointMatrix embed(const std::vector<std::string>& texts) const override;

    /// GET /info. Throws ProtocolError when the advertised dim differs.
    nlohmann::json info() const;
    /// Asks the service to derive a checkpoint for `window_id` from the
    /// descriptor's parent. Returns the service's checkpoint hash.
    std::string request_warmstart(std::string_view window_id, const std::vector<std::string>& texts = {}) const;

private:
    nlohmann::json post(const std::string& path, const nlohmann::json& body, int* status) const;
    void embed_batch(const std::vector<std::string>& texts, std::size_t begin, std::size_t end, PointMatrix& out) const;

    EmbedderDescriptor desc_;
    RemoteOptions options_;
};

std::unique_ptr<Embedder> make_embedder(const EmbedderDescriptor& desc);

// ---------------------------------------------------------------------------
// Vector store file: "TADV", u16 version, u32 dim, u64 count, float32 rows,
// all little-endian.

void write_vectors(std::ostream& out, const PointMatrix& vectors);
PointMatrix read_vectors(std::istream& in);
std::string serialize_vectors(const PointMatrix& vectors);

}  // namespace tad
