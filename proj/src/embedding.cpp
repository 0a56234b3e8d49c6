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

#include "tad/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "tad/ingest.hpp"

namespace tad {

using nlohmann::json;

MaskPolicy MaskPolicy::from_filter(const FilterConfig& config) {
    MaskPolicy p;
    p.enabled = true;
    for (const auto& s : config.specs) {
        p.stems.push_back(s.base);
        p.stems.insert(p.stems.end(), s.variations.begin(), s.variations.end());
    }
    std::sort(p.stems.begin(), p.stems.end());
    p.stems.erase(std::unique(p.stems.begin(), p.stems.end()), p.stems.end());
    return p;
}

bool MaskPolicy::masks(std::string_view token) const {
    if (!enabled) return false;
    for (const auto& stem : stems) {
        if (has_prefix(token, stem)) return true;
    }
    return false;
}

json MaskPolicy::to_json() const { return {{"enabled", enabled}, {"mask_token", mask_token}, {"stems", stems}}; }

MaskPolicy MaskPolicy::from_json(const json& j) {
    MaskPolicy p;
    p.enabled = j.value("enabled", false);
    p.mask_token = j.value("mask_token", std::string("[MASK]"));
    p.stems = j.value("stems", std::vector<std::string>{});
    if (p.enabled && p.stems.empty()) throw ConfigError("mask policy enabled without stems");
    return p;
}

std::string apply_semantic_mask(std::string_view text, const MaskPolicy& policy, const ConfusablesTable& table) {
    if (!policy.enabled) return std::string(text);
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    for (const Token& tok : tokenize(text, table)) {
        if (!policy.masks(tok.text)) continue;
        out.append(text.substr(pos, tok.begin - pos));
        out += policy.mask_token;
        pos = tok.end;
    }
    out.append(text.substr(pos));
    return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string_view kind_name(EmbedderKind kind) { return kind == EmbedderKind::remote ? "remote" : "hashed-ngram"; }

}  // namespace

json EmbedderDescriptor::to_json() const {
    json j = {{"kind", kind_name(kind)},
              {"dim", dim},
              {"seed", seed},
              {"endpoint", endpoint},
              {"mask_policy", mask.to_json()},
              {"lineage", lineage}};
    j["parent"] = parent ? json(*parent) : json(nullptr);
    return j;
}

EmbedderDescriptor EmbedderDescriptor::from_json(const json& j) {
    EmbedderDescriptor d;
    try {
        const std::string kind = j.value("kind", std::string("hashed-ngram"));
        if (kind == "hashed-ngram") d.kind = EmbedderKind::hashed_ngram;
        else if (kind == "remote") d.kind = EmbedderKind::remote;
        else throw ConfigError("unknown embedder kind '" + kind + "'");
        d.dim = j.value("dim", 256);
        d.seed = j.value("seed", kDefaultSeed);
        d.endpoint = j.value("endpoint", std::string());
        if (j.contains("mask_policy")) d.mask = MaskPolicy::from_json(j.at("mask_policy"));
        if (j.contains("parent") && !j.at("parent").is_null()) d.parent = j.at("parent").get<std::string>();
        d.lineage = j.value("lineage", std::vector<std::string>{});
    } catch (const json::exception& e) {
        throw ConfigError(std::string("embedder descriptor: ") + e.what());
    }
    if (d.dim <= 0) throw ConfigError("embedder dim must be positive");
    if (d.kind == EmbedderKind::remote && d.endpoint.empty()) throw ConfigError("remote embedder needs an endpoint");
    return d;
}

std::string EmbedderDescriptor::hash() const {
    json j = to_json();
    j.erase("lineage");
    return hex64(hash64(j.dump(), 0));
}

EmbedderDescriptor derive_window_embedder(const EmbedderDescriptor& prior, std::string_view window_id) {
    const std::string self = prior.hash();
    std::set<std::string> seen;
    for (const auto& h : prior.lineage) {
        if (!seen.insert(h).second || h == self) throw LineageError("embedder lineage revisits " + h);
    }
    EmbedderDescriptor next = prior;
    next.parent = self;
    next.lineage.push_back(self);
    next.seed = mix(prior.seed, window_id);
    return next;
}

// ---------------------------------------------------------------------------

HashedNgramEmbedder::HashedNgramEmbedder(EmbedderDescriptor desc, const ConfusablesTable& table)
    : desc_(std::move(desc)), table_(&table), mask_norm_(normalize_text(desc_.mask.mask_token, table)) {
    if (desc_.dim <= 0) throw ConfigError("embedder dim must be positive");
}

std::vector<std::string> HashedNgramEmbedder::tokens(std::string_view text) const {
    std::vector<std::string> out;
    for (Token& tok : tokenize(text, *table_)) out.push_back(desc_.mask.masks(tok.text) ? mask_norm_ : std::move(tok.text));
    return out;
}

Eigen::VectorXf HashedNgramEmbedder::embed_one(std::string_view text) const {
    const auto dim = static_cast<std::uint64_t>(desc_.dim);
    std::vector<std::int64_t> counts(dim, 0);
    std::string wrapped;
    std::vector<std::size_t> starts;  // byte offset of each codepoint, plus the end
    for (const std::string& tok : tokens(text)) {
        wrapped = "<" + tok + ">";
        starts.clear();
        std::size_t pos = 0;
        while (pos < wrapped.size()) {
            starts.push_back(pos);
            char32_t cp;
            std::size_t len;
            utf8::decode(wrapped, pos, cp, len);
            pos += len;
        }
        starts.push_back(wrapped.size());
        const std::size_t n_cp = starts.size() - 1;
        for (std::size_t n = kMinGram; n <= kMaxGram; ++n) {
            for (std::size_t i = 0; i + n <= n_cp; ++i) {
                const std::string_view gram(wrapped.data() + starts[i], starts[i + n] - starts[i]);
                const std::uint64_t h = hash64(gram, desc_.seed);
                const std::uint64_t bucket = (h & 0x7FFFFFFFFFFFFFFFULL) % dim;
                counts[bucket] += (h >> 63) ? -1 : 1;
            }
        }
    }
    double norm2 = 0.0;
    for (auto c : counts) norm2 += static_cast<double>(c) * static_cast<double>(c);
    Eigen::VectorXf v = Eigen::VectorXf::Zero(desc_.dim);
    if (norm2 == 0.0) return v;
    const double norm = std::sqrt(norm2);
    for (std::uint64_t i = 0; i < dim; ++i) v[static_cast<Eigen::Index>(i)] = static_cast<float>(counts[i] / norm);
    return v;
}

PointMatrix HashedNgramEmbedder::embed(const std::vector<std::string>& texts) const {
    PointMatrix out(static_cast<Eigen::Index>(texts.size()), desc_.dim);
    for (std::size_t i = 0; i < texts.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = embed_one(texts[i]).transpose();
    return out;
}

std::unique_ptr<Embedder> make_embedder(const EmbedderDescriptor& desc) {
    if (desc.kind == EmbedderKind::remote) return std::make_unique<RemoteEmbedder>(desc);
    return std::make_unique<HashedNgramEmbedder>(desc);
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
    char bytes[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF);
    out.write(bytes, sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw IoError("truncated vector file");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return static_cast<T>(v);
}

static_assert(sizeof(float) == 4);

}  // namespace

void write_vectors(std::ostream& out, const PointMatrix& vectors) {
    out.write("TADV", 4);
    put_le<std::uint16_t>(out, 1);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(vectors.cols()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(vectors.rows()));
    for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
        for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
            std::uint32_t bits;
            const float f = vectors(i, j);
            std::memcpy(&bits, &f, 4);
            put_le<std::uint32_t>(out, bits);
        }
    }
}

PointMatrix read_vectors(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::string_view(magic, 4) != "TADV") throw IoError("not a vector file");
    const auto version = get_le<std::uint16_t>(in);
    if (version != 1) throw IoError("unsupported vector file version " + std::to_string(version));
    const auto dim = get_le<std::uint32_t>(in);
    const auto count = get_le<std::uint64_t>(in);
    PointMatrix m(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const auto bits = get_le<std::uint32_t>(in);
            float f;
            std::memcpy(&f, &bits, 4);
            m(i, j) = f;
        }
    }
    return m;
}

std::string serialize_vectors(const PointMatrix& vectors) {
    std::ostringstream out;
    write_vectors(out, vectors);
    return out.str();
}

}  // namespace tad
