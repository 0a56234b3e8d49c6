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

#include <cmath>
#include <thread>

// After Eigen: <resolv.h> defines _res as a macro.
#include <httplib.h>

namespace tad {

using nlohmann::json;

RemoteEmbedder::RemoteEmbedder(EmbedderDescriptor desc, RemoteOptions options)
    : desc_(std::move(desc)), options_(options) {
    if (desc_.endpoint.empty()) throw ConfigError("remote embedder needs an endpoint");
    if (options_.batch_size == 0) throw ConfigError("batch size must be positive");
}

json RemoteEmbedder::post(const std::string& path, const json& body, int* status) const {
    httplib::Client client(desc_.endpoint);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    const std::string payload = body.dump(-1, ' ', false, json::error_handler_t::replace);
    std::string last_error = "no attempt";
    for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(options_.backoff * (1 << (attempt - 1)));
        auto res = path.empty() ? client.Get("/info") : client.Post(path, payload, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        *status = res->status;
        if (res->status != 200) return json();
        try {
            return json::parse(res->body);
        } catch (const json::parse_error& e) {
            throw ProtocolError(std::string("response is not JSON: ") + e.what());
        }
    }
    throw RemoteError(desc_.endpoint + ": giving up after " + std::to_string(options_.max_retries + 1) +
                      " attempts (" + last_error + ")");
}

json RemoteEmbedder::info() const {
    int status = 0;
    json j = post("", json(), &status);
    if (status != 200) throw ProtocolError("/info returned HTTP " + std::to_string(status));
    if (!j.is_object() || !j.contains("dim") || !j["dim"].is_number_integer()) throw ProtocolError("/info lacks dim");
    if (j["dim"].get<int>() != desc_.dim) {
        throw ProtocolError("service dim " + std::to_string(j["dim"].get<int>()) + " != configured " +
                            std::to_string(desc_.dim));
    }
    return j;
}

void RemoteEmbedder::embed_batch(const std::vector<std::string>& texts, std::size_t begin, std::size_t end,
                                 PointMatrix& out) const {
    json body;
    body["texts"] = json::array();
    for (std::size_t i = begin; i < end; ++i) body["texts"].push_back(texts[i]);
    body["mask_stems"] = desc_.mask.enabled ? json(desc_.mask.stems) : json(nullptr);

    int status = 0;
    json res = post("/embed", body, &status);
    if (status == 413) {
        // Server max is below our batch size; halve until it fits.
        if (end - begin <= 1) throw ProtocolError("/embed rejected a single text with HTTP 413");
        const std::size_t mid = begin + (end - begin) / 2;
        embed_batch(texts, begin, mid, out);
        embed_batch(texts, mid, end, out);
        return;
    }
    if (status != 200) throw ProtocolError("/embed returned HTTP " + std::to_string(status));
    if (!res.is_object() || !res.contains("vectors") || !res["vectors"].is_array()) throw ProtocolError("/embed lacks vectors");
    if (res.value("dim", -1) != desc_.dim) throw ProtocolError("/embed dim differs from descriptor");
    const json& vectors = res["vectors"];
    if (vectors.size() != end - begin) {
        throw ProtocolError("/embed returned " + std::to_string(vectors.size()) + " vectors for " +
                            std::to_string(end - begin) + " texts");
    }
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        const json& row = vectors[i];
        if (!row.is_array() || row.size() != static_cast<std::size_t>(desc_.dim)) throw ProtocolError("vector of wrong length");
        double norm2 = 0.0;
        for (const auto& x : row) {
            if (!x.is_number()) throw ProtocolError("non-numeric vector entry");
            const double v = x.get<double>();
            if (!std::isfinite(v)) throw ProtocolError("non-finite vector entry");
            norm2 += v * v;
        }
        const double scale = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
        const auto r = static_cast<Eigen::Index>(begin + i);
        for (int j = 0; j < desc_.dim; ++j) out(r, j) = static_cast<float>(row[static_cast<std::size_t>(j)].get<double>() * scale);
    }
}

PointMatrix RemoteEmbedder::embed(const std::vector<std::string>& texts) const {
    PointMatrix out(static_cast<Eigen::Index>(texts.size()), desc_.dim);
    for (std::size_t begin = 0; begin < texts.size(); begin += options_.batch_size) {
        embed_batch(texts, begin, std::min(texts.size(), begin + options_.batch_size), out);
    }
    return out;
}

std::string RemoteEmbedder::request_warmstart(std::string_view window_id, const std::vector<std::string>& texts) const {
    if (!desc_.parent) throw LineageError("warm start requires a parent descriptor");
    json body = {{"parent_hash", *desc_.parent}, {"window_id", window_id}};
    if (!texts.empty()) body["texts"] = texts;
    int status = 0;
    json res = post("/warmstart", body, &status);
    if (status != 200) throw ProtocolError("/warmstart returned HTTP " + std::to_string(status));
    if (!res.is_object() || !res.contains("checkpoint") || !res["checkpoint"].is_string()) {
        throw ProtocolError("/warmstart lacks checkpoint");
    }
    return res["checkpoint"].get<std::string>();
}

}  // namespace tad
