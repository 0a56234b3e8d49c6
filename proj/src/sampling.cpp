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

#include "tad/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tad/csv.hpp"

namespace tad {

using nlohmann::json;

std::vector<std::size_t> allocate_bins(const std::vector<std::size_t>& sizes, std::size_t budget) {
    const std::size_t k = sizes.size();
    const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
    std::vector<std::size_t> alloc(k, 0);
    if (total == 0 || budget == 0) return alloc;
    budget = std::min(budget, total);

    // Exact remainders via integer arithmetic: budget*size = q*total + r.
    std::vector<std::size_t> rem(k);
    std::size_t given = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const unsigned __int128 num = static_cast<unsigned __int128>(budget) * sizes[c];
        alloc[c] = static_cast<std::size_t>(num / total);
        rem[c] = static_cast<std::size_t>(num % total);
        given += alloc[c];
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
    for (std::size_t i = 0; given < budget; ++i, ++given) ++alloc[order[i % k]];

    // Every non-empty cluster gets a slot, taken from the largest allocation.
    for (std::size_t c = 0; c < k; ++c) {
        if (sizes[c] == 0 || alloc[c] > 0) continue;
        std::size_t donor = k;
        for (std::size_t d = 0; d < k; ++d) {
            if (alloc[d] > 1 && (donor == k || alloc[d] > alloc[donor])) donor = d;
        }
        if (donor == k) break;  // fewer slots than clusters
        --alloc[donor];
        alloc[c] = 1;
    }

    // Cap at cluster size; the excess goes to the largest clusters with room.
    std::size_t excess = 0;
    for (std::size_t c = 0; c < k; ++c) {
        if (alloc[c] > sizes[c]) {
            excess += alloc[c] - sizes[c];
            alloc[c] = sizes[c];
        }
    }
    std::vector<std::size_t> by_size(k);
    std::iota(by_size.begin(), by_size.end(), std::size_t{0});
    std::stable_sort(by_size.begin(), by_size.end(), [&](std::size_t a, std::size_t b) { return sizes[a] > sizes[b]; });
    for (std::size_t c : by_size) {
        const std::size_t room = sizes[c] - alloc[c];
        const std::size_t take = std::min(room, excess);
        alloc[c] += take;
        excess -= take;
    }
    return alloc;
}

namespace detail {

OracleSelection select_representatives(std::string window_id, const std::vector<std::string>& ids,
                                       const CenterMatrix& vectors, const ClusterModel& model,
                                       std::size_t candidate_count, std::uint64_t seed) {
    if (static_cast<std::size_t>(vectors.rows()) != ids.size()) throw DimError("vector count does not match id count");
    if (vectors.rows() > 0 && vectors.cols() != model.dim()) throw DimError("vector dim does not match model");
    OracleSelection sel;
    sel.window_id = std::move(window_id);
    sel.seed = seed;
    sel.requested = candidate_count;

    if (ids.size() <= candidate_count) {
        sel.candidate_ids = ids;
        std::sort(sel.candidate_ids.begin(), sel.candidate_ids.end());
        sel.short_window = ids.size() < candidate_count;
        return sel;
    }

    struct Member {
        double distance;
        const std::string* id;
    };
    const KdTree<double> tree(model.centers);
    std::vector<std::vector<Member>> clusters(static_cast<std::size_t>(model.k));
    for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
        const auto hit = tree.nearest(vectors.row(i));
        clusters[static_cast<std::size_t>(hit.index)].push_back({std::sqrt(hit.squared), &ids[static_cast<std::size_t>(i)]});
    }
    std::vector<std::size_t> sizes;
    for (auto& members : clusters) {
        std::sort(members.begin(), members.end(), [](const Member& a, const Member& b) {
            return a.distance != b.distance ? a.distance < b.distance : *a.id < *b.id;
        });
        sizes.push_back(members.size());
    }
    const std::vector<std::size_t> alloc = allocate_bins(sizes, candidate_count);

    for (std::size_t c = 0; c < clusters.size(); ++c) {
        const auto& members = clusters[c];
        const std::size_t m = members.size();
        const std::size_t b = alloc[c];
        BinPlan plan;
        plan.cluster = static_cast<int>(c);
        plan.members = m;
        plan.bins = b;
        for (std::size_t bin = 0; bin < b; ++bin) {
            const std::size_t lo = bin * m / b;
            const std::size_t hi = (bin + 1) * m / b;
            plan.edges.push_back(members[lo].distance);
            const std::size_t len = hi - lo;
            const double median = len % 2 ? members[lo + len / 2].distance
                                          : 0.5 * (members[lo + len / 2 - 1].distance + members[lo + len / 2].distance);
            std::size_t pick = lo;
            for (std::size_t j = lo + 1; j < hi; ++j) {
                const double dj = std::abs(members[j].distance - median);
                const double dp = std::abs(members[pick].distance - median);
                if (dj < dp || (dj == dp && *members[j].id < *members[pick].id)) pick = j;
            }
            sel.candidate_ids.push_back(*members[pick].id);
        }
        if (b > 0) plan.edges.push_back(members.back().distance);
        sel.bin_plan.push_back(std::move(plan));
    }
    std::sort(sel.candidate_ids.begin(), sel.candidate_ids.end());
    return sel;
}

}  // namespace detail

json OracleSelection::to_json() const {
    json plan = json::array();
    for (const auto& p : bin_plan) {
        plan.push_back({{"cluster", p.cluster}, {"members", p.members}, {"bins", p.bins}, {"edges", p.edges}});
    }
    return {{"window_id", window_id}, {"candidate_ids", candidate_ids}, {"bin_plan", plan},
            {"seed", seed},           {"requested", requested},         {"short_window", short_window}};
}

OracleSelection OracleSelection::from_json(const json& j) {
    OracleSelection s;
    s.window_id = j.at("window_id").get<std::string>();
    s.candidate_ids = j.at("candidate_ids").get<std::vector<std::string>>();
    for (const auto& p : j.at("bin_plan")) {
        s.bin_plan.push_back({p.at("cluster").get<int>(), p.at("members").get<std::size_t>(),
                              p.at("bins").get<std::size_t>(), p.at("edges").get<std::vector<double>>()});
    }
    s.seed = j.at("seed").get<std::uint64_t>();
    s.requested = j.value("requested", std::size_t{0});
    s.short_window = j.value("short_window", false);
    return s;
}

std::string export_annotation_batch(const OracleSelection& selection,
                                    const std::unordered_map<std::string, const DocumentRecord*>& records) {
    std::string out;
    csv::append_row(out, {"record_id", "text", "likes", "shares", "retweets", "deleted"});
    for (const auto& id : selection.candidate_ids) {
        auto it = records.find(id);
        if (it == records.end() || !it->second) throw StoreError("record " + id + " is not in the store");
        const DocumentRecord& r = *it->second;
        csv::append_row(out, {r.id, r.text, std::to_string(r.likes), std::to_string(r.shares),
                              std::to_string(r.retweets), r.deleted ? "true" : "false"});
    }
    return out;
}

json to_json(const AnnotationRecord& a) {
    return {{"record_id", a.record_id},
            {"annotator_id", a.annotator_id},
            {"label", std::string(to_string(a.label))},
            {"annotated_at", format_rfc3339(a.annotated_at)}};
}

AnnotationRecord annotation_from_json(const json& j) {
    AnnotationRecord a;
    a.record_id = j.at("record_id").get<std::string>();
    a.annotator_id = j.at("annotator_id").get<std::string>();
    const auto label = parse_label(j.at("label").get<std::string>());
    if (!label) throw SchemaError("label", "expected 'fake' or 'real'");
    a.label = *label;
    const auto t = parse_rfc3339(j.at("annotated_at").get<std::string>());
    if (!t) throw SchemaError("annotated_at", "not RFC 3339");
    a.annotated_at = *t;
    return a;
}

std::vector<AnnotationRecord> import_annotations(const std::vector<std::string>& csv_files) {
    std::map<std::pair<std::string, std::string>, AnnotationRecord> latest;
    for (const auto& text : csv_files) {
        csv::Table table(csv::parse(text));
        const std::size_t c_id = table.column("record_id");
        const std::size_t c_annot = table.column("annotator_id");
        const std::size_t c_label = table.column("label");
        const std::size_t c_time = table.column("annotated_at");
        for (std::size_t r = 0; r < table.size(); ++r) {
            AnnotationRecord a;
            a.record_id = table.at(r, c_id);
            a.annotator_id = table.at(r, c_annot);
            if (a.record_id.empty()) throw SchemaError("record_id", "empty at row " + std::to_string(r + 1));
            if (a.annotator_id.empty()) throw SchemaError("annotator_id", "empty at row " + std::to_string(r + 1));
            const std::string& label_text = table.at(r, c_label);
            const auto label = parse_label(label_text);
            if (!label) throw LabelError(r + 1, label_text);
            a.label = *label;
            const auto t = parse_rfc3339(table.at(r, c_time));
            if (!t) throw SchemaError("annotated_at", "not RFC 3339 at row " + std::to_string(r + 1));
            a.annotated_at = *t;

            auto key = std::make_pair(a.record_id, a.annotator_id);
            auto it = latest.find(key);
            if (it == latest.end()) {
                latest.emplace(std::move(key), std::move(a));
            } else if (a.annotated_at > it->second.annotated_at) {
                it->second = std::move(a);
            } else if (a.annotated_at == it->second.annotated_at && a.label != it->second.label) {
                throw ConflictError("annotator " + a.annotator_id + " gave two labels for " + a.record_id + " at " +
                                    format_rfc3339(a.annotated_at));
            }
        }
    }
    std::vector<AnnotationRecord> out;
    out.reserve(latest.size());
    for (auto& [key, a] : latest) out.push_back(std::move(a));
    return out;
}

json AgreementReport::to_json() const {
    json labels_json = json::object();
    for (const auto& [id, label] : labels) labels_json[id] = std::string(to_string(label));
    return {{"accepted_ids", accepted_ids},
            {"rejected_ids", rejected_ids},
            {"incomplete_ids", incomplete_ids},
            {"final_oracle_ids", final_oracle_ids},
            {"labels", labels_json},
            {"class_counts", {{"fake", final_fake}, {"real", final_real}}},
            {"target", target},
            {"balanced", balanced},
            {"short", short_of_target}};
}

AgreementReport resolve_agreement(const std::vector<AnnotationRecord>& annotations, std::size_t target, bool balance,
                                  std::uint64_t seed, std::size_t annotators) {
    std::map<std::string, std::vector<Label>> votes;
    for (const auto& a : annotations) votes[a.record_id].push_back(a.label);

    AgreementReport rep;
    rep.target = target;
    rep.balanced = balance;
    std::vector<std::string> fake, real;
    for (const auto& [id, v] : votes) {
        if (v.size() != annotators) {
            rep.incomplete_ids.push_back(id);
            continue;
        }
        if (std::all_of(v.begin(), v.end(), [&](Label l) { return l == v.front(); })) {
            rep.accepted_ids.push_back(id);
            rep.labels[id] = v.front();
            (v.front() == Label::fake ? fake : real).push_back(id);
        } else {
            rep.rejected_ids.push_back(id);
        }
    }

    Rng rng(mix(seed, "agreement"));
    if (rep.accepted_ids.size() <= target) {
        rep.final_oracle_ids = rep.accepted_ids;
        rep.short_of_target = rep.accepted_ids.size() < target;
    } else if (balance) {
        rng.shuffle(fake);
        rng.shuffle(real);
        const std::size_t half = target / 2;
        std::size_t take_fake = std::min(half, fake.size());
        std::size_t take_real = std::min(half, real.size());
        // Top up from whichever class still has members, larger first.
        while (take_fake + take_real < target) {
            const std::size_t left_fake = fake.size() - take_fake, left_real = real.size() - take_real;
            if (left_fake == 0 && left_real == 0) break;
            if (left_fake >= left_real) ++take_fake;
            else ++take_real;
        }
        rep.final_oracle_ids.assign(fake.begin(), fake.begin() + static_cast<std::ptrdiff_t>(take_fake));
        rep.final_oracle_ids.insert(rep.final_oracle_ids.end(), real.begin(),
                                    real.begin() + static_cast<std::ptrdiff_t>(take_real));
    } else {
        std::vector<std::string> pool = rep.accepted_ids;
        rng.shuffle(pool);
        pool.resize(target);
        rep.final_oracle_ids = std::move(pool);
    }
    std::sort(rep.final_oracle_ids.begin(), rep.final_oracle_ids.end());
    for (const auto& id : rep.final_oracle_ids) (rep.labels.at(id) == Label::fake ? rep.final_fake : rep.final_real)++;
    return rep;
}

}  // namespace tad
