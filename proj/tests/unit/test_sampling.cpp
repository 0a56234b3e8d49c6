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

#include <doctest.h>

#include <numeric>
#include <set>

#include "oracles.hpp"
#include "tad/sampling.hpp"

using namespace tad;

TEST_CASE("allocate_bins invariants") {
    Rng rng(31);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<std::size_t> sizes(1 + rng.below(12));
        for (auto& s : sizes) s = rng.bernoulli(0.1) ? 0 : rng.below(200);
        const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
        const std::size_t budget = rng.below(total + 50);
        const auto alloc = allocate_bins(sizes, budget);
        REQUIRE(alloc.size() == sizes.size());
        const std::size_t sum = std::accumulate(alloc.begin(), alloc.end(), std::size_t{0});
        CHECK(sum == std::min(budget, total));
        std::size_t nonempty = 0;
        for (auto s : sizes) nonempty += s > 0 ? 1 : 0;
        for (std::size_t c = 0; c < sizes.size(); ++c) {
            CHECK(alloc[c] <= sizes[c]);
            if (sizes[c] > 0 && budget >= nonempty) CHECK(alloc[c] >= 1);
        }
    }
}

TEST_CASE("allocate_bins is proportional when nothing binds") {
    CHECK(allocate_bins({100, 200, 300, 400}, 100) == std::vector<std::size_t>{10, 20, 30, 40});
    // Largest remainder: 10 * {1,1,1}/3 = 3.33 each; the first gets the spare.
    CHECK(allocate_bins({5, 5, 5}, 10) == std::vector<std::size_t>{4, 3, 3});
    CHECK(allocate_bins({1, 1000}, 10) == std::vector<std::size_t>{1, 9});
    CHECK(allocate_bins({}, 10).empty());
}

namespace {

struct Pool {
    Eigen::MatrixXd x;
    std::vector<std::string> ids;
    ClusterModel model;
};

Pool make_pool(Rng& rng, int k, int per) {
    Pool p;
    p.x = oracle::gaussian_blobs(rng, k, per, 4, 1.0, 6.0);
    for (Eigen::Index i = 0; i < p.x.rows(); ++i) p.ids.push_back("id" + std::to_string(10000 + i));
    p.model = fit_density(p.x, {2, 3, 4, 5, 6}, rng.below(1 << 20));
    return p;
}

}  // namespace

TEST_CASE("representatives: size, uniqueness, coverage") {
    Rng rng(37);
    for (int trial = 0; trial < 20; ++trial) {
        const Pool p = make_pool(rng, 4, 40 + static_cast<int>(rng.below(60)));
        const std::size_t want = 10 + rng.below(100);
        const auto sel = select_representatives("w", p.ids, p.x, p.model, want, 5);
        CHECK(sel.candidate_ids.size() == std::min(want, p.ids.size()));
        CHECK(std::is_sorted(sel.candidate_ids.begin(), sel.candidate_ids.end()));
        CHECK(std::set<std::string>(sel.candidate_ids.begin(), sel.candidate_ids.end()).size() == sel.candidate_ids.size());
        const std::set<std::string> all(p.ids.begin(), p.ids.end());
        for (const auto& id : sel.candidate_ids) CHECK(all.count(id));
        // Every cluster with members contributes.
        std::set<int> want_clusters, got_clusters;
        std::map<std::string, int> nearest;
        for (Eigen::Index i = 0; i < p.x.rows(); ++i) {
            double best = 1e300;
            int arg = 0;
            for (Eigen::Index c = 0; c < p.model.centers.rows(); ++c) {
                const double d = oracle::sqdist(p.x.row(i), p.model.centers.row(c));
                if (d < best) {
                    best = d;
                    arg = static_cast<int>(c);
                }
            }
            nearest[p.ids[static_cast<std::size_t>(i)]] = arg;
            want_clusters.insert(arg);
        }
        for (const auto& id : sel.candidate_ids) got_clusters.insert(nearest.at(id));
        if (want >= want_clusters.size()) CHECK(got_clusters == want_clusters);
        std::size_t bins = 0;
        for (const auto& b : sel.bin_plan) {
            bins += b.bins;
            CHECK(b.edges.size() == b.bins + 1);
            CHECK(std::is_sorted(b.edges.begin(), b.edges.end()));
        }
        if (want < p.ids.size()) CHECK(bins == want);
    }
}

TEST_CASE("representatives are seeded and small pools are taken whole") {
    Rng rng(41);
    const Pool p = make_pool(rng, 3, 30);
    const auto a = select_representatives("w", p.ids, p.x, p.model, 20, 9);
    const auto b = select_representatives("w", p.ids, p.x, p.model, 20, 9);
    CHECK(a.candidate_ids == b.candidate_ids);
    const auto whole = select_representatives("w", p.ids, p.x, p.model, 500, 9);
    std::vector<std::string> sorted = p.ids;
    std::sort(sorted.begin(), sorted.end());
    CHECK(whole.candidate_ids == sorted);
    CHECK(whole.short_window);
    const auto back = OracleSelection::from_json(nlohmann::json::parse(a.to_json().dump()));
    CHECK(back.candidate_ids == a.candidate_ids);
    CHECK(back.seed == a.seed);
    CHECK(back.requested == a.requested);
}

TEST_CASE("annotation batch export") {
    DocumentRecord r;
    r.id = "a1";
    r.text = "he said \"hi\", then left";
    r.likes = 3;
    OracleSelection sel;
    sel.candidate_ids = {"a1"};
    const std::unordered_map<std::string, const DocumentRecord*> recs = {{"a1", &r}};
    const std::string csv = export_annotation_batch(sel, recs);
    CHECK(csv.rfind("record_id,text,likes,shares,retweets,deleted", 0) == 0);
    CHECK(csv.find("\"he said \"\"hi\"\", then left\"") != std::string::npos);
    sel.candidate_ids.push_back("missing");
    CHECK_THROWS_AS(export_annotation_batch(sel, recs), StoreError);
}

namespace {
const std::string kHeader = "record_id,text,likes,shares,retweets,deleted,annotator_id,label,annotated_at\n";
std::string row(const std::string& id, const std::string& who, const std::string& label, const std::string& at) {
    return id + ",t,0,0,0,false," + who + "," + label + "," + at + "\n";
}
}  // namespace

TEST_CASE("annotation import keeps the latest submission") {
    const auto out = import_annotations({kHeader + row("r1", "ann1", "fake", "2020-03-01T00:00:00Z") +
                                             row("r1", "ann1", "real", "2020-03-02T00:00:00Z"),
                                         kHeader + row("r1", "ann1", "fake", "2020-03-01T12:00:00Z") +
                                             row("r0", "ann2", "fake", "2020-03-01T00:00:00Z")});
    REQUIRE(out.size() == 2);
    CHECK(out[0].record_id == "r0");
    CHECK(out[0].label == Label::fake);
    CHECK(out[1].label == Label::real);
    // Same instant, same label: fine. Different labels: conflict.
    CHECK(import_annotations({kHeader + row("r", "a", "real", "2020-03-01T00:00:00Z") + row("r", "a", "real", "2020-03-01T00:00:00Z")}).size() == 1);
    CHECK_THROWS_AS(import_annotations({kHeader + row("r", "a", "real", "2020-03-01T00:00:00Z") + row("r", "a", "fake", "2020-03-01T00:00:00Z")}),
                    ConflictError);
    try {
        import_annotations({kHeader + row("r", "a", "real", "2020-03-01T00:00:00Z") + row("r", "b", "maybe", "2020-03-01T00:00:00Z")});
        FAIL("expected LabelError");
    } catch (const LabelError& e) {
        CHECK(e.row() == 2);
    }
    CHECK_THROWS_AS(import_annotations({kHeader + row("r", "a", "real", "yesterday")}), SchemaError);
}

namespace {
std::vector<AnnotationRecord> votes(const std::string& id, const std::vector<Label>& labels) {
    std::vector<AnnotationRecord> out;
    for (std::size_t i = 0; i < labels.size(); ++i) out.push_back({id, "ann" + std::to_string(i), labels[i], Instant{}});
    return out;
}
}  // namespace

TEST_CASE("agreement filtering") {
    using L = Label;
    std::vector<AnnotationRecord> a;
    for (const auto& v : {votes("u1", {L::fake, L::fake, L::fake, L::fake, L::fake}),
                          votes("u2", {L::real, L::real, L::real, L::real, L::real}),
                          votes("d1", {L::real, L::real, L::fake, L::real, L::real}),
                          votes("i1", {L::real, L::real, L::real, L::real})})
        a.insert(a.end(), v.begin(), v.end());
    const auto rep = resolve_agreement(a, 400);
    CHECK(rep.accepted_ids == std::vector<std::string>{"u1", "u2"});
    CHECK(rep.rejected_ids == std::vector<std::string>{"d1"});
    CHECK(rep.incomplete_ids == std::vector<std::string>{"i1"});
    CHECK(rep.final_oracle_ids == rep.accepted_ids);
    CHECK(rep.short_of_target);
    CHECK(rep.labels.at("u1") == L::fake);
}

TEST_CASE("balanced cut: property") {
    Rng rng(43);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<AnnotationRecord> a;
        const auto nf = rng.below(60), nr = rng.below(60);
        for (std::uint64_t i = 0; i < nf + nr; ++i) {
            const auto v = votes("r" + std::to_string(i), std::vector<Label>(5, i < nf ? Label::fake : Label::real));
            a.insert(a.end(), v.begin(), v.end());
        }
        const std::size_t target = rng.below(100);
        const bool balance = rng.bernoulli(0.7);
        const auto rep = resolve_agreement(a, target, balance, trial);
        const std::size_t total = nf + nr;
        CHECK(rep.final_oracle_ids.size() == std::min(target, total));
        CHECK(rep.final_fake + rep.final_real == rep.final_oracle_ids.size());
        if (balance && total > target) {
            // Each class gets min(its size, target/2) before any top-up.
            CHECK(rep.final_fake >= std::min<std::size_t>(nf, target / 2));
            CHECK(rep.final_real >= std::min<std::size_t>(nr, target / 2));
        }
        const auto again = resolve_agreement(a, target, balance, trial);
        CHECK(again.final_oracle_ids == rep.final_oracle_ids);
    }
}
