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

#include <set>
#include <sstream>

#include "oracles.hpp"
#include "tad/refresh.hpp"

using namespace tad;

namespace {

DriftStreamConfig small(std::uint64_t seed, double rho = 0.6) {
    DriftStreamConfig c;
    c.windows = 6;
    c.samples = 300;
    c.novel_fraction = rho;
    c.seed = seed;
    return c;
}

std::vector<std::string> words(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

}  // namespace

TEST_CASE("drift stream shape") {
    const auto cfg = small(3);
    const auto s = generate_drift_stream(cfg);
    REQUIRE(s.windows.size() == 6);
    std::set<std::string> ids;
    for (std::size_t w = 0; w < s.windows.size(); ++w) {
        const auto& win = s.windows[w];
        char expect[16];
        std::snprintf(expect, sizeof expect, "2020-%02zu", w + 1);
        CHECK(win.window_id == expect);
        REQUIRE(win.records.size() == 300);
        std::size_t fake = 0;
        for (std::size_t i = 0; i < win.records.size(); ++i) {
            const auto& r = win.records[i];
            REQUIRE(r.label);
            fake += *r.label == Label::fake ? 1 : 0;
            const auto c = civil_from_instant(r.timestamp);
            CHECK(c.month == w + 1);
            if (i) CHECK(win.records[i - 1].timestamp <= r.timestamp);
            CHECK(ids.insert(r.id).second);
            const auto toks = words(r.text);
            // Base tokens plus at most one style token (keyword_rate is 0).
            CHECK(toks.size() >= static_cast<std::size_t>(cfg.tokens_per_doc));
            CHECK(toks.size() <= static_cast<std::size_t>(cfg.tokens_per_doc) + 1);
            std::size_t persistent = 0;
            for (const auto& t : toks) persistent += s.persistent_tokens.count(t);
            CHECK(persistent == static_cast<std::size_t>(std::lround((1 - cfg.novel_fraction) * cfg.tokens_per_doc)));
        }
        CHECK(fake == 150);
    }
    CHECK(s.persistent_tokens.size() == 2 * static_cast<std::size_t>(cfg.persistent_pool));
}

TEST_CASE("drift stream is seeded") {
    const auto a = generate_drift_stream(small(5));
    const auto b = generate_drift_stream(small(5));
    const auto c = generate_drift_stream(small(6));
    CHECK(a.windows[3].records == b.windows[3].records);
    CHECK(a.windows[3].records != c.windows[3].records);
}

TEST_CASE("novel vocabulary rotates between windows") {
    const auto s = generate_drift_stream(small(9, 1.0));
    auto vocab = [&](std::size_t w) {
        std::set<std::string> v;
        for (const auto& r : s.windows[w].records)
            for (const auto& t : words(r.text)) v.insert(t);
        return v;
    };
    const auto v0 = vocab(0), v1 = vocab(1);
    std::size_t shared = 0;
    for (const auto& t : v1) shared += v0.count(t);
    CHECK(static_cast<double>(shared) / v1.size() < 0.2);
}

TEST_CASE("persistent signal share") {
    const double none = persistent_signal_share(generate_drift_stream(small(11, 0.0)));
    const double some = persistent_signal_share(generate_drift_stream(small(11, 0.6)));
    const double all = persistent_signal_share(generate_drift_stream(small(11, 1.0)));
    CHECK(none > 0.9);
    CHECK(some < none);
    CHECK(all < 0.05);
}

TEST_CASE("stream config validation and JSON") {
    DriftStreamConfig c;
    c.novel_fraction = 1.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small(1);
    c.rotation_period = 3;
    const auto back = DriftStreamConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
}

TEST_CASE("nearest-centroid classifier") {
    const Eigen::Index d = 3;
    std::vector<Eigen::RowVectorXf> emb;
    std::vector<SideFeatures> side;
    std::vector<Label> labels;
    Rng rng(61);
    for (int i = 0; i < 40; ++i) {
        const bool fake = i % 2 == 0;
        Eigen::RowVectorXf v(d);
        v << (fake ? 1.0f : -1.0f) + 0.1f * static_cast<float>(rng.normal()), 0.1f * static_cast<float>(rng.normal()), 0.0f;
        emb.push_back(v);
        SideFeatures s;
        s.social << i, 2 * i, 0, 0;
        s.lf << 0, 0, 0;
        side.push_back(s);
        labels.push_back(fake ? Label::fake : Label::real);
    }
    std::vector<Example> pool;
    for (std::size_t i = 0; i < emb.size(); ++i) pool.push_back({emb[i].data(), &side[i], labels[i]});
    for (auto kind : {ClassifierKind::centroid, ClassifierKind::centroid_social, ClassifierKind::centroid_social_lf}) {
        const auto st = train_window_classifier(pool, d, kind);
        std::size_t ok = 0;
        for (std::size_t i = 0; i < emb.size(); ++i) ok += st.predict(emb[i], side[i]) == labels[i] ? 1 : 0;
        CHECK(ok == emb.size());
        CHECK(st.feature_dim() == d + (kind == ClassifierKind::centroid ? 0 : 4) + (kind == ClassifierKind::centroid_social_lf ? 3 : 0));
    }
    // Equidistant goes to fake.
    const auto st = train_window_classifier(pool, d, ClassifierKind::centroid);
    Eigen::RowVectorXf mid = (st.centroid_fake + st.centroid_real).cast<float>() / 2.0f;
    CHECK(st.predict(mid, side[0]) == Label::fake);

    std::vector<Example> one_class;
    for (const auto& e : pool)
        if (e.label == Label::fake) one_class.push_back(e);
    CHECK_THROWS_AS(train_window_classifier(one_class, d, ClassifierKind::centroid), MissingClassError);
}

TEST_CASE("side features") {
    DocumentRecord r;
    r.text = "you are damn right";
    r.likes = 0;
    r.shares = 9;
    const auto s = side_features(r);
    CHECK(s.social[0] == 0.0);
    CHECK(s.social[1] == doctest::Approx(std::log(10.0)));
    CHECK(s.lf[0] == 1.0);
    CHECK(s.lf[1] == 1.0);
}

TEST_CASE("scheme names") {
    for (const auto* n : {"static", "slow", "fast", "ceiling"}) CHECK(UpdateScheme::parse(n).name() == n);
    CHECK_THROWS_AS(UpdateScheme::parse("medium"), ConfigError);
    CHECK(parse_classifier_kind("centroid+social+lf") == ClassifierKind::centroid_social_lf);
    CHECK_THROWS_AS(parse_classifier_kind("svm"), ConfigError);
    CHECK(UpdateScheme::slow().refresh_every == 2);
    CHECK(UpdateScheme::fast().memory == 1);
}

TEST_CASE("schemes on a stream without drift are all accurate") {
    const auto s = generate_drift_stream(small(13, 0.0));
    for (const auto* n : {"static", "slow", "fast", "ceiling"}) {
        const auto rep = apply_scheme(s, UpdateScheme::parse(n), ClassifierKind::centroid, 13);
        REQUIRE(rep.windows.size() == 6);
        CHECK(rep.mean() > 0.95);
    }
}

TEST_CASE("evaluation is deterministic and reports per window") {
    const auto s = generate_drift_stream(small(17));
    RefreshHarness h(s, EmbedderDescriptor{}, 17);
    const auto a = h.run(UpdateScheme::fast());
    const auto b = apply_scheme(s, UpdateScheme::fast(), ClassifierKind::centroid, 17);
    CHECK(a.to_csv() == b.to_csv());
    for (const auto& w : a.windows) CHECK(w.n_eval == 150);
    CHECK(a.to_csv().rfind("scheme,window_index,window_id,accuracy,n_eval,seed,config_hash\r\n", 0) == 0);
    CHECK(a.to_plot_tsv().rfind("window_index\twindow_id\tscheme\taccuracy\n", 0) == 0);
    // Under drift the refreshed model beats the frozen one late in the stream.
    const auto st = h.run(UpdateScheme::static_scheme());
    const auto ceil = h.run(UpdateScheme::ceiling());
    CHECK(ceil.mean(3, 5) > st.mean(3, 5));
    CHECK(a.config_hash != st.config_hash);
}

TEST_CASE("EvalReport::mean") {
    EvalReport r;
    for (int i = 0; i < 4; ++i) r.windows.push_back({i, "w", 0.1 * (i + 1), 1});
    CHECK(r.mean() == doctest::Approx(0.25));
    CHECK(r.mean(2, 3) == doctest::Approx(0.35));
    CHECK(r.mean(9, 10) == 0.0);
}

// Group keys count as members.
TEST_CASE("cross-corpus matrix") {
    std::vector<NamedCorpus> corpora;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto c = small(seed);
        corpora.push_back(corpus_from_stream("c" + std::to_string(seed), c));
    }
    corpora.push_back({"empty", {}, {}});
    const auto res = cross_corpus_eval(corpora, {{"g", {"c1", "c2"}}}, ClassifierKind::centroid);
    REQUIRE(res.names == std::vector<std::string>{"c1", "c2", "c3"});
    CHECK(res.warnings.size() == 1);
    REQUIRE(res.accuracy.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(res.summary[i].same == res.accuracy[i][i]);
        REQUIRE(res.summary[i].cross);
        CHECK(*res.summary[i].cross == doctest::Approx((res.accuracy[i][0] + res.accuracy[i][1] + res.accuracy[i][2] - res.accuracy[i][i]) / 2));
    }
    REQUIRE(res.summary[0].similar);
    CHECK(*res.summary[0].similar == res.accuracy[0][1]);
    CHECK_FALSE(res.summary[2].similar);
    CHECK(res.matrix_csv().rfind("train,c1,c2,c3\r\n", 0) == 0);
    CHECK(res.summary_csv().rfind("corpus,same,cross,similar\r\n", 0) == 0);
}
