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

#include "tad/refresh.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "tad/csv.hpp"
#include "tad/kdtree.hpp"
#include "tad/weaklabel.hpp"

namespace tad {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Stream generation

json DriftStreamConfig::to_json() const {
    return {{"windows", windows},
            {"samples", samples},
            {"novel_fraction", novel_fraction},
            {"rotation_period", rotation_period},
            {"seed", seed},
            {"tokens_per_doc", tokens_per_doc},
            {"persistent_pool", persistent_pool},
            {"real_novel_pool", real_novel_pool},
            {"fake_novel_pool", fake_novel_pool},
            {"campaign_templates", campaign_templates},
            {"campaign_mutation", campaign_mutation},
            {"style_fake", style_fake},
            {"style_real", style_real},
            {"keyword_rate", keyword_rate},
            {"start_year", start_year},
            {"start_month", start_month}};
}

DriftStreamConfig DriftStreamConfig::from_json(const json& j) {
    DriftStreamConfig c;
    try {
        c.windows = j.value("windows", c.windows);
        c.samples = j.value("samples", c.samples);
        c.novel_fraction = j.value("novel_fraction", c.novel_fraction);
        c.rotation_period = j.value("rotation_period", c.rotation_period);
        c.seed = j.value("seed", c.seed);
        c.tokens_per_doc = j.value("tokens_per_doc", c.tokens_per_doc);
        c.persistent_pool = j.value("persistent_pool", c.persistent_pool);
        c.real_novel_pool = j.value("real_novel_pool", c.real_novel_pool);
        c.fake_novel_pool = j.value("fake_novel_pool", c.fake_novel_pool);
        c.campaign_templates = j.value("campaign_templates", c.campaign_templates);
        c.campaign_mutation = j.value("campaign_mutation", c.campaign_mutation);
        c.style_fake = j.value("style_fake", c.style_fake);
        c.style_real = j.value("style_real", c.style_real);
        c.keyword_rate = j.value("keyword_rate", c.keyword_rate);
        c.start_year = j.value("start_year", c.start_year);
        c.start_month = j.value("start_month", c.start_month);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("drift stream config: ") + e.what());
    }
    c.validate();
    return c;
}

void DriftStreamConfig::validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (windows < 1) throw ConfigError("windows must be >= 1");
    if (samples < 2) throw ConfigError("samples must be >= 2");
    if (!prob(novel_fraction)) throw ConfigError("novel_fraction must lie in [0, 1]");
    if (rotation_period < 1) throw ConfigError("rotation_period must be >= 1");
    if (tokens_per_doc < 1 || persistent_pool < 1 || real_novel_pool < 1 || fake_novel_pool < 1 || campaign_templates < 1) {
        throw ConfigError("pool sizes and tokens_per_doc must be positive");
    }
    if (!prob(campaign_mutation) || !prob(style_fake) || !prob(style_real) || !prob(keyword_rate)) {
        throw ConfigError("rates must lie in [0, 1]");
    }
    if (start_month < 1 || start_month > 12) throw ConfigError("start_month must lie in 1..12");
}

namespace {

class TokenSource {
public:
    explicit TokenSource(std::uint64_t seed) : rng_(seed) {}

    // Fresh lowercase token of length 5..9, never repeated within a stream.
    std::string fresh() {
        for (;;) {
            const auto len = 5 + rng_.below(5);
            std::string t;
            for (std::uint64_t i = 0; i < len; ++i) t += static_cast<char>('a' + rng_.below(26));
            if (used_.insert(t).second) return t;
        }
    }

    std::vector<std::string> pool(int n) {
        std::vector<std::string> out;
        for (int i = 0; i < n; ++i) out.push_back(fresh());
        return out;
    }

private:
    Rng rng_;
    std::unordered_set<std::string> used_;
};

struct NovelEpoch {
    std::vector<std::string> real_pool;
    std::vector<std::string> fringe;
    std::vector<std::vector<std::string>> templates;
};

std::vector<std::string> style_vocabulary() {
    const Lexicons& lex = Lexicons::builtin();
    std::set<std::string> words(lex.swear.begin(), lex.swear.end());
    words.insert(lex.second_person.begin(), lex.second_person.end());
    words.insert(lex.adverbs.begin(), lex.adverbs.end());
    std::vector<std::string> out;
    for (const auto& w : words) {
        // Single-token entries only, so the word survives tokenization intact.
        if (tokenize(w).size() == 1 && tokenize(w)[0].text == w) out.push_back(w);
    }
    return out;
}

double lognormal(Rng& rng, double mu, double sigma) { return std::exp(mu + sigma * rng.normal()); }

Instant month_start(int year, unsigned month, int offset) {
    const int m0 = static_cast<int>(month) - 1 + offset;
    const int y = year + m0 / 12;
    return instant_from_civil(y, static_cast<unsigned>(m0 % 12) + 1, 1);
}

}  // namespace

DriftStream generate_drift_stream(const DriftStreamConfig& config) {
    config.validate();
    DriftStream stream;
    stream.config = config;

    TokenSource tokens(mix(config.seed, "pools"));
    const std::vector<std::string> persistent_fake = tokens.pool(config.persistent_pool);
    const std::vector<std::string> persistent_real = tokens.pool(config.persistent_pool);
    const std::vector<std::string> style = style_vocabulary();
    std::vector<std::string> keywords;
    for (const auto& s : FilterConfig::builtin().specs) {
        if (s.languages.empty()) keywords.push_back(s.base);
    }

    const int n_novel = static_cast<int>(std::lround(config.novel_fraction * config.tokens_per_doc));
    const int n_persistent = config.tokens_per_doc - n_novel;
    const int epochs = (config.windows + config.rotation_period - 1) / config.rotation_period;
    std::vector<NovelEpoch> novel(static_cast<std::size_t>(epochs));
    for (auto& e : novel) {
        e.real_pool = tokens.pool(config.real_novel_pool);
        e.fringe = tokens.pool(config.fake_novel_pool);
        for (int t = 0; t < config.campaign_templates; ++t) e.templates.push_back(tokens.pool(n_novel));
    }

    for (int w = 0; w < config.windows; ++w) {
        Rng rng(mix(mix(config.seed, "window"), static_cast<std::uint64_t>(w)));
        const NovelEpoch& epoch = novel[static_cast<std::size_t>(w / config.rotation_period)];
        const Instant start = month_start(config.start_year, config.start_month, w);
        const Instant end = month_start(config.start_year, config.start_month, w + 1);
        const auto span = static_cast<std::uint64_t>((end - start).count());

        LabeledWindow win;
        const CivilDate d = civil_from_instant(start);
        char id[16];
        std::snprintf(id, sizeof id, "%04d-%02u", d.year, d.month);
        win.window_id = id;

        std::vector<Label> labels(static_cast<std::size_t>(config.samples));
        for (int i = 0; i < config.samples; ++i) labels[static_cast<std::size_t>(i)] = i < config.samples / 2 ? Label::fake : Label::real;
        rng.shuffle(labels);

        std::vector<Instant> stamps;
        for (int i = 0; i < config.samples; ++i) stamps.push_back(start + std::chrono::seconds{static_cast<std::int64_t>(rng.below(span))});
        std::sort(stamps.begin(), stamps.end());

        for (int i = 0; i < config.samples; ++i) {
            const Label label = labels[static_cast<std::size_t>(i)];
            const bool fake = label == Label::fake;
            std::vector<std::string> words;
            const auto& pers = fake ? persistent_fake : persistent_real;
            for (int t = 0; t < n_persistent; ++t) words.push_back(pers[rng.below(pers.size())]);
            if (fake) {
                const auto& tpl = epoch.templates[rng.below(epoch.templates.size())];
                for (const auto& tok : tpl) words.push_back(rng.bernoulli(config.campaign_mutation) ? epoch.fringe[rng.below(epoch.fringe.size())] : tok);
            } else {
                for (int t = 0; t < n_novel; ++t) words.push_back(epoch.real_pool[rng.below(epoch.real_pool.size())]);
            }
            if (rng.bernoulli(fake ? config.style_fake : config.style_real)) words.push_back(style[rng.below(style.size())]);
            if (rng.bernoulli(config.keyword_rate)) words.push_back(keywords[rng.below(keywords.size())]);
            rng.shuffle(words);

            DocumentRecord r;
            char rid[32];
            std::snprintf(rid, sizeof rid, "w%02d-%05d", w, i);
            r.id = rid;
            r.timestamp = stamps[static_cast<std::size_t>(i)];
            for (std::size_t t = 0; t < words.size(); ++t) r.text += (t ? " " : "") + words[t];
            r.lang = "en";
            const double sigma = fake ? 1.5 : 0.8;
            r.likes = static_cast<std::int64_t>(lognormal(rng, 2.0, sigma));
            r.shares = static_cast<std::int64_t>(lognormal(rng, 1.0, sigma));
            r.retweets = static_cast<std::int64_t>(lognormal(rng, 0.5, sigma));
            r.deleted = rng.bernoulli(fake ? 0.15 : 0.03);
            r.label = label;
            win.records.push_back(std::move(r));
        }
        stream.windows.push_back(std::move(win));
    }

    stream.persistent_tokens.insert(persistent_fake.begin(), persistent_fake.end());
    stream.persistent_tokens.insert(persistent_real.begin(), persistent_real.end());
    return stream;
}

double persistent_signal_share(const DriftStream& stream) {
    std::unordered_map<std::string, std::array<double, 2>> counts;
    std::array<double, 2> totals{0.0, 0.0};
    for (const auto& w : stream.windows) {
        for (const auto& r : w.records) {
            const int c = r.label == Label::fake ? 0 : 1;
            std::istringstream in(r.text);
            std::string tok;
            while (in >> tok) {
                counts[tok][static_cast<std::size_t>(c)] += 1.0;
                totals[static_cast<std::size_t>(c)] += 1.0;
            }
        }
    }
    double persistent = 0.0, total = 0.0;
    for (const auto& [tok, c] : counts) {
        const double d = c[0] / totals[0] - c[1] / totals[1];
        total += d * d;
        if (stream.persistent_tokens.count(tok)) persistent += d * d;
    }
    return total > 0.0 ? persistent / total : 0.0;
}

// ---------------------------------------------------------------------------
// Classifier

std::string_view to_string(ClassifierKind kind) {
    switch (kind) {
        case ClassifierKind::centroid: return "centroid";
        case ClassifierKind::centroid_social: return "centroid+social";
        case ClassifierKind::centroid_social_lf: return "centroid+social+lf";
    }
    return "centroid";
}

ClassifierKind parse_classifier_kind(std::string_view text) {
    if (text == "centroid") return ClassifierKind::centroid;
    if (text == "centroid+social" || text == "social") return ClassifierKind::centroid_social;
    if (text == "centroid+social+lf" || text == "multi") return ClassifierKind::centroid_social_lf;
    throw ConfigError("unknown classifier kind '" + std::string(text) + "'");
}

SideFeatures side_features(const DocumentRecord& r) {
    const LexiconVotes lv = lexicon_experts(r.text);
    SideFeatures s;
    s.social << std::log1p(static_cast<double>(r.likes)), std::log1p(static_cast<double>(r.shares)),
        std::log1p(static_cast<double>(r.retweets)), lv.sentiment;
    s.lf << static_cast<double>(lv.swear_count), static_cast<double>(lv.second_person_count),
        static_cast<double>(lv.adverb_count);
    return s;
}

Eigen::Index ClassifierState::feature_dim() const {
    Eigen::Index d = embedding_dim;
    if (kind != ClassifierKind::centroid) d += 4;
    if (kind == ClassifierKind::centroid_social_lf) d += 3;
    return d;
}

namespace {

Eigen::RowVectorXd features(const ClassifierState& s, const float* embedding, const SideFeatures& side) {
    Eigen::RowVectorXd f(s.feature_dim());
    for (Eigen::Index i = 0; i < s.embedding_dim; ++i) f[i] = embedding[i];
    Eigen::Index at = s.embedding_dim;
    if (s.kind != ClassifierKind::centroid) {
        f.segment(at, 4) = ((side.social - s.social_mean).array() * s.social_scale.array()).matrix().transpose();
        at += 4;
    }
    if (s.kind == ClassifierKind::centroid_social_lf) {
        f.segment(at, 3) = ((side.lf - s.lf_mean).array() * s.lf_scale.array()).matrix().transpose();
    }
    return f;
}

template <int N>
void fit_block(const std::vector<Example>& pool, Eigen::Matrix<double, N, 1> SideFeatures::*member, Eigen::VectorXd& mean,
               Eigen::VectorXd& scale) {
    mean = Eigen::VectorXd::Zero(N);
    for (const auto& ex : pool) mean += ex.side->*member;
    mean /= static_cast<double>(pool.size());
    Eigen::VectorXd var = Eigen::VectorXd::Zero(N);
    for (const auto& ex : pool) var += ((ex.side->*member) - mean).array().square().matrix();
    var /= static_cast<double>(pool.size());
    scale.resize(N);
    for (int i = 0; i < N; ++i) {
        const double sd = std::sqrt(var[i]);
        scale[i] = (sd > 0.0 ? 1.0 / sd : 1.0) / std::sqrt(static_cast<double>(N));
    }
}

}  // namespace

Label ClassifierState::predict(const Eigen::Ref<const Eigen::RowVectorXf>& embedding, const SideFeatures& side) const {
    const Eigen::RowVectorXd f = features(*this, embedding.data(), side);
    const double d_fake = squared_distance(f, centroid_fake);
    const double d_real = squared_distance(f, centroid_real);
    return d_fake <= d_real ? Label::fake : Label::real;
}

json ClassifierState::to_json() const {
    auto vec = [](const auto& v) {
        std::vector<double> out(static_cast<std::size_t>(v.size()));
        for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = v[i];
        return out;
    };
    json j = {{"kind", to_string(kind)},
              {"embedding_dim", embedding_dim},
              {"centroid_fake", vec(centroid_fake)},
              {"centroid_real", vec(centroid_real)},
              {"trained_on", trained_on}};
    if (kind != ClassifierKind::centroid) j["social"] = {{"mean", vec(social_mean)}, {"scale", vec(social_scale)}};
    if (kind == ClassifierKind::centroid_social_lf) j["lf"] = {{"mean", vec(lf_mean)}, {"scale", vec(lf_scale)}};
    j["embedder"] = embedder ? embedder->to_json() : json(nullptr);
    return j;
}

ClassifierState train_window_classifier(const std::vector<Example>& pool, Eigen::Index embedding_dim,
                                        ClassifierKind kind) {
    ClassifierState s;
    s.kind = kind;
    s.embedding_dim = embedding_dim;
    std::size_t n_fake = 0, n_real = 0;
    for (const auto& ex : pool) (ex.label == Label::fake ? n_fake : n_real)++;
    if (n_fake == 0) throw MissingClassError("training pool has no fake examples");
    if (n_real == 0) throw MissingClassError("training pool has no real examples");
    if (kind != ClassifierKind::centroid) fit_block<4>(pool, &SideFeatures::social, s.social_mean, s.social_scale);
    if (kind == ClassifierKind::centroid_social_lf) fit_block<3>(pool, &SideFeatures::lf, s.lf_mean, s.lf_scale);

    s.centroid_fake = Eigen::RowVectorXd::Zero(s.feature_dim());
    s.centroid_real = Eigen::RowVectorXd::Zero(s.feature_dim());
    for (const auto& ex : pool) (ex.label == Label::fake ? s.centroid_fake : s.centroid_real) += features(s, ex.embedding, *ex.side);
    s.centroid_fake /= static_cast<double>(n_fake);
    s.centroid_real /= static_cast<double>(n_real);
    return s;
}

// ---------------------------------------------------------------------------
// Schemes

UpdateScheme UpdateScheme::parse(std::string_view name) {
    if (name == "static") return static_scheme();
    if (name == "slow") return slow();
    if (name == "fast") return fast();
    if (name == "ceiling") return ceiling();
    throw ConfigError("unknown scheme '" + std::string(name) + "'");
}

std::string UpdateScheme::name() const {
    switch (kind) {
        case Kind::static_: return "static";
        case Kind::slow: return "slow";
        case Kind::fast: return "fast";
        case Kind::ceiling: return "ceiling";
    }
    return "static";
}

json UpdateScheme::to_json() const {
    return {{"kind", name()},
            {"refresh_every", refresh_every},
            {"memory", memory},
            {"warm_start", warm_start},
            {"static_windows", static_windows}};
}

double EvalReport::mean(int from, int to) const {
    if (to < 0) to = static_cast<int>(windows.size()) - 1;
    double s = 0.0;
    int n = 0;
    for (const auto& w : windows) {
        if (w.window_index < from || w.window_index > to) continue;
        s += w.accuracy;
        ++n;
    }
    return n ? s / n : 0.0;
}

namespace {

std::string fixed6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

std::string EvalReport::to_csv(bool header) const {
    std::string out;
    if (header) csv::append_row(out, {"scheme", "window_index", "window_id", "accuracy", "n_eval", "seed", "config_hash"});
    for (const auto& w : windows) {
        csv::append_row(out, {scheme, std::to_string(w.window_index), w.window_id, fixed6(w.accuracy),
                              std::to_string(w.n_eval), std::to_string(seed), config_hash});
    }
    return out;
}

std::string EvalReport::to_plot_tsv(bool header) const {
    std::string out;
    if (header) out += "window_index\twindow_id\tscheme\taccuracy\n";
    for (const auto& w : windows) {
        out += std::to_string(w.window_index) + "\t" + w.window_id + "\t" + scheme + "\t" + fixed6(w.accuracy) + "\n";
    }
    return out;
}

struct RefreshHarness::Impl {
    const DriftStream& stream;
    EmbedderDescriptor base;
    std::uint64_t seed;
    std::vector<std::vector<std::size_t>> train_idx, eval_idx;
    std::vector<std::vector<SideFeatures>> side;
    std::map<std::string, std::vector<std::optional<PointMatrix>>> cache;
    std::vector<DocumentRecord> extra;
    std::vector<SideFeatures> extra_side;

    Impl(const DriftStream& s, EmbedderDescriptor b, std::uint64_t sd) : stream(s), base(std::move(b)), seed(sd) {
        const std::uint64_t split_seed = mix(seed, "split");
        for (std::size_t w = 0; w < stream.windows.size(); ++w) {
            const auto& recs = stream.windows[w].records;
            for (const auto& r : recs) {
                if (!r.label) throw SchemaError("label", "record " + r.id + " has no ground truth");
            }
            std::vector<std::size_t> idx(recs.size());
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            Rng rng(mix(split_seed, static_cast<std::uint64_t>(w)));
            rng.shuffle(idx);
            const std::size_t half = idx.size() / 2;
            train_idx.emplace_back(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(half));
            eval_idx.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(half), idx.end());
            std::sort(train_idx.back().begin(), train_idx.back().end());
            std::sort(eval_idx.back().begin(), eval_idx.back().end());
            std::vector<SideFeatures> sf;
            sf.reserve(recs.size());
            for (const auto& r : recs) sf.push_back(side_features(r));
            side.push_back(std::move(sf));
        }
    }

    const PointMatrix& embeddings(const EmbedderDescriptor& desc, std::size_t w) {
        auto& slots = cache[desc.hash()];
        if (slots.empty()) slots.resize(stream.windows.size());
        auto& slot = slots[w];
        if (!slot) {
            std::vector<std::string> texts;
            for (const auto& r : stream.windows[w].records) texts.push_back(r.text);
            slot = make_embedder(desc)->embed(texts);
        }
        return *slot;
    }

    void add_window(std::vector<Example>& pool, const EmbedderDescriptor& desc, std::size_t w) {
        const PointMatrix& e = embeddings(desc, w);
        for (std::size_t i : train_idx[w]) {
            pool.push_back({e.row(static_cast<Eigen::Index>(i)).data(), &side[w][i], *stream.windows[w].records[i].label});
        }
    }

    WindowAccuracy evaluate(const ClassifierState& model, const EmbedderDescriptor& desc, std::size_t w) {
        const PointMatrix& e = embeddings(desc, w);
        std::size_t correct = 0;
        for (std::size_t i : eval_idx[w]) {
            const Label y = model.predict(e.row(static_cast<Eigen::Index>(i)), side[w][i]);
            correct += y == *stream.windows[w].records[i].label ? 1 : 0;
        }
        WindowAccuracy acc;
        acc.window_index = static_cast<int>(w);
        acc.window_id = stream.windows[w].window_id;
        acc.n_eval = eval_idx[w].size();
        acc.accuracy = acc.n_eval ? static_cast<double>(correct) / static_cast<double>(acc.n_eval) : 0.0;
        return acc;
    }

    ClassifierState train(const std::vector<std::size_t>& windows, const EmbedderDescriptor& desc, ClassifierKind kind,
                          bool with_extra) {
        std::vector<Example> pool;
        for (std::size_t w : windows) add_window(pool, desc, w);
        PointMatrix extra_emb;
        if (with_extra && !extra.empty()) {
            std::vector<std::string> texts;
            for (const auto& r : extra) texts.push_back(r.text);
            extra_emb = make_embedder(desc)->embed(texts);
            for (std::size_t i = 0; i < extra.size(); ++i) {
                pool.push_back({extra_emb.row(static_cast<Eigen::Index>(i)).data(), &extra_side[i], *extra[i].label});
            }
        }
        ClassifierState s = train_window_classifier(pool, desc.dim, kind);
        for (std::size_t w : windows) s.trained_on.push_back(stream.windows[w].window_id);
        s.embedder = desc;
        return s;
    }
};

RefreshHarness::RefreshHarness(const DriftStream& stream, EmbedderDescriptor base, std::uint64_t seed)
    : impl_(std::make_unique<Impl>(stream, std::move(base), seed)) {}

RefreshHarness::~RefreshHarness() = default;

void RefreshHarness::add_static_training(std::vector<DocumentRecord> records) {
    for (auto& r : records) {
        if (!r.label) throw SchemaError("label", "record " + r.id + " has no ground truth");
        impl_->extra_side.push_back(side_features(r));
        impl_->extra.push_back(std::move(r));
    }
}

EvalReport RefreshHarness::run(const UpdateScheme& scheme, ClassifierKind kind) {
    Impl& h = *impl_;
    const std::size_t W = h.stream.windows.size();
    if (scheme.refresh_every < 1 || scheme.memory < 1) throw ConfigError("refresh_every and memory must be >= 1");

    EvalReport rep;
    rep.scheme = scheme.name();
    rep.kind = kind;
    rep.seed = h.seed;
    const json cfg = {{"stream", h.stream.config.to_json()},
                      {"scheme", scheme.to_json()},
                      {"kind", to_string(kind)},
                      {"embedder", h.base.to_json()},
                      {"seed", h.seed}};
    rep.config_hash = hex64(hash64(cfg.dump(), 0));

    switch (scheme.kind) {
        case UpdateScheme::Kind::static_: {
            std::vector<std::size_t> first;
            for (std::size_t w = 0; w < std::min<std::size_t>(W, static_cast<std::size_t>(scheme.static_windows)); ++w) first.push_back(w);
            const ClassifierState model = h.train(first, h.base, kind, true);
            for (std::size_t w = 0; w < W; ++w) rep.windows.push_back(h.evaluate(model, h.base, w));
            break;
        }
        case UpdateScheme::Kind::ceiling: {
            for (std::size_t w = 0; w < W; ++w) {
                const ClassifierState model = h.train({w}, h.base, kind, false);
                rep.windows.push_back(h.evaluate(model, h.base, w));
            }
            break;
        }
        case UpdateScheme::Kind::slow:
        case UpdateScheme::Kind::fast: {
            EmbedderDescriptor desc = h.base;
            // Window 0 has no history; bootstrap on its own training half.
            ClassifierState model = h.train({0}, desc, kind, false);
            rep.windows.push_back(h.evaluate(model, desc, 0));
            for (std::size_t w = 1; w < W; ++w) {
                if ((w - 1) % static_cast<std::size_t>(scheme.refresh_every) == 0) {
                    if (scheme.warm_start) desc = derive_window_embedder(desc, h.stream.windows[w - 1].window_id);
                    std::vector<std::size_t> recent;
                    const std::size_t mem = static_cast<std::size_t>(scheme.memory);
                    for (std::size_t p = w > mem ? w - mem : 0; p < w; ++p) recent.push_back(p);
                    model = h.train(recent, desc, kind, false);
                }
                rep.windows.push_back(h.evaluate(model, desc, w));
            }
            break;
        }
    }
    return rep;
}

EvalReport apply_scheme(const DriftStream& stream, const UpdateScheme& scheme, ClassifierKind kind, std::uint64_t seed,
                        const EmbedderDescriptor& base) {
    RefreshHarness h(stream, base, seed);
    return h.run(scheme, kind);
}

// ---------------------------------------------------------------------------
// Cross-corpus

NamedCorpus load_corpus(const std::string& name, const std::filesystem::path& dir) {
    NamedCorpus c;
    c.name = name;
    auto load = [&](const char* file) {
        const auto path = dir / file;
        if (!std::filesystem::exists(path)) return std::vector<DocumentRecord>{};
        ReadResult rr = read_records_file(path);
        if (!rr.rejects.empty()) {
            throw SchemaError("record", path.string() + " line " + std::to_string(rr.rejects.front().line_no) + ": " +
                                            rr.rejects.front().reason);
        }
        for (const auto& r : rr.records) {
            if (!r.label) throw SchemaError("label", path.string() + ": record " + r.id + " has no label");
        }
        return std::move(rr.records);
    };
    c.train = load("train.jsonl");
    c.test = load("test.jsonl");
    return c;
}

NamedCorpus corpus_from_stream(const std::string& name, const DriftStreamConfig& config) {
    DriftStreamConfig one = config;
    one.windows = 1;
    DriftStream s = generate_drift_stream(one);
    auto& recs = s.windows.front().records;
    std::vector<std::size_t> idx(recs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(mix(config.seed, "corpus-split"));
    rng.shuffle(idx);
    NamedCorpus c;
    c.name = name;
    for (std::size_t i = 0; i < idx.size(); ++i) (i < idx.size() / 2 ? c.train : c.test).push_back(recs[idx[i]]);
    return c;
}

CrossCorpusResult cross_corpus_eval(const std::vector<NamedCorpus>& corpora,
                                    const std::map<std::string, std::vector<std::string>>& groups, ClassifierKind kind,
                                    const EmbedderDescriptor& desc) {
    CrossCorpusResult res;
    const auto embedder = make_embedder(desc);
    struct Prepared {
        const NamedCorpus* corpus;
        PointMatrix train_emb, test_emb;
        std::vector<SideFeatures> train_side, test_side;
    };
    std::vector<Prepared> prep;
    for (const auto& c : corpora) {
        if (c.train.empty() || c.test.empty()) {
            res.warnings.push_back("corpus '" + c.name + "' has an empty split; skipped");
            continue;
        }
        Prepared p{&c, {}, {}, {}, {}};
        auto embed = [&](const std::vector<DocumentRecord>& recs, PointMatrix& out, std::vector<SideFeatures>& side) {
            std::vector<std::string> texts;
            for (const auto& r : recs) {
                texts.push_back(r.text);
                side.push_back(side_features(r));
            }
            out = embedder->embed(texts);
        };
        embed(c.train, p.train_emb, p.train_side);
        embed(c.test, p.test_emb, p.test_side);
        prep.push_back(std::move(p));
        res.names.push_back(c.name);
    }

    const std::size_t n = prep.size();
    res.accuracy.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<Example> pool;
        for (std::size_t r = 0; r < prep[i].corpus->train.size(); ++r) {
            pool.push_back({prep[i].train_emb.row(static_cast<Eigen::Index>(r)).data(), &prep[i].train_side[r],
                            *prep[i].corpus->train[r].label});
        }
        const ClassifierState model = train_window_classifier(pool, desc.dim, kind);
        for (std::size_t j = 0; j < n; ++j) {
            std::size_t correct = 0;
            const auto& test = prep[j].corpus->test;
            for (std::size_t r = 0; r < test.size(); ++r) {
                correct += model.predict(prep[j].test_emb.row(static_cast<Eigen::Index>(r)), prep[j].test_side[r]) == *test[r].label;
            }
            res.accuracy[i][j] = static_cast<double>(correct) / static_cast<double>(test.size());
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        CorpusSummary s;
        s.name = res.names[i];
        s.same = res.accuracy[i][i];
        if (n > 1) {
            double sum = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i) sum += res.accuracy[i][j];
            }
            s.cross = sum / static_cast<double>(n - 1);
        }
        // A group's key counts as a member, so {"a": ["b"]} pairs a and b
        // either way round.
        std::set<std::string> peers;
        for (const auto& [key, members] : groups) {
            std::set<std::string> all(members.begin(), members.end());
            all.insert(key);
            if (!all.count(s.name)) continue;
            all.erase(s.name);
            peers.insert(all.begin(), all.end());
        }
        double sum = 0.0;
        int count = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i && peers.count(res.names[j])) {
                sum += res.accuracy[i][j];
                ++count;
            }
        }
        if (count) s.similar = sum / count;
        res.summary.push_back(std::move(s));
    }
    return res;
}

std::string CrossCorpusResult::matrix_csv() const {
    std::string out;
    csv::Row header{"train"};
    header.insert(header.end(), names.begin(), names.end());
    csv::append_row(out, header);
    for (std::size_t i = 0; i < names.size(); ++i) {
        csv::Row row{names[i]};
        for (double a : accuracy[i]) row.push_back(fixed6(a));
        csv::append_row(out, row);
    }
    return out;
}

std::string CrossCorpusResult::summary_csv() const {
    std::string out;
    csv::append_row(out, {"corpus", "same", "cross", "similar"});
    for (const auto& s : summary) {
        csv::append_row(out, {s.name, fixed6(s.same), s.cross ? fixed6(*s.cross) : "", s.similar ? fixed6(*s.similar) : ""});
    }
    return out;
}

}  // namespace tad
