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

#include "tad/weaklabel.hpp"

#include <algorithm>
#include <cmath>

#include "tad/builtin_data.hpp"
#include "tad/csv.hpp"
#include "tad/text.hpp"

namespace tad {

using nlohmann::json;

// ---------------------------------------------------------------------------

void ExpertLabelMatrix::validate() const {
    if (votes.rows() != static_cast<Eigen::Index>(record_ids.size()) ||
        votes.cols() != static_cast<Eigen::Index>(expert_ids.size())) {
        throw DimError("vote matrix shape does not match its ids");
    }
}

ExpertLabelMatrix ExpertLabelMatrix::from_csv(std::string_view text) {
    csv::Table table(csv::parse(text));
    const std::size_t c_rec = table.column("record_id");
    const std::size_t c_exp = table.column("expert_id");
    const std::size_t c_vote = table.column("vote");
    ExpertLabelMatrix m;
    std::unordered_map<std::string, Eigen::Index> rec_index, exp_index;
    struct Cell {
        Eigen::Index r, e;
        Vote v;
    };
    std::vector<Cell> cells;
    for (std::size_t row = 0; row < table.size(); ++row) {
        const std::string& rec = table.at(row, c_rec);
        const std::string& exp = table.at(row, c_exp);
        const std::string& v = table.at(row, c_vote);
        Vote vote;
        if (v == "fake") vote = kFake;
        else if (v == "real") vote = kReal;
        else if (v == "abstain" || v.empty()) vote = kAbstain;
        else throw LabelError(row + 1, v);
        auto [ri, rnew] = rec_index.try_emplace(rec, static_cast<Eigen::Index>(m.record_ids.size()));
        if (rnew) m.record_ids.push_back(rec);
        auto [ei, enew] = exp_index.try_emplace(exp, static_cast<Eigen::Index>(m.expert_ids.size()));
        if (enew) m.expert_ids.push_back(exp);
        cells.push_back({ri->second, ei->second, vote});
    }
    m.votes = VoteMatrix::Zero(static_cast<Eigen::Index>(m.record_ids.size()), static_cast<Eigen::Index>(m.expert_ids.size()));
    for (const auto& c : cells) m.votes(c.r, c.e) = c.v;
    return m;
}

std::string ExpertLabelMatrix::to_csv() const {
    validate();
    std::string out;
    csv::append_row(out, {"record_id", "expert_id", "vote"});
    for (Eigen::Index r = 0; r < votes.rows(); ++r) {
        for (Eigen::Index e = 0; e < votes.cols(); ++e) {
            const auto v = votes(r, e);
            csv::append_row(out, {record_ids[static_cast<std::size_t>(r)], expert_ids[static_cast<std::size_t>(e)],
                                  v > 0 ? "fake" : v < 0 ? "real" : "abstain"});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

template <typename Fn>
void for_each_entry(std::string_view text, Fn&& fn) {
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line[0] == '#') continue;
        fn(line);
    }
}

std::string fold_apostrophe(std::string token) {
    // U+2019 -> '
    for (std::size_t p; (p = token.find("\xE2\x80\x99")) != std::string::npos;) token.replace(p, 3, "'");
    return token;
}

}  // namespace

Lexicons Lexicons::parse(std::string_view swear, std::string_view second_person, std::string_view adverbs,
                         std::string_view sentiment) {
    Lexicons lex;
    for_each_entry(swear, [&](std::string_view w) { lex.swear.emplace(w); });
    for_each_entry(second_person, [&](std::string_view w) { lex.second_person.emplace(w); });
    for_each_entry(adverbs, [&](std::string_view w) {
        if (w[0] == '!') lex.adverb_exceptions.emplace(w.substr(1));
        else lex.adverbs.emplace(w);
    });
    std::size_t line_no = 0;
    for_each_entry(sentiment, [&](std::string_view line) {
        ++line_no;
        const auto tab = line.find('\t');
        if (tab == std::string_view::npos) throw ParseError(line_no, "sentiment entry needs token<TAB>score");
        const double score = std::stod(std::string(line.substr(tab + 1)));
        if (score < -1.0 || score > 1.0) throw ParseError(line_no, "sentiment score outside [-1, 1]");
        lex.sentiment.emplace(std::string(line.substr(0, tab)), score);
    });
    return lex;
}

const Lexicons& Lexicons::builtin() {
    static const Lexicons lex = parse(builtin::swear_lexicon(), builtin::second_person_lexicon(),
                                      builtin::adverb_lexicon(), builtin::sentiment_lexicon());
    return lex;
}

bool Lexicons::is_adverb(const std::string& token) const {
    if (adverbs.count(token)) return true;
    if (adverb_exceptions.count(token)) return false;
    return token.size() >= 5 && token.compare(token.size() - 2, 2, "ly") == 0;
}

LexiconVotes lexicon_experts(std::string_view text, const Lexicons& lex, const LfThresholds& th) {
    LexiconVotes out;
    double polarity = 0.0;
    std::size_t hits = 0;
    for (const Token& tok : tokenize(text)) {
        const std::string t = fold_apostrophe(tok.text);
        ++out.tokens;
        out.swear_count += lex.swear.count(t);
        out.second_person_count += lex.second_person.count(t);
        out.adverb_count += lex.is_adverb(t) ? 1 : 0;
        if (auto it = lex.sentiment.find(t); it != lex.sentiment.end()) {
            polarity += it->second;
            ++hits;
        }
    }
    if (out.tokens == 0) return out;
    const double n = static_cast<double>(out.tokens);
    if (out.swear_count / n > th.swear) out.swear = kFake;
    if (out.second_person_count / n > th.second_person) out.second_person = kFake;
    if (out.adverb_count / n > th.adverb) out.adverb = kFake;
    if (hits) out.sentiment = std::clamp(polarity / static_cast<double>(hits), -1.0, 1.0);
    return out;
}

// ---------------------------------------------------------------------------

json AggregatedLabel::to_json() const {
    return {{"record_id", record_id},
            {"label", label ? std::string(to_string(*label)) : std::string("unlabeled")},
            {"confidence", confidence},
            {"method", method}};
}

std::vector<AggregatedLabel> majority_vote(const ExpertLabelMatrix& m) {
    m.validate();
    std::vector<AggregatedLabel> out;
    out.reserve(m.record_ids.size());
    for (Eigen::Index r = 0; r < m.votes.rows(); ++r) {
        const auto row = m.votes.row(r);
        const auto fake = (row.array() > 0).count();
        const auto real = (row.array() < 0).count();
        AggregatedLabel a{m.record_ids[static_cast<std::size_t>(r)], std::nullopt, 0.0, "majority"};
        if (fake != real) {
            a.label = fake > real ? Label::fake : Label::real;
            a.confidence = static_cast<double>(std::max(fake, real)) / static_cast<double>(fake + real);
        }
        out.push_back(std::move(a));
    }
    return out;
}

std::vector<ExpertWeight> calibrate_weights(const ExpertLabelMatrix& m, const std::map<std::string, Label>& oracle) {
    m.validate();
    std::vector<ExpertWeight> out;
    for (std::size_t e = 0; e < m.expert_ids.size(); ++e) {
        std::size_t correct = 0, total = 0;
        for (std::size_t r = 0; r < m.record_ids.size(); ++r) {
            auto it = oracle.find(m.record_ids[r]);
            const auto v = m.votes(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(e));
            if (it == oracle.end() || v == kAbstain) continue;
            ++total;
            correct += v == vote_of(it->second) ? 1 : 0;
        }
        ExpertWeight w{m.expert_ids[e], 0.5, total};
        if (total) w.accuracy = (static_cast<double>(correct) + 1.0) / (static_cast<double>(total) + 2.0);
        out.push_back(std::move(w));
    }
    return out;
}

namespace {

// Sum in ascending order so the result does not depend on expert order.
double sorted_sum(std::vector<double>& terms) {
    std::sort(terms.begin(), terms.end());
    double s = 0.0;
    for (double t : terms) s += t;
    return s;
}

}  // namespace

std::vector<AggregatedLabel> weighted_vote(const ExpertLabelMatrix& m, const std::vector<ExpertWeight>& weights) {
    m.validate();
    if (weights.size() != m.expert_ids.size()) throw DimError("one weight per expert expected");
    std::vector<double> log_odds;
    for (const auto& w : weights) {
        const double a = std::clamp(w.accuracy, 0.01, 0.99);
        log_odds.push_back(std::log(a) - std::log1p(-a));
    }
    std::vector<AggregatedLabel> out;
    std::vector<double> fake_terms, real_terms;
    for (Eigen::Index r = 0; r < m.votes.rows(); ++r) {
        fake_terms.clear();
        real_terms.clear();
        for (Eigen::Index e = 0; e < m.votes.cols(); ++e) {
            const auto v = m.votes(r, e);
            if (v > 0) fake_terms.push_back(log_odds[static_cast<std::size_t>(e)]);
            else if (v < 0) real_terms.push_back(log_odds[static_cast<std::size_t>(e)]);
        }
        const double score = sorted_sum(fake_terms) - sorted_sum(real_terms);
        AggregatedLabel a{m.record_ids[static_cast<std::size_t>(r)], std::nullopt, 0.0, "weighted"};
        if (score != 0.0) {
            a.label = score > 0 ? Label::fake : Label::real;
            a.confidence = std::tanh(std::abs(score) / 2.0);  // 2*sigmoid(x) - 1
        }
        out.push_back(std::move(a));
    }
    return out;
}

// ---------------------------------------------------------------------------

EmResult em_latent_labels(const ExpertLabelMatrix& m, const EmOptions& opt) {
    m.validate();
    const Eigen::Index n = m.votes.rows();
    const Eigen::Index k = m.votes.cols();
    EmResult res;

    std::vector<std::size_t> support(static_cast<std::size_t>(k), 0);
    for (Eigen::Index e = 0; e < k; ++e) support[static_cast<std::size_t>(e)] = static_cast<std::size_t>((m.votes.col(e).array() != 0).count());
    const auto active = std::count_if(support.begin(), support.end(), [](std::size_t s) { return s > 0; });
    if (active < 2) {
        res.fallback_to_majority = true;
        res.labels = majority_vote(m);
        for (auto& l : res.labels) l.method = "em";
        for (Eigen::Index e = 0; e < k; ++e) res.weights.push_back({m.expert_ids[static_cast<std::size_t>(e)], 0.5, support[static_cast<std::size_t>(e)]});
        return res;
    }

    // Posterior mass on each class is tracked separately so that flipping
    // every vote swaps the two arrays exactly.
    std::vector<double> q_fake(static_cast<std::size_t>(n)), q_real(static_cast<std::size_t>(n));
    std::vector<bool> voted(static_cast<std::size_t>(n));
    for (Eigen::Index r = 0; r < n; ++r) {
        const double f = static_cast<double>((m.votes.row(r).array() > 0).count());
        const double g = static_cast<double>((m.votes.row(r).array() < 0).count());
        const auto i = static_cast<std::size_t>(r);
        voted[i] = f + g > 0;
        q_fake[i] = voted[i] ? f / (f + g) : 0.5;
        q_real[i] = voted[i] ? g / (f + g) : 0.5;
    }

    std::vector<double> acc(static_cast<std::size_t>(k)), log_a(static_cast<std::size_t>(k)), log_b(static_cast<std::size_t>(k));
    double log_pf = 0.0, log_pr = 0.0;
    std::vector<double> fake_terms, real_terms;
    for (int iter = 0; iter < opt.max_iters; ++iter) {
        // M-step.
        double mass_f = 0.0, mass_r = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) {
            mass_f += q_fake[static_cast<std::size_t>(r)];
            mass_r += q_real[static_cast<std::size_t>(r)];
        }
        const double denom = static_cast<double>(n) + 2.0;
        log_pf = std::log((mass_f + 1.0) / denom);
        log_pr = std::log((mass_r + 1.0) / denom);
        for (Eigen::Index e = 0; e < k; ++e) {
            double agree = 0.0, disagree = 0.0;
            for (Eigen::Index r = 0; r < n; ++r) {
                const auto v = m.votes(r, e);
                const auto i = static_cast<std::size_t>(r);
                if (v > 0) {
                    agree += q_fake[i];
                    disagree += q_real[i];
                } else if (v < 0) {
                    agree += q_real[i];
                    disagree += q_fake[i];
                }
            }
            const auto j = static_cast<std::size_t>(e);
            const double d = static_cast<double>(support[j]) + 2.0;
            acc[j] = (agree + 1.0) / d;
            log_a[j] = std::log((agree + 1.0) / d);
            log_b[j] = std::log((disagree + 1.0) / d);
        }

        // Objective at the new parameters.
        double ll = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) {
            double lf = log_pf, lr = log_pr;
            for (Eigen::Index e = 0; e < k; ++e) {
                const auto v = m.votes(r, e);
                const auto j = static_cast<std::size_t>(e);
                if (v > 0) {
                    lf += log_a[j];
                    lr += log_b[j];
                } else if (v < 0) {
                    lf += log_b[j];
                    lr += log_a[j];
                }
            }
            const double hi = std::max(lf, lr);
            ll += hi + std::log(std::exp(lf - hi) + std::exp(lr - hi));
        }
        for (Eigen::Index e = 0; e < k; ++e) ll += log_a[static_cast<std::size_t>(e)] + log_b[static_cast<std::size_t>(e)];
        ll += log_pf + log_pr;
        res.objective.push_back(ll);

        // E-step.
        double change = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) {
            fake_terms.clear();
            real_terms.clear();
            for (Eigen::Index e = 0; e < k; ++e) {
                const auto v = m.votes(r, e);
                const auto j = static_cast<std::size_t>(e);
                if (v > 0) fake_terms.push_back(log_a[j] - log_b[j]);
                else if (v < 0) real_terms.push_back(log_a[j] - log_b[j]);
            }
            const double z = (log_pf - log_pr) + (sorted_sum(fake_terms) - sorted_sum(real_terms));
            const double nf = 1.0 / (1.0 + std::exp(-z));
            const double nr = 1.0 / (1.0 + std::exp(z));
            const auto i = static_cast<std::size_t>(r);
            change = std::max(change, std::abs(nf - q_fake[i]));
            q_fake[i] = nf;
            q_real[i] = nr;
        }
        res.iterations = iter + 1;
        if (change < opt.tol) {
            res.converged = true;
            break;
        }
    }

    res.prior_fake = std::exp(log_pf);
    res.posterior = q_fake;
    for (Eigen::Index e = 0; e < k; ++e) {
        const auto j = static_cast<std::size_t>(e);
        res.weights.push_back({m.expert_ids[j], acc[j], support[j]});
    }
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto i = static_cast<std::size_t>(r);
        AggregatedLabel a{m.record_ids[i], std::nullopt, 0.0, "em"};
        if (voted[i] && q_fake[i] != q_real[i]) {
            a.label = q_fake[i] > q_real[i] ? Label::fake : Label::real;
            a.confidence = std::max(q_fake[i], q_real[i]);
        }
        res.labels.push_back(std::move(a));
    }
    return res;
}

}  // namespace tad
