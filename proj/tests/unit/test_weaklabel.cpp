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

#include <cmath>

#include "oracles.hpp"
#include "tad/weaklabel.hpp"

using namespace tad;

namespace {

ExpertLabelMatrix random_matrix(Rng& rng, std::size_t records, std::size_t experts, double abstain = 0.3) {
    ExpertLabelMatrix m;
    for (std::size_t r = 0; r < records; ++r) m.record_ids.push_back("r" + std::to_string(r));
    for (std::size_t e = 0; e < experts; ++e) m.expert_ids.push_back("e" + std::to_string(e));
    m.votes = VoteMatrix::Zero(static_cast<Eigen::Index>(records), static_cast<Eigen::Index>(experts));
    for (Eigen::Index r = 0; r < m.votes.rows(); ++r)
        for (Eigen::Index e = 0; e < m.votes.cols(); ++e)
            m.votes(r, e) = rng.bernoulli(abstain) ? kAbstain : (rng.bernoulli(0.5) ? kFake : kReal);
    return m;
}

// Noisy experts with known accuracies over a known truth.
struct Synthetic {
    ExpertLabelMatrix m;
    std::vector<Label> truth;
};

Synthetic synthetic(Rng& rng, std::size_t records, const std::vector<double>& accuracy, double abstain, double prior_fake) {
    Synthetic s;
    for (std::size_t e = 0; e < accuracy.size(); ++e) s.m.expert_ids.push_back("e" + std::to_string(e));
    s.m.votes = VoteMatrix::Zero(static_cast<Eigen::Index>(records), static_cast<Eigen::Index>(accuracy.size()));
    for (std::size_t r = 0; r < records; ++r) {
        s.m.record_ids.push_back("r" + std::to_string(r));
        const Label t = rng.bernoulli(prior_fake) ? Label::fake : Label::real;
        s.truth.push_back(t);
        for (std::size_t e = 0; e < accuracy.size(); ++e) {
            if (rng.bernoulli(abstain)) continue;
            const bool right = rng.bernoulli(accuracy[e]);
            const Vote v = vote_of(t);
            s.m.votes(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(e)) = right ? v : static_cast<Vote>(-v);
        }
    }
    return s;
}

double accuracy(const std::vector<AggregatedLabel>& labels, const std::vector<Label>& truth) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) ok += labels[i].label == truth[i] ? 1 : 0;
    return static_cast<double>(ok) / static_cast<double>(labels.size());
}

}  // namespace

TEST_CASE("long-form vote CSV") {
    const auto m = ExpertLabelMatrix::from_csv(
        "record_id,expert_id,vote\n"
        "b,lf1,fake\n"
        "a,lf2,real\n"
        "a,lf1,abstain\n"
        "c,lf2,\n");
    CHECK(m.record_ids == std::vector<std::string>{"b", "a", "c"});
    CHECK(m.expert_ids == std::vector<std::string>{"lf1", "lf2"});
    CHECK(m.votes(0, 0) == kFake);
    CHECK(m.votes(0, 1) == kAbstain);
    CHECK(m.votes(1, 1) == kReal);
    CHECK(m.votes(2, 1) == kAbstain);
    const auto back = ExpertLabelMatrix::from_csv(m.to_csv());
    CHECK(back.votes == m.votes);
    CHECK(back.record_ids == m.record_ids);
    CHECK_THROWS_AS(ExpertLabelMatrix::from_csv("record_id,expert_id,vote\na,b,maybe\n"), LabelError);
}

TEST_CASE("lexicon labeling functions") {
    const auto v = lexicon_experts("You know your stupid damn hoax is you");
    CHECK(v.tokens == 8);
    CHECK(v.second_person_count == 3);
    CHECK(v.swear_count == 2);
    CHECK(v.swear == kFake);
    CHECK(v.second_person == kFake);
    const auto q = lexicon_experts("The committee met on Tuesday to review the budget");
    CHECK(q.swear == kAbstain);
    CHECK(q.second_person == kAbstain);
    CHECK(q.adverb == kAbstain);
    // Rates compare strictly: 1 hit in 50 tokens is exactly 0.02.
    std::string s = "damn";
    for (int i = 0; i < 49; ++i) s += " word";
    CHECK(lexicon_experts(s).swear == kAbstain);
    s += " damn";
    CHECK(lexicon_experts(s).swear == kFake);
    const auto adv = lexicon_experts("really quickly very clearly");
    CHECK(adv.adverb_count == 4);
    CHECK(adv.adverb == kFake);
    CHECK(lexicon_experts("great").sentiment > 0.0);
    CHECK(lexicon_experts("").tokens == 0);
}

TEST_CASE("custom lexicons parse") {
    const auto lex = Lexicons::parse("# c\nzorp\n", "thou\n", "oft\n!holly\n", "bleh\t-0.5\n");
    CHECK(lex.is_adverb("oft"));
    CHECK(lex.is_adverb("quickly"));
    CHECK_FALSE(lex.is_adverb("holly"));
    CHECK_FALSE(lex.is_adverb("fly"));
    const auto v = lexicon_experts("zorp bleh", lex);
    CHECK(v.swear_count == 1);
    CHECK(v.sentiment == doctest::Approx(-0.5));
}

TEST_CASE("majority vote agrees with counting") {
    Rng rng(51);
    for (int trial = 0; trial < 50; ++trial) {
        const auto m = random_matrix(rng, 40, 1 + rng.below(7));
        const auto out = majority_vote(m);
        REQUIRE(out.size() == m.record_ids.size());
        for (std::size_t r = 0; r < out.size(); ++r) {
            int f = 0, re = 0;
            for (Eigen::Index e = 0; e < m.votes.cols(); ++e) {
                f += m.votes(static_cast<Eigen::Index>(r), e) == kFake;
                re += m.votes(static_cast<Eigen::Index>(r), e) == kReal;
            }
            if (f == re) {
                CHECK_FALSE(out[r].label);
            } else {
                CHECK(out[r].label == (f > re ? Label::fake : Label::real));
                CHECK(out[r].confidence == doctest::Approx(static_cast<double>(std::max(f, re)) / (f + re)));
            }
        }
    }
}

TEST_CASE("calibration is Laplace-smoothed") {
    const auto m = ExpertLabelMatrix::from_csv(
        "record_id,expert_id,vote\n"
        "a,x,fake\nb,x,fake\nc,x,real\nd,x,fake\n"
        "a,y,abstain\n");
    const auto w = calibrate_weights(m, {{"a", Label::fake}, {"b", Label::fake}, {"c", Label::fake}});
    REQUIRE(w.size() == 2);
    CHECK(w[0].accuracy == doctest::Approx(3.0 / 5.0));
    CHECK(w[0].support == 3);
    CHECK(w[1].accuracy == 0.5);
    CHECK(w[1].support == 0);
}

TEST_CASE("weighted vote: oracle and equal-weight reduction") {
    Rng rng(53);
    for (int trial = 0; trial < 50; ++trial) {
        const auto m = random_matrix(rng, 40, 1 + rng.below(6));
        std::vector<ExpertWeight> w;
        for (const auto& id : m.expert_ids) w.push_back({id, rng.uniform(), 10});
        const auto out = weighted_vote(m, w);
        for (std::size_t r = 0; r < out.size(); ++r) {
            double score = 0.0;
            for (std::size_t e = 0; e < w.size(); ++e) {
                const double a = std::clamp(w[e].accuracy, 0.01, 0.99);
                score += m.votes(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(e)) * std::log(a / (1 - a));
            }
            if (std::abs(score) > 1e-9) {
                CHECK(out[r].label == (score > 0 ? Label::fake : Label::real));
                CHECK(out[r].confidence == doctest::Approx(2.0 / (1.0 + std::exp(-std::abs(score))) - 1.0));
            }
        }
        // Equal weights above one half reproduce the majority labels.
        for (auto& x : w) x.accuracy = 0.7;
        const auto eq = weighted_vote(m, w);
        const auto mv = majority_vote(m);
        for (std::size_t r = 0; r < eq.size(); ++r) CHECK(eq[r].label == mv[r].label);
    }
    const auto m = random_matrix(rng, 3, 2);
    CHECK_THROWS_AS(weighted_vote(m, {}), DimError);
}

TEST_CASE("weighted vote does not depend on expert order") {
    Rng rng(57);
    const auto m = random_matrix(rng, 30, 5, 0.1);
    std::vector<ExpertWeight> w;
    for (const auto& id : m.expert_ids) w.push_back({id, 0.3 + 0.6 * rng.uniform(), 1});
    ExpertLabelMatrix rev = m;
    rev.votes = m.votes.rowwise().reverse();
    std::reverse(rev.expert_ids.begin(), rev.expert_ids.end());
    auto wr = w;
    std::reverse(wr.begin(), wr.end());
    const auto a = weighted_vote(m, w), b = weighted_vote(rev, wr);
    for (std::size_t r = 0; r < a.size(); ++r) {
        CHECK(a[r].label == b[r].label);
        CHECK(a[r].confidence == b[r].confidence);
    }
}

TEST_CASE("EM: monotone objective, recovers accuracies, beats majority") {
    const std::vector<double> acc = {0.9, 0.85, 0.75, 0.6, 0.55, 0.55};
    double em_total = 0.0, mv_total = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed);
        const auto s = synthetic(rng, 1500, acc, 0.2, 0.4);
        EmOptions o;
        o.seed = seed;
        const auto res = em_latent_labels(s.m, o);
        for (std::size_t i = 1; i < res.objective.size(); ++i) CHECK(res.objective[i] >= res.objective[i - 1] - 1e-9);
        CHECK(res.converged);
        REQUIRE(res.weights.size() == acc.size());
        for (std::size_t e = 0; e < acc.size(); ++e) CHECK(std::abs(res.weights[e].accuracy - acc[e]) < 0.06);
        CHECK(std::abs(res.prior_fake - 0.4) < 0.06);
        for (double p : res.posterior) CHECK((p >= 0.0 && p <= 1.0));
        em_total += accuracy(res.labels, s.truth);
        mv_total += accuracy(majority_vote(s.m), s.truth);
        const auto again = em_latent_labels(s.m, o);
        CHECK(again.posterior == res.posterior);
    }
    CHECK(em_total > mv_total);
}

TEST_CASE("EM on degenerate input") {
    ExpertLabelMatrix m;
    m.record_ids = {"a", "b"};
    m.expert_ids = {"x"};
    m.votes = VoteMatrix::Zero(2, 1);
    const auto res = em_latent_labels(m);
    REQUIRE(res.labels.size() == 2);
    for (const auto& l : res.labels) CHECK_FALSE(l.label);
}
