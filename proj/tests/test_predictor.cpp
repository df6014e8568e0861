#include "doctest.h"

#include <cmath>
#include <numeric>

#include "kgntm/predictor.hpp"
#include "trained_fixture.hpp"

using namespace kgntm;
using namespace kgntm::testing;

TEST_CASE("Prediction is deterministic and theta lies on the simplex")
{
    const auto& t = tiny_trained();
    for (const auto& d : t.corpus.docs) {
        auto a = predict(d, t.distilled);
        auto b = predict(d, t.distilled);
        CHECK(a.probability == b.probability);
        CHECK(a.theta == b.theta);
        CHECK(a.id == d.id);
        REQUIRE(a.theta.size() == 4);
        CHECK(std::accumulate(a.theta.begin(), a.theta.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(a.probability >= 0.0);
        CHECK(a.probability <= 1.0);
        CHECK(a.label == (a.probability > 0.5 ? 1 : 0));
    }
}

TEST_CASE("Prediction ignores comments and labels")
{
    const auto& t = tiny_trained();
    for (std::size_t i = 0; i < 10; ++i) {
        VideoDoc d = t.corpus.docs[i];
        const auto base = predict(d, t.distilled);
        d.comments.assign(d.comments.size(), 0);
        d.label = 1 - *d.label;
        d.comment_flags.reset();
        const auto changed = predict(d, t.distilled);
        CHECK(changed.probability == base.probability);
        CHECK(changed.theta == base.theta);
        d.comments.clear();
        d.comment_offsets.clear();
        d.label.reset();
        CHECK(predict(d, t.distilled).probability == base.probability);
    }
}

TEST_CASE("Prediction routes by transcript presence")
{
    const auto& t = tiny_trained();
    TrainedModel m = t.distilled;
    // Breaking the without-transcript networks changes only transcript-free docs.
    m.vs.inc3.zero_output_layer();
    for (const auto& d : t.corpus.docs) {
        const bool same = predict(d, m).probability == predict(d, t.distilled).probability;
        CHECK(same == d.has_transcript());
    }
}

TEST_CASE("Zeroed label head gives probability one half and label zero")
{
    const auto& t = tiny_trained();
    TrainedModel m = t.distilled;
    m.model.net_label.zero_output_layer();
    for (std::size_t i = 0; i < 5; ++i) {
        auto p = predict(t.corpus.docs[i], m);
        CHECK(p.probability == 0.5);
        CHECK(p.label == 0);
    }
    auto p = predict(t.corpus.docs[0], m, 0.4);
    CHECK(p.label == 1);
}

TEST_CASE("Prediction rejects a missing feature vector")
{
    const auto& t = tiny_trained();
    VideoDoc d = t.corpus.docs[0];
    d.f_img.clear();
    CHECK_THROWS(predict(d, t.distilled));
}

TEST_CASE("Top indices sort by value then index")
{
    std::vector<double> v{0.1, 0.4, 0.4, 0.05, 0.05};
    CHECK(top_indices(v, 3) == std::vector<std::size_t>{1, 2, 0});
    CHECK(top_indices(v, 10) == std::vector<std::size_t>{1, 2, 0, 3, 4});
    std::vector<double> delta{0.0, 0.0, 1.0, 0.0};
    CHECK(top_indices(delta, 1) == std::vector<std::size_t>{2});
}

TEST_CASE("Topic report seed weights and word lists")
{
    const auto& t = tiny_trained();
    TrainedModel m = t.distilled;
    pin_head(m.vs.pi_a, 2.0, true);
    pin_head(m.vs.pi_b, 6.0, true);
    finalize_point_estimates(m);
    auto rep = topic_report(m, 5, &t.corpus);
    REQUIRE(rep.topics.size() == 4);
    CHECK(rep.documents.size() == t.corpus.docs.size());
    for (const auto& e : rep.topics) {
        CHECK(e.seed_topic_weight == doctest::Approx(0.75).epsilon(1e-12));
        REQUIRE(e.comment_words.size() == 5);
        REQUIRE(e.transcript_words.size() == 5);
        for (std::size_t i = 1; i < e.comment_words.size(); ++i) {
            const auto& a = e.comment_words[i - 1];
            const auto& b = e.comment_words[i];
            CHECK((a.probability > b.probability || (a.probability == b.probability && a.id < b.id)));
        }
        CHECK(e.comment_words[0].word == m.vocab.regular_word(e.comment_words[0].id));
    }
    CHECK(topic_report(m, 5, &t.corpus).to_json() == rep.to_json());
    CHECK_FALSE(rep.to_text().empty());

    TrainedModel frozen = t.distilled;
    frozen.cfg.ablations.auto_supervision = false;
    finalize_point_estimates(frozen);
    for (const auto& e : topic_report(frozen, 3).topics) CHECK(e.seed_topic_weight == 0.5);
}

TEST_CASE("Topic report on a delta-like row picks the argmax word")
{
    const auto& t = tiny_trained();
    TrainedModel m = t.distilled;
    const std::size_t V = m.model.V;
    pin_head(m.vs.phiR_mu, 0.0, false);
    pin_head(m.vs.phiR_sigma, 0.1, true);
    m.vs.phiR_mu.layers().back().bias.value[1 * V + 7] = 8.0;
    auto rep = topic_report(m, 1);
    REQUIRE(rep.topics[1].comment_words.size() == 1);
    CHECK(rep.topics[1].comment_words[0].id == 7);
    CHECK(rep.topics[1].comment_words[0].probability > 0.9);
}
