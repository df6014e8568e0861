#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kgntm/evalkit.hpp"
#include "trained_fixture.hpp"

using namespace kgntm;
using namespace kgntm::testing;

namespace {

// Direct-count UMass: scans every document for every pair.
double umass_direct(const std::vector<TokenId>& words, const std::vector<std::vector<TokenId>>& docs)
{
    auto has = [](const std::vector<TokenId>& d, TokenId w) { return std::find(d.begin(), d.end(), w) != d.end(); };
    double s = 0.0;
    for (std::size_t m = 1; m < words.size(); ++m) {
        for (std::size_t l = 0; l < m; ++l) {
            if (words[m] == words[l]) continue;
            double dl = 0.0, dml = 0.0;
            for (const auto& d : docs) {
                if (has(d, words[l])) {
                    dl += 1.0;
                    if (has(d, words[m])) dml += 1.0;
                }
            }
            s += std::log((dml + 1.0) / dl);
        }
    }
    return s;
}

std::vector<std::set<TokenId>> as_sets(const std::vector<std::vector<TokenId>>& docs)
{
    std::vector<std::set<TokenId>> out;
    for (const auto& d : docs) out.emplace_back(d.begin(), d.end());
    return out;
}

} // namespace

TEST_CASE("Classification metrics worked examples")
{
    auto perfect = classification_metrics({1, 0, 1, 0}, {1, 0, 1, 0});
    CHECK(perfect.f1 == 1.0);
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);

    auto half = classification_metrics({1, 1}, {1, 0});
    CHECK(half.tp == 1);
    CHECK(half.fp == 1);
    CHECK(half.fn == 0);
    CHECK(half.precision == doctest::Approx(0.5));
    CHECK(half.recall == doctest::Approx(1.0));
    CHECK(half.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

    auto none = classification_metrics({0, 0, 0}, {1, 0, 1});
    CHECK(none.recall == 0.0);
    CHECK(none.f1 == 0.0);

    CHECK_THROWS_AS(classification_metrics({1}, {1, 0}), std::invalid_argument);
    CHECK_THROWS_AS(classification_metrics({}, {}), std::invalid_argument);
}

TEST_CASE("Classification metrics are permutation invariant and consistent")
{
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> p(40), y(40);
        for (auto& v : p) v = static_cast<int>(rng() % 2);
        for (auto& v : y) v = static_cast<int>(rng() % 2);
        auto a = classification_metrics(p, y);
        std::vector<std::size_t> perm(40);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<int> pp, yy;
        for (auto i : perm) {
            pp.push_back(p[i]);
            yy.push_back(y[i]);
        }
        auto b = classification_metrics(pp, yy);
        CHECK(a.f1 == b.f1);
        CHECK(a.precision == b.precision);
        CHECK(a.recall == b.recall);
        CHECK(a.tp + a.fp + a.fn + a.tn == 40);
        if (a.precision + a.recall > 0)
            CHECK(a.f1 == doctest::Approx(2 * a.precision * a.recall / (a.precision + a.recall)).epsilon(1e-14));
    }
}

TEST_CASE("UMass coherence hand-counted example")
{
    // A = 0, B = 1. D(A) = 2, D(B, A) = 1.
    std::vector<std::vector<TokenId>> docs{{0, 1}, {0}};
    CHECK(umass_coherence({0, 1}, as_sets(docs)) == doctest::Approx(0.0).epsilon(1e-15));
    // Reversed order: log((1 + 1) / D(B)) = log 2.
    CHECK(umass_coherence({1, 0}, as_sets(docs)) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(umass_coherence({0, 0, 0}, as_sets(docs)) == 0.0);
}

TEST_CASE("UMass coherence matches a direct-count oracle on random corpora")
{
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t V = 12 + rng() % 10, D = 5 + rng() % 20;
        std::vector<std::vector<TokenId>> docs(D);
        for (auto& d : docs) {
            const std::size_t n = 1 + rng() % 8;
            for (std::size_t i = 0; i < n; ++i) d.push_back(static_cast<TokenId>(rng() % V));
        }
        std::set<TokenId> present;
        for (const auto& d : docs) present.insert(d.begin(), d.end());
        std::vector<TokenId> pool(present.begin(), present.end());
        std::shuffle(pool.begin(), pool.end(), rng);
        pool.resize(std::min<std::size_t>(pool.size(), 10));
        CHECK(umass_coherence(pool, as_sets(docs)) == doctest::Approx(umass_direct(pool, docs)).epsilon(1e-9));
    }
}

TEST_CASE("UMass coherence drops words absent from the reference corpus")
{
    std::vector<std::vector<TokenId>> docs{{0, 1}, {0, 2}, {1, 2}};
    const auto sets = as_sets(docs);
    CHECK(umass_coherence({0, 9, 1}, sets) == doctest::Approx(umass_coherence({0, 1}, sets)).epsilon(1e-15));
}

TEST_CASE("UMass coherence grows when a co-occurring document is added to an unsaturated corpus")
{
    // Each pair term moves from (x+1)/y to (x+2)/(y+1), which does not
    // decrease when x < y, i.e. when no earlier word always co-occurs with a
    // later one.
    Rng rng(7);
    int checked = 0;
    for (int trial = 0; trial < 200 && checked < 30; ++trial) {
        std::vector<std::vector<TokenId>> docs(12);
        for (auto& d : docs)
            for (TokenId w = 0; w < 6; ++w)
                if (rng() % 2) d.push_back(w);
        std::vector<TokenId> top{0, 1, 2, 3, 4, 5};
        bool unsaturated = true;
        for (std::size_t m = 1; m < top.size(); ++m) {
            for (std::size_t l = 0; l < m; ++l) {
                std::size_t dl = 0, dml = 0;
                for (const auto& d : docs) {
                    const bool hl = std::count(d.begin(), d.end(), top[l]) > 0;
                    dl += hl;
                    dml += hl && std::count(d.begin(), d.end(), top[m]) > 0;
                }
                if (dl == 0 || dml >= dl) unsaturated = false;
            }
        }
        if (!unsaturated) continue;
        ++checked;
        const double before = umass_coherence(top, as_sets(docs));
        docs.push_back(top);
        CHECK(umass_coherence(top, as_sets(docs)) >= before);
    }
    CHECK(checked >= 10);
}

TEST_CASE("UMass coherence can fall when the added document saturates a pair")
{
    // D(A) = 1 and D(B, A) = 1: log 2 before, log(3/2) after adding {A, B}.
    std::vector<std::vector<TokenId>> docs{{0, 1}, {1}};
    const double before = umass_coherence({0, 1}, as_sets(docs));
    docs.push_back({0, 1});
    const double after = umass_coherence({0, 1}, as_sets(docs));
    CHECK(before == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(after == doctest::Approx(std::log(1.5)).epsilon(1e-15));
}

TEST_CASE("Hungarian assignment matches brute force")
{
    Rng rng(12);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 1 + trial % 6;
        std::vector<std::vector<double>> c(n, std::vector<double>(n));
        for (auto& r : c)
            for (auto& v : r) v = u(rng);
        auto a = hungarian(c);
        REQUIRE(a.size() == n);
        double got = 0.0;
        for (std::size_t i = 0; i < n; ++i) got += c[i][a[i]];
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        double best = 1e300;
        do {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += c[i][perm[i]];
            best = std::min(best, s);
        } while (std::next_permutation(perm.begin(), perm.end()));
        CHECK(got == doctest::Approx(best).epsilon(1e-12));
        auto sorted = a;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < n; ++i) CHECK(sorted[i] == i);
    }
}

TEST_CASE("Topic recovery of a permuted copy is perfect")
{
    Rng rng(3);
    auto planted = random_state(5, 20, 4, rng).phi_R;
    std::vector<std::size_t> perm{3, 0, 4, 1, 2};
    Tensor learned = Tensor::matrix(5, 20);
    for (std::size_t k = 0; k < 5; ++k)
        for (std::size_t v = 0; v < 20; ++v) learned(perm[k], v) = planted(k, v);
    auto r = topic_recovery(learned, planted);
    CHECK(r.mean_cosine == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.assignment == perm);
    CHECK(cosine(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 0.0);
}

TEST_CASE("Split is seeded, disjoint and 70/15/15")
{
    auto s = split_70_15_15(100, 5);
    CHECK(s.train.size() == 70);
    CHECK(s.val.size() == 15);
    CHECK(s.test.size() == 15);
    std::vector<std::size_t> all = s.train;
    all.insert(all.end(), s.val.begin(), s.val.end());
    all.insert(all.end(), s.test.begin(), s.test.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < 100; ++i) CHECK(all[i] == i);
    auto again = split_70_15_15(100, 5);
    CHECK(again.test == s.test);
    CHECK(split_70_15_15(100, 6).test != s.test);
}

TEST_CASE("Cutoff sweep reports four rows")
{
    const auto& t = tiny_trained();
    auto preds = predict_all(t.corpus, t.distilled);
    auto rows = cutoff_sweep(t.corpus, preds, default_cutoffs());
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].cutoff == 0.10);
    CHECK(rows[1].cutoff == 0.15);
    CHECK(rows[2].cutoff == 0.20);
    CHECK(rows[3].cutoff == 0.30);
    // Raising the cutoff can only shrink the positive set.
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].metrics.positives <= rows[i - 1].metrics.positives);
    Corpus no_flags = t.corpus;
    no_flags.docs[0].comment_flags.reset();
    CHECK_THROWS(cutoff_sweep(no_flags, preds, default_cutoffs()));
}

TEST_CASE("Model coherence is finite for both pooling modes")
{
    const auto& t = tiny_trained();
    for (bool pooled : {true, false}) {
        auto c = model_coherence(t.distilled, t.corpus, pooled);
        REQUIRE(c.top10.size() == 4);
        REQUIRE(c.top20.size() == 4);
        for (double v : c.top10) CHECK(std::isfinite(v));
        CHECK(std::isfinite(c.mean20));
        CHECK(c.mean10 <= 0.0);
    }
}

TEST_CASE("Synthetic experiment is reproducible from its seed")
{
    ExperimentConfig gen;
    gen.planted = tiny_planted();
    gen.corpus = tiny_corpus_spec();
    gen.corpus.docs = 60;
    gen.seed = 9;
    TrainConfig cfg = tiny_config();
    cfg.max_epochs = cfg.min_epochs = 4;
    cfg.distill_epochs = 3;
    auto a = run_synthetic_experiment(gen, cfg);
    auto b = run_synthetic_experiment(gen, cfg);
    CHECK(a.report == b.report);
    CHECK(a.report.at("seed") == 9);
    CHECK(a.report.at("cutoff_sweep").size() == 4);
    CHECK(a.report.at("split").at("test").get<std::size_t>() == 9);
    for (const char* key : {"metrics", "recovery", "coherence", "seed_weights", "config", "training", "distill"})
        CHECK(a.report.contains(key));
    auto round = ExperimentConfig::from_json(gen.to_json(), ExperimentConfig{});
    CHECK(round.to_json() == gen.to_json());
}
