#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "kgntm/pretrain.hpp"
#include "kgntm/rng.hpp"

using namespace kgntm;

namespace {

Corpus corpus_from(const std::vector<std::vector<std::string>>& docs, std::size_t V_extra = 0)
{
    Corpus c;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        VideoDoc doc;
        doc.id = "d" + std::to_string(d);
        doc.comment_offsets = {0};
        for (const auto& w : docs[d]) doc.comments.push_back(c.vocab.add_regular(w));
        c.docs.push_back(std::move(doc));
    }
    for (std::size_t i = 0; i < V_extra; ++i) c.vocab.add_regular("extra" + std::to_string(i));
    return c;
}

// Two topics over disjoint halves of a 40-word vocabulary.
Corpus separable_corpus(Rng& rng, std::size_t docs = 60)
{
    std::vector<std::vector<std::string>> text;
    for (std::size_t d = 0; d < docs; ++d) {
        const std::size_t half = d % 2;
        std::vector<std::string> ws;
        for (int i = 0; i < 40; ++i) ws.push_back("w" + std::to_string(half * 20 + rng() % 20));
        text.push_back(std::move(ws));
    }
    return corpus_from(text);
}

// Independent plain-LDA collapsed Gibbs sampler following the same random
// draw protocol: one uniform per initial assignment, one per resample.
std::vector<double> plain_lda_trace(const Corpus& c, std::size_t K, std::size_t iters, double alpha, double beta,
                                    std::uint64_t seed, std::vector<std::vector<std::uint32_t>>& nkw_out)
{
    const std::size_t V = c.vocab.V();
    Rng rng(seed);
    std::vector<std::vector<TokenId>> docs;
    for (const auto& d : c.docs) {
        std::vector<TokenId> t;
        if (d.transcript) t = *d.transcript;
        t.insert(t.end(), d.comments.begin(), d.comments.end());
        docs.push_back(t);
    }
    std::vector<std::vector<double>> ndk(docs.size(), std::vector<double>(K)), nkw(K, std::vector<double>(V));
    std::vector<double> nk(K);
    std::vector<std::vector<std::size_t>> z(docs.size());
    for (std::size_t d = 0; d < docs.size(); ++d) {
        for (auto w : docs[d]) {
            std::size_t k = static_cast<std::size_t>(uniform_open(rng) * K);
            if (k >= K) k = K - 1;
            z[d].push_back(k);
            ndk[d][k] += 1;
            nkw[k][w] += 1;
            nk[k] += 1;
        }
    }
    std::vector<double> trace;
    for (std::size_t it = 0; it < iters; ++it) {
        for (std::size_t d = 0; d < docs.size(); ++d) {
            for (std::size_t i = 0; i < docs[d].size(); ++i) {
                const auto w = docs[d][i];
                std::size_t k = z[d][i];
                ndk[d][k] -= 1;
                nkw[k][w] -= 1;
                nk[k] -= 1;
                std::vector<double> p(K);
                for (std::size_t j = 0; j < K; ++j) p[j] = (ndk[d][j] + alpha) * (nkw[j][w] + beta) / (nk[j] + V * beta);
                double u = uniform_open(rng) * std::accumulate(p.begin(), p.end(), 0.0);
                for (k = 0; k + 1 < K; ++k) {
                    u -= p[k];
                    if (u <= 0.0) break;
                }
                z[d][i] = k;
                ndk[d][k] += 1;
                nkw[k][w] += 1;
                nk[k] += 1;
            }
        }
        // Direct evaluation of log p(w, z) for a Dirichlet-multinomial model.
        double ll = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            ll += std::lgamma(V * beta) - std::lgamma(nk[k] + V * beta);
            for (std::size_t v = 0; v < V; ++v) ll += std::lgamma(nkw[k][v] + beta) - std::lgamma(beta);
        }
        for (std::size_t d = 0; d < docs.size(); ++d) {
            ll += std::lgamma(K * alpha) - std::lgamma(docs[d].size() + K * alpha);
            for (std::size_t k = 0; k < K; ++k) ll += std::lgamma(ndk[d][k] + alpha) - std::lgamma(alpha);
        }
        trace.push_back(ll);
    }
    nkw_out.assign(K, std::vector<std::uint32_t>(V));
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t v = 0; v < V; ++v) nkw_out[k][v] = static_cast<std::uint32_t>(nkw[k][v]);
    return trace;
}

SeedOntology simple_ontology(Vocabulary& v, const std::vector<std::vector<std::string>>& cats)
{
    SeedOntology o;
    for (std::size_t i = 0; i < cats.size(); ++i) {
        SeedCategory c{"c" + std::to_string(i), {}};
        for (const auto& w : cats[i]) c.seeds.push_back(v.add_seed(w));
        o.categories.push_back(c);
    }
    return o;
}

} // namespace

TEST_CASE("seed init: uniform over category words with smoothing")
{
    Vocabulary v;
    for (int i = 0; i < 10; ++i) v.add_seed("s" + std::to_string(i));
    SeedOntology o;
    o.categories.push_back({"a", {0, 1, 2, 3}});
    auto B = build_seed_init(o, v, 3, 1e-6);
    CHECK(B.rows() == 3);
    double s = 0.0, on = 0.0;
    for (std::size_t u = 0; u < 10; ++u) {
        s += B(0, u);
        if (u < 4) on += B(0, u);
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
    CHECK(on >= 0.99);
    CHECK(B(0, 0) == doctest::Approx(0.25).epsilon(1e-5));
    CHECK(B(0, 9) == doctest::Approx(1e-6).epsilon(1e-3));
    for (std::size_t u = 0; u < 10; ++u) CHECK(B(2, u) == doctest::Approx(0.1).epsilon(1e-15));

    auto exact = build_seed_init(o, v, 1, 0.0);
    CHECK(exact.rows() == 1);
    for (std::size_t u = 0; u < 10; ++u) CHECK(exact(0, u) == (u < 4 ? 0.25 : 0.0));
}

TEST_CASE("seed init is invariant to seed order within a category")
{
    Vocabulary v;
    for (int i = 0; i < 6; ++i) v.add_seed("s" + std::to_string(i));
    SeedOntology a, b;
    a.categories.push_back({"x", {0, 2, 4}});
    b.categories.push_back({"x", {4, 0, 2}});
    CHECK(build_seed_init(a, v, 2) == build_seed_init(b, v, 2));
}

TEST_CASE("single repeated word with one topic")
{
    auto c = corpus_from({std::vector<std::string>(12, "x")}, 4);
    Vocabulary v = c.vocab;
    v.add_seed("x");
    c.vocab = v;
    SeedOntology o;
    GibbsConfig cfg;
    cfg.iterations = 5;
    auto r = seeded_lda_gibbs(c, o, 1, cfg, 1);
    const double beta = cfg.topic_word_prior;
    CHECK(r.B_R(0, 0) >= (12 + beta) / (12 + 5 * beta) - 1e-12);
}

TEST_CASE("seed boost 1 reproduces an independent plain LDA sampler exactly")
{
    Rng rng(2);
    auto c = separable_corpus(rng, 20);
    Vocabulary v = c.vocab;
    auto o = simple_ontology(v, {{"w1", "w2"}});
    c.vocab = v;
    GibbsConfig cfg;
    cfg.iterations = 30;
    cfg.seed_boost = 1.0;
    auto r = seeded_lda_gibbs(c, o, 3, cfg, 77);
    std::vector<std::vector<std::uint32_t>> nkw;
    auto trace = plain_lda_trace(c, 3, 30, cfg.doc_topic_prior, cfg.topic_word_prior, derive_seed(77, 0), nkw);
    REQUIRE(trace.size() == r.loglik_trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i) CHECK(r.loglik_trace[i] == doctest::Approx(trace[i]).epsilon(1e-12));
    CHECK(r.topic_word_counts == nkw);
}

TEST_CASE("separable corpus: each topic's top words lie in one half")
{
    Rng rng(3);
    auto c = separable_corpus(rng);
    Vocabulary v = c.vocab;
    SeedOntology o;
    v.add_seed("w0");
    c.vocab = v;
    GibbsConfig cfg;
    cfg.iterations = 200;
    auto r = seeded_lda_gibbs(c, o, 2, cfg, 5);
    for (std::size_t k = 0; k < 2; ++k) {
        std::vector<std::size_t> idx(c.vocab.V());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return r.B_R(k, a) > r.B_R(k, b); });
        std::set<int> halves;
        for (int i = 0; i < 10; ++i) halves.insert(std::stoi(c.vocab.regular_word(static_cast<TokenId>(idx[i])).substr(1)) / 20);
        CHECK(halves.size() == 1);
    }
}

TEST_CASE("log-likelihood trace rises in 50-iteration moving averages")
{
    Rng rng(4);
    auto c = separable_corpus(rng);
    Vocabulary v = c.vocab;
    v.add_seed("w0");
    c.vocab = v;
    GibbsConfig cfg;
    cfg.iterations = 300;
    auto r = seeded_lda_gibbs(c, SeedOntology{}, 2, cfg, 9);
    std::vector<double> block;
    for (std::size_t s = 0; s + 50 <= r.loglik_trace.size(); s += 50) {
        block.push_back(std::accumulate(r.loglik_trace.begin() + s, r.loglik_trace.begin() + s + 50, 0.0) / 50.0);
    }
    // At equilibrium consecutive window means agree up to sampling noise.
    for (std::size_t i = 1; i < block.size(); ++i) CHECK(block[i] >= block[i - 1] - 1e-3 * std::abs(block[i - 1]));
    CHECK(block.back() > block.front());
}

TEST_CASE("seed boost pulls category seeds into their topic")
{
    Rng rng(5);
    auto c = separable_corpus(rng);
    Vocabulary v = c.vocab;
    auto o = simple_ontology(v, {{"w25", "w26", "w27"}});
    c.vocab = v;
    GibbsConfig cfg;
    cfg.iterations = 100;
    auto r = seeded_lda_gibbs(c, o, 2, cfg, 3);
    const auto w25 = *c.vocab.regular_id("w25");
    CHECK(r.B_R(0, w25) > r.B_R(1, w25));
}

TEST_CASE("gibbs is deterministic and rows are distributions")
{
    Rng rng(6);
    auto c = separable_corpus(rng, 10);
    Vocabulary v = c.vocab;
    v.add_seed("w0");
    c.vocab = v;
    GibbsConfig cfg;
    cfg.iterations = 20;
    cfg.chains = 3;
    auto a = seeded_lda_gibbs(c, SeedOntology{}, 3, cfg, 11);
    cfg.threads = 2;
    auto b = seeded_lda_gibbs(c, SeedOntology{}, 3, cfg, 11);
    CHECK(a.B_R == b.B_R);
    CHECK(a.chain == b.chain);
    for (std::size_t k = 0; k < 3; ++k) {
        double s = 0.0;
        for (std::size_t w = 0; w < c.vocab.V(); ++w) s += a.B_R(k, w);
        CHECK(std::abs(s - 1.0) < 1e-9);
    }
}
