#include "doctest.h"

#include <cmath>
#include <numeric>

#include "kgntm/elbo.hpp"
#include "kgntm/gradcheck.hpp"
#include "kgntm/oracles.hpp"
#include "kgntm/synthetic.hpp"
#include "test_support.hpp"

using namespace kgntm;
using kgntm::testing::pin_head;

namespace {

struct Fixture {
    PlantedWorld world;
    Corpus corpus;
    ModelState model;
    VariationalState vs;
    HyperParams hp;
    BatchEncoding batch;
};

Fixture make_fixture(std::size_t K = 3, std::size_t V = 10, std::size_t docs = 6, std::uint64_t seed = 21)
{
    Rng rng(seed);
    PlantedSpec ps;
    ps.K = K;
    ps.V = V;
    ps.seeded_topics = 2;
    ps.seeds_per_topic = 2;
    ps.risk_topics = {0};
    ps.feature_dim = 2;
    Fixture f;
    f.world = make_planted_world(ps, rng);
    SyntheticCorpusSpec cs;
    cs.docs = docs;
    cs.sizes.transcript_words = 8;
    cs.sizes.comment_words = 10;
    cs.sizes.comment_length = 5;
    cs.transcript_free_share = 0.3;
    f.corpus = sample_corpus(f.world, cs, rng);
    ModelNetShape ms;
    ms.label_hidden = {4};
    ms.feature_hidden = {4};
    f.model = make_model_state(K, f.corpus.vocab, f.corpus.dims, ms, rng);
    f.model.B_R = f.world.state.B_R;
    f.model.B_S = f.world.state.B_S;
    InferenceShape is;
    is.theta_hidden = {5};
    is.global_hidden = {5};
    is.eta_hidden = {5};
    f.vs = make_variational_state(K, V, f.model.U, f.corpus.dims, corpus_stats(f.corpus), f.model.B_R, f.model.B_S, is,
                                  rng);
    f.hp = f.world.hp;
    f.hp.K = K;
    f.hp.resolve(V, f.model.U);
    std::vector<std::size_t> idx(f.corpus.docs.size());
    std::iota(idx.begin(), idx.end(), 0);
    f.batch = encode_batch(f.corpus, idx);
    return f;
}

std::vector<Parameter*> all_parameters(Fixture& f)
{
    std::vector<Parameter*> ps;
    for (auto* net : f.vs.complete_nets())
        for (auto* p : net->parameters()) ps.push_back(p);
    for (auto* net : {&f.model.net_label, &f.model.net_img, &f.model.net_mot, &f.model.net_aud})
        for (auto* p : net->parameters()) ps.push_back(p);
    return ps;
}

} // namespace

TEST_CASE("Normal KL worked example and identity")
{
    // K = 2, α = 1: σ0² = 0.5.
    HyperParams hp;
    hp.K = 2;
    hp.alpha = 1.0;
    auto mu = Tensor::row({1.0, 0.0});
    auto sigma = Tensor::row({std::sqrt(0.5), std::sqrt(0.5)});
    CHECK(kl_normal_topic(mu, sigma, hp) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(kl_normal_topic(Tensor::row({0.0, 0.0}), sigma, hp) == doctest::Approx(0.0).epsilon(1e-14));

    Tape t;
    Var v = kl_normal_topic(t.constant(mu), t.constant(sigma), 0.5);
    CHECK(v.value().item() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(kl_normal_topic(mu, Tensor::row({1.0, 0.0}), hp), std::domain_error);
}

TEST_CASE("Normal KL is non-negative on random inputs")
{
    Rng rng(1);
    std::uniform_real_distribution<double> m(-3, 3), s(0.01, 3), pv(0.05, 10);
    for (int i = 0; i < 10000; ++i) {
        auto mu = Tensor::row({m(rng), m(rng), m(rng)});
        auto sg = Tensor::row({s(rng), s(rng), s(rng)});
        CHECK(kl_normal_topic(mu, sg, pv(rng)) >= -1e-12);
    }
}

TEST_CASE("Beta KL: identity, symmetry and a hand-evaluated value")
{
    CHECK(kl_beta(1, 1, 1, 1) == 0.0);
    CHECK(kl_beta(2.5, 0.7, 2.5, 0.7) == doctest::Approx(0.0).epsilon(1e-14));
    // KL(Beta(2,2) || Beta(1,1)) = ln 6 + 2(ψ(2) − ψ(4)) = ln 6 − 5/3.
    CHECK(kl_beta(2, 2, 1, 1) == doctest::Approx(std::log(6.0) - 5.0 / 3.0).epsilon(1e-13));
    Rng rng(2);
    std::uniform_real_distribution<double> u(0.1, 8);
    for (int i = 0; i < 100; ++i) {
        const double a = u(rng), b = u(rng);
        CHECK(kl_beta(a, b, 1, 1) == doctest::Approx(kl_beta(b, a, 1, 1)).epsilon(1e-12));
        CHECK(kl_beta(a, b, u(rng), u(rng)) >= -1e-12);
    }
    CHECK_THROWS_AS(kl_beta(0, 1, 1, 1), std::domain_error);
    CHECK_THROWS_AS(kl_beta(1, 1, 1, -1), std::domain_error);
}

TEST_CASE("LogNormal KL: identity and the unit-offset example")
{
    const double g = 0.9;
    auto B = Tensor::row({0.3});
    CHECK(kl_lognormal(B, Tensor::row({g}), B, g) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(kl_lognormal(Tensor::row({0.3 + g}), Tensor::row({g}), B, g) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK_THROWS_AS(kl_lognormal(B, Tensor::row({0.0}), B, g), std::domain_error);
    CHECK_THROWS_AS(kl_lognormal(B, Tensor::row({1.0}), B, 0.0), std::domain_error);
}

TEST_CASE("closed-form KLs agree with Monte Carlo estimates")
{
    Rng rng(3);
    std::uniform_real_distribution<double> m(-1.5, 1.5), s(0.3, 1.5), bp(0.5, 5);
    for (int i = 0; i < 5; ++i) {
        std::vector<double> mu{m(rng), m(rng)}, sg{s(rng), s(rng)};
        const double pv = s(rng);
        const double cf = kl_normal_topic(Tensor::row(mu), Tensor::row(sg), pv);
        auto mc = oracle::mc_kl_normal(mu, sg, pv, 200000, rng);
        CHECK(std::abs(cf - mc.mean) <= 4.0 * mc.stderr_);

        const double a = bp(rng), b = bp(rng), a0 = bp(rng), b0 = bp(rng);
        auto mb = oracle::mc_kl_beta(a, b, a0, b0, 200000, rng);
        CHECK(std::abs(kl_beta(a, b, a0, b0) - mb.mean) <= 4.0 * mb.stderr_);

        const double lm = m(rng), ls = s(rng), l0 = m(rng), s0 = s(rng);
        auto ml = oracle::mc_kl_lognormal(lm, ls, l0, s0, 200000, rng);
        CHECK(std::abs(kl_lognormal(Tensor::row({lm}), Tensor::row({ls}), Tensor::row({l0}), s0) - ml.mean) <=
              4.0 * ml.stderr_);
    }
    // KL(Beta(2,2) || Beta(1,1)) within 1%.
    auto mb = oracle::mc_kl_beta(2, 2, 1, 1, 1000000, rng);
    CHECK(mb.mean == doctest::Approx(kl_beta(2, 2, 1, 1)).epsilon(0.01));
}

TEST_CASE("taped KL gradients match finite differences")
{
    Rng rng(4);
    Parameter a{"a", Tensor::row({0.7, 2.3, 5.0})}, b{"b", Tensor::row({1.9, 0.4, 3.0})};
    auto r = check_gradients([&](Tape& t) { return kl_beta(t.parameter(a), t.parameter(b), 1.3, 0.8); }, {&a, &b});
    CHECK(r.max_rel_error < 1e-7);

    Parameter mu{"mu", Tensor::row({0.2, -1.0})}, sg{"sg", Tensor::row({0.5, 1.7})};
    auto loc = Tensor::row({0.01, 0.3});
    r = check_gradients([&](Tape& t) { return kl_lognormal(t.parameter(mu), t.parameter(sg), loc, 0.9); }, {&mu, &sg});
    CHECK(r.max_rel_error < 1e-7);
    r = check_gradients([&](Tape& t) { return kl_normal_topic(t.parameter(mu), t.parameter(sg), 0.7); }, {&mu, &sg});
    CHECK(r.max_rel_error < 1e-7);

    Parameter mq{"mq", Tensor::row({0.5, 0.1})}, sq{"sq", Tensor::row({1.1, 0.6})};
    r = check_gradients(
        [&](Tape& t) { return kl_gaussian_diag(t.parameter(mu), t.parameter(sg), t.parameter(mq), t.parameter(sq)); },
        {&mu, &sg, &mq, &sq});
    CHECK(r.max_rel_error < 1e-7);
    CHECK(kl_gaussian_diag(mu.value, sg.value, mu.value, sg.value) == doctest::Approx(0.0).epsilon(1e-15));
    // Against a N(0, v) prior it reduces to the topic KL.
    auto zeros = Tensor::row({0.0, 0.0}), sv = Tensor::row({std::sqrt(0.7), std::sqrt(0.7)});
    CHECK(kl_gaussian_diag(mu.value, sg.value, zeros, sv) ==
          doctest::Approx(kl_normal_topic(mu.value, sg.value, 0.7)).epsilon(1e-13));
}

TEST_CASE("ELBO breakdown is internally consistent")
{
    auto f = make_fixture();
    Rng rng(5);
    for (int i = 0; i < 3; ++i) {
        auto b = elbo_total(f.batch, f.model, f.vs, f.hp, {}, rng);
        CHECK(b.total == doctest::Approx(b.recon_sum() - b.kl_sum()).epsilon(1e-12));
        for (double kl : {b.kl_theta, b.kl_pi_t, b.kl_pi, b.kl_eta, b.kl_phiS, b.kl_phiR, b.kl_phiR_t})
            CHECK(kl >= -1e-9);
        CHECK(b.recon_comment < 0.0);
        CHECK(b.recon_transcript < 0.0);
        CHECK(std::isfinite(b.total));
        auto j = b.to_json();
        CHECK(j.size() == 14);
        CHECK(ElboBreakdown::from_json(j).total == b.total);
    }
}

TEST_CASE("ELBO is deterministic given the noise and invariant to word order")
{
    auto f = make_fixture();
    Rng rng(6);
    auto noise = ElboNoise::draw(f.batch.size(), 3, 10, f.model.U, rng);
    Tape t1, t2;
    auto a = elbo_graph(t1, f.batch, f.model, f.vs, f.hp, {}, noise).breakdown;
    for (auto& d : f.corpus.docs) {
        std::reverse(d.comments.begin(), d.comments.end());
        if (d.transcript) std::reverse(d.transcript->begin(), d.transcript->end());
    }
    std::vector<std::size_t> idx(f.corpus.docs.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto shuffled = encode_batch(f.corpus, idx);
    auto b = elbo_graph(t2, shuffled, f.model, f.vs, f.hp, {}, noise).breakdown;
    CHECK(a.total == doctest::Approx(b.total).epsilon(1e-13));
}

TEST_CASE("variational distributions pinned to their priors give zero KL")
{
    auto f = make_fixture();
    const double sd0 = std::sqrt(f.hp.prior_variance());
    pin_head(f.vs.theta_mean, 0.0, false);
    pin_head(f.vs.theta_std, sd0, true);
    for (auto* n : {&f.vs.pi_a, &f.vs.pi_b, &f.vs.pi_t_a, &f.vs.pi_t_b, &f.vs.eta_a, &f.vs.eta_b}) pin_head(*n, 1.0, true);
    auto pin_loc = [](MlpNet& net, const Tensor& B) {
        auto& last = net.layers().back();
        last.weight.value.fill(0.0);
        for (std::size_t i = 0; i < B.size(); ++i) last.bias.value[i] = B[i];
    };
    pin_loc(f.vs.phiR_mu, f.model.B_R);
    pin_loc(f.vs.phiRt_mu, f.model.B_R);
    pin_loc(f.vs.phiS_mu, f.model.B_S);
    pin_head(f.vs.phiR_sigma, f.hp.gamma1, true);
    pin_head(f.vs.phiRt_sigma, f.hp.gamma2, true);
    pin_head(f.vs.phiS_sigma, f.hp.gamma3, true);
    for (auto* n : {&f.model.net_label, &f.model.net_img, &f.model.net_mot, &f.model.net_aud}) n->zero_output_layer();

    Rng rng(7);
    auto b = elbo_total(f.batch, f.model, f.vs, f.hp, {}, rng);
    for (double kl : {b.kl_theta, b.kl_pi_t, b.kl_pi, b.kl_eta, b.kl_phiS, b.kl_phiR, b.kl_phiR_t})
        CHECK(std::abs(kl) < 1e-9);
    CHECK(b.total == doctest::Approx(b.recon_sum()).epsilon(1e-12));
    // Zeroed label head: p = 0.5 for every document.
    CHECK(b.recon_label == doctest::Approx(-std::log(2.0) * static_cast<double>(f.batch.size())).epsilon(1e-12));
}

TEST_CASE("label term follows the cross-entropy identities")
{
    auto f = make_fixture();
    auto theta = Tensor::matrix(f.batch.size(), 3, 1.0 / 3.0);
    auto eta = Tensor::matrix(f.batch.size(), 1, 0.5);
    f.model.net_label.zero_output_layer();
    auto b = recon_lower_bound(f.batch, theta, eta, f.model, f.hp, {});
    CHECK(b.recon_label == doctest::Approx(-std::log(2.0) * static_cast<double>(f.batch.size())).epsilon(1e-12));
    // A confident head on a positive label: logit ln((1-1e-12)/1e-12).
    for (auto& d : f.corpus.docs) d.label = 1;
    std::vector<std::size_t> idx(f.corpus.docs.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto pos = encode_batch(f.corpus, idx);
    f.model.net_label.layers().back().bias.value.fill(std::log((1 - 1e-12) / 1e-12));
    b = recon_lower_bound(pos, theta, eta, f.model, f.hp, {});
    CHECK(std::abs(b.recon_label) < 1e-10 * static_cast<double>(pos.size()));
}

TEST_CASE("modality terms are zero at perfect reconstruction and linear in xi")
{
    auto f = make_fixture();
    auto theta = Tensor::matrix(f.batch.size(), 3, 1.0 / 3.0);
    auto eta = Tensor::matrix(f.batch.size(), 1, 0.5);
    auto pred = f.model.net_img.forward(theta);
    f.batch.f_img = pred;
    auto b = recon_lower_bound(f.batch, theta, eta, f.model, f.hp, {});
    CHECK(b.recon_img == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(b.recon_mot < 0.0);
    auto hp2 = f.hp;
    hp2.xi_mot *= 2.0;
    auto b2 = recon_lower_bound(f.batch, theta, eta, f.model, hp2, {});
    CHECK(b2.recon_mot == doctest::Approx(2.0 * b.recon_mot).epsilon(1e-14));
}

TEST_CASE("reconstruction terms match the generative closed forms")
{
    auto f = make_fixture();
    auto& st = f.world.state;
    Rng rng(8);
    const std::size_t B = f.batch.size();
    auto theta = Tensor::matrix(B, 3);
    auto eta = Tensor::matrix(B, 1);
    std::uniform_real_distribution<double> u(0.1, 0.9);
    for (std::size_t d = 0; d < B; ++d) {
        double s = 0;
        for (std::size_t k = 0; k < 3; ++k) s += (theta(d, k) = u(rng));
        for (std::size_t k = 0; k < 3; ++k) theta(d, k) /= s;
        eta(d, 0) = u(rng);
    }
    auto b = recon_lower_bound(f.batch, theta, eta, st, f.hp, {});
    double comment = 0.0, transcript = 0.0, marginal = 0.0;
    for (std::size_t d = 0; d < B; ++d) {
        const auto& doc = f.corpus.docs[d];
        auto th = theta.row_vector(d);
        for (auto w : doc.comments) comment += comment_word_logprob(w, th, eta(d, 0), st);
        if (doc.transcript) {
            for (auto w : *doc.transcript) {
                transcript += transcript_word_logprob_lb(w, th, st, f.hp);
                marginal += std::log(oracle::transcript_marginal(w, th, st, f.hp));
            }
        }
    }
    CHECK(b.recon_comment == doctest::Approx(comment).epsilon(1e-12));
    CHECK(b.recon_transcript == doctest::Approx(transcript).epsilon(1e-12));
    // Lower-bound property against the exact per-mask marginal.
    CHECK(b.recon_transcript <= marginal + 1e-12);
}

TEST_CASE("transcript-free documents contribute no transcript term")
{
    auto f = make_fixture();
    for (auto& d : f.corpus.docs) d.transcript.reset();
    std::vector<std::size_t> idx(f.corpus.docs.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto batch = encode_batch(f.corpus, idx);
    Rng rng(9);
    auto b = elbo_total(batch, f.model, f.vs, f.hp, {}, rng);
    CHECK(b.recon_transcript == 0.0);
}

TEST_CASE("ablation switches remove their terms")
{
    auto f = make_fixture();
    Rng rng(10);
    auto noise = ElboNoise::draw(f.batch.size(), 3, 10, f.model.U, rng);
    auto eval = [&](ElboOptions o) {
        Tape t;
        return elbo_graph(t, f.batch, f.model, f.vs, f.hp, o, noise).breakdown;
    };
    auto full = eval({});
    ElboOptions o;
    o.multi_origin = false;
    auto mo = eval(o);
    CHECK(mo.kl_eta == 0.0);
    CHECK(mo.total != full.total);
    o = {};
    o.two_sets = false;
    auto ts = eval(o);
    CHECK(ts.kl_phiR == 0.0);
    CHECK(ts.kl_phiR_t == 0.0);
    CHECK(ts.kl_pi == 0.0);
    CHECK(ts.kl_pi_t == 0.0);
    CHECK(ts.kl_phiS == full.kl_phiS);
    o = {};
    o.auto_supervision = false;
    auto as = eval(o);
    CHECK(as.kl_pi == 0.0);
    CHECK(as.kl_pi_t == 0.0);
    CHECK(as.kl_phiR == full.kl_phiR);
    o = {};
    o.tilde_variant = false;
    auto tv = eval(o);
    CHECK(tv.recon_comment == full.recon_comment);
    CHECK(tv.recon_transcript != full.recon_transcript);
}

TEST_CASE("global KL terms scale with the batch share of the corpus")
{
    auto f = make_fixture();
    Rng rng(11);
    auto noise = ElboNoise::draw(f.batch.size(), 3, 10, f.model.U, rng);
    Tape t1, t2;
    auto a = elbo_graph(t1, f.batch, f.model, f.vs, f.hp, {}, noise).breakdown;
    ElboOptions o;
    o.corpus_size = 4 * f.batch.size();
    auto b = elbo_graph(t2, f.batch, f.model, f.vs, f.hp, o, noise).breakdown;
    CHECK(b.kl_phiR == doctest::Approx(a.kl_phiR / 4).epsilon(1e-13));
    CHECK(b.kl_pi == doctest::Approx(a.kl_pi / 4).epsilon(1e-13));
    CHECK(b.kl_theta == a.kl_theta);
    CHECK(b.kl_eta == a.kl_eta);
}

TEST_CASE("full ELBO gradient matches finite differences")
{
    auto f = make_fixture();
    Rng rng(12);
    auto noise = ElboNoise::draw(f.batch.size(), 3, 10, f.model.U, rng);
    auto params = all_parameters(f);
    auto loss = [&](Tape& t) { return elbo_graph(t, f.batch, f.model, f.vs, f.hp, {}, noise).total; };
    GradCheckOptions go;
    go.max_entries_per_param = 12;
    go.roundoff_target = 1e-4;
    auto r = check_gradients(loss, params, go);
    INFO("worst: " << r.worst_parameter << "[" << r.worst_index << "] rel " << r.max_rel_error << " abs "
                   << r.max_abs_error << " floor " << r.floor_used);
    CHECK(r.floor_used < 1e-2);
    CHECK(r.checked > 300);
    CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("tracking flags select which networks receive gradients")
{
    auto f = make_fixture();
    Rng rng(13);
    auto noise = ElboNoise::draw(f.batch.size(), 3, 10, f.model.U, rng);
    ElboOptions o;
    o.track_model = false;
    Tape t;
    auto g = t.backward(elbo_graph(t, f.batch, f.model, f.vs, f.hp, o, noise).total);
    CHECK_FALSE(g.has(f.model.net_label.layers()[0].weight));
    CHECK(g.has(f.vs.theta_mean.layers()[0].weight));
    o = {};
    o.track_inference = false;
    Tape t2;
    g = t2.backward(elbo_graph(t2, f.batch, f.model, f.vs, f.hp, o, noise).total);
    CHECK(g.has(f.model.net_label.layers()[0].weight));
    CHECK_FALSE(g.has(f.vs.theta_mean.layers()[0].weight));
}
