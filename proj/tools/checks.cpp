#include "checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "kgntm/elbo.hpp"
#include "kgntm/evalkit.hpp"
#include "kgntm/gradcheck.hpp"
#include "kgntm/oracles.hpp"
#include "kgntm/synthetic.hpp"

namespace kgntm::checks {

using nlohmann::json;

json CheckResult::to_json() const
{
    return {{"name", name}, {"pass", pass}, {"detail", detail}, {"seconds", seconds}};
}

namespace {

CheckResult timed(const std::string& name, const std::function<bool(std::ostringstream&)>& body)
{
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r;
    r.name = name;
    std::ostringstream detail;
    detail << std::setprecision(4);
    try {
        r.pass = body(detail);
    } catch (const std::exception& e) {
        r.pass = false;
        detail << "exception: " << e.what();
    }
    r.detail = detail.str();
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

std::vector<double> uniform_vector(std::size_t n, double lo, double hi, Rng& rng)
{
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

// Document frequency of `w` and co-document frequency of (w, l), counted
// by scanning the raw token lists.
double umass_by_scan(const std::vector<TokenId>& words, const std::vector<std::vector<TokenId>>& docs)
{
    auto contains = [](const std::vector<TokenId>& d, TokenId w) {
        return std::find(d.begin(), d.end(), w) != d.end();
    };
    double total = 0.0;
    for (std::size_t m = 1; m < words.size(); ++m) {
        for (std::size_t l = 0; l < m; ++l) {
            if (words[m] == words[l]) continue;
            double d_l = 0.0, d_ml = 0.0;
            for (const auto& d : docs) {
                if (!contains(d, words[l])) continue;
                d_l += 1.0;
                if (contains(d, words[m])) d_ml += 1.0;
            }
            total += std::log((d_ml + 1.0) / d_l);
        }
    }
    return total;
}

} // namespace

CheckResult marginalization(std::size_t instances, std::uint64_t seed)
{
    return timed("marginalization", [&](std::ostringstream& out) {
        Rng rng(seed);
        double worst = 0.0;
        std::size_t done = 0, words = 0;
        while (done < instances) {
            const std::size_t K = 1 + rng() % 4, V = 2 + rng() % 5, U = 1 + rng() % 4;
            if (U > V) continue;
            auto s = oracle::random_state(K, V, U, rng, false);
            auto theta = oracle::random_simplex(K, rng);
            auto theta_t = oracle::random_simplex(K, rng);
            const double eta = uniform_open(rng);
            for (TokenId w = 0; w < V; ++w) {
                worst = std::max(worst, std::abs(comment_word_prob(w, theta, eta, s) -
                                                 oracle::comment_word_prob(w, theta, eta, s)));
                for (bool tilde : {true, false}) {
                    worst = std::max(worst, std::abs(transcript_word_prob(w, theta_t, s, tilde) -
                                                     oracle::transcript_word_prob(w, theta_t, s, tilde)));
                }
                ++words;
            }
            ++done;
        }
        out << done << " instances, " << words << " words, max abs error " << worst << " (tol 1e-12)";
        return worst <= 1e-12;
    });
}

CheckResult theorem_bound(std::size_t vectors, std::size_t samples, std::uint64_t seed)
{
    return timed("theorem_bound", [&](std::ostringstream& out) {
        const std::vector<double> h2{0.5, 0.5};
        const double exact = oracle::theta_tilde_expectation(h2)[0];
        const double bound2 = kgntm::theorem_bound(h2)[0];
        bool ok = std::abs(exact - 0.375) < 1e-15 && std::abs(bound2 - 1.0 / 3.0) < 1e-15 && bound2 <= exact;

        Rng rng(seed);
        std::size_t violations = 0;
        double worst_margin = -1e300; // max of (bound - mean) / stderr
        for (std::size_t i = 0; i < vectors; ++i) {
            const std::size_t K = 2 + i % 7;
            std::vector<double> h(K);
            for (auto& v : h) v = uniform_open(rng);
            auto est = theorem_oracle(h, samples, rng);
            for (std::size_t k = 0; k < K; ++k) {
                if (!(est.bound[k] <= est.mean[k] + 3.0 * est.stderr_[k])) ++violations;
                if (est.stderr_[k] > 0) worst_margin = std::max(worst_margin, (est.bound[k] - est.mean[k]) / est.stderr_[k]);
            }
        }
        out << "K=2 exact " << exact << " bound " << bound2 << "; " << vectors << " vectors at " << samples
            << " samples, violations " << violations << ", worst (bound-mean)/se " << worst_margin;
        return ok && violations == 0;
    });
}

CheckResult worked_example()
{
    return timed("worked_example", [&](std::ostringstream& out) {
        const std::vector<double> theta{0.2, 0.3, 0.5};
        std::vector<double> h(3);
        for (std::size_t k = 0; k < 3; ++k) h[k] = 0.6 * theta[k];
        auto tt = theta_tilde(h, std::vector<std::uint8_t>{1, 0, 1});
        const std::vector<double> h_want{0.12, 0.18, 0.30}, tt_want{2.0 / 7.0, 0.0, 5.0 / 7.0};
        double err = 0.0;
        for (std::size_t k = 0; k < 3; ++k) {
            err = std::max(err, std::abs(h[k] - h_want[k]));
            err = std::max(err, std::abs(tt[k] - tt_want[k]));
        }
        out << "h = [" << h[0] << ", " << h[1] << ", " << h[2] << "], theta_t = [" << tt[0] << ", " << tt[1] << ", "
            << tt[2] << "], max abs error " << err << " (tol 1e-15)";
        return err <= 1e-15;
    });
}

CheckResult kl_closed_forms(std::size_t per_family, std::size_t samples, std::uint64_t seed)
{
    return timed("kl_closed_forms", [&](std::ostringstream& out) {
        Rng rng(seed);
        std::size_t misses[3] = {0, 0, 0};
        double worst_z[3] = {0, 0, 0};
        auto record = [&](int fam, double closed, const oracle::McEstimate& mc) {
            const double z = std::abs(closed - mc.mean) / mc.stderr_;
            worst_z[fam] = std::max(worst_z[fam], z);
            if (!(std::abs(closed - mc.mean) <= 3.0 * mc.stderr_)) ++misses[fam];
        };
        for (std::size_t i = 0; i < per_family; ++i) {
            const std::size_t K = 2 + i % 4;
            auto mu = uniform_vector(K, -2.0, 2.0, rng), sd = uniform_vector(K, 0.3, 2.0, rng);
            const double pv = uniform_vector(1, 0.3, 5.0, rng)[0];
            record(0, kl_normal_topic(Tensor::row(mu), Tensor::row(sd), pv),
                   oracle::mc_kl_normal(mu, sd, pv, samples, rng));

            auto ab = uniform_vector(4, 0.5, 5.0, rng);
            record(1, kl_beta(ab[0], ab[1], ab[2], ab[3]), oracle::mc_kl_beta(ab[0], ab[1], ab[2], ab[3], samples, rng));

            auto ln = uniform_vector(2, -1.5, 1.5, rng), ls = uniform_vector(2, 0.3, 1.5, rng);
            record(2, kl_lognormal(Tensor::row({ln[0]}), Tensor::row({ls[0]}), Tensor::row({ln[1]}), ls[1]),
                   oracle::mc_kl_lognormal(ln[0], ls[0], ln[1], ls[1], samples, rng));
        }
        const double same = std::abs(kl_normal_topic(Tensor::row({0.0, 0.0}), Tensor::row({1.0, 1.0}), 1.0)) +
                            std::abs(kl_beta(2.5, 0.7, 2.5, 0.7)) +
                            std::abs(kl_lognormal(Tensor::row({0.4}), Tensor::row({0.8}), Tensor::row({0.4}), 0.8));
        out << per_family << " per family at " << samples << " samples; misses beyond 3 se normal/beta/lognormal "
            << misses[0] << "/" << misses[1] << "/" << misses[2] << ", worst z " << worst_z[0] << "/" << worst_z[1]
            << "/" << worst_z[2] << "; identical-pair KL sum " << same;
        return misses[0] + misses[1] + misses[2] == 0 && same == 0.0;
    });
}

CheckResult elbo_gradient(std::uint64_t seed)
{
    return timed("elbo_gradient", [&](std::ostringstream& out) {
        Rng rng(seed);
        PlantedSpec ps;
        ps.K = 3;
        ps.V = 10;
        ps.seeded_topics = 2;
        ps.seeds_per_topic = 2;
        ps.risk_topics = {0};
        ps.feature_dim = 2;
        auto world = make_planted_world(ps, rng);
        SyntheticCorpusSpec cs;
        cs.docs = 6;
        cs.sizes.transcript_words = 8;
        cs.sizes.comment_words = 10;
        cs.sizes.comment_length = 5;
        auto corpus = sample_corpus(world, cs, rng);
        ModelNetShape ms;
        ms.label_hidden = {4};
        ms.feature_hidden = {4};
        auto model = make_model_state(3, corpus.vocab, corpus.dims, ms, rng);
        model.B_R = world.state.B_R;
        model.B_S = world.state.B_S;
        InferenceShape is;
        is.theta_hidden = {5};
        is.global_hidden = {5};
        is.eta_hidden = {5};
        auto vs = make_variational_state(3, 10, model.U, corpus.dims, corpus_stats(corpus), model.B_R, model.B_S, is,
                                         rng);
        HyperParams hp = world.hp;
        hp.K = 3;
        hp.resolve(10, model.U);
        std::vector<std::size_t> idx(corpus.docs.size());
        std::iota(idx.begin(), idx.end(), 0);
        auto batch = encode_batch(corpus, idx);
        auto noise = ElboNoise::draw(batch.size(), 3, 10, model.U, rng);

        std::vector<Parameter*> params;
        for (auto* net : vs.complete_nets())
            for (auto* p : net->parameters()) params.push_back(p);
        for (auto* net : {&model.net_label, &model.net_img, &model.net_mot, &model.net_aud})
            for (auto* p : net->parameters()) params.push_back(p);

        GradCheckOptions go;
        go.step = 1e-5;
        go.roundoff_target = 1e-4;
        auto r = check_gradients([&](Tape& t) { return elbo_graph(t, batch, model, vs, hp, {}, noise).total; }, params,
                                 go);
        out << r.checked << " entries, max rel error " << r.max_rel_error << " at " << r.worst_parameter << "["
            << r.worst_index << "], roundoff floor " << r.floor_used << " (tol 1e-4)";
        return r.max_rel_error < 1e-4 && r.checked > 0;
    });
}

CheckResult coherence_oracle(std::size_t corpora, std::uint64_t seed)
{
    return timed("coherence_oracle", [&](std::ostringstream& out) {
        Rng rng(seed);
        double worst = 0.0;
        for (std::size_t c = 0; c < corpora; ++c) {
            const std::size_t V = 10 + rng() % 15, D = 4 + rng() % 30;
            std::vector<std::vector<TokenId>> docs(D);
            for (auto& d : docs) {
                const std::size_t n = 1 + rng() % 10;
                for (std::size_t i = 0; i < n; ++i) d.push_back(static_cast<TokenId>(rng() % V));
            }
            std::set<TokenId> seen;
            for (const auto& d : docs) seen.insert(d.begin(), d.end());
            std::vector<TokenId> top(seen.begin(), seen.end());
            std::shuffle(top.begin(), top.end(), rng);
            top.resize(std::min<std::size_t>(top.size(), 10));
            std::vector<std::set<TokenId>> sets;
            for (const auto& d : docs) sets.emplace_back(d.begin(), d.end());
            worst = std::max(worst, std::abs(umass_coherence(top, sets) - umass_by_scan(top, docs)));
        }
        out << corpora << " corpora, max abs difference " << worst << " (tol 1e-9)";
        return worst <= 1e-9;
    });
}

std::vector<CheckResult> all_module_oracles()
{
    return {marginalization(), theorem_bound(), worked_example(), kl_closed_forms(), elbo_gradient(),
            coherence_oracle()};
}

std::string format_table(const std::vector<CheckResult>& results)
{
    std::ostringstream out;
    for (const auto& r : results) {
        out << std::left << std::setw(18) << r.name << (r.pass ? "PASS" : "FAIL") << "  " << std::fixed
            << std::setprecision(2) << std::setw(7) << r.seconds << "s  " << r.detail << '\n';
        out.unsetf(std::ios::fixed);
    }
    return out.str();
}

} // namespace kgntm::checks
