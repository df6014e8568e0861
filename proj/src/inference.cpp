#include "kgntm/inference.hpp"

#include <cmath>
#include <stdexcept>

namespace kgntm {

namespace {

double inverse_softplus(double y)
{
    return y > 30.0 ? y : std::log(std::expm1(y));
}

void fill_bow(const std::vector<TokenId>& words, std::size_t row, Tensor& cnt, Tensor& bow)
{
    for (auto w : words) cnt(row, w) += 1.0;
    if (words.empty()) return;
    const double inv = 1.0 / static_cast<double>(words.size());
    for (auto w : words) bow(row, w) += inv;
}

void copy_features(const std::vector<double>& f, std::size_t want, const char* name, const std::string& id,
                   std::size_t row, Tensor& out)
{
    if (f.size() != want) {
        throw SchemaError("document '" + id + "': feature '" + name + "' has dimension " + std::to_string(f.size()) +
                          ", expected " + std::to_string(want));
    }
    for (std::size_t i = 0; i < want; ++i) out(row, i) = f[i];
}

// Final layer: weights scaled down, bias set to `bias` (broadcast or per-entry).
void set_head(MlpNet& net, double weight_scale, const std::vector<double>& bias)
{
    auto& last = net.layers().back();
    for (auto& w : last.weight.value.values()) w *= weight_scale;
    if (bias.size() == 1) {
        last.bias.value.fill(bias[0]);
    } else {
        if (bias.size() != last.bias.value.size()) throw ShapeError("set_head: bias length mismatch");
        for (std::size_t i = 0; i < bias.size(); ++i) last.bias.value[i] = bias[i];
    }
}

Var positive(const Var& x)
{
    return ad::add_scalar(x, kPositiveFloor);
}

Var constant_row(Tape& tape, const Tensor& t)
{
    return tape.constant(t.reshaped({1, t.size()}));
}

GaussianParams reshaped_gaussian(Tape& tape, const MlpNet& mu, const MlpNet& sigma, const Tensor& input,
                                 std::size_t rows, std::size_t cols, bool track)
{
    Var x = constant_row(tape, input);
    return {ad::reshape(mu.forward(tape, x, track), rows, cols),
            ad::reshape(positive(sigma.forward(tape, x, track)), rows, cols)};
}

Tensor global_phiS_input(const VariationalState& vs)
{
    return concat_cols({&vs.stats.mean_bow_transcript, &vs.stats.mean_bow_comments});
}

GaussianValues values(const GaussianParams& g)
{
    return {g.mu.value(), g.sigma.value()};
}

BetaValues values(const BetaParams& b)
{
    return {b.a.value(), b.b.value()};
}

} // namespace

Tensor BatchEncoding::features() const
{
    return concat_cols({&f_img, &f_mot, &f_aud});
}

BatchEncoding encode_docs(const std::vector<const VideoDoc*>& docs, std::size_t V, const FeatureDims& dims)
{
    const std::size_t B = docs.size();
    BatchEncoding e;
    e.bow_transcript = Tensor::matrix(B, V);
    e.bow_comments = Tensor::matrix(B, V);
    e.cnt_transcript = Tensor::matrix(B, V);
    e.cnt_comments = Tensor::matrix(B, V);
    e.f_img = Tensor::matrix(B, dims.img);
    e.f_mot = Tensor::matrix(B, dims.mot);
    e.f_aud = Tensor::matrix(B, dims.aud);
    e.label = Tensor::matrix(B, 1);
    e.has_transcript = Tensor::matrix(B, 1);
    e.has_label = Tensor::matrix(B, 1);
    for (std::size_t r = 0; r < B; ++r) {
        const VideoDoc& d = *docs[r];
        e.doc_index.push_back(r);
        for (auto w : d.comments) {
            if (w >= V) throw std::out_of_range("document '" + d.id + "' has a token index >= V");
        }
        if (d.has_transcript()) {
            for (auto w : *d.transcript) {
                if (w >= V) throw std::out_of_range("document '" + d.id + "' has a token index >= V");
            }
            fill_bow(*d.transcript, r, e.cnt_transcript, e.bow_transcript);
            e.has_transcript(r, 0) = 1.0;
        }
        fill_bow(d.comments, r, e.cnt_comments, e.bow_comments);
        copy_features(d.f_img, dims.img, "f_img", d.id, r, e.f_img);
        copy_features(d.f_mot, dims.mot, "f_mot", d.id, r, e.f_mot);
        copy_features(d.f_aud, dims.aud, "f_aud", d.id, r, e.f_aud);
        if (d.label) {
            e.label(r, 0) = *d.label;
            e.has_label(r, 0) = 1.0;
        }
    }
    return e;
}

BatchEncoding encode_batch(const Corpus& corpus, std::span<const std::size_t> idx)
{
    std::vector<const VideoDoc*> docs;
    docs.reserve(idx.size());
    for (auto i : idx) docs.push_back(&corpus.docs.at(i));
    auto e = encode_docs(docs, corpus.vocab.V(), corpus.dims);
    e.doc_index.assign(idx.begin(), idx.end());
    return e;
}

CorpusStats corpus_stats(const Corpus& corpus)
{
    const std::size_t V = corpus.vocab.V();
    CorpusStats s;
    s.mean_bow_transcript = Tensor::matrix(1, V);
    s.mean_bow_comments = Tensor::matrix(1, V);
    std::size_t nt = 0, nc = 0;
    for (const auto& d : corpus.docs) {
        if (d.has_transcript()) {
            ++nt;
            const double inv = 1.0 / static_cast<double>(d.transcript->size());
            for (auto w : *d.transcript) s.mean_bow_transcript[w] += inv;
        }
        if (!d.comments.empty()) {
            ++nc;
            const double inv = 1.0 / static_cast<double>(d.comments.size());
            for (auto w : d.comments) s.mean_bow_comments[w] += inv;
        }
    }
    if (nt) for (auto& v : s.mean_bow_transcript.values()) v /= static_cast<double>(nt);
    if (nc) for (auto& v : s.mean_bow_comments.values()) v /= static_cast<double>(nc);
    s.docs = corpus.docs.size();
    return s;
}

// ---------------------------------------------------------------------------

std::vector<MlpNet*> VariationalState::complete_nets()
{
    return {&theta_mean, &theta_std, &pi_t_a,   &pi_t_b,      &pi_a,     &pi_b,       &eta_a,    &eta_b,
            &phiRt_mu,   &phiRt_sigma, &phiR_mu, &phiR_sigma, &phiS_mu, &phiS_sigma};
}

std::vector<const MlpNet*> VariationalState::complete_nets() const
{
    auto nets = const_cast<VariationalState*>(this)->complete_nets();
    return {nets.begin(), nets.end()};
}

std::vector<MlpNet*> VariationalState::incomplete_nets(IncompleteVariant v)
{
    if (v == IncompleteVariant::with_transcript) return {&inc1, &inc2};
    return {&inc3, &inc4};
}

std::vector<MlpNet*> VariationalState::all_nets()
{
    auto nets = complete_nets();
    nets.insert(nets.end(), {&inc1, &inc2, &inc3, &inc4});
    return nets;
}

std::vector<const MlpNet*> VariationalState::all_nets() const
{
    auto nets = const_cast<VariationalState*>(this)->all_nets();
    return {nets.begin(), nets.end()};
}

VariationalState make_variational_state(std::size_t K, std::size_t V, std::size_t U, const FeatureDims& dims,
                                        const CorpusStats& stats, const Tensor& B_R, const Tensor& B_S,
                                        const InferenceShape& shape, Rng& rng, double sigma_init)
{
    if (B_R.rows() != K || B_R.cols() != V) throw ShapeError("B_R must be K x V, got " + B_R.shape_str());
    if (B_S.rows() != K || B_S.cols() != U) throw ShapeError("B_S must be K x U, got " + B_S.shape_str());
    if (!(sigma_init > kPositiveFloor)) throw std::invalid_argument("sigma_init must exceed the positivity floor");
    VariationalState vs;
    vs.K = K;
    vs.V = V;
    vs.U = U;
    vs.dims = dims;
    vs.stats = stats;
    const std::size_t F = dims.img + dims.mot + dims.aud;
    const auto& th = shape.theta_hidden;
    const auto& gh = shape.global_hidden;

    vs.theta_mean = MlpNet::make("NN_mean", vs.theta_input_width(), th, K, Activation::identity, rng);
    vs.theta_std = MlpNet::make("NN_std", vs.theta_input_width(), th, K, Activation::softplus, rng);

    const std::vector<double> beta_bias{inverse_softplus(2.0 - kPositiveFloor)};
    auto beta_head = [&](const char* name, std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
        auto net = MlpNet::make(name, in, hidden, out, Activation::softplus, rng);
        set_head(net, 0.01, beta_bias);
        return net;
    };
    vs.pi_t_a = beta_head("NN_delta_t1", V, gh, K);
    vs.pi_t_b = beta_head("NN_delta_t2", V, gh, K);
    vs.pi_a = beta_head("NN_delta1", V, gh, K);
    vs.pi_b = beta_head("NN_delta2", V, gh, K);
    vs.eta_a = beta_head("NN_tau1", V, shape.eta_hidden, 1);
    vs.eta_b = beta_head("NN_tau2", V, shape.eta_hidden, 1);

    // Row-centered log B: same normalized topics as log B, closer to the prior location.
    auto log_of = [](const Tensor& B) {
        std::vector<double> out(B.size());
        for (std::size_t r = 0; r < B.rows(); ++r) {
            double mean = 0.0;
            for (std::size_t c = 0; c < B.cols(); ++c) mean += (out[r * B.cols() + c] = std::log(std::max(B(r, c), 1e-300)));
            mean /= static_cast<double>(B.cols());
            for (std::size_t c = 0; c < B.cols(); ++c) out[r * B.cols() + c] -= mean;
        }
        return out;
    };
    const std::vector<double> sigma_bias{inverse_softplus(sigma_init - kPositiveFloor)};
    auto loc_head = [&](const char* name, std::size_t in, const Tensor& B) {
        auto net = MlpNet::make(name, in, gh, B.size(), Activation::identity, rng);
        set_head(net, 0.01, log_of(B));
        return net;
    };
    auto scale_head = [&](const char* name, std::size_t in, std::size_t out) {
        auto net = MlpNet::make(name, in, gh, out, Activation::softplus, rng);
        set_head(net, 0.01, sigma_bias);
        return net;
    };
    vs.phiRt_mu = loc_head("NN_mu_t", V, B_R);
    vs.phiRt_sigma = scale_head("NN_sigma_t", V, K * V);
    vs.phiR_mu = loc_head("NN_mu", V, B_R);
    vs.phiR_sigma = scale_head("NN_sigma", V, K * V);
    vs.phiS_mu = loc_head("NN_s1", 2 * V, B_S);
    vs.phiS_sigma = scale_head("NN_s2", 2 * V, K * U);

    vs.inc1 = MlpNet::make("NN_inc1", V + F, th, K, Activation::identity, rng);
    vs.inc2 = MlpNet::make("NN_inc2", V + F, th, K, Activation::softplus, rng);
    vs.inc3 = MlpNet::make("NN_inc3", std::max<std::size_t>(F, 1), th, K, Activation::identity, rng);
    vs.inc4 = MlpNet::make("NN_inc4", std::max<std::size_t>(F, 1), th, K, Activation::softplus, rng);
    init_incomplete_from_complete(vs, rng);
    return vs;
}

void init_incomplete_from_complete(VariationalState& vs, Rng& rng)
{
    auto copy = [&](MlpNet& dst, const MlpNet& src) {
        auto& dl = dst.layers();
        const auto& sl = src.layers();
        for (std::size_t l = 0; l < dl.size() && l < sl.size(); ++l) {
            if (dl[l].weight.value.same_shape(sl[l].weight.value) && dl[l].activation == sl[l].activation) {
                dl[l].weight.value = sl[l].weight.value;
                dl[l].bias.value = sl[l].bias.value;
            } else if (l == 0) {
                // Fresh input projection.
                const double limit = std::sqrt(6.0 / static_cast<double>(dl[0].weight.value.rows()));
                std::uniform_real_distribution<double> u(-limit, limit);
                for (auto& w : dl[0].weight.value.values()) w = u(rng);
                dl[0].bias.value.fill(0.0);
            }
        }
    };
    copy(vs.inc1, vs.theta_mean);
    copy(vs.inc2, vs.theta_std);
    copy(vs.inc3, vs.theta_mean);
    copy(vs.inc4, vs.theta_std);
}

// ---------------------------------------------------------------------------

GaussianParams theta_complete(Tape& tape, const VariationalState& vs, const BatchEncoding& b, bool track)
{
    for (std::size_t r = 0; r < b.size(); ++r) {
        if (b.has_label(r, 0) == 0.0) {
            throw std::logic_error("complete inference network requires a label for every document");
        }
    }
    const Tensor x = concat_cols({&b.bow_transcript, &b.bow_comments, &b.f_img, &b.f_mot, &b.f_aud, &b.label});
    Var xv = tape.constant(x);
    return {vs.theta_mean.forward(tape, xv, track), positive(vs.theta_std.forward(tape, xv, track))};
}

GaussianParams theta_incomplete(Tape& tape, const VariationalState& vs, const BatchEncoding& b,
                                IncompleteVariant variant, bool track)
{
    const bool want = variant == IncompleteVariant::with_transcript;
    for (std::size_t r = 0; r < b.size(); ++r) {
        if ((b.has_transcript(r, 0) != 0.0) != want) {
            throw std::invalid_argument(want ? "incomplete variant 1/2 requires a transcript"
                                             : "incomplete variant 3/4 is for transcript-free documents");
        }
    }
    Tensor x;
    if (want) {
        x = concat_cols({&b.bow_transcript, &b.f_img, &b.f_mot, &b.f_aud});
    } else if (b.f_img.cols() + b.f_mot.cols() + b.f_aud.cols() == 0) {
        x = Tensor::matrix(b.size(), 1);
    } else {
        x = b.features();
    }
    Var xv = tape.constant(x);
    const MlpNet& mean = want ? vs.inc1 : vs.inc3;
    const MlpNet& sd = want ? vs.inc2 : vs.inc4;
    return {mean.forward(tape, xv, track), positive(sd.forward(tape, xv, track))};
}

BetaParams pi_posterior(Tape& tape, const VariationalState& vs, bool track)
{
    Var x = tape.constant(vs.stats.mean_bow_comments);
    return {positive(vs.pi_a.forward(tape, x, track)), positive(vs.pi_b.forward(tape, x, track))};
}

BetaParams pi_t_posterior(Tape& tape, const VariationalState& vs, bool track)
{
    Var x = tape.constant(vs.stats.mean_bow_transcript);
    return {positive(vs.pi_t_a.forward(tape, x, track)), positive(vs.pi_t_b.forward(tape, x, track))};
}

BetaParams eta_posterior(Tape& tape, const VariationalState& vs, const BatchEncoding& b, bool track)
{
    Var x = tape.constant(b.bow_comments);
    return {positive(vs.eta_a.forward(tape, x, track)), positive(vs.eta_b.forward(tape, x, track))};
}

GaussianParams phiR_posterior(Tape& tape, const VariationalState& vs, bool track)
{
    return reshaped_gaussian(tape, vs.phiR_mu, vs.phiR_sigma, vs.stats.mean_bow_comments, vs.K, vs.V, track);
}

GaussianParams phiRt_posterior(Tape& tape, const VariationalState& vs, bool track)
{
    return reshaped_gaussian(tape, vs.phiRt_mu, vs.phiRt_sigma, vs.stats.mean_bow_transcript, vs.K, vs.V, track);
}

GaussianParams phiS_posterior(Tape& tape, const VariationalState& vs, bool track)
{
    return reshaped_gaussian(tape, vs.phiS_mu, vs.phiS_sigma, global_phiS_input(vs), vs.K, vs.U, track);
}

GaussianValues infer_theta_complete(const VariationalState& vs, const BatchEncoding& batch)
{
    Tape t;
    return values(theta_complete(t, vs, batch, false));
}

GaussianValues infer_theta_incomplete(const VariationalState& vs, const BatchEncoding& batch, IncompleteVariant v)
{
    Tape t;
    return values(theta_incomplete(t, vs, batch, v, false));
}

BetaValues infer_pi(const VariationalState& vs)
{
    Tape t;
    return values(pi_posterior(t, vs, false));
}

BetaValues infer_pi_t(const VariationalState& vs)
{
    Tape t;
    return values(pi_t_posterior(t, vs, false));
}

BetaValues infer_eta(const VariationalState& vs, const BatchEncoding& batch)
{
    Tape t;
    return values(eta_posterior(t, vs, batch, false));
}

PhiValues infer_phis(const VariationalState& vs)
{
    Tape t;
    return {values(phiR_posterior(t, vs, false)), values(phiRt_posterior(t, vs, false)),
            values(phiS_posterior(t, vs, false))};
}

Tensor sample_phi(const GaussianValues& g, const Tensor& eps)
{
    if (!g.mu.same_shape(eps)) throw ShapeError("sample_phi: eps " + eps.shape_str() + " vs mu " + g.mu.shape_str());
    Tensor out = Tensor::matrix(g.mu.rows(), g.mu.cols());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(g.mu[i] + g.sigma[i] * eps[i]);
    for (std::size_t r = 0; r < out.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < out.cols(); ++c) s += out(r, c);
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) /= s;
    }
    return out;
}

Tensor phi_posterior_mean(const GaussianValues& g)
{
    Tensor out = Tensor::matrix(g.mu.rows(), g.mu.cols());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(g.mu[i] + 0.5 * g.sigma[i] * g.sigma[i]);
    for (std::size_t r = 0; r < out.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < out.cols(); ++c) s += out(r, c);
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) /= s;
    }
    return out;
}

} // namespace kgntm
