#include "kgntm/elbo.hpp"

#include <cmath>
#include <stdexcept>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "kgntm/sampling.hpp"

namespace kgntm {

using nlohmann::json;

namespace {

#define KGNTM_ELBO_FIELDS(X)                                                                                           \
    X(recon_transcript) X(recon_comment) X(recon_label) X(recon_img) X(recon_mot) X(recon_aud) X(kl_theta) X(kl_pi_t) \
        X(kl_pi) X(kl_eta) X(kl_phiS) X(kl_phiR) X(kl_phiR_t) X(total)

void require_positive(const Tensor& t, const char* what)
{
    for (double v : t.values()) {
        if (!(v > 0.0)) throw std::domain_error(std::string(what) + " must be > 0");
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what)
{
    if (!a.same_shape(b)) throw ShapeError(std::string(what) + ": " + a.shape_str() + " vs " + b.shape_str());
}

double log_beta_fn(double a, double b)
{
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

} // namespace

// ---------------------------------------------------------------------------

double ElboBreakdown::recon_sum() const
{
    return recon_transcript + recon_comment + recon_label + recon_img + recon_mot + recon_aud;
}

double ElboBreakdown::kl_sum() const
{
    return kl_theta + kl_pi_t + kl_pi + kl_eta + kl_phiS + kl_phiR + kl_phiR_t;
}

json ElboBreakdown::to_json() const
{
    json j;
#define X(f) j[#f] = f;
    KGNTM_ELBO_FIELDS(X)
#undef X
    return j;
}

ElboBreakdown ElboBreakdown::from_json(const json& j)
{
    ElboBreakdown b;
#define X(f) b.f = j.at(#f).get<double>();
    KGNTM_ELBO_FIELDS(X)
#undef X
    return b;
}

ElboBreakdown& ElboBreakdown::operator+=(const ElboBreakdown& o)
{
#define X(f) f += o.f;
    KGNTM_ELBO_FIELDS(X)
#undef X
    return *this;
}

ElboBreakdown ElboBreakdown::scaled(double s) const
{
    ElboBreakdown b = *this;
#define X(f) b.f *= s;
    KGNTM_ELBO_FIELDS(X)
#undef X
    return b;
}

ElboNoise ElboNoise::draw(std::size_t batch, std::size_t K, std::size_t V, std::size_t U, Rng& rng)
{
    ElboNoise n;
    n.eps_theta = standard_normal_tensor({batch, K}, rng);
    n.u_eta = uniform_open_tensor({batch, 1}, rng);
    n.u_pi = uniform_open_tensor({1, K}, rng);
    n.u_pi_t = uniform_open_tensor({1, K}, rng);
    n.eps_phiR = standard_normal_tensor({K, V}, rng);
    n.eps_phiRt = standard_normal_tensor({K, V}, rng);
    n.eps_phiS = standard_normal_tensor({K, U}, rng);
    return n;
}

// ---------------------------------------------------------------------------

double kl_normal_topic(const Tensor& mu, const Tensor& sigma, double prior_var)
{
    require_same_shape(mu, sigma, "kl_normal_topic");
    require_positive(sigma, "kl_normal_topic: sigma");
    if (!(prior_var > 0.0)) throw std::domain_error("kl_normal_topic: prior variance must be > 0");
    double kl = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double r = sigma[i] * sigma[i] / prior_var;
        kl += 0.5 * (r + mu[i] * mu[i] / prior_var - 1.0 - std::log(r));
    }
    return kl;
}

double kl_normal_topic(const Tensor& mu, const Tensor& sigma, const HyperParams& hp)
{
    return kl_normal_topic(mu, sigma, hp.prior_variance());
}

double kl_beta(double a, double b, double a0, double b0)
{
    if (!(a > 0.0 && b > 0.0 && a0 > 0.0 && b0 > 0.0)) throw std::domain_error("kl_beta: parameters must be > 0");
    using boost::math::digamma;
    const double psi_ab = digamma(a + b);
    return log_beta_fn(a0, b0) - log_beta_fn(a, b) + (a - a0) * (digamma(a) - psi_ab) +
           (b - b0) * (digamma(b) - psi_ab);
}

double kl_lognormal(const Tensor& mu, const Tensor& sigma, const Tensor& loc0, double scale0)
{
    require_same_shape(mu, sigma, "kl_lognormal");
    require_same_shape(mu, loc0, "kl_lognormal");
    require_positive(sigma, "kl_lognormal: scale");
    if (!(scale0 > 0.0)) throw std::domain_error("kl_lognormal: prior scale must be > 0");
    const double g2 = scale0 * scale0;
    double kl = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double d = mu[i] - loc0[i];
        kl += std::log(scale0 / sigma[i]) + (sigma[i] * sigma[i] + d * d) / (2.0 * g2) - 0.5;
    }
    return kl;
}

double kl_gaussian_diag(const Tensor& mu_p, const Tensor& sigma_p, const Tensor& mu_q, const Tensor& sigma_q)
{
    require_same_shape(mu_p, sigma_p, "kl_gaussian_diag");
    require_same_shape(mu_p, mu_q, "kl_gaussian_diag");
    require_same_shape(mu_p, sigma_q, "kl_gaussian_diag");
    require_positive(sigma_p, "kl_gaussian_diag: sigma");
    require_positive(sigma_q, "kl_gaussian_diag: sigma");
    double kl = 0.0;
    for (std::size_t i = 0; i < mu_p.size(); ++i) {
        const double r = sigma_p[i] * sigma_p[i] / (sigma_q[i] * sigma_q[i]);
        const double d = mu_p[i] - mu_q[i];
        kl += 0.5 * (r + d * d / (sigma_q[i] * sigma_q[i]) - 1.0 - std::log(r));
    }
    return kl;
}

Var kl_normal_topic(const Var& mu, const Var& sigma, double prior_var)
{
    require_positive(sigma.value(), "kl_normal_topic: sigma");
    if (!(prior_var > 0.0)) throw std::domain_error("kl_normal_topic: prior variance must be > 0");
    const double inv = 1.0 / prior_var;
    const std::size_t n = mu.value().size();
    // ½ Σ (σ² + μ²)/σ0² − Σ log σ + n(log σ0 − ½)
    Var quad = ad::scale(ad::sum(ad::add(ad::square(sigma), ad::square(mu))), 0.5 * inv);
    Var logs = ad::sum(ad::log(sigma));
    const double c = static_cast<double>(n) * (0.5 * std::log(prior_var) - 0.5);
    return ad::add_scalar(ad::sub(quad, logs), c);
}

Var kl_beta(const Var& a, const Var& b, double a0, double b0)
{
    require_same_shape(a.value(), b.value(), "kl_beta");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    double kl = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) kl += kl_beta(av[i], bv[i], a0, b0);
    return a.tape().record(Tensor::scalar(kl), {a, b}, [a, b, a0, b0](Tape& t, const Tensor& g) {
        using boost::math::trigamma;
        const Tensor& av = a.value();
        const Tensor& bv = b.value();
        const double go = g.item();
        auto ga = Tensor::matrix(av.rows(), av.cols());
        auto gb = Tensor::matrix(bv.rows(), bv.cols());
        for (std::size_t i = 0; i < av.size(); ++i) {
            const double ta = trigamma(av[i]), tb = trigamma(bv[i]), tab = trigamma(av[i] + bv[i]);
            ga[i] = go * ((av[i] - a0) * (ta - tab) - (bv[i] - b0) * tab);
            gb[i] = go * ((bv[i] - b0) * (tb - tab) - (av[i] - a0) * tab);
        }
        if (a.requires_grad()) t.accumulate(a, ga.reshaped(av.shape()));
        if (b.requires_grad()) t.accumulate(b, gb.reshaped(bv.shape()));
    });
}

Var kl_lognormal(const Var& mu, const Var& sigma, const Tensor& loc0, double scale0)
{
    require_same_shape(mu.value(), loc0, "kl_lognormal");
    require_positive(sigma.value(), "kl_lognormal: scale");
    if (!(scale0 > 0.0)) throw std::domain_error("kl_lognormal: prior scale must be > 0");
    Tape& tape = mu.tape();
    const std::size_t n = loc0.size();
    Var d = ad::sub(mu, tape.constant(loc0));
    Var quad = ad::scale(ad::sum(ad::add(ad::square(sigma), ad::square(d))), 0.5 / (scale0 * scale0));
    Var logs = ad::sum(ad::log(sigma));
    return ad::add_scalar(ad::sub(quad, logs), static_cast<double>(n) * (std::log(scale0) - 0.5));
}

Var kl_gaussian_diag(const Var& mu_p, const Var& sigma_p, const Var& mu_q, const Var& sigma_q)
{
    require_positive(sigma_p.value(), "kl_gaussian_diag: sigma");
    require_positive(sigma_q.value(), "kl_gaussian_diag: sigma");
    const std::size_t n = mu_p.value().size();
    Var vq = ad::square(sigma_q);
    Var ratio = ad::div(ad::add(ad::square(sigma_p), ad::square(ad::sub(mu_p, mu_q))), vq);
    Var logs = ad::sub(ad::log(sigma_q), ad::log(sigma_p));
    Var s = ad::add(ad::scale(ad::sum(ratio), 0.5), ad::sum(logs));
    return ad::add_scalar(s, -0.5 * static_cast<double>(n));
}

// ---------------------------------------------------------------------------

namespace {

struct ReconVars {
    Var transcript, comment, label, img, mot, aud;
};

Var zero(Tape& tape)
{
    return tape.constant(Tensor::scalar(0.0));
}

// π_k φ^R_k + (1 − π_k) φ^S_k E, K x V. `pi` is 1 x K.
Var topic_columns(const Var& pi, const Var& phiR, const Var& seedV, std::size_t K)
{
    Var pc = ad::reshape(pi, K, 1);
    return ad::add(ad::mul(pc, phiR), ad::mul(ad::one_minus(pc), seedV));
}

// b'(θ) with h = βθ: h_k² / (h_k + Σh² − h_k²).
Var b_prime_var(const Var& theta, double beta_ratio)
{
    Var h = ad::scale(theta, beta_ratio);
    Var h2 = ad::square(h);
    Var denom = ad::add(ad::sub(h, h2), ad::sum_rows(h2));
    return ad::div(h2, denom);
}

Var modality_term(Tape& tape, const MlpNet& net, const Var& theta, const Tensor& f, double xi, bool track)
{
    if (f.cols() == 0 || net.output_width() == 0) return zero(tape);
    Var pred = net.forward(tape, theta, track);
    return ad::scale(ad::sum(ad::row_norm(ad::sub(tape.constant(f), pred))), -xi);
}

ReconVars recon_vars(Tape& tape, const BatchEncoding& batch, const ModelState& state, const HyperParams& hp,
                     const ElboOptions& opts, const Var& theta, const Var& eta, const Var& Cc, const Var& Ct)
{
    const std::size_t K = state.K;
    ReconVars r;

    Var P, Pt;
    if (opts.multi_origin) {
        Var assoc_cols = ad::matmul(tape.constant(Tensor::matrix(1, K, 1.0 / static_cast<double>(K))), Cc);
        P = ad::add(ad::mul(eta, ad::matmul(theta, Cc)), ad::mul(ad::one_minus(eta), assoc_cols));
        Pt = ad::matmul(b_prime_var(theta, hp.beta_ratio), Ct);
    } else {
        P = ad::matmul(theta, Cc);
        Pt = ad::matmul(theta, Ct);
    }
    r.comment = ad::weighted_log_sum(P, batch.cnt_comments);
    r.transcript = ad::weighted_log_sum(Pt, batch.cnt_transcript);

    // −CE(y, sigmoid(z)) = −softplus((1 − 2y) z), for labeled rows only.
    Var z = state.net_label.forward(tape, theta, opts.track_model, false);
    auto sign = Tensor::matrix(batch.size(), 1);
    for (std::size_t d = 0; d < batch.size(); ++d) sign(d, 0) = 1.0 - 2.0 * batch.label(d, 0);
    Var ce = ad::mul(ad::softplus(ad::mul(tape.constant(sign), z)), tape.constant(batch.has_label));
    r.label = ad::scale(ad::sum(ce), -1.0);

    r.img = modality_term(tape, state.net_img, theta, batch.f_img, hp.xi_img, opts.track_model);
    r.mot = modality_term(tape, state.net_mot, theta, batch.f_mot, hp.xi_mot, opts.track_model);
    r.aud = modality_term(tape, state.net_aud, theta, batch.f_aud, hp.xi_aud, opts.track_model);
    return r;
}

double val(const Var& v)
{
    return v.value().item();
}

} // namespace

ElboGraph elbo_graph(Tape& tape, const BatchEncoding& batch, const ModelState& state, const VariationalState& vs,
                     const HyperParams& hp_in, const ElboOptions& opts, const ElboNoise& noise)
{
    const std::size_t B = batch.size(), K = state.K, V = state.V, U = state.U;
    HyperParams hp = hp_in;
    hp.resolve(V, U);
    if (vs.K != K || vs.V != V || vs.U != U) throw ShapeError("elbo: model and variational sizes differ");
    if (B == 0) throw std::invalid_argument("elbo: empty batch");
    const bool ti = opts.track_inference;
    const double global_scale =
        opts.corpus_size == 0 ? 1.0 : static_cast<double>(B) / static_cast<double>(opts.corpus_size);

    // θ_d = softmax(μ + σ ε)
    auto th = theta_complete(tape, vs, batch, ti);
    Var theta = ad::softmax_rows(sample_normal_reparam(th.mu, th.sigma, noise.eps_theta));
    Var kl_theta = kl_normal_topic(th.mu, th.sigma, hp.prior_variance());

    Var eta, kl_eta = zero(tape);
    if (opts.multi_origin) {
        auto e = eta_posterior(tape, vs, batch, ti);
        eta = sample_beta_reparam(e.a, e.b, noise.u_eta);
        kl_eta = kl_beta(e.a, e.b, hp.tau1, hp.tau2);
    }

    auto s = phiS_posterior(tape, vs, ti);
    Var phiS = ad::normalize_rows(sample_lognormal_reparam(s.mu, s.sigma, noise.eps_phiS));
    Var seedV = ad::matmul(phiS, tape.constant(state.seed_embedding()));
    Var kl_phiS = ad::scale(kl_lognormal(s.mu, s.sigma, state.B_S, hp.gamma3), global_scale);
    Var kl_phiR = zero(tape), kl_phiRt = zero(tape), kl_pi = zero(tape), kl_pi_t = zero(tape);

    Var Cc = seedV, Ct = seedV;
    if (opts.two_sets) {
        auto r = phiR_posterior(tape, vs, ti);
        auto rt = phiRt_posterior(tape, vs, ti);
        Var phiR = ad::normalize_rows(sample_lognormal_reparam(r.mu, r.sigma, noise.eps_phiR));
        Var phiRt = ad::normalize_rows(sample_lognormal_reparam(rt.mu, rt.sigma, noise.eps_phiRt));
        kl_phiR = ad::scale(kl_lognormal(r.mu, r.sigma, state.B_R, hp.gamma1), global_scale);
        kl_phiRt = ad::scale(kl_lognormal(rt.mu, rt.sigma, state.B_R, hp.gamma2), global_scale);

        Var pi, pi_t;
        if (opts.auto_supervision) {
            auto p = pi_posterior(tape, vs, ti);
            auto pt = pi_t_posterior(tape, vs, ti);
            pi = sample_beta_reparam(p.a, p.b, noise.u_pi);
            pi_t = sample_beta_reparam(pt.a, pt.b, noise.u_pi_t);
            kl_pi = ad::scale(kl_beta(p.a, p.b, hp.delta1, hp.delta2), global_scale);
            kl_pi_t = ad::scale(kl_beta(pt.a, pt.b, hp.delta1_t, hp.delta2_t), global_scale);
        } else {
            pi = pi_t = tape.constant(Tensor::matrix(1, K, 0.5));
        }
        Cc = topic_columns(pi, phiR, seedV, K);
        Ct = opts.tilde_variant ? topic_columns(pi_t, phiRt, seedV, K) : Cc;
    }

    auto r = recon_vars(tape, batch, state, hp, opts, theta, eta, Cc, Ct);

    Var recon = ad::add(ad::add(ad::add(r.transcript, r.comment), ad::add(r.label, r.img)), ad::add(r.mot, r.aud));
    Var kl = ad::add(ad::add(ad::add(kl_theta, kl_pi_t), ad::add(kl_pi, kl_eta)),
                     ad::add(ad::add(kl_phiS, kl_phiR), kl_phiRt));

    ElboGraph g;
    g.total = ad::sub(recon, kl);
    g.theta = theta;
    auto& b = g.breakdown;
    b.recon_transcript = val(r.transcript);
    b.recon_comment = val(r.comment);
    b.recon_label = val(r.label);
    b.recon_img = val(r.img);
    b.recon_mot = val(r.mot);
    b.recon_aud = val(r.aud);
    b.kl_theta = val(kl_theta);
    b.kl_pi_t = val(kl_pi_t);
    b.kl_pi = val(kl_pi);
    b.kl_eta = val(kl_eta);
    b.kl_phiS = val(kl_phiS);
    b.kl_phiR = val(kl_phiR);
    b.kl_phiR_t = val(kl_phiRt);
    b.total = val(g.total);
    return g;
}

ElboBreakdown elbo_total(const BatchEncoding& batch, const ModelState& state, const VariationalState& vs,
                         const HyperParams& hp, const ElboOptions& opts, Rng& rng)
{
    auto noise = ElboNoise::draw(batch.size(), state.K, state.V, state.U, rng);
    ElboOptions o = opts;
    o.track_inference = o.track_model = false;
    Tape tape;
    return elbo_graph(tape, batch, state, vs, hp, o, noise).breakdown;
}

ElboBreakdown recon_lower_bound(const BatchEncoding& batch, const Tensor& theta, const Tensor& eta,
                                const ModelState& state, const HyperParams& hp, const ElboOptions& opts)
{
    if (theta.rows() != batch.size() || theta.cols() != state.K) {
        throw ShapeError("recon_lower_bound: theta is " + theta.shape_str());
    }
    Tape tape;
    ElboOptions o = opts;
    o.track_model = false;
    Var seedV = tape.constant(matmul(state.phi_S, state.seed_embedding()));
    Var Cc = seedV, Ct = seedV;
    if (opts.two_sets) {
        Var pi = tape.constant(opts.auto_supervision ? state.pi : Tensor::matrix(1, state.K, 0.5));
        Var pi_t = tape.constant(opts.auto_supervision ? state.pi_t : Tensor::matrix(1, state.K, 0.5));
        Cc = topic_columns(pi, tape.constant(state.phi_R), seedV, state.K);
        Ct = opts.tilde_variant ? topic_columns(pi_t, tape.constant(state.phi_R_t), seedV, state.K) : Cc;
    }
    auto r = recon_vars(tape, batch, state, hp, o, tape.constant(theta), tape.constant(eta), Cc, Ct);
    ElboBreakdown b;
    b.recon_transcript = val(r.transcript);
    b.recon_comment = val(r.comment);
    b.recon_label = val(r.label);
    b.recon_img = val(r.img);
    b.recon_mot = val(r.mot);
    b.recon_aud = val(r.aud);
    b.total = b.recon_sum();
    return b;
}

} // namespace kgntm
