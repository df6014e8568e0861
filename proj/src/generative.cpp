#include "kgntm/generative.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <utility>
#include <numeric>
#include <stdexcept>

#include "kgntm/log.hpp"

namespace kgntm {

using nlohmann::json;

namespace {

std::atomic<std::size_t> g_clamps{0};
constexpr double kProbFloor = 1e-300;

double clamped_log(double p)
{
    if (p < kProbFloor) {
        g_clamps.fetch_add(1, std::memory_order_relaxed);
        return std::log(kProbFloor);
    }
    return std::log(p);
}

std::size_t draw_categorical(std::span<const double> p, Rng& rng)
{
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    double u = uniform_open(rng) * total;
    for (std::size_t i = 0; i < p.size(); ++i) {
        u -= p[i];
        if (u <= 0.0) return i;
    }
    // Rounding can leave a sliver; return the last positive entry.
    for (std::size_t i = p.size(); i-- > 0;) {
        if (p[i] > 0.0) return i;
    }
    throw std::logic_error("draw_categorical: all-zero distribution");
}

void check_row_stochastic(const Tensor& t, std::size_t rows, std::size_t cols, const char* name)
{
    if (t.rows() != rows || t.cols() != cols) {
        throw ShapeError(std::string(name) + " has shape " + t.shape_str() + ", expected [" + std::to_string(rows) +
                         "x" + std::to_string(cols) + "]");
    }
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            if (!(t(r, c) >= 0.0)) throw std::domain_error(std::string(name) + " has a negative or NaN entry");
            s += t(r, c);
        }
        if (std::abs(s - 1.0) > 1e-9) {
            throw std::domain_error(std::string(name) + " row " + std::to_string(r) + " sums to " + std::to_string(s));
        }
    }
}

} // namespace

// ---------------------------------------------------------------------------

void HyperParams::resolve(std::size_t V, std::size_t U)
{
    if (gamma1 == 0.0) gamma1 = static_cast<double>(V - 1) / static_cast<double>(V);
    if (gamma2 == 0.0) gamma2 = static_cast<double>(V - 1) / static_cast<double>(V);
    // With a single seed word (U-1)/U is zero, which is not a valid scale.
    if (gamma3 == 0.0) gamma3 = U > 1 ? static_cast<double>(U - 1) / static_cast<double>(U) : 1.0;
}

void HyperParams::validate() const
{
    auto pos = [](double v, const char* name) {
        if (!(v > 0.0)) throw std::invalid_argument(std::string("hyperparameter ") + name + " must be > 0");
    };
    pos(alpha, "alpha");
    if (!(beta_ratio > 0.0 && beta_ratio <= 1.0)) throw std::invalid_argument("beta_ratio must lie in (0, 1]");
    pos(tau1, "tau1");
    pos(tau2, "tau2");
    pos(delta1, "delta1");
    pos(delta2, "delta2");
    pos(delta1_t, "delta1_t");
    pos(delta2_t, "delta2_t");
    // Zero leaves a gamma unset until resolve().
    for (auto [v, name] : {std::pair{gamma1, "gamma1"}, std::pair{gamma2, "gamma2"}, std::pair{gamma3, "gamma3"}}) {
        if (!(v >= 0.0)) throw std::invalid_argument(std::string("hyperparameter ") + name + " must be >= 0");
    }
    pos(learning_rate, "learning_rate");
    if (K < 2) throw std::invalid_argument("K must be at least 2");
    if (xi_img < 0 || xi_mot < 0 || xi_aud < 0) throw std::invalid_argument("xi weights must be >= 0");
}

json HyperParams::to_json() const
{
    return {{"alpha", alpha},       {"beta_ratio", beta_ratio}, {"tau1", tau1},     {"tau2", tau2},
            {"delta1", delta1},     {"delta2", delta2},         {"delta1_t", delta1_t}, {"delta2_t", delta2_t},
            {"gamma1", gamma1},     {"gamma2", gamma2},         {"gamma3", gamma3}, {"K", K},
            {"xi_img", xi_img},     {"xi_mot", xi_mot},         {"xi_aud", xi_aud}, {"learning_rate", learning_rate}};
}

HyperParams HyperParams::from_json(const json& j)
{
    return from_json(j, HyperParams{});
}

HyperParams HyperParams::from_json(const json& j, HyperParams hp)
{
    if (!j.is_object()) throw SchemaError("hyperparameters must be a JSON object");
    for (const auto& [key, v] : j.items()) {
        auto num = [&]() {
            if (!v.is_number()) throw SchemaError("hyperparameter '" + key + "' must be a number");
            return v.get<double>();
        };
        if (key == "alpha") hp.alpha = num();
        else if (key == "beta_ratio") hp.beta_ratio = num();
        else if (key == "tau1") hp.tau1 = num();
        else if (key == "tau2") hp.tau2 = num();
        else if (key == "delta1") hp.delta1 = num();
        else if (key == "delta2") hp.delta2 = num();
        else if (key == "delta1_t") hp.delta1_t = num();
        else if (key == "delta2_t") hp.delta2_t = num();
        else if (key == "gamma1") hp.gamma1 = num();
        else if (key == "gamma2") hp.gamma2 = num();
        else if (key == "gamma3") hp.gamma3 = num();
        else if (key == "xi_img") hp.xi_img = num();
        else if (key == "xi_mot") hp.xi_mot = num();
        else if (key == "xi_aud") hp.xi_aud = num();
        else if (key == "learning_rate") hp.learning_rate = num();
        else if (key == "K") {
            if (!v.is_number_unsigned()) throw SchemaError("hyperparameter 'K' must be a positive integer");
            hp.K = v.get<std::size_t>();
        } else {
            throw SchemaError("unknown hyperparameter '" + key + "'");
        }
    }
    return hp;
}

// ---------------------------------------------------------------------------

void ModelState::validate() const
{
    check_row_stochastic(phi_S, K, U, "phi_S");
    check_row_stochastic(phi_R, K, V, "phi_R");
    check_row_stochastic(phi_R_t, K, V, "phi_R_t");
    for (const Tensor* p : {&pi, &pi_t}) {
        if (p->size() != K) throw ShapeError("pi vectors must have K entries");
        for (double v : p->values()) {
            if (!(v > 0.0 && v < 1.0)) throw std::domain_error("pi entries must lie strictly inside (0, 1)");
        }
    }
    if (assoc.size() != K) throw ShapeError("assoc must have K entries");
    for (double v : assoc.values()) {
        if (v != 1.0 / static_cast<double>(K)) throw std::domain_error("assoc must be the uniform vector");
    }
    if (seed_regular.size() != U) throw ShapeError("seed_regular must have U entries");
}

Tensor ModelState::seed_embedding() const
{
    auto E = Tensor::matrix(U, V);
    for (std::size_t u = 0; u < U; ++u) {
        if (seed_regular[u] >= 0) E(u, static_cast<std::size_t>(seed_regular[u])) = 1.0;
    }
    return E;
}

std::vector<double> ModelState::phi_S_regular(std::size_t k) const
{
    std::vector<double> out(V, 0.0);
    for (std::size_t u = 0; u < U; ++u) {
        if (seed_regular[u] >= 0) out[static_cast<std::size_t>(seed_regular[u])] += phi_S(k, u);
    }
    return out;
}

FeatureDims ModelState::feature_dims() const
{
    return {net_img.output_width(), net_mot.output_width(), net_aud.output_width()};
}

std::vector<std::int64_t> seed_regular_map(const Vocabulary& vocab)
{
    std::vector<std::int64_t> out;
    for (const auto& id : vocab.seed_to_regular()) out.push_back(id ? static_cast<std::int64_t>(*id) : -1);
    return out;
}

ModelState make_model_state(std::size_t K, const Vocabulary& vocab, const FeatureDims& dims,
                            const ModelNetShape& shape, Rng& rng)
{
    vocab.validate();
    ModelState s;
    s.K = K;
    s.V = vocab.V();
    s.U = vocab.U();
    s.phi_S = Tensor::matrix(K, s.U, 1.0 / static_cast<double>(s.U));
    s.phi_R = Tensor::matrix(K, s.V, 1.0 / static_cast<double>(s.V));
    s.phi_R_t = s.phi_R;
    s.B_R = s.phi_R;
    s.B_S = s.phi_S;
    s.pi = Tensor::matrix(1, K, 0.5);
    s.pi_t = s.pi;
    s.assoc = Tensor::matrix(1, K, 1.0 / static_cast<double>(K));
    s.seed_regular = seed_regular_map(vocab);
    s.net_label = MlpNet::make("NN_L", K, shape.label_hidden, 1, Activation::sigmoid, rng);
    // A modality with no features gets no network.
    auto feature_net = [&](const char* name, std::size_t dim) {
        return dim == 0 ? MlpNet() : MlpNet::make(name, K, shape.feature_hidden, dim, Activation::identity, rng);
    };
    s.net_img = feature_net("NN_I", dims.img);
    s.net_mot = feature_net("NN_M", dims.mot);
    s.net_aud = feature_net("NN_A", dims.aud);
    return s;
}

// ---------------------------------------------------------------------------

std::vector<double> softmax(std::span<const double> r)
{
    const double mx = *std::max_element(r.begin(), r.end());
    std::vector<double> out(r.size());
    double z = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) z += (out[i] = std::exp(r[i] - mx));
    for (auto& v : out) v /= z;
    return out;
}

std::vector<double> theta_tilde(std::span<const double> h, std::span<const std::uint8_t> mask)
{
    if (h.size() != mask.size()) throw ShapeError("theta_tilde: h and mask lengths differ");
    std::vector<double> out(h.size(), 0.0);
    double s = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) {
        if (mask[k]) s += (out[k] = h[k]);
    }
    if (s > 0.0) {
        for (auto& v : out) v /= s;
    }
    return out;
}

std::pair<VideoDoc, LatentDraw> sample_document(const ModelState& state, const HyperParams& hp, const DocSizes& sizes,
                                                Rng& rng, const SampleOverrides& ov)
{
    const std::size_t K = state.K;
    if (sizes.comment_words == 0) throw std::invalid_argument("sample_document: comment_words must be positive");
    if (sizes.comment_length == 0) throw std::invalid_argument("sample_document: comment_length must be positive");
    LatentDraw lat;

    if (ov.theta) {
        if (ov.theta->size() != K) throw ShapeError("sample_document: overridden theta must have K entries");
        lat.theta = *ov.theta;
    } else {
        const double sd = std::sqrt(hp.prior_variance());
        lat.r.resize(K);
        for (auto& v : lat.r) v = sd * standard_normal(rng);
        lat.theta = softmax(lat.r);
    }
    lat.h.resize(K);
    for (std::size_t k = 0; k < K; ++k) lat.h[k] = hp.beta_ratio * lat.theta[k];

    std::size_t n_transcript = sizes.transcript_words;
    if (ov.mask) {
        if (ov.mask->size() != K) throw ShapeError("sample_document: overridden mask must have K entries");
        lat.mask = *ov.mask;
    } else {
        lat.mask.assign(K, 0);
        auto draw_mask = [&] {
            bool any = false;
            for (std::size_t k = 0; k < K; ++k) any |= (lat.mask[k] = bernoulli(rng, lat.h[k]) ? 1 : 0);
            return any;
        };
        bool any = draw_mask();
        while (!any && n_transcript > 0 && lat.mask_resamples < 100) {
            ++lat.mask_resamples;
            any = draw_mask();
        }
        if (!any && n_transcript > 0) {
            lat.transcript_dropped = true;
            n_transcript = 0;
        }
    }
    lat.theta_t = theta_tilde(lat.h, lat.mask);
    if (n_transcript > 0 && std::all_of(lat.theta_t.begin(), lat.theta_t.end(), [](double v) { return v == 0.0; })) {
        lat.transcript_dropped = true;
        n_transcript = 0;
    }

    lat.eta = ov.eta ? *ov.eta : beta_draw(rng, hp.tau1, hp.tau2);

    auto seed_to_word = [&](std::size_t u) -> TokenId {
        const auto r = state.seed_regular.at(u);
        if (r < 0) throw std::logic_error("sample_document: seed word " + std::to_string(u) + " is not in V");
        return static_cast<TokenId>(r);
    };
    auto row = [](const Tensor& t, std::size_t k) { return std::span<const double>(t.values().subspan(k * t.cols(), t.cols())); };

    VideoDoc doc;
    if (n_transcript > 0) {
        std::vector<TokenId> words;
        words.reserve(n_transcript);
        for (std::size_t i = 0; i < n_transcript; ++i) {
            const auto z = draw_categorical(lat.theta_t, rng);
            const bool regular = bernoulli(rng, state.pi_t[z]);
            lat.z_t.push_back(static_cast<std::uint32_t>(z));
            lat.x_t.push_back(regular ? 1 : 0);
            words.push_back(regular ? static_cast<TokenId>(draw_categorical(row(state.phi_R_t, z), rng))
                                    : seed_to_word(draw_categorical(row(state.phi_S, z), rng)));
        }
        doc.transcript = std::move(words);
    }

    for (std::size_t i = 0; i < sizes.comment_words; ++i) {
        if (i % sizes.comment_length == 0) doc.comment_offsets.push_back(i);
        const bool from_video = bernoulli(rng, lat.eta);
        const auto z = draw_categorical(from_video ? std::span<const double>(lat.theta) : row(state.assoc, 0), rng);
        const bool regular = bernoulli(rng, state.pi[z]);
        lat.t.push_back(from_video ? 1 : 0);
        lat.z.push_back(static_cast<std::uint32_t>(z));
        lat.x.push_back(regular ? 1 : 0);
        doc.comments.push_back(regular ? static_cast<TokenId>(draw_categorical(row(state.phi_R, z), rng))
                                       : seed_to_word(draw_categorical(row(state.phi_S, z), rng)));
    }

    auto mods = generate_modalities(state, lat.theta);
    if (sizes.feature_noise > 0.0) {
        for (auto* f : {&mods.img, &mods.mot, &mods.aud})
            for (auto& v : *f) v += sizes.feature_noise * standard_normal(rng);
    }
    doc.f_img = std::move(mods.img);
    doc.f_mot = std::move(mods.mot);
    doc.f_aud = std::move(mods.aud);

    lat.label_prob = generate_label_prob(state, lat.theta);
    doc.label = bernoulli(rng, lat.label_prob) ? 1 : 0;
    if (sizes.flag_scale > 0.0) {
        std::vector<std::uint8_t> flags;
        const double rate = std::clamp(sizes.flag_scale * lat.label_prob, 0.0, 1.0);
        for (std::size_t c = 0; c < doc.num_comments(); ++c) flags.push_back(bernoulli(rng, rate) ? 1 : 0);
        doc.comment_flags = std::move(flags);
    }
    return {std::move(doc), std::move(lat)};
}

// ---------------------------------------------------------------------------

namespace {

// π_k φ^R_k(w) + (1-π_k) φ^S_k(w) for the comment (tilde=false) or
// transcript (tilde=true) word sets.
std::vector<double> mixed_column(TokenId w, const ModelState& s, bool tilde)
{
    if (w >= s.V) throw std::out_of_range("token index " + std::to_string(w) + " >= V");
    std::vector<double> seed_w(s.K, 0.0);
    for (std::size_t u = 0; u < s.U; ++u) {
        if (s.seed_regular[u] == static_cast<std::int64_t>(w)) {
            for (std::size_t k = 0; k < s.K; ++k) seed_w[k] += s.phi_S(k, u);
        }
    }
    const Tensor& pi = tilde ? s.pi_t : s.pi;
    const Tensor& phi = tilde ? s.phi_R_t : s.phi_R;
    std::vector<double> c(s.K);
    for (std::size_t k = 0; k < s.K; ++k) c[k] = pi[k] * phi(k, w) + (1.0 - pi[k]) * seed_w[k];
    return c;
}

void check_simplex(std::span<const double> theta, std::size_t K, const char* what)
{
    if (theta.size() != K) throw ShapeError(std::string(what) + " must have K entries");
}

} // namespace

double comment_word_prob(TokenId w, std::span<const double> theta, double eta, const ModelState& state)
{
    check_simplex(theta, state.K, "theta");
    const auto c = mixed_column(w, state, false);
    double video = 0.0, assoc = 0.0;
    for (std::size_t k = 0; k < state.K; ++k) {
        video += c[k] * theta[k];
        assoc += c[k] * state.assoc[k];
    }
    return eta * video + (1.0 - eta) * assoc;
}

double comment_word_logprob(TokenId w, std::span<const double> theta, double eta, const ModelState& state)
{
    return clamped_log(comment_word_prob(w, theta, eta, state));
}

std::vector<double> b_prime(std::span<const double> theta, double beta_ratio)
{
    std::vector<double> h(theta.size());
    for (std::size_t k = 0; k < theta.size(); ++k) h[k] = beta_ratio * theta[k];
    return theorem_bound(h);
}

std::vector<double> theorem_bound(std::span<const double> h)
{
    double sq = 0.0;
    for (double v : h) sq += v * v;
    std::vector<double> out(h.size());
    for (std::size_t k = 0; k < h.size(); ++k) {
        const double denom = h[k] + (sq - h[k] * h[k]);
        out[k] = denom > 0.0 ? h[k] * h[k] / denom : 0.0;
    }
    return out;
}

double transcript_word_prob(TokenId w, std::span<const double> theta_t, const ModelState& state, bool tilde)
{
    check_simplex(theta_t, state.K, "theta_t");
    const auto c = mixed_column(w, state, tilde);
    double p = 0.0;
    for (std::size_t k = 0; k < state.K; ++k) p += c[k] * theta_t[k];
    return p;
}

double transcript_word_logprob_lb(TokenId w, std::span<const double> theta, const ModelState& state,
                                  const HyperParams& hp, bool tilde)
{
    const auto bp = b_prime(theta, hp.beta_ratio);
    return clamped_log(transcript_word_prob(w, bp, state, tilde));
}

TheoremEstimate theorem_oracle(std::span<const double> h, std::size_t n_samples, Rng& rng)
{
    if (n_samples < 10000) throw std::invalid_argument("theorem_oracle needs at least 1e4 samples");
    for (double v : h) {
        if (!(v > 0.0 && v <= 1.0)) throw std::domain_error("theorem_oracle: h entries must lie in (0, 1]");
    }
    const std::size_t K = h.size();
    std::vector<double> sum(K, 0.0), sumsq(K, 0.0);
    std::vector<std::uint8_t> mask(K);
    for (std::size_t n = 0; n < n_samples; ++n) {
        double s = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            mask[k] = uniform_open(rng) < h[k];
            if (mask[k]) s += h[k];
        }
        if (s == 0.0) continue;
        for (std::size_t k = 0; k < K; ++k) {
            if (!mask[k]) continue;
            const double v = h[k] / s;
            sum[k] += v;
            sumsq[k] += v * v;
        }
    }
    TheoremEstimate est;
    est.mean.resize(K);
    est.stderr_.resize(K);
    const double n = static_cast<double>(n_samples);
    for (std::size_t k = 0; k < K; ++k) {
        est.mean[k] = sum[k] / n;
        const double var = std::max(0.0, sumsq[k] / n - est.mean[k] * est.mean[k]);
        est.stderr_[k] = std::sqrt(var / n);
    }
    est.bound = theorem_bound(h);
    return est;
}

Modalities generate_modalities(const ModelState& state, std::span<const double> theta)
{
    check_simplex(theta, state.K, "theta");
    const Tensor x = Tensor::row(std::vector<double>(theta.begin(), theta.end()));
    auto run = [&](const MlpNet& net) { return net.layers().empty() ? std::vector<double>{} : net.forward(x).vec(); };
    return {run(state.net_img), run(state.net_mot), run(state.net_aud)};
}

double generate_label_prob(const ModelState& state, std::span<const double> theta)
{
    check_simplex(theta, state.K, "theta");
    return state.net_label.forward(Tensor::row(std::vector<double>(theta.begin(), theta.end()))).item();
}

std::size_t likelihood_clamp_count()
{
    return g_clamps.load();
}

void reset_likelihood_clamp_count()
{
    g_clamps.store(0);
}

} // namespace kgntm
