#include "kgntm/sampling.hpp"

#include <cmath>
#include <stdexcept>

namespace kgntm {

namespace {

void require_positive(const Tensor& t, const char* what)
{
    for (double v : t.values()) {
        if (!(v > 0.0)) throw std::domain_error(std::string(what) + " must be > 0, got " + std::to_string(v));
    }
}

} // namespace

Var sample_normal_reparam(const Var& mu, const Var& sigma, const Tensor& eps)
{
    require_positive(sigma.value(), "sigma");
    if (!mu.value().same_shape(sigma.value()) || !mu.value().same_shape(eps)) {
        throw ShapeError("sample_normal_reparam: mu " + mu.value().shape_str() + ", sigma " +
                         sigma.value().shape_str() + ", eps " + eps.shape_str());
    }
    Tape& tape = mu.tape();
    return ad::add(mu, ad::mul(sigma, tape.constant(eps)));
}

Var sample_normal_reparam(const Var& mu, const Var& sigma, Rng& rng)
{
    return sample_normal_reparam(mu, sigma, standard_normal_tensor(mu.value().shape(), rng));
}

Var sample_lognormal_reparam(const Var& mu, const Var& sigma, const Tensor& eps)
{
    return ad::exp(sample_normal_reparam(mu, sigma, eps));
}

Var sample_lognormal_reparam(const Var& mu, const Var& sigma, Rng& rng)
{
    return ad::exp(sample_normal_reparam(mu, sigma, rng));
}

double kumaraswamy_transform(double a, double b, double u)
{
    if (!(a > 0.0) || !(b > 0.0)) throw std::domain_error("kumaraswamy parameters must be > 0");
    // 1 - (1-u)^(1/b) computed without cancellation.
    const double one_minus_t = -std::expm1(std::log1p(-u) / b);
    return std::pow(one_minus_t, 1.0 / a);
}

Var sample_beta_reparam(const Var& a, const Var& b, const Tensor& u)
{
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_positive(av, "beta parameter a");
    require_positive(bv, "beta parameter b");
    if (!av.same_shape(bv) || !av.same_shape(u)) {
        throw ShapeError("sample_beta_reparam: a " + av.shape_str() + ", b " + bv.shape_str() + ", u " +
                         u.shape_str());
    }
    const std::size_t n = av.size();
    Tensor x(av.shape());
    Tensor dxda(av.shape());
    Tensor dxdb(av.shape());
    for (std::size_t i = 0; i < n; ++i) {
        const double ai = av[i], bi = bv[i];
        const double log1mu = std::log1p(-u[i]);
        const double t = std::exp(log1mu / bi);          // (1-u)^(1/b)
        const double one_minus_t = -std::expm1(log1mu / bi);
        const double log_omt = std::log(one_minus_t);
        const double xi = std::exp(log_omt / ai);
        x[i] = xi;
        dxda[i] = -xi * log_omt / (ai * ai);
        dxdb[i] = xi * t * log1mu / (ai * bi * bi * one_minus_t);
    }
    Var av_ = a, bv_ = b;
    return a.tape().record(std::move(x), {a, b},
                           [av_, bv_, dxda = std::move(dxda), dxdb = std::move(dxdb)](Tape& tape, const Tensor& g) {
                               Tensor ga(g.shape()), gb(g.shape());
                               for (std::size_t i = 0; i < g.size(); ++i) {
                                   ga[i] = g[i] * dxda[i];
                                   gb[i] = g[i] * dxdb[i];
                               }
                               tape.accumulate(av_, ga);
                               tape.accumulate(bv_, gb);
                           });
}

Var sample_beta_reparam(const Var& a, const Var& b, Rng& rng)
{
    return sample_beta_reparam(a, b, uniform_open_tensor(a.value().shape(), rng));
}

} // namespace kgntm
