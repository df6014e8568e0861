#pragma once

#include "kgntm/autodiff.hpp"
#include "kgntm/rng.hpp"

namespace kgntm {

// Reparameterized draws. The `noise` overloads take pre-drawn standard
// normal (or uniform) noise so a computation can be replayed exactly.

// mu + sigma * eps. Throws std::domain_error if any sigma <= 0.
Var sample_normal_reparam(const Var& mu, const Var& sigma, const Tensor& eps);
Var sample_normal_reparam(const Var& mu, const Var& sigma, Rng& rng);

// exp(mu + sigma * eps).
Var sample_lognormal_reparam(const Var& mu, const Var& sigma, const Tensor& eps);
Var sample_lognormal_reparam(const Var& mu, const Var& sigma, Rng& rng);

// Kumaraswamy(a, b) surrogate for Beta(a, b):
// x = (1 - (1 - u)^(1/b))^(1/a), u ~ Uniform(0, 1). Elementwise; a, b, u
// must share a shape. Throws std::domain_error if any a or b <= 0.
Var sample_beta_reparam(const Var& a, const Var& b, const Tensor& u);
Var sample_beta_reparam(const Var& a, const Var& b, Rng& rng);

// Plain (non-taped) Kumaraswamy transform of a single uniform.
double kumaraswamy_transform(double a, double b, double u);

} // namespace kgntm
