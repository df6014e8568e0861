#pragma once

#include <cstdint>
#include <random>

#include "kgntm/tensor.hpp"

namespace kgntm {

using Rng = std::mt19937_64;

// Uniform draw on the open interval (0, 1).
inline double uniform_open(Rng& rng)
{
    // 53 random bits, shifted by half an ulp so 0 is never produced.
    return (static_cast<double>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

inline double standard_normal(Rng& rng)
{
    std::normal_distribution<double> n(0.0, 1.0);
    return n(rng);
}

inline bool bernoulli(Rng& rng, double p)
{
    return uniform_open(rng) < p;
}

// Beta(a, b) via two gamma draws.
inline double beta_draw(Rng& rng, double a, double b)
{
    std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    return x / (x + y);
}

Tensor standard_normal_tensor(Shape shape, Rng& rng);
Tensor uniform_open_tensor(Shape shape, Rng& rng);

// Derives an independent stream seed from a base seed and a label.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

} // namespace kgntm
