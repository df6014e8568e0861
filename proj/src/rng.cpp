#include "kgntm/rng.hpp"

namespace kgntm {

Tensor standard_normal_tensor(Shape shape, Rng& rng)
{
    Tensor t(std::move(shape));
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& v : t.values()) v = n(rng);
    return t;
}

Tensor uniform_open_tensor(Shape shape, Rng& rng)
{
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = uniform_open(rng);
    return t;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream)
{
    // splitmix64 finalizer over the combined value
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace kgntm
