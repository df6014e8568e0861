#pragma once

#include <cmath>

#include "kgntm/generative.hpp"
#include "kgntm/inference.hpp"
#include "kgntm/oracles.hpp"

namespace kgntm::testing {

using oracle::random_simplex;
using oracle::random_state;

// Sets every positive head to the given constant and every location head to
// the given bias, by zeroing final weights.
inline void pin_head(MlpNet& net, double bias_after_activation, bool positive)
{
    auto& last = net.layers().back();
    last.weight.value.fill(0.0);
    const double y = positive ? bias_after_activation - kPositiveFloor : bias_after_activation;
    last.bias.value.fill(positive ? std::log(std::expm1(y)) : y);
}

} // namespace kgntm::testing
