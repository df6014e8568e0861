#pragma once

#include <map>
#include <string>
#include <vector>

#include "kgntm/autodiff.hpp"

namespace kgntm {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam on a loss to be minimized. State is keyed by parameter name, so a
// parameter keeps its moments across tapes and across freeze/unfreeze phases.
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    // Applies one update to every listed parameter that has a gradient.
    void step(const std::vector<Parameter*>& params, const Gradients& grads);
    // Single-parameter form; `grad` must match the parameter's shape.
    void step(Parameter& param, const Tensor& grad);

    const AdamConfig& config() const noexcept { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }
    std::size_t steps_taken(const std::string& name) const;

private:
    struct Slot {
        Tensor m, v;
        std::size_t t = 0;
    };
    AdamConfig cfg_;
    std::map<std::string, Slot> slots_;
};

} // namespace kgntm
