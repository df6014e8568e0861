#include "kgntm/optim.hpp"

#include <cmath>

namespace kgntm {

void Adam::step(const std::vector<Parameter*>& params, const Gradients& grads)
{
    for (auto* p : params) {
        if (grads.has(*p)) step(*p, grads.of(*p));
    }
}

void Adam::step(Parameter& param, const Tensor& grad)
{
    if (!param.value.same_shape(grad)) {
        throw ShapeError("adam: gradient " + grad.shape_str() + " does not match parameter '" + param.name + "' " +
                         param.value.shape_str());
    }
    auto& s = slots_[param.name];
    if (s.m.empty()) {
        s.m = Tensor(param.value.shape(), 0.0);
        s.v = Tensor(param.value.shape(), 0.0);
    } else if (!s.m.same_shape(grad)) {
        throw ShapeError("adam: parameter '" + param.name + "' changed shape");
    }
    ++s.t;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(s.t));
    auto w = param.value.values();
    auto m = s.m.values();
    auto v = s.v.values();
    auto g = grad.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        w[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
}

std::size_t Adam::steps_taken(const std::string& name) const
{
    auto it = slots_.find(name);
    return it == slots_.end() ? 0 : it->second.t;
}

} // namespace kgntm
