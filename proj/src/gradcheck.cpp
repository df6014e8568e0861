#include "kgntm/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kgntm {

namespace {

double eval(const std::function<Var(Tape&)>& loss)
{
    Tape tape;
    return loss(tape).value().item();
}

} // namespace

GradCheckResult check_gradients(const std::function<Var(Tape&)>& loss, const std::vector<Parameter*>& params,
                                const GradCheckOptions& opts)
{
    Gradients grads;
    double f0 = 0.0;
    {
        Tape tape;
        Var l = loss(tape);
        f0 = l.value().item();
        grads = tape.backward(l);
    }

    GradCheckResult res;
    double floor = opts.floor;
    if (opts.roundoff_target > 0.0) {
        const double roundoff = 4.0 * std::numeric_limits<double>::epsilon() * std::abs(f0) / opts.step;
        floor = std::max(floor, roundoff / opts.roundoff_target);
    }
    res.floor_used = floor;
    for (auto* p : params) {
        const Tensor analytic = grads.has(*p) ? grads.of(*p) : Tensor(p->value.shape(), 0.0);
        const std::size_t n = p->value.size();
        const std::size_t stride =
            opts.max_entries_per_param == 0 ? 1 : std::max<std::size_t>(1, n / opts.max_entries_per_param);
        for (std::size_t i = 0; i < n; i += stride) {
            const double orig = p->value[i];
            p->value[i] = orig + opts.step;
            const double up = eval(loss);
            p->value[i] = orig - opts.step;
            const double down = eval(loss);
            p->value[i] = orig;
            const double numeric = (up - down) / (2.0 * opts.step);
            const double a = analytic[i];
            const double abs_err = std::abs(a - numeric);
            const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), floor});
            ++res.checked;
            res.max_abs_error = std::max(res.max_abs_error, abs_err);
            if (rel > res.max_rel_error) {
                res.max_rel_error = rel;
                res.worst_parameter = p->name;
                res.worst_index = i;
            }
        }
    }
    return res;
}

} // namespace kgntm
