#pragma once

#include <functional>
#include <string>
#include <vector>

#include "kgntm/autodiff.hpp"

namespace kgntm {

struct GradCheckResult {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::string worst_parameter;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
    double floor_used = 0.0;
};

struct GradCheckOptions {
    double step = 1e-5;
    // Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
    double floor = 1e-6;
    // Check at most this many entries per parameter (evenly strided); 0 = all.
    std::size_t max_entries_per_param = 0;
    // When > 0, the floor is raised to the roundoff level of the central
    // difference, 4 eps |loss| / step, divided by this target tolerance, so
    // gradients too small to resolve are compared on absolute error.
    double roundoff_target = 0.0;
};

// Compares tape gradients of `loss` against central finite differences.
// `loss` must be a pure function of the parameter values: it records onto
// the given tape and returns a scalar.
GradCheckResult check_gradients(const std::function<Var(Tape&)>& loss, const std::vector<Parameter*>& params,
                                const GradCheckOptions& opts = {});

} // namespace kgntm
