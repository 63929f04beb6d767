#pragma once

#include <functional>
#include <string>

#include "mcseg/bound_params.hpp"

namespace mcseg {

// Builds a scalar loss over bound parameters. Must be deterministic: the
// checker calls it repeatedly on perturbed copies of the parameter store.
using TapeLoss = std::function<Var(Tape&, BoundParams&)>;

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t entries_checked = 0;

    bool within(double tol) const { return max_rel_err <= tol; }
};

// Central finite differences against the tape gradient, every entry of
// every parameter. Relative error is |a-n| / max(|a|+|n|, floor).
GradCheckReport grad_check(const TapeLoss& loss, const ParamStore& params,
                           double h = 1e-5, double floor = 1e-8);

}  // namespace mcseg
