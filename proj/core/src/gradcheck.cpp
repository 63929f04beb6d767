#include "mcseg/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace mcseg {

static double eval_loss(const TapeLoss& loss, const ParamStore& params) {
    Tape tape;
    BoundParams bound(tape, params);
    Var v = loss(tape, bound);
    const Tensor& val = tape.value(v);
    if (val.size() != 1) throw std::invalid_argument("grad_check: loss must be scalar");
    return val[0];
}

GradCheckReport grad_check(const TapeLoss& loss, const ParamStore& params,
                           double h, double floor) {
    // Analytic pass.
    Tape tape;
    BoundParams bound(tape, params);
    Var v = loss(tape, bound);
    tape.backward(v);
    GradMap analytic = bound.grads();

    GradCheckReport report;
    ParamStore work;
    for (const auto& name : params.names()) work.add(name, params.at(name));

    for (const auto& name : params.names()) {
        const Tensor* ag = nullptr;
        auto it = analytic.find(name);
        Tensor zeros;
        if (it != analytic.end()) {
            ag = &it->second;
        } else {
            zeros = Tensor(params.at(name).shape());
            ag = &zeros;  // parameter never participated: gradient is zero
        }
        Tensor& p = work.at(name);
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double orig = p[i];
            p[i] = orig + h;
            const double up = eval_loss(loss, work);
            p[i] = orig - h;
            const double down = eval_loss(loss, work);
            p[i] = orig;
            const double numeric = (up - down) / (2.0 * h);
            const double a = (*ag)[i];
            const double denom = std::max(std::fabs(a) + std::fabs(numeric), floor);
            const double rel = std::fabs(a - numeric) / denom;
            ++report.entries_checked;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = name;
                report.worst_index = i;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    return report;
}

}  // namespace mcseg
