#include "mcseg/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace mcseg {

void AdamState::step(ParamStore& params, const GradMap& grads) {
    for (const auto& [name, g] : grads) {
        for (double x : g.raw())
            if (!std::isfinite(x))
                throw std::runtime_error("adam_step: non-finite gradient in " + name);
    }
    ++step_;
    for (const auto& [name, g] : grads) {
        Tensor& p = params.at(name);
        if (!p.same_shape(g))
            throw std::invalid_argument("adam_step: gradient shape " + g.shape_string() +
                                        " does not match parameter " + name + " " +
                                        p.shape_string());
        Slot& s = slots_[name];
        if (s.m.empty()) {
            s.m = Tensor(p.shape());
            s.v = Tensor(p.shape());
        }
        ++s.t;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(s.t));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(s.t));
        for (std::size_t i = 0; i < p.size(); ++i) {
            s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * g[i];
            s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double mhat = s.m[i] / bc1;
            const double vhat = s.v[i] / bc2;
            p[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.epsilon) +
                               cfg_.weight_decay * p[i]);
        }
    }
}

}  // namespace mcseg
