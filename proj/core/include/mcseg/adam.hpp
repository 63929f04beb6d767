#pragma once

#include <cstdint>
#include <map>

#include "mcseg/params.hpp"

namespace mcseg {

struct AdamConfig {
    double lr = 2e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;  // decoupled, applied outside the moment update
};

// Adam with bias correction and decoupled weight decay. step() updates only
// the parameters present in the gradient map; untouched parameters keep
// their moments, values and per-parameter step counts, so a batch that
// never used some domain's projection leaves that projection bit-identical.
class AdamState {
public:
    explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}

    const AdamConfig& config() const { return cfg_; }
    std::uint64_t step_count() const { return step_; }

    // Throws std::runtime_error on a non-finite gradient.
    void step(ParamStore& params, const GradMap& grads);

private:
    struct Slot {
        Tensor m, v;
        std::uint64_t t = 0;
    };
    AdamConfig cfg_;
    std::uint64_t step_ = 0;
    std::map<std::string, Slot> slots_;
};

}  // namespace mcseg
