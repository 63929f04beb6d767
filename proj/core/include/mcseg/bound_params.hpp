#pragma once

#include <string>
#include <vector>

#include "mcseg/params.hpp"
#include "mcseg/tape.hpp"

namespace mcseg {

// Lazily registers ParamStore entries as differentiable leaves on a tape.
// Only parameters actually pulled through operator[] join the graph, which
// is what keeps unrelated domains' projections out of a batch's update.
class BoundParams {
public:
    BoundParams(Tape& tape, const ParamStore& store) : tape_(tape), store_(store) {}

    Var operator[](const std::string& name) {
        for (std::size_t i = 0; i < used_.size(); ++i)
            if (used_[i] == name) return vars_[i];
        Var v = tape_.param(store_.at(name));
        used_.push_back(name);
        vars_.push_back(v);
        return v;
    }

    const std::vector<std::string>& used() const { return used_; }

    // Gradients of every bound parameter after tape.backward().
    GradMap grads() const {
        GradMap g;
        for (std::size_t i = 0; i < used_.size(); ++i) g[used_[i]] = tape_.grad(vars_[i]);
        return g;
    }

private:
    Tape& tape_;
    const ParamStore& store_;
    std::vector<std::string> used_;
    std::vector<Var> vars_;
};

}  // namespace mcseg
