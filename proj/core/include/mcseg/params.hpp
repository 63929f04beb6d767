#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mcseg/tensor.hpp"

namespace mcseg {

// Named parameter set with stable insertion order. Insertion order is the
// serialization order, so everything downstream is reproducible.
class ParamStore {
public:
    void add(const std::string& name, Tensor value) {
        if (values_.count(name)) throw std::invalid_argument("ParamStore: duplicate name " + name);
        names_.push_back(name);
        values_.emplace(name, std::move(value));
    }

    bool contains(const std::string& name) const { return values_.count(name) != 0; }

    Tensor& at(const std::string& name) {
        auto it = values_.find(name);
        if (it == values_.end()) throw std::out_of_range("ParamStore: no parameter " + name);
        return it->second;
    }
    const Tensor& at(const std::string& name) const {
        auto it = values_.find(name);
        if (it == values_.end()) throw std::out_of_range("ParamStore: no parameter " + name);
        return it->second;
    }

    const std::vector<std::string>& names() const { return names_; }
    std::size_t size() const { return names_.size(); }

    // Total scalar count, useful for reporting model size.
    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& name : names_) n += at(name).size();
        return n;
    }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, Tensor> values_;
};

// Gradients keyed by parameter name; ordered so optimizer updates are
// deterministic.
using GradMap = std::map<std::string, Tensor>;

}  // namespace mcseg
