#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mcseg/bound_params.hpp"
#include "mcseg/params.hpp"
#include "mcseg/rng.hpp"
#include "mcseg/tensor.hpp"

namespace mcseg {

class UnknownDomainError : public std::runtime_error {
public:
    UnknownDomainError(const std::string& domain, const std::vector<std::string>& known);
};

namespace proj_names {
std::string weight(const std::string& domain);  // "proj.<domain>.W"
std::string bias(const std::string& domain);    // "proj.<domain>.b"
inline const std::string kSharedWeight = "proj.shared.W";
inline const std::string kSharedBias = "proj.shared.b";
}  // namespace proj_names

// One [d_h, d_h] weight + [d_h] bias per domain, plus the shared pair when
// with_shared is set (multi-criteria training); single-criteria models
// allocate no shared parameters at all.
void init_projection_params(ParamStore& store, const std::vector<std::string>& domains,
                            int d_h, Rng& rng, bool with_shared);

// h_domain = h W_domain + b_domain ; h_shared = h W_shared + b_shared.
std::pair<Tensor, Tensor> project(const ParamStore& params, const Tensor& h,
                                  const std::string& domain,
                                  const std::vector<std::string>& known_domains);
std::pair<Var, Var> project(Tape& tape, BoundParams& params, Var h,
                            const std::string& domain,
                            const std::vector<std::string>& known_domains);

// Standard-criteria inference: the shared representation fills both slots
// so the downstream [h_domain; h_shared] concatenation keeps its shape
// without touching any private parameters.
std::pair<Tensor, Tensor> project_shared_only(const ParamStore& params, const Tensor& h);

// Single-criteria mode: the private representation fills both slots.
std::pair<Tensor, Tensor> project_private_only(const ParamStore& params, const Tensor& h,
                                               const std::string& domain,
                                               const std::vector<std::string>& known_domains);

}  // namespace mcseg
