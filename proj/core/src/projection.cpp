#include "mcseg/projection.hpp"

#include "mcseg/tensor_ops.hpp"

namespace mcseg {

static std::string join_domains(const std::vector<std::string>& known) {
    std::string s;
    for (std::size_t i = 0; i < known.size(); ++i) {
        if (i) s += ", ";
        s += known[i];
    }
    return s.empty() ? "(none)" : s;
}

UnknownDomainError::UnknownDomainError(const std::string& domain,
                                       const std::vector<std::string>& known)
    : std::runtime_error("unknown domain '" + domain + "'; known domains: " +
                         join_domains(known)) {}

namespace proj_names {
std::string weight(const std::string& domain) { return "proj." + domain + ".W"; }
std::string bias(const std::string& domain) { return "proj." + domain + ".b"; }
}  // namespace proj_names

void init_projection_params(ParamStore& store, const std::vector<std::string>& domains,
                            int d_h, Rng& rng, bool with_shared) {
    for (const auto& d : domains) {
        store.add(proj_names::weight(d), ops::xavier_uniform_init({d_h, d_h}, rng));
        store.add(proj_names::bias(d), Tensor({d_h}));
    }
    if (with_shared) {
        store.add(proj_names::kSharedWeight, ops::xavier_uniform_init({d_h, d_h}, rng));
        store.add(proj_names::kSharedBias, Tensor({d_h}));
    }
}

static void check_domain(const std::string& domain, const std::vector<std::string>& known) {
    for (const auto& d : known)
        if (d == domain) return;
    throw UnknownDomainError(domain, known);
}

std::pair<Tensor, Tensor> project(const ParamStore& params, const Tensor& h,
                                  const std::string& domain,
                                  const std::vector<std::string>& known_domains) {
    check_domain(domain, known_domains);
    Tensor hd = ops::add_rowvec(ops::matmul(h, params.at(proj_names::weight(domain))),
                                params.at(proj_names::bias(domain)));
    Tensor hs = ops::add_rowvec(ops::matmul(h, params.at(proj_names::kSharedWeight)),
                                params.at(proj_names::kSharedBias));
    return {std::move(hd), std::move(hs)};
}

std::pair<Var, Var> project(Tape& tape, BoundParams& params, Var h,
                            const std::string& domain,
                            const std::vector<std::string>& known_domains) {
    check_domain(domain, known_domains);
    Var hd = tape.add_rowvec(tape.matmul(h, params[proj_names::weight(domain)]),
                             params[proj_names::bias(domain)]);
    Var hs = tape.add_rowvec(tape.matmul(h, params[proj_names::kSharedWeight]),
                             params[proj_names::kSharedBias]);
    return {hd, hs};
}

std::pair<Tensor, Tensor> project_shared_only(const ParamStore& params, const Tensor& h) {
    Tensor hs = ops::add_rowvec(ops::matmul(h, params.at(proj_names::kSharedWeight)),
                                params.at(proj_names::kSharedBias));
    return {hs, hs};
}

std::pair<Tensor, Tensor> project_private_only(const ParamStore& params, const Tensor& h,
                                               const std::string& domain,
                                               const std::vector<std::string>& known_domains) {
    check_domain(domain, known_domains);
    Tensor hd = ops::add_rowvec(ops::matmul(h, params.at(proj_names::weight(domain))),
                                params.at(proj_names::bias(domain)));
    return {hd, hd};
}

}  // namespace mcseg
