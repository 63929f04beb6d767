#pragma once

#include <utility>
#include <vector>

#include "mcseg/bound_params.hpp"
#include "mcseg/corpus.hpp"
#include "mcseg/tensor.hpp"

namespace mcseg {

// Linear-chain CRF over the 4-label BMES space.
//
// Path score of Y given per-position label scores S [n,4] and transition
// matrix T [4,4]:
//     score(Y) = sum_i S[i][y_i] + sum_{i>=2} T[y_{i-1}][y_i]
// The unary score at position 1 is included; there are no begin/end
// transition vectors.

// s(X,i) = [h_domain; h_shared] W_s + b_s, row-wise. W_s is [2*d_h, 4].
Tensor emission_scores(const Tensor& h_domain, const Tensor& h_shared,
                       const Tensor& w_s, const Tensor& b_s);
Var emission_scores(Tape& tape, Var h_domain, Var h_shared, Var w_s, Var b_s);

// log sum over all 4^n label sequences of exp(path score), computed by the
// forward algorithm in log space. n = 0 throws.
double log_partition(const Tensor& scores, const Tensor& trans);

// log p(Y | X) = path score - log_partition. Always <= 0.
double log_likelihood(const Tensor& scores, const Tensor& trans,
                      const std::vector<Label>& tags);

// Highest-scoring label sequence; ties break toward the lower label index
// at every backtrack step and at the final position.
std::pair<std::vector<Label>, double> viterbi(const Tensor& scores, const Tensor& trans);

// Exact p(Y | X) by enumerating all 4^n paths. Test oracle; n <= 8.
double posterior_brute_force(const Tensor& scores, const Tensor& trans,
                             const std::vector<Label>& tags);

// Unary marginals P(y_i = y) via forward-backward, as a [n,4] tensor.
Tensor crf_marginals(const Tensor& scores, const Tensor& trans);

// Differentiable log-likelihood. Gradients: d/dS = onehot(gold) - marginals,
// d/dT likewise with pairwise marginals.
Var crf_log_likelihood(Tape& tape, Var scores, Var trans, std::vector<Label> tags);

}  // namespace mcseg
