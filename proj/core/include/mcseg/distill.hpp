#pragma once

#include <vector>

#include "mcseg/tape.hpp"
#include "mcseg/tensor.hpp"

namespace mcseg {

// Normalized-logits square loss between student and teacher emission
// scores:
//     (1 / 2T) * sum_j sum_i || s_hat(j,i) - t_hat(j,i) ||^2
// where each per-position vector is L2-normalized (zero vectors stay zero)
// and T is the total number of real positions across the batch. Bounded by
// [0, 2] and invariant to positive per-position rescaling of either side.
double distill_loss(const std::vector<Tensor>& student_logits,
                    const std::vector<Tensor>& teacher_logits);

// Tape version; teacher logits are constants, so no gradient ever reaches
// the teacher.
Var distill_loss(Tape& tape, const std::vector<Var>& student_logits,
                 const std::vector<Tensor>& teacher_logits);

// J = J_seg + alpha * J_dis (minimization convention: J_seg is the negated
// log-likelihood summed over the batch).
double combined_loss(double seg_loss, double dis_loss, double alpha);
Var combined_loss(Tape& tape, Var seg_loss, Var dis_loss, double alpha);

}  // namespace mcseg
