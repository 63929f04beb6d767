#include "mcseg/distill.hpp"

#include <cmath>
#include <stdexcept>

#include "mcseg/tensor_ops.hpp"

namespace mcseg {

namespace {

void check_pair(const Tensor& s, const Tensor& t) {
    if (!s.same_shape(t)) ops::throw_shape_mismatch("distill_loss", s, t);
    if (s.rank() != 2) throw std::invalid_argument("distill_loss: logits must be rank-2");
}

// L2-normalizes each row; zero rows stay zero.
Tensor normalize_rows(const Tensor& a) {
    Tensor out = a;
    for (int i = 0; i < a.rows(); ++i) {
        double norm = 0.0;
        for (int j = 0; j < a.cols(); ++j) norm += a.at(i, j) * a.at(i, j);
        norm = std::sqrt(norm);
        if (norm == 0.0) continue;
        for (int j = 0; j < a.cols(); ++j) out.at(i, j) /= norm;
    }
    return out;
}

// sum_i || s_hat_i - t_hat_i ||^2 for one sentence.
double normalized_sq_diff(const Tensor& s, const Tensor& t) {
    Tensor sh = normalize_rows(s);
    Tensor th = normalize_rows(t);
    double total = 0.0;
    for (std::size_t i = 0; i < sh.size(); ++i) {
        const double d = sh[i] - th[i];
        total += d * d;
    }
    return total;
}

}  // namespace

double distill_loss(const std::vector<Tensor>& student_logits,
                    const std::vector<Tensor>& teacher_logits) {
    if (student_logits.size() != teacher_logits.size())
        throw std::invalid_argument("distill_loss: batch sizes differ");
    double total = 0.0;
    long positions = 0;
    for (std::size_t j = 0; j < student_logits.size(); ++j) {
        check_pair(student_logits[j], teacher_logits[j]);
        total += normalized_sq_diff(student_logits[j], teacher_logits[j]);
        positions += student_logits[j].rows();
    }
    if (positions == 0) return 0.0;
    return total / (2.0 * static_cast<double>(positions));
}

Var distill_loss(Tape& tape, const std::vector<Var>& student_logits,
                 const std::vector<Tensor>& teacher_logits) {
    if (student_logits.size() != teacher_logits.size())
        throw std::invalid_argument("distill_loss: batch sizes differ");
    long positions = 0;
    for (std::size_t j = 0; j < student_logits.size(); ++j)
        positions += tape.value(student_logits[j]).rows();
    if (positions == 0) return tape.input(Tensor::scalar(0.0));

    Var total;
    for (std::size_t j = 0; j < student_logits.size(); ++j) {
        const Var sv = student_logits[j];
        const Tensor& teacher = teacher_logits[j];
        check_pair(tape.value(sv), teacher);
        Tensor value = Tensor::scalar(normalized_sq_diff(tape.value(sv), teacher));
        Var term = tape.custom(
            {sv}, std::move(value),
            [teacher](Tape& tp, const Tensor& g, const std::vector<Var>& in) {
                const Tensor& s = tp.value(in[0]);
                Tensor sh = normalize_rows(s);
                Tensor th = normalize_rows(teacher);
                Tensor ds(s.shape());
                for (int i = 0; i < s.rows(); ++i) {
                    double norm = 0.0;
                    for (int j2 = 0; j2 < s.cols(); ++j2) norm += s.at(i, j2) * s.at(i, j2);
                    norm = std::sqrt(norm);
                    if (norm == 0.0) continue;  // subgradient at the origin: zero
                    double dot = 0.0;  // (s_hat - t_hat) . s_hat
                    for (int j2 = 0; j2 < s.cols(); ++j2)
                        dot += (sh.at(i, j2) - th.at(i, j2)) * sh.at(i, j2);
                    for (int j2 = 0; j2 < s.cols(); ++j2)
                        ds.at(i, j2) = g[0] * (2.0 / norm) *
                                       ((sh.at(i, j2) - th.at(i, j2)) - dot * sh.at(i, j2));
                }
                tp.accumulate_grad(in[0], ds);
            });
        total = j == 0 ? term : tape.add(total, term);
    }
    return tape.scale(total, 1.0 / (2.0 * static_cast<double>(positions)));
}

double combined_loss(double seg_loss, double dis_loss, double alpha) {
    if (!std::isfinite(seg_loss) || !std::isfinite(dis_loss))
        throw std::invalid_argument("combined_loss: non-finite input");
    if (alpha < 0.0) throw std::invalid_argument("combined_loss: alpha must be >= 0");
    return seg_loss + alpha * dis_loss;
}

Var combined_loss(Tape& tape, Var seg_loss, Var dis_loss, double alpha) {
    if (alpha < 0.0) throw std::invalid_argument("combined_loss: alpha must be >= 0");
    return tape.add(seg_loss, tape.scale(dis_loss, alpha));
}

}  // namespace mcseg
