#include "mcseg/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mcseg/tensor_ops.hpp"

namespace mcseg {

namespace {

constexpr int L = kNumLabels;

void check_scores(const Tensor& scores) {
    if (scores.rank() != 2 || scores.cols() != L)
        throw std::invalid_argument("crf: scores must be [n," + std::to_string(L) +
                                    "], got " + scores.shape_string());
}

void check_trans(const Tensor& trans) {
    if (trans.rank() != 2 || trans.rows() != L || trans.cols() != L)
        throw std::invalid_argument("crf: transitions must be [4,4], got " +
                                    trans.shape_string());
}

void check_tags(const std::vector<Label>& tags, int n) {
    if (static_cast<int>(tags.size()) != n)
        throw std::invalid_argument("crf: tag count " + std::to_string(tags.size()) +
                                    " does not match " + std::to_string(n) + " positions");
    for (Label t : tags) {
        const int v = static_cast<int>(t);
        if (v < 0 || v >= L) throw std::invalid_argument("crf: invalid tag id");
    }
}

double logsumexp4(const double* v) {
    double mx = v[0];
    for (int i = 1; i < L; ++i) mx = std::max(mx, v[i]);
    double z = 0.0;
    for (int i = 0; i < L; ++i) z += std::exp(v[i] - mx);
    return mx + std::log(z);
}

double path_score(const Tensor& scores, const Tensor& trans, const std::vector<Label>& tags) {
    double s = 0.0;
    for (int i = 0; i < scores.rows(); ++i) {
        s += scores.at(i, static_cast<int>(tags[static_cast<std::size_t>(i)]));
        if (i > 0)
            s += trans.at(static_cast<int>(tags[static_cast<std::size_t>(i - 1)]),
                          static_cast<int>(tags[static_cast<std::size_t>(i)]));
    }
    return s;
}

// alpha[i][y] = log sum of path prefixes ending at position i with label y.
Tensor forward_log(const Tensor& scores, const Tensor& trans) {
    const int n = scores.rows();
    Tensor alpha({n, L});
    for (int y = 0; y < L; ++y) alpha.at(0, y) = scores.at(0, y);
    double buf[L];
    for (int i = 1; i < n; ++i)
        for (int y = 0; y < L; ++y) {
            for (int p = 0; p < L; ++p) buf[p] = alpha.at(i - 1, p) + trans.at(p, y);
            alpha.at(i, y) = scores.at(i, y) + logsumexp4(buf);
        }
    return alpha;
}

// beta[i][y] = log sum of path suffixes starting after position i given label y.
Tensor backward_log(const Tensor& scores, const Tensor& trans) {
    const int n = scores.rows();
    Tensor beta({n, L});
    double buf[L];
    for (int i = n - 2; i >= 0; --i)
        for (int y = 0; y < L; ++y) {
            for (int q = 0; q < L; ++q)
                buf[q] = trans.at(y, q) + scores.at(i + 1, q) + beta.at(i + 1, q);
            beta.at(i, y) = logsumexp4(buf);
        }
    return beta;
}

}  // namespace

Tensor emission_scores(const Tensor& h_domain, const Tensor& h_shared,
                       const Tensor& w_s, const Tensor& b_s) {
    if (!h_domain.same_shape(h_shared))
        ops::throw_shape_mismatch("emission_scores", h_domain, h_shared);
    if (h_domain.rows() == 0) return Tensor({0, L});
    Tensor cat = ops::concat_cols(h_domain, h_shared);
    return ops::add_rowvec(ops::matmul(cat, w_s), b_s);
}

Var emission_scores(Tape& tape, Var h_domain, Var h_shared, Var w_s, Var b_s) {
    Var cat = tape.concat_cols(h_domain, h_shared);
    return tape.add_rowvec(tape.matmul(cat, w_s), b_s);
}

double log_partition(const Tensor& scores, const Tensor& trans) {
    check_scores(scores);
    check_trans(trans);
    if (scores.rows() == 0) throw std::invalid_argument("log_partition: empty sequence");
    Tensor alpha = forward_log(scores, trans);
    double last[L];
    for (int y = 0; y < L; ++y) last[y] = alpha.at(scores.rows() - 1, y);
    return logsumexp4(last);
}

double log_likelihood(const Tensor& scores, const Tensor& trans,
                      const std::vector<Label>& tags) {
    check_scores(scores);
    check_trans(trans);
    check_tags(tags, scores.rows());
    if (scores.rows() == 0) throw std::invalid_argument("log_likelihood: empty sequence");
    return path_score(scores, trans, tags) - log_partition(scores, trans);
}

std::pair<std::vector<Label>, double> viterbi(const Tensor& scores, const Tensor& trans) {
    check_scores(scores);
    check_trans(trans);
    const int n = scores.rows();
    if (n == 0) throw std::invalid_argument("viterbi: empty sequence");

    Tensor best({n, L});
    std::vector<int> back(static_cast<std::size_t>(n) * L, 0);
    for (int y = 0; y < L; ++y) best.at(0, y) = scores.at(0, y);
    for (int i = 1; i < n; ++i)
        for (int y = 0; y < L; ++y) {
            // strict > keeps the lowest previous label on ties
            double b = best.at(i - 1, 0) + trans.at(0, y);
            int arg = 0;
            for (int p = 1; p < L; ++p) {
                const double cand = best.at(i - 1, p) + trans.at(p, y);
                if (cand > b) {
                    b = cand;
                    arg = p;
                }
            }
            best.at(i, y) = b + scores.at(i, y);
            back[static_cast<std::size_t>(i) * L + y] = arg;
        }

    int arg = 0;
    double top = best.at(n - 1, 0);
    for (int y = 1; y < L; ++y)
        if (best.at(n - 1, y) > top) {
            top = best.at(n - 1, y);
            arg = y;
        }

    std::vector<Label> tags(static_cast<std::size_t>(n));
    tags[static_cast<std::size_t>(n - 1)] = static_cast<Label>(arg);
    for (int i = n - 1; i > 0; --i) {
        arg = back[static_cast<std::size_t>(i) * L + arg];
        tags[static_cast<std::size_t>(i - 1)] = static_cast<Label>(arg);
    }
    return {std::move(tags), top};
}

double posterior_brute_force(const Tensor& scores, const Tensor& trans,
                             const std::vector<Label>& tags) {
    check_scores(scores);
    check_trans(trans);
    const int n = scores.rows();
    check_tags(tags, n);
    if (n == 0) throw std::invalid_argument("posterior_brute_force: empty sequence");
    if (n > 8) throw std::invalid_argument("posterior_brute_force: n > 8 is too large");

    const double target = path_score(scores, trans, tags);
    // log sum over all 4^n paths, streamed with a running logsumexp.
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<double> all;
    all.reserve(static_cast<std::size_t>(std::pow(L, n)));
    std::vector<Label> y(static_cast<std::size_t>(n), Label::B);
    while (true) {
        const double s = path_score(scores, trans, y);
        all.push_back(s);
        mx = std::max(mx, s);
        int i = 0;
        for (; i < n; ++i) {
            int v = static_cast<int>(y[static_cast<std::size_t>(i)]) + 1;
            if (v < L) {
                y[static_cast<std::size_t>(i)] = static_cast<Label>(v);
                break;
            }
            y[static_cast<std::size_t>(i)] = Label::B;
        }
        if (i == n) break;
    }
    double z = 0.0;
    for (double s : all) z += std::exp(s - mx);
    return std::exp(target - (mx + std::log(z)));
}

Tensor crf_marginals(const Tensor& scores, const Tensor& trans) {
    check_scores(scores);
    check_trans(trans);
    const int n = scores.rows();
    if (n == 0) throw std::invalid_argument("crf_marginals: empty sequence");
    Tensor alpha = forward_log(scores, trans);
    Tensor beta = backward_log(scores, trans);
    double last[L];
    for (int y = 0; y < L; ++y) last[y] = alpha.at(n - 1, y);
    const double log_z = logsumexp4(last);
    Tensor out({n, L});
    for (int i = 0; i < n; ++i)
        for (int y = 0; y < L; ++y)
            out.at(i, y) = std::exp(alpha.at(i, y) + beta.at(i, y) - log_z);
    return out;
}

Var crf_log_likelihood(Tape& tape, Var scores, Var trans, std::vector<Label> tags) {
    const Tensor& s = tape.value(scores);
    const Tensor& t = tape.value(trans);
    check_scores(s);
    check_trans(t);
    const int n = s.rows();
    check_tags(tags, n);
    if (n == 0) throw std::invalid_argument("crf_log_likelihood: empty sequence");

    const double ll = log_likelihood(s, t, tags);
    return tape.custom(
        {scores, trans}, Tensor::scalar(ll),
        [tags = std::move(tags)](Tape& tp, const Tensor& g, const std::vector<Var>& in) {
            const Tensor& s = tp.value(in[0]);
            const Tensor& t = tp.value(in[1]);
            const int n = s.rows();
            const double go = g[0];

            Tensor alpha = forward_log(s, t);
            Tensor beta = backward_log(s, t);
            double last[L];
            for (int y = 0; y < L; ++y) last[y] = alpha.at(n - 1, y);
            const double log_z = logsumexp4(last);

            if (tp.requires_grad(in[0])) {
                Tensor ds({n, L});
                for (int i = 0; i < n; ++i)
                    for (int y = 0; y < L; ++y) {
                        const double marg = std::exp(alpha.at(i, y) + beta.at(i, y) - log_z);
                        const double hot =
                            static_cast<int>(tags[static_cast<std::size_t>(i)]) == y ? 1.0 : 0.0;
                        ds.at(i, y) = go * (hot - marg);
                    }
                tp.accumulate_grad(in[0], ds);
            }
            if (tp.requires_grad(in[1])) {
                Tensor dt({L, L});
                for (int i = 1; i < n; ++i)
                    for (int a = 0; a < L; ++a)
                        for (int b = 0; b < L; ++b) {
                            const double pair = std::exp(alpha.at(i - 1, a) + t.at(a, b) +
                                                         s.at(i, b) + beta.at(i, b) - log_z);
                            const double hot =
                                (static_cast<int>(tags[static_cast<std::size_t>(i - 1)]) == a &&
                                 static_cast<int>(tags[static_cast<std::size_t>(i)]) == b)
                                    ? 1.0
                                    : 0.0;
                            dt.at(a, b) += go * (hot - pair);
                        }
                tp.accumulate_grad(in[1], dt);
            }
        });
}

}  // namespace mcseg
