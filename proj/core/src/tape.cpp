#include "mcseg/tape.hpp"

#include <cmath>
#include <stdexcept>

#include "mcseg/tensor_ops.hpp"

namespace mcseg {

Tape::Node& Tape::node(Var v) {
    if (!v.valid() || v.index >= static_cast<int>(nodes_.size()))
        throw std::out_of_range("Tape: invalid Var");
    return nodes_[static_cast<std::size_t>(v.index)];
}

const Tape::Node& Tape::node(Var v) const {
    if (!v.valid() || v.index >= static_cast<int>(nodes_.size()))
        throw std::out_of_range("Tape: invalid Var");
    return nodes_[static_cast<std::size_t>(v.index)];
}

Var Tape::emit(Tensor value, bool requires_grad,
               std::function<void(Tape&, const Tensor&)> bw) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backward = std::move(bw);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::input(Tensor value) { return emit(std::move(value), false, {}); }
Var Tape::param(Tensor value) { return emit(std::move(value), true, {}); }

const Tensor& Tape::value(Var v) const { return node(v).value; }

Tensor Tape::grad(Var v) const {
    const Node& n = node(v);
    if (n.grad.empty()) return Tensor(n.value.shape());
    return n.grad;
}

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

void Tape::accumulate_grad(Var v, const Tensor& delta) {
    Node& n = node(v);
    if (!n.requires_grad) return;
    if (n.grad.empty()) {
        n.grad = delta;
        return;
    }
    if (!n.grad.same_shape(delta)) ops::throw_shape_mismatch("accumulate_grad", n.grad, delta);
    for (std::size_t i = 0; i < delta.size(); ++i) n.grad[i] += delta[i];
}

void Tape::backward(Var loss) {
    Node& top = node(loss);
    if (top.value.size() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got " +
                                    top.value.shape_string());
    if (!top.requires_grad) return;
    accumulate_grad(loss, Tensor::full(top.value.shape(), 1.0));
    for (int i = loss.index; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
        n.backward(*this, n.grad);
    }
}

Var Tape::custom(std::vector<Var> inputs, Tensor value,
                 std::function<void(Tape&, const Tensor&, const std::vector<Var>&)> bw) {
    bool rg = false;
    for (Var v : inputs) rg = rg || requires_grad(v);
    if (!rg) return input(std::move(value));
    auto fn = [inputs = std::move(inputs), bw = std::move(bw)](Tape& t, const Tensor& g) {
        bw(t, g, inputs);
    };
    return emit(std::move(value), true, std::move(fn));
}

Var Tape::matmul(Var a, Var b) {
    Tensor out = ops::matmul(value(a), value(b));
    bool rg = requires_grad(a) || requires_grad(b);
    if (!rg) return input(std::move(out));
    return emit(std::move(out), true, [a, b](Tape& t, const Tensor& g) {
        if (t.requires_grad(a)) t.accumulate_grad(a, ops::matmul_nt(g, t.value(b)));
        if (t.requires_grad(b)) t.accumulate_grad(b, ops::matmul_tn(t.value(a), g));
    });
}

Var Tape::matmul_nt(Var a, Var b) {
    Tensor out = ops::matmul_nt(value(a), value(b));
    bool rg = requires_grad(a) || requires_grad(b);
    if (!rg) return input(std::move(out));
    return emit(std::move(out), true, [a, b](Tape& t, const Tensor& g) {
        // out = A B^T: dA = G B, dB = G^T A
        if (t.requires_grad(a)) t.accumulate_grad(a, ops::matmul(g, t.value(b)));
        if (t.requires_grad(b)) t.accumulate_grad(b, ops::matmul_tn(g, t.value(a)));
    });
}

Var Tape::add(Var a, Var b) {
    Tensor out = ops::add(value(a), value(b));
    bool rg = requires_grad(a) || requires_grad(b);
    if (!rg) return input(std::move(out));
    return emit(std::move(out), true, [a, b](Tape& t, const Tensor& g) {
        t.accumulate_grad(a, g);
        t.accumulate_grad(b, g);
    });
}

Var Tape::sub(Var a, Var b) {
    Tensor out = ops::sub(value(a), value(b));
    bool rg = requires_grad(a) || requires_grad(b);
    if (!rg) return input(std::move(out));
    return emit(std::move(out), true, [a, b](Tape& t, const Tensor& g) {
        t.accumulate_grad(a, g);
        if (t.requires_grad(b)) t.accumulate_grad(b, ops::scale(g, -1.0));
    });
}

Var Tape::mul(Var a, Var b) {
    Tensor out = ops::mul(value(a), value(b));
    bool rg = requires_grad(a) || requires_grad(b);
    if (!rg) return input(std::move(out));
    return emit(std::move(out), true, [a, b](Tape& t, const Tensor& g) {
        if (t.requires_grad(a)) t.accumulate_grad(a, ops::mul(g, t.value(b)));
        if (t.requires_grad(b)) t.accumulate_grad(b, ops::mul(g, t.value(a)));
    });
}

Var Tape::scale(Var a, double c) {
    Tensor out = ops::scale(value(a), c);
    if (!requires_grad(a)) return input(std::move(out));
    return emit(std::move(out), true, [a, c](Tape& t, const Tensor& g) {
        t.accumulate_grad(a, ops::scale(g, c));
    });
}

Var Tape::add_rowvec(Var a, Var bias) {
    Tensor out = ops::add_rowvec(value(a), value(bias));
    bool rg = requires_grad(a) || requires_grad(bias);
    if (!rg) return input(std::move(out));
    return emit(std::move(out), true, [a, bias](Tape& t, const Tensor& g) {
        t.accumulate_grad(a, g);
        if (t.requires_grad(bias)) {
            Tensor db(t.value(bias).shape());
            for (int i = 0; i < g.rows(); ++i)
                for (int j = 0; j < g.cols(); ++j) db[static_cast<std::size_t>(j)] += g.at(i, j);
            t.accumulate_grad(bias, db);
        }
    });
}

Var Tape::softmax_rows(Var a, int valid_cols) {
    Tensor out = ops::softmax_rows(value(a), valid_cols);
    if (!requires_grad(a)) return input(std::move(out));
    Tensor y = out;
    return emit(std::move(out), true, [a, y](Tape& t, const Tensor& g) {
        Tensor da(y.shape());
        for (int i = 0; i < y.rows(); ++i) {
            double dot = 0.0;
            for (int j = 0; j < y.cols(); ++j) dot += g.at(i, j) * y.at(i, j);
            for (int j = 0; j < y.cols(); ++j)
                da.at(i, j) = y.at(i, j) * (g.at(i, j) - dot);
        }
        t.accumulate_grad(a, da);
    });
}

Var Tape::layer_norm(Var a, Var gain, Var bias) {
    const Tensor& x = value(a);
    const Tensor& gn = value(gain);
    Tensor out = ops::layer_norm_rows(x, gn, value(bias));
    bool rg = requires_grad(a) || requires_grad(gain) || requires_grad(bias);
    if (!rg) return input(std::move(out));

    // Cache normalized rows and inverse stddev for the backward pass.
    const int m = x.rows(), n = x.cols();
    Tensor xhat({m, n});
    std::vector<double> inv_std(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += x.at(i, j);
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            double d = x.at(i, j) - mean;
            var += d * d;
        }
        var /= n;
        inv_std[static_cast<std::size_t>(i)] = 1.0 / std::sqrt(var + ops::kLayerNormEps);
        for (int j = 0; j < n; ++j)
            xhat.at(i, j) = (x.at(i, j) - mean) * inv_std[static_cast<std::size_t>(i)];
    }

    return emit(std::move(out), true,
                [a, gain, bias, xhat, inv_std](Tape& t, const Tensor& g) {
        const Tensor& gn = t.value(gain);
        const int m = g.rows(), n = g.cols();
        if (t.requires_grad(a)) {
            Tensor da({m, n});
            for (int i = 0; i < m; ++i) {
                double mean_gy = 0.0, mean_gyx = 0.0;
                for (int j = 0; j < n; ++j) {
                    const double gy = g.at(i, j) * gn[static_cast<std::size_t>(j)];
                    mean_gy += gy;
                    mean_gyx += gy * xhat.at(i, j);
                }
                mean_gy /= n;
                mean_gyx /= n;
                for (int j = 0; j < n; ++j) {
                    const double gy = g.at(i, j) * gn[static_cast<std::size_t>(j)];
                    da.at(i, j) = (gy - mean_gy - xhat.at(i, j) * mean_gyx) *
                                  inv_std[static_cast<std::size_t>(i)];
                }
            }
            t.accumulate_grad(a, da);
        }
        if (t.requires_grad(gain)) {
            Tensor dg(t.value(gain).shape());
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    dg[static_cast<std::size_t>(j)] += g.at(i, j) * xhat.at(i, j);
            t.accumulate_grad(gain, dg);
        }
        if (t.requires_grad(bias)) {
            Tensor db(t.value(bias).shape());
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) db[static_cast<std::size_t>(j)] += g.at(i, j);
            t.accumulate_grad(bias, db);
        }
    });
}

Var Tape::gelu(Var a) {
    Tensor out = ops::gelu(value(a));
    if (!requires_grad(a)) return input(std::move(out));
    Tensor x = value(a);
    return emit(std::move(out), true, [a, x](Tape& t, const Tensor& g) {
        Tensor da = g;
        for (std::size_t i = 0; i < da.size(); ++i) da[i] *= ops::gelu_grad_scalar(x[i]);
        t.accumulate_grad(a, da);
    });
}

Var Tape::relu(Var a) {
    Tensor out = ops::relu(value(a));
    if (!requires_grad(a)) return input(std::move(out));
    Tensor x = value(a);
    return emit(std::move(out), true, [a, x](Tape& t, const Tensor& g) {
        Tensor da = g;
        for (std::size_t i = 0; i < da.size(); ++i)
            if (x[i] <= 0.0) da[i] = 0.0;
        t.accumulate_grad(a, da);
    });
}

Var Tape::dropout(Var a, double p, Rng& rng, bool training) {
    if (!training || p <= 0.0) return a;  // identity, no node
    if (p >= 1.0) throw std::invalid_argument("dropout: p must be < 1");
    const Tensor& x = value(a);
    Tensor mask(x.shape());
    const double keep = 1.0 - p;
    for (auto& m : mask.raw()) m = rng.uniform() < p ? 0.0 : 1.0 / keep;
    Tensor out = ops::mul(x, mask);
    if (!requires_grad(a)) return input(std::move(out));
    return emit(std::move(out), true, [a, mask](Tape& t, const Tensor& g) {
        t.accumulate_grad(a, ops::mul(g, mask));
    });
}

Var Tape::concat_cols(Var a, Var b) {
    Tensor out = ops::concat_cols(value(a), value(b));
    bool rg = requires_grad(a) || requires_grad(b);
    if (!rg) return input(std::move(out));
    const int ca = value(a).cols();
    return emit(std::move(out), true, [a, b, ca](Tape& t, const Tensor& g) {
        if (t.requires_grad(a)) t.accumulate_grad(a, ops::slice_cols(g, 0, ca));
        if (t.requires_grad(b)) t.accumulate_grad(b, ops::slice_cols(g, ca, g.cols()));
    });
}

Var Tape::slice_cols(Var a, int c0, int c1) {
    Tensor out = ops::slice_cols(value(a), c0, c1);
    if (!requires_grad(a)) return input(std::move(out));
    return emit(std::move(out), true, [a, c0, c1](Tape& t, const Tensor& g) {
        Tensor da(t.value(a).shape());
        for (int i = 0; i < g.rows(); ++i)
            for (int j = c0; j < c1; ++j) da.at(i, j) = g.at(i, j - c0);
        t.accumulate_grad(a, da);
    });
}

Var Tape::gather_rows(Var table, std::vector<int> ids) {
    Tensor out = ops::gather_rows(value(table), ids);
    if (!requires_grad(table)) return input(std::move(out));
    return emit(std::move(out), true, [table, ids = std::move(ids)](Tape& t, const Tensor& g) {
        Tensor dt(t.value(table).shape());
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (int j = 0; j < g.cols(); ++j)
                dt.at(ids[i], j) += g.at(static_cast<int>(i), j);
        t.accumulate_grad(table, dt);
    });
}

Var Tape::sum_all(Var a) {
    Tensor out = Tensor::scalar(ops::sum_all(value(a)));
    if (!requires_grad(a)) return input(std::move(out));
    return emit(std::move(out), true, [a](Tape& t, const Tensor& g) {
        t.accumulate_grad(a, Tensor::full(t.value(a).shape(), g[0]));
    });
}

Var Tape::layer_mix(Var logits, std::vector<Tensor> layers) {
    const Tensor& w = value(logits);
    const int L = static_cast<int>(w.size());
    if (L != static_cast<int>(layers.size()) || L == 0)
        throw std::invalid_argument("layer_mix: logits length must match layer count");
    for (const Tensor& h : layers)
        if (!h.same_shape(layers[0])) ops::throw_shape_mismatch("layer_mix", h, layers[0]);

    // p = softmax(logits); out = sum_l p_l H_l
    std::vector<double> p(static_cast<std::size_t>(L));
    double mx = w[0];
    for (int l = 1; l < L; ++l) mx = std::max(mx, w[static_cast<std::size_t>(l)]);
    double z = 0.0;
    for (int l = 0; l < L; ++l) {
        p[static_cast<std::size_t>(l)] = std::exp(w[static_cast<std::size_t>(l)] - mx);
        z += p[static_cast<std::size_t>(l)];
    }
    for (auto& x : p) x /= z;

    Tensor out(layers[0].shape());
    for (int l = 0; l < L; ++l)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += p[static_cast<std::size_t>(l)] * layers[static_cast<std::size_t>(l)][i];

    if (!requires_grad(logits)) return input(std::move(out));
    return emit(std::move(out), true,
                [logits, layers = std::move(layers), p](Tape& t, const Tensor& g) {
        const int L = static_cast<int>(p.size());
        // dL/dp_l = <G, H_l>, then softmax jacobian back to the logits.
        std::vector<double> dp(static_cast<std::size_t>(L), 0.0);
        for (int l = 0; l < L; ++l) {
            double s = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * layers[static_cast<std::size_t>(l)][i];
            dp[static_cast<std::size_t>(l)] = s;
        }
        double dot = 0.0;
        for (int l = 0; l < L; ++l) dot += dp[static_cast<std::size_t>(l)] * p[static_cast<std::size_t>(l)];
        Tensor dw(t.value(logits).shape());
        for (int l = 0; l < L; ++l)
            dw[static_cast<std::size_t>(l)] = p[static_cast<std::size_t>(l)] * (dp[static_cast<std::size_t>(l)] - dot);
        t.accumulate_grad(logits, dw);
    });
}

}  // namespace mcseg
