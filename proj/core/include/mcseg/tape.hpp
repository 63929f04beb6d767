#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mcseg/rng.hpp"
#include "mcseg/tensor.hpp"

namespace mcseg {

// Handle into a Tape. Valid only for the tape that minted it.
struct Var {
    int index = -1;
    bool valid() const { return index >= 0; }
};

// Reverse-mode autodiff over Tensor values. Operations append nodes in
// topological order; backward() walks the node list in reverse and
// accumulates gradients into every parameter that participated in the
// forward pass. Constants (input) never receive gradients.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Leaves.
    Var input(Tensor value);  // constant, no gradient
    Var param(Tensor value);  // differentiable leaf

    // Elementwise / linear algebra. Shapes follow tensor_ops semantics.
    Var matmul(Var a, Var b);
    Var matmul_nt(Var a, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double c);
    Var add_rowvec(Var a, Var bias);
    Var softmax_rows(Var a, int valid_cols = -1);
    Var layer_norm(Var a, Var gain, Var bias);
    Var gelu(Var a);
    Var relu(Var a);
    Var dropout(Var a, double p, Rng& rng, bool training);
    Var concat_cols(Var a, Var b);
    Var slice_cols(Var a, int c0, int c1);
    Var gather_rows(Var table, std::vector<int> ids);
    Var sum_all(Var a);  // -> [1,1]

    // Mixes constant per-layer states H_l with softmax(logits) weights:
    // out = sum_l softmax(logits)_l * layers[l]. Gradient flows to logits.
    Var layer_mix(Var logits, std::vector<Tensor> layers);

    // Escape hatch for fused ops defined in other modules (CRF, distill).
    // `bw` receives the upstream gradient and must accumulate into the
    // inputs via accumulate_grad.
    Var custom(std::vector<Var> inputs, Tensor value,
               std::function<void(Tape&, const Tensor&, const std::vector<Var>&)> bw);

    const Tensor& value(Var v) const;
    // Gradient accumulated by the last backward(); zeros if the node never
    // participated. Only meaningful for param leaves and intermediates.
    Tensor grad(Var v) const;
    bool requires_grad(Var v) const;

    void accumulate_grad(Var v, const Tensor& delta);

    // Seeds d(loss)/d(loss) = 1 and sweeps the node list in reverse.
    // `loss` must hold exactly one element.
    void backward(Var loss);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;  // empty until touched
        bool requires_grad = false;
        std::function<void(Tape&, const Tensor&)> backward;  // empty for leaves
    };

    Var emit(Tensor value, bool requires_grad,
             std::function<void(Tape&, const Tensor&)> bw);
    Node& node(Var v);
    const Node& node(Var v) const;

    std::vector<Node> nodes_;
};

}  // namespace mcseg
