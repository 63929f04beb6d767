#include <doctest.h>

#include <cmath>

#include "mcseg/gradcheck.hpp"
#include "mcseg/tensor_ops.hpp"
#include "support/test_util.hpp"

using namespace mcseg;

TEST_SUITE("autodiff") {

TEST_CASE("gradient of a linear map is exact") {
    ParamStore params;
    Rng rng(3);
    params.add("w", testutil::random_tensor({3, 2}, rng));
    auto loss = [](Tape& t, BoundParams& bp) {
        Tensor c({2, 3}, {1.0, -2.0, 0.5, 3.0, 0.25, -1.0});
        return t.sum_all(t.matmul(t.input(c), bp["w"]));
    };
    GradCheckReport report = grad_check(loss, params, 1e-6);
    CHECK(report.max_rel_err < 1e-9);
}

TEST_CASE("backward produces zero gradients for non-participating parameters") {
    Tape tape;
    Var used = tape.param(Tensor::full({2, 2}, 1.0));
    Var unused = tape.param(Tensor::full({2, 2}, 5.0));
    Var loss = tape.sum_all(tape.mul(used, used));
    tape.backward(loss);
    Tensor gu = tape.grad(unused);
    for (double v : gu.raw()) CHECK(v == 0.0);
    Tensor g = tape.grad(used);
    for (double v : g.raw()) CHECK(v == doctest::Approx(2.0));
}

TEST_CASE("constants never accumulate gradients") {
    Tape tape;
    Var c = tape.input(Tensor::full({2, 2}, 3.0));
    Var p = tape.param(Tensor::full({2, 2}, 2.0));
    Var loss = tape.sum_all(tape.mul(c, p));
    tape.backward(loss);
    CHECK(!tape.requires_grad(c));
    Tensor gc = tape.grad(c);
    for (double v : gc.raw()) CHECK(v == 0.0);
}

TEST_CASE("every elementary op passes a finite-difference check") {
    Rng rng(17);
    ParamStore params;
    params.add("a", testutil::random_tensor({3, 4}, rng));
    params.add("b", testutil::random_tensor({4, 5}, rng));
    params.add("c", testutil::random_tensor({3, 5}, rng));
    params.add("d", testutil::random_tensor({3, 5}, rng));
    params.add("bias", testutil::random_tensor({5}, rng));
    params.add("gain", testutil::random_tensor({5}, rng, 0.5, 1.5));
    params.add("nt", testutil::random_tensor({5, 4}, rng));

    SUBCASE("matmul + add_rowvec") {
        auto loss = [](Tape& t, BoundParams& bp) {
            return t.sum_all(t.add_rowvec(t.matmul(bp["a"], bp["b"]), bp["bias"]));
        };
        CHECK(grad_check(loss, params).max_rel_err < 1e-6);
    }
    SUBCASE("matmul_nt") {
        auto loss = [](Tape& t, BoundParams& bp) {
            return t.sum_all(t.matmul_nt(bp["a"], bp["nt"]));
        };
        CHECK(grad_check(loss, params).max_rel_err < 1e-6);
    }
    SUBCASE("elementwise mul, sub, scale") {
        auto loss = [](Tape& t, BoundParams& bp) {
            return t.sum_all(t.scale(t.mul(t.sub(bp["c"], bp["d"]), bp["c"]), 0.7));
        };
        CHECK(grad_check(loss, params).max_rel_err < 1e-6);
    }
    SUBCASE("softmax wiggles through a weighted sum") {
        auto loss = [](Tape& t, BoundParams& bp) {
            return t.sum_all(t.mul(t.softmax_rows(bp["c"]), bp["d"]));
        };
        CHECK(grad_check(loss, params).max_rel_err < 1e-5);
    }
    SUBCASE("layer norm") {
        auto loss = [](Tape& t, BoundParams& bp) {
            return t.sum_all(t.mul(t.layer_norm(bp["c"], bp["gain"], bp["bias"]), bp["d"]));
        };
        CHECK(grad_check(loss, params).max_rel_err < 1e-5);
    }
    SUBCASE("gelu") {
        auto loss = [](Tape& t, BoundParams& bp) {
            return t.sum_all(t.gelu(bp["c"]));
        };
        CHECK(grad_check(loss, params).max_rel_err < 1e-6);
    }
    SUBCASE("slice and concat") {
        auto loss = [](Tape& t, BoundParams& bp) {
            Var cat = t.concat_cols(bp["c"], bp["d"]);
            return t.sum_all(t.mul(t.slice_cols(cat, 2, 7), t.slice_cols(cat, 3, 8)));
        };
        CHECK(grad_check(loss, params).max_rel_err < 1e-6);
    }
    SUBCASE("gather_rows") {
        auto loss = [](Tape& t, BoundParams& bp) {
            return t.sum_all(t.mul(t.gather_rows(bp["b"], {1, 3, 1}), t.input(Tensor::full({3, 5}, 0.5))));
        };
        CHECK(grad_check(loss, params).max_rel_err < 1e-6);
    }
}

TEST_CASE("layer_mix gradient and uniform start") {
    Rng rng(23);
    std::vector<Tensor> layers;
    for (int l = 0; l < 4; ++l) layers.push_back(testutil::random_tensor({3, 2}, rng));

    ParamStore params;
    params.add("mix", Tensor({4}));
    auto loss = [&](Tape& t, BoundParams& bp) {
        Var mixed = t.layer_mix(bp["mix"], layers);
        return t.sum_all(t.mul(mixed, mixed));
    };
    CHECK(grad_check(loss, params).max_rel_err < 1e-5);

    // zero logits mix uniformly
    Tape tape;
    Var mixed = tape.layer_mix(tape.param(Tensor({4})), layers);
    Tensor expect({3, 2});
    for (const auto& h : layers)
        for (std::size_t i = 0; i < expect.size(); ++i) expect[i] += 0.25 * h[i];
    CHECK(testutil::max_abs_diff(tape.value(mixed), expect) < 1e-12);
}

TEST_CASE("random small graphs match finite differences") {
    // Property: any composition of the provided ops stays within 1e-3
    // relative error of central differences.
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed * 77);
        const int m = 2 + static_cast<int>(rng.below(3));
        const int n = 2 + static_cast<int>(rng.below(3));
        ParamStore params;
        params.add("x0", testutil::random_tensor({m, n}, rng));
        const int steps = 2 + static_cast<int>(rng.below(4));
        std::vector<int> ops_chosen;
        std::vector<Tensor> partners;
        std::vector<int> widths;
        int cur_cols = n;
        for (int s = 0; s < steps; ++s) {
            const int op = static_cast<int>(rng.below(6));
            ops_chosen.push_back(op);
            if (op == 0) {  // matmul with a fresh parameter
                const int k = 2 + static_cast<int>(rng.below(3));
                params.add("w" + std::to_string(s), testutil::random_tensor({cur_cols, k}, rng));
                widths.push_back(k);
                cur_cols = k;
            } else if (op == 1) {  // add a constant partner
                partners.push_back(testutil::random_tensor({m, cur_cols}, rng));
                widths.push_back(cur_cols);
            } else {
                widths.push_back(cur_cols);
            }
        }
        auto loss = [&](Tape& t, BoundParams& bp) {
            Var x = bp["x0"];
            std::size_t partner_idx = 0;
            for (int s = 0; s < steps; ++s) {
                switch (ops_chosen[static_cast<std::size_t>(s)]) {
                    case 0:
                        x = t.matmul(x, bp["w" + std::to_string(s)]);
                        break;
                    case 1:
                        x = t.add(x, t.input(partners[partner_idx++]));
                        break;
                    case 2:
                        x = t.gelu(x);
                        break;
                    case 3:
                        x = t.softmax_rows(x);
                        break;
                    case 4:
                        x = t.scale(x, 1.7);
                        break;
                    case 5:
                        x = t.mul(x, x);
                        break;
                }
            }
            return t.sum_all(x);
        };
        GradCheckReport report = grad_check(loss, params);
        CAPTURE(seed);
        CHECK(report.max_rel_err < 1e-3);
    }
}

}  // TEST_SUITE
