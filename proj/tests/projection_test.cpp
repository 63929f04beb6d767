#include <doctest.h>

#include "mcseg/crf.hpp"
#include "mcseg/projection.hpp"
#include "mcseg/tensor_ops.hpp"
#include "support/test_util.hpp"

using namespace mcseg;

namespace {

ParamStore two_domain_store(int d_h, std::uint64_t seed) {
    ParamStore store;
    Rng rng(seed);
    init_projection_params(store, {"pku", "ctb"}, d_h, rng, /*with_shared=*/true);
    return store;
}

}  // namespace

TEST_SUITE("projection") {

TEST_CASE("identity weight and zero bias pass features through") {
    ParamStore store = two_domain_store(3, 1);
    Tensor eye({3, 3});
    for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
    store.at(proj_names::weight("pku")) = eye;
    store.at(proj_names::bias("pku")) = Tensor({3});

    Rng rng(2);
    Tensor h = testutil::random_tensor({4, 3}, rng);
    auto [hd, hs] = project(store, h, "pku", {"pku", "ctb"});
    CHECK(testutil::max_abs_diff(hd, h) < 1e-15);
}

TEST_CASE("zero weight maps every row to the bias") {
    ParamStore store = two_domain_store(3, 3);
    store.at(proj_names::weight("ctb")) = Tensor({3, 3});
    store.at(proj_names::bias("ctb")) = Tensor({3}, {0.5, -1.0, 2.0});
    Rng rng(4);
    Tensor h = testutil::random_tensor({5, 3}, rng);
    auto [hd, hs] = project(store, h, "ctb", {"pku", "ctb"});
    for (int i = 0; i < 5; ++i) {
        CHECK(hd.at(i, 0) == doctest::Approx(0.5));
        CHECK(hd.at(i, 1) == doctest::Approx(-1.0));
        CHECK(hd.at(i, 2) == doctest::Approx(2.0));
    }
}

TEST_CASE("projection matches a triple-loop oracle") {
    ParamStore store = two_domain_store(3, 5);
    Rng rng(6);
    Tensor h = testutil::random_tensor({2, 3}, rng);
    auto [hd, hs] = project(store, h, "pku", {"pku", "ctb"});

    const Tensor& w = store.at(proj_names::weight("pku"));
    const Tensor& b = store.at(proj_names::bias("pku"));
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = b[static_cast<std::size_t>(j)];
            for (int k = 0; k < 3; ++k) s += h.at(i, k) * w.at(k, j);
            CHECK(hd.at(i, j) == doctest::Approx(s).epsilon(1e-12));
        }
}

TEST_CASE("unknown domains are listed in the error") {
    ParamStore store = two_domain_store(3, 7);
    Tensor h({1, 3});
    CHECK_THROWS_WITH_AS(project(store, h, "msr", {"pku", "ctb"}),
                         doctest::Contains("pku"), UnknownDomainError);
}

TEST_CASE("shared-only projection duplicates the shared slot") {
    ParamStore store = two_domain_store(3, 8);
    Rng rng(9);
    Tensor h = testutil::random_tensor({4, 3}, rng);
    auto [a, b] = project_shared_only(store, h);
    CHECK(testutil::bit_equal(a, b));
    auto [hd, hs] = project(store, h, "pku", {"pku", "ctb"});
    CHECK(testutil::bit_equal(a, hs));
}

TEST_CASE("shared-only output flows through the emission head unchanged in shape") {
    ParamStore store = two_domain_store(4, 10);
    Rng rng(11);
    Tensor h = testutil::random_tensor({3, 4}, rng);
    auto [a, b] = project_shared_only(store, h);
    Tensor w = testutil::random_tensor({8, 4}, rng);
    Tensor bias = testutil::random_tensor({4}, rng);
    Tensor scores = emission_scores(a, b, w, bias);
    CHECK(scores.rows() == 3);
    CHECK(scores.cols() == 4);
}

TEST_CASE("projection is linear in the bias-free case") {
    ParamStore store = two_domain_store(3, 12);
    store.at(proj_names::bias("pku")) = Tensor({3});
    store.at(proj_names::kSharedBias) = Tensor({3});
    Rng rng(13);
    Tensor h1 = testutil::random_tensor({2, 3}, rng);
    Tensor h2 = testutil::random_tensor({2, 3}, rng);
    const double a = 1.7;
    Tensor combo = ops::add(ops::scale(h1, a), h2);
    auto [lhs_d, lhs_s] = project(store, combo, "pku", {"pku", "ctb"});
    auto [p1d, p1s] = project(store, h1, "pku", {"pku", "ctb"});
    auto [p2d, p2s] = project(store, h2, "pku", {"pku", "ctb"});
    CHECK(testutil::max_abs_diff(lhs_d, ops::add(ops::scale(p1d, a), p2d)) < 1e-12);
    CHECK(testutil::max_abs_diff(lhs_s, ops::add(ops::scale(p1s, a), p2s)) < 1e-12);
}

TEST_CASE("gradients only reach the projecting domain, shared always learns") {
    ParamStore store = two_domain_store(3, 14);
    Rng rng(15);
    Tensor h = testutil::random_tensor({2, 3}, rng);

    Tape tape;
    BoundParams bp(tape, store);
    auto [hd, hs] = project(tape, bp, tape.input(h), "pku", {"pku", "ctb"});
    Var loss = tape.sum_all(tape.add(hd, hs));
    tape.backward(loss);
    GradMap grads = bp.grads();

    CHECK(grads.count(proj_names::weight("pku")) == 1);
    CHECK(grads.count(proj_names::kSharedWeight) == 1);
    CHECK(grads.count(proj_names::weight("ctb")) == 0);  // never bound, never updated

    double pku_norm = 0.0;
    for (double v : grads[proj_names::weight("pku")].raw()) pku_norm += v * v;
    CHECK(pku_norm > 0.0);
}

TEST_CASE("single-criteria stores allocate no shared parameters") {
    ParamStore store;
    Rng rng(16);
    init_projection_params(store, {"solo"}, 4, rng, /*with_shared=*/false);
    CHECK(store.contains(proj_names::weight("solo")));
    CHECK(!store.contains(proj_names::kSharedWeight));
    CHECK(!store.contains(proj_names::kSharedBias));
}

}  // TEST_SUITE
