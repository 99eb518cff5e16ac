#include <cmath>
#include <cstring>

#include "doctest.h"
#include "gcanet/autodiff.hpp"
#include "gcanet/ops.hpp"
#include "gcanet/rng.hpp"
#include "gcanet/tensor.hpp"
#include "oracles.hpp"

using namespace gcanet;

TEST_CASE("tensor fills") {
    Tensor z = Tensor::zeros({2, 3});
    CHECK(z.numel() == 6);
    for (int64_t i = 0; i < 6; ++i) CHECK(z.value_at(i) == 0.0);

    Tensor c = Tensor::full({4}, 1.5);
    for (int64_t i = 0; i < 4; ++i) CHECK(c.value_at(i) == doctest::Approx(1.5));

    CHECK_THROWS_AS(Tensor::zeros({2, 0}), ShapeError);
    CHECK_THROWS_AS(Tensor::zeros({-1}), ShapeError);
}

TEST_CASE("same seed gives bit-identical tensors") {
    Tensor a = Tensor::gaussian({128}, 7, 0.0, 1.0, DType::f64);
    Tensor b = Tensor::gaussian({128}, 7, 0.0, 1.0, DType::f64);
    CHECK(std::memcmp(a.raw_data(), b.raw_data(), 128 * sizeof(double)) == 0);

    Tensor u1 = Tensor::uniform({64}, 3, -2.0, 5.0);
    Tensor u2 = Tensor::uniform({64}, 3, -2.0, 5.0);
    CHECK(std::memcmp(u1.raw_data(), u2.raw_data(), 64 * sizeof(float)) == 0);
    for (int64_t i = 0; i < 64; ++i) {
        CHECK(u1.value_at(i) >= -2.0);
        CHECK(u1.value_at(i) < 5.0);
    }
}

TEST_CASE("rng state serializes exactly") {
    Rng rng(99);
    for (int i = 0; i < 37; ++i) rng.gaussian(0, 1);  // leaves a cached variate
    std::string state = rng.serialize();
    Rng copy = Rng::deserialize(state);
    for (int i = 0; i < 100; ++i) {
        CHECK(rng.gaussian(0, 1) == copy.gaussian(0, 1));
        CHECK(rng.next_u64() == copy.next_u64());
        CHECK(rng.uniform_int(17) == copy.uniform_int(17));
    }
}

TEST_CASE("reduce basics") {
    Tensor x = Tensor::from_values({3}, std::array{1.0, 2.0, 3.0}, DType::f64);
    CHECK(reduce_mean(x).item() == doctest::Approx(2.0));
    CHECK(reduce_sum(Tensor::zeros({5})).item() == 0.0);
}

TEST_CASE("pairwise sum vs naive f64 on 1e6 small values") {
    Tensor x = Tensor::full({1000000}, 1e-3, DType::f64);
    const double pair = reduce_sum(x).item();
    const double naive = oracle::naive_sum(x);
    CHECK(std::abs(pair - naive) / std::abs(naive) < 1e-9);
    CHECK(pair == doctest::Approx(1000.0).epsilon(1e-12));
}

TEST_CASE("backward of sum is all ones") {
    Tensor x = Tensor::uniform({4, 5}, 11, -1.0, 1.0, DType::f64).set_requires_grad(true);
    backward(reduce_sum(x));
    Tensor g = x.grad();
    REQUIRE(g.defined());
    for (int64_t i = 0; i < g.numel(); ++i) CHECK(g.value_at(i) == 1.0);
}

TEST_CASE("backward of sum(x*x) at [1,2] is [2,4]") {
    Tensor x = Tensor::from_values({2}, std::array{1.0, 2.0}, DType::f64)
                   .set_requires_grad(true);
    backward(reduce_sum(multiply(x, x)));
    CHECK(x.grad().value_at(0) == doctest::Approx(2.0));
    CHECK(x.grad().value_at(1) == doctest::Approx(4.0));
}

TEST_CASE("repeated backward accumulates") {
    Tensor x = Tensor::full({3}, 2.0, DType::f64).set_requires_grad(true);
    backward(reduce_sum(x));
    backward(reduce_sum(x));
    for (int64_t i = 0; i < 3; ++i) CHECK(x.grad().value_at(i) == 2.0);
    x.zero_grad();
    CHECK_FALSE(x.grad().defined());
}

TEST_CASE("backward rejects non-scalar loss") {
    Tensor x = Tensor::zeros({3}, DType::f64).set_requires_grad(true);
    Tensor y = scale(x, 2.0);
    CHECK_THROWS_AS(backward(y), ShapeError);
}

TEST_CASE("fan-out accumulates both paths") {
    // y = sum(x) + mean(x): dy/dx = 1 + 1/n
    Tensor x = Tensor::uniform({6}, 5, 0.0, 1.0, DType::f64).set_requires_grad(true);
    backward(add(reduce_sum(x), reduce_mean(x)));
    for (int64_t i = 0; i < 6; ++i)
        CHECK(x.grad().value_at(i) == doctest::Approx(1.0 + 1.0 / 6.0));
}

TEST_CASE("no-grad guard suppresses recording") {
    Tensor x = Tensor::full({2}, 1.0, DType::f64).set_requires_grad(true);
    {
        NoGradGuard ng;
        Tensor y = reduce_sum(x);
        backward(y);  // y is a constant; no gradient flows
    }
    CHECK_FALSE(x.grad().defined());
}

TEST_CASE("detach blocks gradient") {
    Tensor x = Tensor::full({2}, 3.0, DType::f64).set_requires_grad(true);
    Tensor y = scale(x, 2.0).detach();
    backward(reduce_sum(y));
    CHECK_FALSE(x.grad().defined());
}

TEST_CASE("gradcheck: f = sum has near-zero error") {
    Tensor x = Tensor::uniform({7}, 21, -1.0, 1.0, DType::f64);
    const double err = gradcheck([](const Tensor& t) { return reduce_sum(t); }, x);
    CHECK(err < 1e-10);
}

TEST_CASE("gradcheck: sum(relu(x)) away from the kink") {
    Tensor x = Tensor::uniform({64}, 13, 0.05, 1.0, DType::f64);
    // push half the coordinates well below zero
    for (int64_t i = 0; i < 32; ++i) x.set_value_at(i, -x.value_at(i) - 0.05);
    const double err =
        gradcheck([](const Tensor& t) { return reduce_sum(relu(t)); }, x);
    CHECK(err < 1e-6);
}

TEST_CASE("gradcheck on a random composite graph") {
    // scalar = mean(sigmoid(x) * x) + sum(leaky_relu(x)) * 0.5
    Tensor x = Tensor::gaussian({3, 4}, 17, 0.0, 1.0, DType::f64);
    for (int64_t i = 0; i < x.numel(); ++i) {
        // keep coordinates away from the leaky-relu kink
        double v = x.value_at(i);
        if (std::abs(v) < 0.05) x.set_value_at(i, v < 0 ? v - 0.1 : v + 0.1);
    }
    auto f = [](const Tensor& t) {
        Tensor a = reduce_mean(multiply(sigmoid(t), t));
        Tensor b = scale(reduce_sum(leaky_relu(t)), 0.5);
        return add(a, b);
    };
    CHECK(gradcheck(f, x) < 1e-4);
}

TEST_CASE("gradcheck rejects non-f64 input") {
    Tensor x = Tensor::zeros({2});
    CHECK_THROWS_AS(gradcheck([](const Tensor& t) { return reduce_sum(t); }, x),
                    ValueError);
}
