#include "doctest.h"

#include "dapt/rng.hpp"
#include "dapt/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

using namespace dapt::nn;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, bool grad = true) {
    dapt::Rng rng(seed);
    std::vector<double> v(shape_size(shape));
    for (double& x : v) {
        x = rng.normal();
    }
    return Tensor::from_data(std::move(shape), std::move(v), grad);
}

// weighted sum so every output entry gets a distinct upstream gradient
Tensor probe(const Tensor& t) {
    std::vector<double> w(t.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = std::sin(1.0 + 0.37 * static_cast<double>(i));
    }
    return sum(mul(t, Tensor::from_data(t.shape(), w)));
}

constexpr double kTol = 1e-7;

} // namespace

TEST_CASE("matmul matches a naive product") {
    const auto a = random_tensor({3, 4}, 1, false);
    const auto b = random_tensor({4, 5}, 2, false);
    const auto c = matmul(a, b);
    REQUIRE(c.shape() == Shape{3, 5});
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 5; ++j) {
            double s = 0;
            for (std::size_t k = 0; k < 4; ++k) {
                s += a.data()[i * 4 + k] * b.data()[k * 5 + j];
            }
            CHECK(c.data()[i * 5 + j] == doctest::Approx(s).epsilon(1e-12));
        }
    }
    const auto bt = transpose(b, 0, 1);
    const auto c2 = matmul_nt(a, bt);
    for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK(c2.data()[i] == doctest::Approx(c.data()[i]).epsilon(1e-12));
    }
    CHECK_THROWS_AS(matmul(a, a), ShapeError);
}

TEST_CASE("gradients of each op against central differences") {
    SUBCASE("matmul shared and batched") {
        auto a = random_tensor({2, 3, 4}, 3);
        auto b = random_tensor({4, 2}, 4);
        CHECK(grad_check([&] { return probe(matmul(a, b)); }, {a, b}, 1e-5) < kTol);
        auto c = random_tensor({2, 4, 3}, 5);
        CHECK(grad_check([&] { return probe(matmul(a, c)); }, {a, c}, 1e-5) < kTol);
        auto d = random_tensor({2, 5, 4}, 6);
        CHECK(grad_check([&] { return probe(matmul_nt(a, d)); }, {a, d}, 1e-5) < kTol);
        auto e = random_tensor({6, 4}, 7);
        CHECK(grad_check([&] { return probe(matmul_nt(a, e)); }, {a, e}, 1e-5) < kTol);
    }
    SUBCASE("broadcast add and mul") {
        auto a = random_tensor({2, 3, 4}, 8);
        auto bias = random_tensor({4}, 9);
        auto col = random_tensor({2, 1, 4}, 10);
        auto mask = random_tensor({2, 1, 1, 4}, 11);
        auto x4 = random_tensor({2, 3, 4, 4}, 12);
        CHECK(grad_check([&] { return probe(add(a, bias)); }, {a, bias}, 1e-5) < kTol);
        CHECK(grad_check([&] { return probe(mul(a, col)); }, {a, col}, 1e-5) < kTol);
        CHECK(grad_check([&] { return probe(add(x4, mask)); }, {x4, mask}, 1e-5) < kTol);
        CHECK(grad_check([&] { return probe(mul(a, a)); }, {a}, 1e-5) < kTol);
    }
    SUBCASE("softmax, layer_norm, gelu") {
        auto a = random_tensor({3, 5}, 13);
        auto g = random_tensor({5}, 14);
        auto b = random_tensor({5}, 15);
        CHECK(grad_check([&] { return probe(softmax(a)); }, {a}, 1e-5) < kTol);
        CHECK(grad_check([&] { return probe(layer_norm(a, g, b, 1e-12)); }, {a, g, b}, 1e-5) < kTol);
        CHECK(grad_check([&] { return probe(gelu(a)); }, {a}, 1e-5) < kTol);
    }
    SUBCASE("embedding, cross entropy, reshape, transpose, mean, scale") {
        auto table = random_tensor({6, 3}, 16);
        const std::vector<std::int32_t> ids = {1, 4, 1, 0};
        CHECK(grad_check([&] { return probe(embedding_lookup(table, ids)); }, {table}, 1e-5) < kTol);
        auto logits = random_tensor({4, 6}, 17);
        CHECK(grad_check([&] { return cross_entropy(logits, ids); }, {logits}, 1e-5) < kTol);
        auto x = random_tensor({2, 3, 4}, 18);
        CHECK(grad_check([&] { return probe(transpose(reshape(x, {6, 4}), 0, 1)); }, {x}, 1e-5) < kTol);
        CHECK(grad_check([&] { return probe(transpose(x, 0, 2)); }, {x}, 1e-5) < kTol);
        CHECK(grad_check([&] { return scale(mean(mul(x, x)), 3.0); }, {x}, 1e-5) < kTol);
    }
}

TEST_CASE("shared subexpressions accumulate gradients") {
    auto x = Tensor::from_data({2}, {1.5, -2.0}, true);
    auto y = mul(x, x);
    auto loss = sum(add(y, y)); // 2 x^2
    loss.backward();
    CHECK(x.grad()[0] == doctest::Approx(6.0));
    CHECK(x.grad()[1] == doctest::Approx(-8.0));
    CHECK_THROWS_AS(loss.backward(), AutogradError);
}

TEST_CASE("forward values") {
    const auto s = softmax(Tensor::from_data({2, 3}, {1, 2, 3, 1000, 1000, 1000}));
    CHECK(s.data()[2] == doctest::Approx(std::exp(3.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(3.0))));
    CHECK(s.data()[4] == doctest::Approx(1.0 / 3.0));

    const auto g = gelu(Tensor::from_data({3}, {0.0, 1.0, -1.0}));
    const double c = std::sqrt(2.0 / M_PI);
    CHECK(g.data()[0] == 0.0);
    CHECK(g.data()[1] == doctest::Approx(0.5 * (1 + std::tanh(c * (1 + 0.044715)))));
    CHECK(g.data()[2] == doctest::Approx(-0.5 * (1 + std::tanh(-c * (1 + 0.044715)))));

    const auto ln = layer_norm(Tensor::from_data({1, 4}, {1, 2, 3, 4}), Tensor::full({4}, 1.0),
                               Tensor::zeros({4}), 1e-12);
    double mu = 0, var = 0;
    for (double v : ln.data()) {
        mu += v / 4;
    }
    for (double v : ln.data()) {
        var += (v - mu) * (v - mu) / 4;
    }
    CHECK(std::abs(mu) < 1e-12);
    CHECK(var == doctest::Approx(1.0));

    const auto ce = cross_entropy(Tensor::zeros({2, 7}), std::vector<std::int32_t>{0, 6});
    CHECK(ce.item() == doctest::Approx(std::log(7.0)));
    CHECK_THROWS(cross_entropy(Tensor::zeros({2, 7}), std::vector<std::int32_t>{0, 7}));
}

TEST_CASE("no-grad guard and detach") {
    auto x = random_tensor({3}, 20);
    {
        NoGradGuard guard;
        CHECK_FALSE(grad_enabled());
        auto y = mul(x, x);
        CHECK_FALSE(y.requires_grad());
    }
    CHECK(grad_enabled());
    auto z = mul(x, x);
    CHECK(z.requires_grad());
    CHECK_FALSE(z.detach().requires_grad());
}

TEST_CASE("dropout") {
    dapt::Rng rng(3);
    auto x = Tensor::full({1000}, 1.0);
    auto same = dropout(x, 0.0, rng);
    for (double v : same.data()) {
        CHECK(v == 1.0);
    }
    auto d = dropout(x, 0.25, rng);
    std::size_t zeros = 0;
    for (double v : d.data()) {
        if (v == 0.0) {
            ++zeros;
        } else {
            CHECK(v == doctest::Approx(1.0 / 0.75));
        }
    }
    CHECK(zeros > 200);
    CHECK(zeros < 300);
}

TEST_CASE("dump writes shape and full-precision rows") {
    std::ostringstream out;
    dump(out, Tensor::from_data({2, 2}, {0.1, 2, 3, 4}));
    CHECK(out.str().rfind("shape [2, 2]", 0) == 0);
    CHECK(out.str().find("0.10000000000000001") != std::string::npos);
    CHECK(all_finite(Tensor::full({2}, 1.0)));
    CHECK_FALSE(all_finite(Tensor::full({2}, NAN)));
}
