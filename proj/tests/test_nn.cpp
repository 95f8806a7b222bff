#include "oracles.hpp"

#include "raylink/nn/adam.hpp"
#include "raylink/nn/checkpoint.hpp"
#include "raylink/nn/layers.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>

using namespace raylink;
using namespace raylink::nn;
using oracles::conv_oracle;
using oracles::Fn;
using oracles::gradient_error;
using oracles::random_tensor;

namespace {

// Values bounded away from zero so piecewise-linear ops are smooth at the
// evaluation point.
Tensor away_from_zero(Shape shape, Rng& rng)
{
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = (rng.uniform(0.05, 1.0)) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    return t;
}

Var param(Tensor t) { return Var::parameter(std::move(t)); }

}  // namespace

TEST_CASE("conv2d matches the direct oracle")
{
    Rng rng(1);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t b = 1 + rng.below(3), c = 1 + rng.below(4), o = 1 + rng.below(4);
        const std::size_t h = 1 + rng.below(7), w = 1 + rng.below(7);
        const Tensor in = random_tensor({b, c, h, w}, rng);
        const Tensor k = random_tensor({o, c, 3, 3}, rng);
        const Tensor bias = random_tensor({o}, rng);
        const Tensor with = conv2d(Var(in), Var(k), Var(bias)).value();
        const Tensor without = conv2d(Var(in), Var(k)).value();
        const Tensor want = conv_oracle(in, k, bias), want0 = conv_oracle(in, k, Tensor{});
        REQUIRE(with.shape() == want.shape());
        double worst = 0.0;
        for (std::size_t i = 0; i < want.size(); ++i)
            worst = std::max({worst, std::abs(with[i] - want[i]), std::abs(without[i] - want0[i])});
        CHECK(worst < 1e-12);
    }
}

TEST_CASE("conv2d closed forms")
{
    Rng rng(2);
    const Tensor in = random_tensor({1, 1, 5, 5}, rng);
    Tensor identity({1, 1, 3, 3});
    identity[4] = 1.0;
    CHECK(conv2d(Var(in), Var(identity)).value() == in);

    const Tensor ones({1, 1, 5, 5}, 1.0);
    const Tensor box({1, 1, 3, 3}, 1.0);
    const Tensor s = conv2d(Var(ones), Var(box)).value();
    CHECK(s[2 * 5 + 2] == 9.0);
    CHECK(s[0] == 4.0);
    CHECK(s[4] == 4.0);
    CHECK(s[2] == 6.0);
    CHECK_THROWS_AS(conv2d(Var(in), Var(Tensor({1, 2, 3, 3}))), ShapeError);
}

TEST_CASE("gradients match central differences")
{
    Rng rng(3);
    const double tol = 1e-4;
    auto check = [&](const char* what, const Fn& f, std::vector<Var> in) {
        const double err = gradient_error(f, std::move(in), rng);
        INFO(std::string(what) << " relative error " << err);
        CHECK(err < tol);
    };

    check("matmul", [](auto& v) { return matmul(v[0], v[1]); },
          {param(random_tensor({3, 4}, rng)), param(random_tensor({4, 2}, rng))});
    check("linear", [](auto& v) { return linear(v[0], v[1], v[2]); },
          {param(random_tensor({5, 3}, rng)), param(random_tensor({3, 4}, rng)), param(random_tensor({4}, rng))});
    check("add/sub/scale", [](auto& v) { return scale(sub(add(v[0], v[1]), v[1]), -2.5); },
          {param(random_tensor({2, 3}, rng)), param(random_tensor({2, 3}, rng))});
    check("relu", [](auto& v) { return relu(v[0]); }, {param(away_from_zero({4, 5}, rng))});
    check("leaky_relu", [](auto& v) { return leaky_relu(v[0]); }, {param(away_from_zero({4, 5}, rng))});
    check("sigmoid", [](auto& v) { return sigmoid(v[0]); }, {param(random_tensor({4, 5}, rng, -4, 4))});
    check("gather_rows", [](auto& v) { return gather_rows(v[0], {2, 0, 2, 1, 2}); }, {param(random_tensor({3, 4}, rng))});
    check("concat_cols", [](auto& v) { return concat_cols(v[0], v[1]); },
          {param(random_tensor({3, 2}, rng)), param(random_tensor({3, 5}, rng))});
    check("segment_sum", [](auto& v) { return segment_sum(v[0], {0, 2, 2, 1, 0}, 3); },
          {param(random_tensor({5, 3}, rng))});
    check("segment_max", [](auto& v) { return segment_max(v[0], {0, 2, 2, 1, 0, 2}, 3); },
          {param(random_tensor({6, 4}, rng))});
    check("conv2d", [](auto& v) { return conv2d(v[0], v[1], v[2]); },
          {param(random_tensor({2, 3, 4, 5}, rng)), param(random_tensor({2, 3, 3, 3}, rng)), param(random_tensor({2}, rng))});
    BatchNormState bn;
    check("batch_norm2d", [&](auto& v) { return batch_norm2d(v[0], v[1], v[2], bn, true); },
          {param(random_tensor({3, 2, 3, 3}, rng)), param(random_tensor({2}, rng, 0.5, 1.5)), param(random_tensor({2}, rng))});
    BatchNormState frozen;
    check("batch_norm2d inference", [&](auto& v) { return batch_norm2d(v[0], v[1], v[2], frozen, false); },
          {param(random_tensor({1, 2, 3, 3}, rng)), param(random_tensor({2}, rng, 0.5, 1.5)), param(random_tensor({2}, rng))});
    const Tensor target = random_tensor({3, 2}, rng, 0.05, 0.95);
    check("bce", [&](auto& v) { return bce(sigmoid(v[0]), target); }, {param(random_tensor({3, 2}, rng))});
    const Tensor far = random_tensor({3, 2}, rng, 5, 6);
    check("mae", [&](auto& v) { return mae(v[0], far); }, {param(random_tensor({3, 2}, rng))});
    check("sum", [](auto& v) { return sum(v[0]); }, {param(random_tensor({2, 2}, rng))});

    SUBCASE("layers")
    {
        Mlp mlp({4, {6, 5, 1}, {Activation::Sigmoid, Activation::Sigmoid, Activation::Linear}}, rng);
        Conv2d conv(2, 3, rng);
        for (Module* m : std::initializer_list<Module*>{&mlp, &conv}) {
            const auto params = m->parameters();
            const Tensor input = m == &mlp ? random_tensor({3, 4}, rng) : random_tensor({2, 2, 4, 4}, rng);
            // Perturbing parameters through the shared nodes drives the module.
            const double err = gradient_error([&](auto&) { return m->forward(Var(input)); }, params, rng);
            INFO(m->name() << " relative error " << err);
            CHECK(err < tol);
        }
    }
}

TEST_CASE("batch norm statistics")
{
    Rng rng(4);
    Tensor x = random_tensor({4, 2, 3, 3}, rng, 2, 5);
    for (std::size_t b = 0; b < 4; ++b)
        for (std::size_t i = 0; i < 9; ++i) x[(b * 2 + 1) * 9 + i] = 7.0;  // constant channel
    BatchNorm2d bn(2);
    const Tensor y = bn.forward(Var(x)).value();
    double s = 0, sq = 0;
    for (std::size_t b = 0; b < 4; ++b)
        for (std::size_t i = 0; i < 9; ++i) {
            const double v = y[(b * 2) * 9 + i];
            s += v;
            sq += v * v;
            CHECK(y[(b * 2 + 1) * 9 + i] == 0.0);
        }
    CHECK(std::abs(s / 36) < 1e-12);
    CHECK(sq / 36 == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(bn.state().running_mean[1] == doctest::Approx(0.7));
    CHECK(bn.state().running_var[1] == doctest::Approx(0.9));

    CHECK_THROWS_AS(bn.forward(Var(random_tensor({1, 2, 3, 3}, rng))), std::invalid_argument);
    bn.set_training(false);
    CHECK_NOTHROW(bn.forward(Var(random_tensor({1, 2, 3, 3}, rng))));
}

TEST_CASE("adam")
{
    SUBCASE("zero gradient leaves parameters unchanged")
    {
        Var w = param(Tensor({3}, 1.5));
        Adam opt({w});
        w.grad_buffer();
        CHECK(opt.step());
        CHECK(w.value() == Tensor({3}, 1.5));
    }
    SUBCASE("first step moves by lr against the gradient sign")
    {
        Var w = param(Tensor({3}, std::vector<double>{0, 0, 0}));
        Adam opt({w}, {0.01});
        w.grad_buffer() = Tensor({3}, std::vector<double>{3.0, -0.2, 1e-3});
        opt.step();
        CHECK(w.value()[0] == doctest::Approx(-0.01).epsilon(1e-6));
        CHECK(w.value()[1] == doctest::Approx(0.01).epsilon(1e-6));
        CHECK(w.value()[2] == doctest::Approx(-0.01).epsilon(1e-4));
    }
    SUBCASE("quadratic bowl")
    {
        Var w = param(Tensor({2}, std::vector<double>{1.0, -2.0}));
        Adam opt({w}, {0.05});
        for (int i = 0; i < 500; ++i) {
            opt.zero_grad();
            backward(sum(matmul(reshape(w, {1, 2}), reshape(w, {2, 1}))));
            opt.step();
        }
        CHECK(std::hypot(w.value()[0], w.value()[1]) < 1e-3);
    }
    SUBCASE("non-finite gradient skips the step")
    {
        Var w = param(Tensor({2}, 1.0));
        Adam opt({w});
        w.grad_buffer()[0] = std::nan("");
        CHECK_FALSE(opt.step());
        CHECK(opt.divergences() == 1);
        CHECK(opt.steps() == 0);
        CHECK(w.value() == Tensor({2}, 1.0));
    }
}

TEST_CASE("losses")
{
    CHECK(bce(Var(Tensor({4}, 0.5)), Tensor({4}, std::vector<double>{0, 1, 1, 0})).value()[0] == doctest::Approx(std::log(2.0)));
    CHECK(std::isfinite(bce(Var(Tensor({1}, 0.0)), Tensor({1}, 1.0)).value()[0]));

    Rng rng(5);
    Sequential id;
    auto lin = std::make_unique<Linear>(3, 3, rng);
    lin->weight().value() = Tensor({3, 3}, std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1});
    id.add(std::move(lin));
    const Tensor x = random_tensor({4, 3}, rng);
    const auto r = forward_backward(id, x, x, Loss::Mae);
    CHECK(r.loss == 0.0);
    REQUIRE(r.gradients.size() == 2);
}

TEST_CASE("sequential names the failing layer")
{
    Rng rng(6);
    Sequential s;
    s.add(std::make_unique<Linear>(3, 4, rng));
    s.add(std::make_unique<ActivationLayer>(Activation::Relu));
    s.add(std::make_unique<Linear>(5, 2, rng));
    try {
        s.forward(Var(Tensor({2, 3})));
        FAIL("expected a shape error");
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("layer 2 linear(5->2)") != std::string::npos);
    }
}

TEST_CASE("checkpoint round trip")
{
    Rng rng(7);
    const auto dir = std::filesystem::temp_directory_path() / "raylink_test_nn";
    std::filesystem::create_directories(dir);
    Checkpoint c;
    c.header = {{"arch", "test"}, {"seed", 7}};
    c.tensors.push_back({"a", random_tensor({2, 3}, rng)});
    c.tensors.push_back({"b", random_tensor({4}, rng)});
    save_checkpoint(dir / "c.ckpt", c);
    const Checkpoint back = load_checkpoint(dir / "c.ckpt");
    CHECK(back.header == c.header);
    CHECK(back.get("a") == c.get("a"));
    CHECK(back.get("b") == c.get("b"));
    CHECK_THROWS(back.get("missing"));
    CHECK_THROWS(load_checkpoint(dir / "absent.ckpt"));
    std::filesystem::remove_all(dir);
}
