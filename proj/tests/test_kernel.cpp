#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sfl/kernel.hpp"
#include "sfl/network.hpp"

using namespace sfl;

namespace {

Tensor random_tensor(const std::vector<std::size_t>& shape, std::uint64_t seed,
                     double scale = 1.0) {
    Tensor t = Tensor::zeros(shape);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (auto& v : t.data) v = dist(rng);
    return t;
}

bool all_finite(const Tensor& t) {
    for (double v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace

TEST_CASE("sliding window output length") {
    CHECK(output_length(58, 2, 2, 0) == 29);
    CHECK(output_length(58, 2, 4, 0) == 15);
    CHECK(output_length(58, 8, 2, 0) == 26);
    CHECK(output_length(130, 7, 1, 0) == 124);
    for (std::size_t n : {1, 5, 58, 130}) CHECK(output_length(n, 1, 1, 0) == n);
    // padding enters as a_in + 2p
    CHECK(output_length(10, 3, 1, 1) == 10);
    CHECK_THROWS(output_length(3, 5, 1, 0));  // window does not fit
}

TEST_CASE("shape propagation flags the offending layer") {
    NetworkSpec bad;
    bad.in_channels = 1;
    bad.in_length = 10;
    bad.num_classes = 2;
    bad.layers = {LayerSpec::conv1d(1, 4, 3), LayerSpec::conv1d(8, 4, 3),  // channel mismatch
                  LayerSpec::flatten(), LayerSpec::dense(4, 2)};
    CHECK_THROWS_WITH_AS(propagate_shapes(bad), doctest::Contains("layer 1"),
                         std::runtime_error);
}

TEST_CASE("zero input through zero conv gives zero output") {
    NetworkSpec spec;
    spec.in_channels = 1;
    spec.in_length = 12;
    spec.num_classes = 4;
    spec.layers = {LayerSpec::conv1d(1, 4, 3)};
    ParameterSet params = init_params(spec, 3);
    for (auto& e : params.entries) {
        std::fill(e.weights.data.begin(), e.weights.data.end(), 0.0);
        std::fill(e.bias.data.begin(), e.bias.data.end(), 0.0);
    }
    auto trace = forward(spec, params, Tensor::zeros({2, 1, 12}));
    for (double v : trace.output.data) CHECK(v == 0.0);
}

TEST_CASE("conv7 + pool + conv5 prefix maps 1x130 to 16x58") {
    NetworkSpec spec;
    spec.in_channels = 1;
    spec.in_length = 130;
    spec.num_classes = 5;
    spec.layers = {LayerSpec::conv1d(1, 16, 7), LayerSpec::maxpool1d(2, 2),
                   LayerSpec::conv1d(16, 16, 5)};
    auto trace = forward(spec, init_params(spec, 11), random_tensor({1, 1, 130}, 5));
    CHECK(trace.output.shape == std::vector<std::size_t>{1, 16, 58});
    CHECK(all_finite(trace.output));
}

TEST_CASE("two dense layers equal explicit matrix arithmetic") {
    NetworkSpec spec;
    spec.in_channels = 1;
    spec.in_length = 3;
    spec.num_classes = 2;
    spec.layers = {LayerSpec::flatten(), LayerSpec::dense(3, 2), LayerSpec::dense(2, 2)};
    ParameterSet params = init_params(spec, 0);
    params.entries[0].weights.data = {1.0, 2.0, 3.0, -1.0, 0.5, 0.0};  // (2,3) row major
    params.entries[0].bias.data = {0.25, -0.5};
    params.entries[1].weights.data = {2.0, -1.0, 1.0, 1.0};  // (2,2)
    params.entries[1].bias.data = {0.0, 1.0};

    Tensor x = Tensor::zeros({1, 1, 3});
    x.data = {1.0, -2.0, 0.5};
    auto out = forward(spec, params, x).output;

    // hidden = W1 x + b1, out = W2 hidden + b2, done by hand
    const double h0 = 1.0 * 1 + 2.0 * -2 + 3.0 * 0.5 + 0.25;   // -1.25
    const double h1 = -1.0 * 1 + 0.5 * -2 + 0.0 * 0.5 - 0.5;   // -2.5
    CHECK(out.at2(0, 0) == doctest::Approx(2.0 * h0 - 1.0 * h1).epsilon(1e-15));
    CHECK(out.at2(0, 1) == doctest::Approx(1.0 * h0 + 1.0 * h1 + 1.0).epsilon(1e-15));
}

TEST_CASE("softmax rows sum to one and cross entropy hand cases") {
    Tensor logits = random_tensor({4, 5}, 21, 3.0);
    Tensor p = softmax(logits);
    for (std::size_t b = 0; b < 4; ++b) {
        double s = 0;
        for (std::size_t c = 0; c < 5; ++c) {
            CHECK(p.at2(b, c) > 0.0);
            s += p.at2(b, c);
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }

    // uniform logits: loss = ln(C)
    for (std::size_t C : {2, 5, 10}) {
        Tensor u = Tensor::zeros({1, C});
        std::fill(u.data.begin(), u.data.end(), 0.7);
        auto lr = softmax_cross_entropy(u, {0});
        CHECK(lr.loss == doctest::Approx(std::log(static_cast<double>(C))).epsilon(1e-12));
    }

    // confident correct prediction: loss ~ 0
    Tensor conf = Tensor::zeros({1, 2});
    conf.data = {10.0, -10.0};
    CHECK(softmax_cross_entropy(conf, {0}).loss < 1e-8);
}

TEST_CASE("loss gradient matches central finite differences") {
    Tensor logits = random_tensor({3, 3}, 33, 2.0);
    std::vector<std::uint32_t> labels{2, 0, 1};
    auto lr = softmax_cross_entropy(logits, labels);
    const double eps = 1e-6;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        Tensor up = logits, dn = logits;
        up.data[i] += eps;
        dn.data[i] -= eps;
        const double fd = (softmax_cross_entropy(up, labels).loss -
                           softmax_cross_entropy(dn, labels).loss) /
                          (2 * eps);
        const double an = lr.dlogits.data[i];
        CHECK(std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-8}) < 1e-6);
    }
}

TEST_CASE("zero upstream gradient yields zero parameter gradients") {
    NetworkSpec spec;
    spec.in_channels = 2;
    spec.in_length = 11;
    spec.num_classes = 3;
    spec.layers = {LayerSpec::conv1d(2, 3, 3), LayerSpec::leaky_relu(),
                   LayerSpec::maxpool1d(2, 2), LayerSpec::flatten(), LayerSpec::dense(12, 3)};
    ParameterSet params = init_params(spec, 5);
    auto trace = forward(spec, params, random_tensor({2, 2, 11}, 6));
    auto back = backward(spec, params, trace.inputs, Tensor::zeros(trace.output.shape));
    for (const auto& e : back.grads.entries) {
        for (double v : e.weights.data) CHECK(v == 0.0);
        for (double v : e.bias.data) CHECK(v == 0.0);
    }
    for (double v : back.dinput.data) CHECK(v == 0.0);
}

TEST_CASE("finite differences per layer kind") {
    auto check_net = [](NetworkSpec spec, std::uint64_t seed, double tol) {
        ParameterSet params = init_params(spec, seed);
        Tensor x = random_tensor({2, spec.in_channels, spec.in_length}, seed + 1);
        std::vector<std::uint32_t> labels;
        for (std::size_t b = 0; b < 2; ++b)
            labels.push_back(static_cast<std::uint32_t>(b % spec.num_classes));
        CHECK(gradient_check(spec, params, x, labels, 1e-5) < tol);
    };

    NetworkSpec conv;
    conv.in_channels = 2;
    conv.in_length = 13;
    conv.num_classes = 3;
    conv.layers = {LayerSpec::conv1d(2, 3, 3, 1, 2), LayerSpec::flatten(),
                   LayerSpec::dense(21, 3)};
    check_net(conv, 41, 1e-5);

    NetworkSpec pooled;
    pooled.in_channels = 1;
    pooled.in_length = 16;
    pooled.num_classes = 2;
    pooled.layers = {LayerSpec::conv1d(1, 4, 5), LayerSpec::leaky_relu(),
                     LayerSpec::maxpool1d(2, 2), LayerSpec::flatten(), LayerSpec::dense(24, 2)};
    check_net(pooled, 42, 1e-5);

    NetworkSpec dense_only;
    dense_only.in_channels = 1;
    dense_only.in_length = 6;
    dense_only.num_classes = 4;
    dense_only.layers = {LayerSpec::flatten(), LayerSpec::dense(6, 5), LayerSpec::leaky_relu(),
                         LayerSpec::dense(5, 4)};
    check_net(dense_only, 43, 1e-7);
}

TEST_CASE("gradient check conventions") {
    // a parameter-free network returns 0
    NetworkSpec pool_only;
    pool_only.in_channels = 2;
    pool_only.in_length = 8;
    pool_only.num_classes = 8;  // flatten output doubles as logits
    pool_only.layers = {LayerSpec::maxpool1d(2, 2), LayerSpec::flatten()};
    CHECK(gradient_check(pool_only, {}, random_tensor({1, 2, 8}, 9), {3}, 1e-5) == 0.0);

    // a single dense layer is near machine precision
    NetworkSpec one;
    one.in_channels = 1;
    one.in_length = 7;
    one.num_classes = 3;
    one.layers = {LayerSpec::flatten(), LayerSpec::dense(7, 3)};
    CHECK(gradient_check(one, init_params(one, 10), random_tensor({2, 1, 7}, 11), {0, 2}, 1e-5) <
          1e-7);
}

TEST_CASE("maxpool backward routes gradient to per-window argmax and conserves it") {
    NetworkSpec spec;
    spec.in_channels = 1;
    spec.in_length = 8;
    spec.num_classes = 4;
    spec.layers = {LayerSpec::maxpool1d(2, 2)};
    Tensor x = Tensor::zeros({1, 1, 8});
    x.data = {1.0, 3.0, 2.0, 2.0, -5.0, -1.0, 7.0, 7.0};  // ties in windows 1 and 3
    auto trace = forward(spec, {}, x);
    CHECK(trace.output.data == std::vector<double>{3.0, 2.0, -1.0, 7.0});

    Tensor dout = Tensor::zeros({1, 1, 4});
    dout.data = {1.0, 2.0, 3.0, 4.0};
    auto back = backward(spec, {}, trace.inputs, dout);
    // ties resolve to the first index of the window
    CHECK(back.dinput.data == std::vector<double>{0, 1, 2, 0, 0, 3, 4, 0});
    double in_sum = 0, out_sum = 0;
    for (double v : dout.data) in_sum += v;
    for (double v : back.dinput.data) out_sum += v;
    CHECK(in_sum == out_sum);
}

TEST_CASE("sgd step arithmetic") {
    NetworkSpec one;
    one.in_channels = 1;
    one.in_length = 1;
    one.num_classes = 1;
    one.layers = {LayerSpec::flatten(), LayerSpec::dense(1, 1)};
    ParameterSet p = init_params(one, 1);
    p.entries[0].weights.data = {1.0};
    p.entries[0].bias.data = {2.0};
    GradientSet g = p;
    g.entries[0].weights.data = {0.5};
    g.entries[0].bias.data = {4.0};

    ParameterSet same = sgd_step(p, g, 0.0);
    CHECK(same == p);

    ParameterSet stepped = sgd_step(p, g, 0.001);
    CHECK(stepped.entries[0].weights.data[0] == 0.9995);
    CHECK(stepped.entries[0].bias.data[0] == 2.0 - 0.001 * 4.0);
    CHECK(p.entries[0].weights.data[0] == 1.0);  // input untouched
}

TEST_CASE("leaky relu forward and backward slope") {
    NetworkSpec spec;
    spec.in_channels = 1;
    spec.in_length = 4;
    spec.num_classes = 4;
    spec.layers = {LayerSpec::leaky_relu(0.01)};
    Tensor x = Tensor::zeros({1, 1, 4});
    x.data = {-2.0, -0.5, 0.0, 3.0};
    auto trace = forward(spec, {}, x);
    CHECK(trace.output.data == std::vector<double>{-0.02, -0.005, 0.0, 3.0});

    Tensor dout = Tensor::zeros({1, 1, 4});
    dout.data = {1.0, 1.0, 1.0, 1.0};
    auto back = backward(spec, {}, trace.inputs, dout);
    CHECK(back.dinput.data == std::vector<double>{0.01, 0.01, 0.01, 1.0});
}
