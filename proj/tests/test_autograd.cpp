#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "noisec/autograd.hpp"
#include "noisec/rng.hpp"
#include "noisec/tensor.hpp"

using namespace noisec;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, float lo = -1.0f, float hi = 1.0f) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (float& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// Small conv+linear net with fixed random parameters; scalar loss = mean of
// squared outputs. Used to cross-check backward() against finite differences.
struct TinyNet {
    Tensor w1, b1, wf, bf;

    explicit TinyNet(Rng& rng, int c = 2, int h = 5, int w = 5, int k = 3, int out = 4) {
        w1 = random_tensor({k, c, 3, 3}, rng, -0.5f, 0.5f);
        b1 = random_tensor({k}, rng, -0.1f, 0.1f);
        const int flat = k * ((h - 1) / 2 + 1) * ((w - 1) / 2 + 1);
        wf = random_tensor({flat, out}, rng, -0.5f, 0.5f);
        bf = random_tensor({out}, rng, -0.1f, 0.1f);
    }

    double loss_at(const Tensor& x) const {
        Tape tape;
        Var v = forward(tape, tape.input(x, false));
        return static_cast<double>(tape.value(v)[0]);
    }

    Var forward(Tape& tape, Var x) const {
        Var vw1 = tape.input(w1), vb1 = tape.input(b1);
        Var vwf = tape.input(wf), vbf = tape.input(bf);
        Var h1 = tape.relu(tape.conv2d(x, vw1, vb1, 2));
        const Tensor& hv = tape.value(h1);
        Var flat = tape.reshape(h1, {hv.dim(0), static_cast<int>(hv.numel() / hv.dim(0))});
        Var out = tape.linear(flat, vwf, vbf);
        Var sq = tape.mul(out, out);
        return tape.mean(sq);
    }

    // Central differences are only a valid oracle away from relu kinks: a
    // probe of size h can flip an activation whose pre-value is within
    // h * sum|w| of zero. Reject such evaluation points.
    bool away_from_kinks(const Tensor& x, float margin) const {
        Tape tape;
        Var pre = tape.conv2d(tape.input(x), tape.input(w1), tape.input(b1), 2);
        for (float v : tape.value(pre).data)
            if (std::fabs(v) < margin) return false;
        return true;
    }
};

}  // namespace

TEST_CASE("relu forward") {
    Tape tape;
    Var x = tape.input(Tensor::from({3}, {-1.0f, 0.0f, 2.0f}));
    Var y = tape.relu(x);
    CHECK(tape.value(y)[0] == 0.0f);
    CHECK(tape.value(y)[1] == 0.0f);
    CHECK(tape.value(y)[2] == 2.0f);
}

TEST_CASE("softmax symmetry and normalization") {
    Tape tape;
    Var z = tape.input(Tensor::from({1, 2}, {0.0f, 0.0f}));
    Var p = tape.softmax(z);
    CHECK(tape.value(p)[0] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(tape.value(p)[1] == doctest::Approx(0.5).epsilon(1e-6));

    Rng rng(1234);
    for (int trial = 0; trial < 50; ++trial) {
        Tape t2;
        Var z2 = t2.input(random_tensor({3, 7}, rng, -8.0f, 8.0f));
        const Tensor& probs = t2.value(t2.softmax(z2));
        for (int n = 0; n < 3; ++n) {
            float s = 0.0f;
            for (int c = 0; c < 7; ++c) {
                float v = probs[n * 7 + c];
                CHECK(v > 0.0f);
                CHECK(v < 1.0f);
                s += v;
            }
            CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
}

TEST_CASE("1x1-equivalent identity kernel reproduces the image") {
    // 3x3 kernel with only the center tap set to 1 acts as the identity.
    Rng rng(7);
    Tensor img = random_tensor({1, 1, 6, 6}, rng, 0.0f, 1.0f);
    Tensor w = Tensor::zeros({1, 1, 3, 3});
    w[4] = 1.0f;
    Tape tape;
    Var y = tape.conv2d(tape.input(img), tape.input(w), tape.input(Tensor::zeros({1})), 1);
    const Tensor& out = tape.value(y);
    REQUIRE(out.numel() == img.numel());
    for (std::int64_t i = 0; i < img.numel(); ++i) CHECK(out[i] == img[i]);
}

TEST_CASE("backward of sum is all-ones") {
    Rng rng(3);
    Tape tape;
    Var x = tape.input(random_tensor({2, 3, 4}, rng), true);
    tape.backward(tape.sum(x));
    const Tensor& g = tape.grad(x);
    for (std::int64_t i = 0; i < g.numel(); ++i) CHECK(g[i] == 1.0f);
}

TEST_CASE("backward of 0.5*||x||^2 is x") {
    Rng rng(4);
    Tensor xv = random_tensor({17}, rng);
    Tape tape;
    Var x = tape.input(xv, true);
    Var loss = tape.scale(tape.sum(tape.mul(x, x)), 0.5f);
    tape.backward(loss);
    const Tensor& g = tape.grad(x);
    for (std::int64_t i = 0; i < g.numel(); ++i) CHECK(g[i] == doctest::Approx(xv[i]).epsilon(1e-6));
}

TEST_CASE("finite differences: sum and square") {
    Tensor x = Tensor::from({4}, {0.3f, -0.2f, 0.9f, 0.0f});
    Tensor g = finite_diff_grad(
        [](const Tensor& t) {
            double s = 0.0;
            for (float v : t.data) s += static_cast<double>(v);
            return s;
        },
        x, 1e-3f);
    for (std::int64_t i = 0; i < 4; ++i) CHECK(std::fabs(g[i] - 1.0f) <= 1e-6f);

    Tensor x3 = Tensor::from({1}, {3.0f});
    Tensor g2 = finite_diff_grad(
        [](const Tensor& t) { return static_cast<double>(t[0]) * static_cast<double>(t[0]); }, x3,
        1e-3f);
    CHECK(std::fabs(g2[0] - 6.0f) <= 1e-5f);
}

TEST_CASE("autodiff matches central differences on random nets") {
    // Covers conv2d (both strides), linear, relu, reshape, mul, mean.
    int checked = 0;
    for (std::uint64_t seed = 0; checked < 100 && seed < 400; ++seed) {
        Rng rng(seed * 77 + 5);
        TinyNet net(rng);
        Tensor x = random_tensor({1, 2, 5, 5}, rng, 0.05f, 0.95f);
        if (!net.away_from_kinks(x, 0.02f)) continue;

        Tape tape;
        Var vx = tape.input(x, true);
        tape.backward(net.forward(tape, vx));
        const Tensor& g = tape.grad(vx);

        Tensor fd = finite_diff_grad([&net](const Tensor& t) { return net.loss_at(t); }, x, 1e-3f);

        CHECK(grad_rel_error(g, fd) < 1e-3f);
        ++checked;
    }
    CHECK(checked == 100);
}

TEST_CASE("gradient flows through conv2d_transpose and mse") {
    Rng rng(99);
    Tensor x = random_tensor({1, 2, 4, 4}, rng);
    Tensor w = random_tensor({2, 3, 3, 3}, rng, -0.4f, 0.4f);
    Tensor b = random_tensor({3}, rng, -0.1f, 0.1f);
    Tensor target = random_tensor({1, 3, 8, 8}, rng);

    auto loss_fn = [&](const Tensor& win) {
        Tape tape;
        Var y = tape.conv2d_transpose(tape.input(x), tape.input(win), tape.input(b), 2);
        return static_cast<double>(tape.value(tape.mse(y, tape.input(target)))[0]);
    };

    Tape tape;
    Var vw = tape.input(w, true);
    Var y = tape.conv2d_transpose(tape.input(x), vw, tape.input(b), 2);
    tape.backward(tape.mse(y, tape.input(target)));
    const Tensor& g = tape.grad(vw);

    Tensor fd = finite_diff_grad(loss_fn, w, 1e-3f);
    CHECK(grad_rel_error(g, fd) < 1e-3f);
}

TEST_CASE("cross_entropy gradient matches finite differences") {
    Rng rng(11);
    Tensor z = random_tensor({3, 5}, rng, -2.0f, 2.0f);
    std::vector<int> labels = {1, 4, 0};

    Tape tape;
    Var vz = tape.input(z, true);
    tape.backward(tape.cross_entropy(vz, labels));
    const Tensor& g = tape.grad(vz);

    Tensor fd = finite_diff_grad(
        [&labels](const Tensor& t) {
            Tape t2;
            return static_cast<double>(t2.value(t2.cross_entropy(t2.input(t), labels))[0]);
        },
        z, 1e-3f);
    CHECK(grad_rel_error(g, fd) < 1e-3f);
}

TEST_CASE("forward and backward are bitwise deterministic") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        TinyNet net(rng);
        Tensor x = random_tensor({1, 2, 5, 5}, rng);
        Tape tape;
        Var vx = tape.input(x, true);
        Var loss = net.forward(tape, vx);
        tape.backward(loss);
        return std::pair<float, Tensor>(tape.value(loss)[0], tape.grad(vx));
    };
    auto [l1, g1] = run(42);
    auto [l2, g2] = run(42);
    CHECK(l1 == l2);
    REQUIRE(g1.numel() == g2.numel());
    for (std::int64_t i = 0; i < g1.numel(); ++i) CHECK(g1[i] == g2[i]);
}

TEST_CASE("error paths: shape mismatch, non-scalar loss, consumed tape, non-finite") {
    Tape tape;
    Var a = tape.input(Tensor::zeros({2, 3}));
    Var b = tape.input(Tensor::zeros({3, 2}));
    CHECK_THROWS_AS(tape.add(a, b), TensorError);

    Tape t2;
    Var x = t2.input(Tensor::zeros({4}), true);
    CHECK_THROWS_AS(t2.backward(x), TensorError);

    Tape t3;
    Var y = t3.input(Tensor::zeros({1}), true);
    Var s = t3.sum(y);
    t3.backward(s);
    CHECK_THROWS_AS(t3.backward(s), TensorError);

    Tape t4;
    Var big = t4.input(Tensor::full({2}, 3.0e38f));
    CHECK_THROWS_AS(t4.mul(big, big), NumericError);

    CHECK_THROWS_AS(Tape{}.backward(Var{5}), TensorError);
}
