#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fenet/adam.hpp"
#include "fenet/ops.hpp"
#include "support/oracles.hpp"

using namespace fenet;

namespace {

Tensor random_tensor(Rng& rng, std::size_t n, std::size_t c, std::size_t len, double scale = 1.0) {
    Tensor t(n, c, len);
    for (double& v : t.v) v = scale * rng.gaussian();
    return t;
}

ConvKernel random_kernel(Rng& rng, std::size_t oc, std::size_t ic, std::size_t w) {
    ConvKernel k(oc, ic, w);
    for (double& v : k.w) v = rng.gaussian();
    for (double& v : k.b) v = 0.3 * rng.gaussian();
    return k;
}

}  // namespace

TEST_CASE("identity kernel reproduces the input for any dilation") {
    Rng rng(11);
    ConvKernel k(1, 1, 3);
    k.w = {0.0, 1.0, 0.0};
    for (int d : {1, 2, 5, 8}) {
        Tensor x = random_tensor(rng, 2, 1, 60);
        Tensor y = conv1d_dilated(x, k, d);
        for (std::size_t i = 0; i < x.v.size(); ++i) CHECK(y.v[i] == x.v[i]);
    }
}

TEST_CASE("zero input with zero bias gives zero output") {
    Rng rng(12);
    ConvKernel k = random_kernel(rng, 2, 3, 5);
    std::fill(k.b.begin(), k.b.end(), 0.0);
    Tensor x(2, 3, 40);
    Tensor y = conv1d_dilated(x, k, 4);
    for (double v : y.v) CHECK(v == 0.0);
}

TEST_CASE("dilated conv matches the double-loop oracle on the worked case") {
    Tensor x(1, 1, 7);
    x.v = {1, 2, 3, 4, 5, 6, 7};
    ConvKernel k(1, 1, 3);
    k.w = {1.0, 0.0, -1.0};
    Tensor got = conv1d_dilated(x, k, 2);
    Tensor want = oracles::conv1d_dilated_naive(x, k, 2);
    REQUIRE(got.v.size() == want.v.size());
    for (std::size_t i = 0; i < got.v.size(); ++i) CHECK(got.v[i] == want.v[i]);
    // out(n) = in(n+2) - in(n-2), zero padded
    std::vector<double> frozen{3, 4, 4, 4, 4, -4, -5};
    for (std::size_t i = 0; i < frozen.size(); ++i) CHECK(got.v[i] == frozen[i]);
}

TEST_CASE("dilated conv equals the oracle over random cases") {
    Rng rng(13);
    for (int it = 0; it < 200; ++it) {
        std::size_t len = static_cast<std::size_t>(rng.uniform_int(1, 64));
        std::size_t w = static_cast<std::size_t>(2 * rng.uniform_int(1, 3) + 1);  // 3,5,7
        int d = static_cast<int>(rng.uniform_int(1, 8));
        std::size_t ic = static_cast<std::size_t>(rng.uniform_int(1, 3));
        std::size_t oc = static_cast<std::size_t>(rng.uniform_int(1, 3));
        Tensor x = random_tensor(rng, 1, ic, len);
        ConvKernel k = random_kernel(rng, oc, ic, w);
        Tensor got = conv1d_dilated(x, k, d);
        Tensor want = oracles::conv1d_dilated_naive(x, k, d);
        double max_abs = 0.0;
        for (std::size_t i = 0; i < got.v.size(); ++i)
            max_abs = std::max(max_abs, std::abs(got.v[i] - want.v[i]));
        CHECK(max_abs <= 1e-12);
    }
}

TEST_CASE("d=1 is the standard convolution") {
    Rng rng(14);
    Tensor x = random_tensor(rng, 1, 1, 20);
    ConvKernel k = random_kernel(rng, 1, 1, 5);
    Tensor got = conv1d_dilated(x, k, 1);
    Tensor want = oracles::conv1d_dilated_naive(x, k, 1);
    for (std::size_t i = 0; i < got.v.size(); ++i) CHECK(got.v[i] == want.v[i]);
}

TEST_CASE("conv rejects bad dilation and non-finite input") {
    Tensor x(1, 1, 8, 1.0);
    ConvKernel k(1, 1, 3);
    CHECK_THROWS_AS(conv1d_dilated(x, k, 0), Error);
    x.v[3] = std::nan("");
    try {
        conv1d_dilated(x, k, 1);
        FAIL("expected numeric error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::numeric);
    }
    CHECK_THROWS_AS(ConvKernel(1, 1, 4), Error);  // even width
}

TEST_CASE("conv backward: zero upstream gives zero gradients") {
    Rng rng(15);
    Tensor x = random_tensor(rng, 2, 2, 16);
    ConvKernel k = random_kernel(rng, 2, 2, 3);
    ConvGrads g = conv1d_dilated_backward(Tensor(2, 2, 16), x, k, 3);
    for (double v : g.input_grad.v) CHECK(v == 0.0);
    for (double v : g.kernel_grad) CHECK(v == 0.0);
    for (double v : g.bias_grad) CHECK(v == 0.0);
}

TEST_CASE("conv backward: identity kernel with unit upstream") {
    Rng rng(16);
    Tensor x = random_tensor(rng, 1, 1, 12);
    ConvKernel k(1, 1, 3);
    k.w = {0.0, 1.0, 0.0};
    Tensor up(1, 1, 12, 1.0);
    ConvGrads g = conv1d_dilated_backward(up, x, k, 3);
    for (double v : g.input_grad.v) CHECK(v == 1.0);
    double sum = 0.0;
    for (double v : x.v) sum += v;
    CHECK(g.kernel_grad[1] == doctest::Approx(sum).epsilon(1e-12));  // center tap
    CHECK(g.bias_grad[0] == 12.0);
}

TEST_CASE("conv backward matches finite differences") {
    Rng rng(17);
    for (int it = 0; it < 12; ++it) {
        std::size_t len = it == 0 ? 12 : static_cast<std::size_t>(rng.uniform_int(4, 24));
        std::size_t w = it == 0 ? 3 : static_cast<std::size_t>(2 * rng.uniform_int(1, 3) + 1);
        int d = it == 0 ? 3 : static_cast<int>(rng.uniform_int(1, 6));
        std::size_t ic = static_cast<std::size_t>(rng.uniform_int(1, 2));
        std::size_t oc = static_cast<std::size_t>(rng.uniform_int(1, 2));
        Tensor x = random_tensor(rng, 2, ic, len);
        ConvKernel k = random_kernel(rng, oc, ic, w);
        Tensor proj = random_tensor(rng, 2, oc, len);

        auto f = [&]() {
            Tensor out = conv1d_dilated(x, k, d);
            double s = 0.0;
            for (std::size_t i = 0; i < out.v.size(); ++i) s += proj.v[i] * out.v[i];
            return s;
        };
        ConvGrads g = conv1d_dilated_backward(proj, x, k, d);
        for (std::size_t i = 0; i < k.w.size(); ++i)
            CHECK(oracles::grad_matches(g.kernel_grad[i], oracles::central_diff(f, k.w[i]), 1e-6));
        for (std::size_t i = 0; i < k.b.size(); ++i)
            CHECK(oracles::grad_matches(g.bias_grad[i], oracles::central_diff(f, k.b[i]), 1e-6));
        for (std::size_t i = 0; i < x.v.size(); ++i)
            CHECK(oracles::grad_matches(g.input_grad.v[i], oracles::central_diff(f, x.v[i]), 1e-6));
    }
}

TEST_CASE("relu forward and backward") {
    Tensor x(1, 1, 2);
    x.v = {-1.0, 2.0};
    Tensor y = relu(x);
    CHECK(y.v[0] == 0.0);
    CHECK(y.v[1] == 2.0);
    Tensor up(1, 1, 2, 1.0);
    Tensor dx = relu_backward(up, x);
    CHECK(dx.v[0] == 0.0);
    CHECK(dx.v[1] == 1.0);
}

TEST_CASE("batch norm training output has zero mean and unit variance per channel") {
    Rng rng(18);
    Tensor x = random_tensor(rng, 8, 4, 60, 4.0);
    for (std::size_t ch = 0; ch < 4; ++ch)  // distinct per-channel offsets
        for (std::size_t b = 0; b < 8; ++b)
            for (std::size_t i = 0; i < 60; ++i) x.at(b, ch, i) += 3.0 * static_cast<double>(ch);
    BatchNorm bn(4);
    BnCache cache;
    Tensor y = batch_norm_forward(x, bn, true, cache);
    for (std::size_t ch = 0; ch < 4; ++ch) {
        double mean = 0.0, var = 0.0;
        for (std::size_t b = 0; b < 8; ++b)
            for (std::size_t i = 0; i < 60; ++i) mean += y.at(b, ch, i);
        mean /= 480.0;
        for (std::size_t b = 0; b < 8; ++b)
            for (std::size_t i = 0; i < 60; ++i) {
                double d = y.at(b, ch, i) - mean;
                var += d * d;
            }
        var /= 480.0;
        CHECK(std::abs(mean) < 1e-6);
        CHECK(std::abs(var - 1.0) < 1e-6);
        CHECK(bn.run_mean[ch] != 0.0);  // running stats moved
    }
}

TEST_CASE("batch norm rejects training batches of one") {
    BatchNorm bn(1);
    BnCache cache;
    Tensor x(1, 1, 60, 1.0);
    CHECK_THROWS_AS(batch_norm_forward(x, bn, true, cache), Error);
    CHECK_NOTHROW(batch_norm_forward(x, bn, false, cache));  // inference is fine
}

TEST_CASE("batch norm backward matches finite differences") {
    Rng rng(19);
    Tensor x = random_tensor(rng, 8, 4, 60);
    Tensor proj = random_tensor(rng, 8, 4, 60);
    BatchNorm bn(4);
    for (double& g : bn.gamma) g = 1.0 + 0.2 * rng.gaussian();
    for (double& b : bn.beta) b = 0.2 * rng.gaussian();

    auto f = [&]() {
        BatchNorm bn_copy = bn;  // keep running stats out of the differentiated state
        BnCache cache;
        Tensor out = batch_norm_forward(x, bn_copy, true, cache);
        double s = 0.0;
        for (std::size_t i = 0; i < out.v.size(); ++i) s += proj.v[i] * out.v[i];
        return s;
    };

    BnCache cache;
    BatchNorm bn_fwd = bn;
    batch_norm_forward(x, bn_fwd, true, cache);
    std::fill(bn_fwd.dgamma.begin(), bn_fwd.dgamma.end(), 0.0);
    std::fill(bn_fwd.dbeta.begin(), bn_fwd.dbeta.end(), 0.0);
    Tensor dx = batch_norm_backward(proj, bn_fwd, cache);

    for (std::size_t ch = 0; ch < 4; ++ch) {
        CHECK(oracles::grad_matches(bn_fwd.dgamma[ch], oracles::central_diff(f, bn.gamma[ch]), 1e-5));
        CHECK(oracles::grad_matches(bn_fwd.dbeta[ch], oracles::central_diff(f, bn.beta[ch]), 1e-5));
    }
    for (std::size_t i = 0; i < x.v.size(); ++i)
        CHECK(oracles::grad_matches(dx.v[i], oracles::central_diff(f, x.v[i]), 1e-5));
}

TEST_CASE("dropout is the identity at inference and keeps the mean in training") {
    Rng rng(20);
    Tensor x(1, 1, 16, 1.0);
    Tensor mask;
    Tensor y = dropout_forward(x, 0.5, false, rng, mask);
    for (std::size_t i = 0; i < x.v.size(); ++i) CHECK(y.v[i] == x.v[i]);

    // inverted scaling: E[out] = in; 3-sigma band over 10^4 draws
    const int trials = 10000;
    const double rate = 0.5;
    double sum = 0.0;
    Tensor one(1, 1, 1, 1.0);
    for (int t = 0; t < trials; ++t) {
        Tensor m;
        Tensor o = dropout_forward(one, rate, true, rng, m);
        sum += o.v[0];
    }
    const double mean = sum / trials;
    const double sigma = std::sqrt(rate / (1.0 - rate) / trials);
    CHECK(std::abs(mean - 1.0) <= 3.0 * sigma);

    CHECK_THROWS_AS(dropout_forward(x, 1.0, true, rng, mask), Error);
}

TEST_CASE("dropout backward passes gradients through the saved mask") {
    Rng rng(21);
    Tensor x(1, 1, 64, 1.0);
    Tensor mask;
    Tensor y = dropout_forward(x, 0.4, true, rng, mask);
    Tensor up(1, 1, 64, 1.0);
    Tensor dx = dropout_backward(up, mask);
    for (std::size_t i = 0; i < 64; ++i) {
        CHECK(dx.v[i] == mask.v[i]);
        CHECK(y.v[i] == mask.v[i]);  // x was all ones
    }
}

TEST_CASE("fully connected forward/backward matches finite differences") {
    Rng rng(22);
    FcLayer fc(10, 3);
    for (double& w : fc.w) w = rng.gaussian();
    for (double& b : fc.b) b = rng.gaussian();
    Tensor x = random_tensor(rng, 4, 10, 1);
    Tensor proj = random_tensor(rng, 4, 3, 1);

    auto f = [&]() {
        Tensor out = fully_connected(x, fc);
        double s = 0.0;
        for (std::size_t i = 0; i < out.v.size(); ++i) s += proj.v[i] * out.v[i];
        return s;
    };
    Tensor dx = fully_connected_backward(proj, x, fc);
    for (std::size_t i = 0; i < fc.w.size(); ++i)
        CHECK(oracles::grad_matches(fc.dw[i], oracles::central_diff(f, fc.w[i]), 1e-6));
    for (std::size_t i = 0; i < fc.b.size(); ++i)
        CHECK(oracles::grad_matches(fc.db[i], oracles::central_diff(f, fc.b[i]), 1e-6));
    for (std::size_t i = 0; i < x.v.size(); ++i)
        CHECK(oracles::grad_matches(dx.v[i], oracles::central_diff(f, x.v[i]), 1e-6));
}

TEST_CASE("softmax basics") {
    std::vector<double> z{0.0, 0.0};
    auto p = softmax(z);
    CHECK(p[0] == 0.5);
    CHECK(p[1] == 0.5);

    Rng rng(23);
    for (int it = 0; it < 50; ++it) {
        std::vector<double> logits(5);
        for (double& v : logits) v = 4.0 * rng.gaussian();
        auto q = softmax(logits);
        double sum = 0.0;
        for (double v : q) sum += v;
        CHECK(std::abs(sum - 1.0) <= 1e-12);

        double shift = 10.0 * rng.gaussian();
        std::vector<double> shifted = logits;
        for (double& v : shifted) v += shift;
        auto qs = softmax(shifted);
        for (std::size_t i = 0; i < q.size(); ++i) CHECK(std::abs(q[i] - qs[i]) <= 1e-12);
    }

    std::vector<double> empty;
    CHECK_THROWS_AS(softmax(empty), Error);
}

TEST_CASE("concat and split are inverse; residual add checks shapes") {
    Rng rng(24);
    std::vector<Tensor> rows;
    for (int i = 0; i < 4; ++i) rows.push_back(random_tensor(rng, 3, 1, 20));
    Tensor h = concat_channels(rows);
    CHECK(h.c == 4);
    auto back = split_channels(h, {1, 1, 1, 1});
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t i = 0; i < rows[r].v.size(); ++i) CHECK(back[r].v[i] == rows[r].v[i]);

    Tensor a = random_tensor(rng, 1, 1, 8), b = random_tensor(rng, 1, 1, 8);
    Tensor s = residual_add(a, b);
    for (std::size_t i = 0; i < 8; ++i) CHECK(s.v[i] == a.v[i] + b.v[i]);
    Tensor wrong(1, 1, 9);
    CHECK_THROWS_AS(residual_add(a, wrong), Error);

    std::vector<Tensor> uneven{random_tensor(rng, 1, 1, 8), random_tensor(rng, 1, 1, 9)};
    CHECK_THROWS_AS(concat_channels(uneven), Error);
}

TEST_CASE("adam: zero gradients leave parameters untouched forever") {
    std::vector<double> p{0.5, -1.25, 3.0};
    std::vector<double> p0 = p;
    std::vector<double> g(3, 0.0);
    AdamState s;
    for (int it = 0; it < 25; ++it) adam_step(p, g, s);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == p0[i]);
}

TEST_CASE("adam first step moves by -lr * sign(g) up to the eps correction") {
    // closed form: m_hat = g, v_hat = g^2, delta = -lr * g / (|g| + eps)
    for (double g0 : {0.5, -2.0, 1e-3}) {
        std::vector<double> p{1.0};
        std::vector<double> g{g0};
        AdamState s;
        adam_step(p, g, s);
        const double expected = 1.0 - s.lr * g0 / (std::abs(g0) + s.eps);
        CHECK(p[0] == doctest::Approx(expected).epsilon(1e-15));
        CHECK(std::abs((1.0 - p[0]) - s.lr * (g0 > 0 ? 1.0 : -1.0)) <= s.lr * 1e-4);
    }
}

TEST_CASE("adam is deterministic and aborts on non-finite gradients") {
    std::vector<double> p1{0.1, 0.2}, p2{0.1, 0.2};
    std::vector<double> g{0.3, -0.4};
    AdamState s1, s2;
    adam_step(p1, g, s1);
    adam_step(p2, g, s2);
    CHECK(p1 == p2);
    CHECK(s1.m == s2.m);

    std::vector<double> bad{std::nan(""), 0.0};
    std::vector<double> before = p1;
    AdamState saved = s1;
    try {
        adam_step(p1, bad, s1);
        FAIL("expected numeric error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::numeric);
    }
    CHECK(p1 == before);          // step aborted
    CHECK(s1.step == saved.step);
}

TEST_CASE("four-layer dilated stack: composed gradient matches finite differences") {
    Rng rng(25);
    const std::array<int, 4> dil{3, 2, 4, 8};
    std::array<ConvKernel, 4> ks;
    for (auto& k : ks) k = random_kernel(rng, 1, 1, 3);
    Tensor x = random_tensor(rng, 2, 1, 30);
    Tensor proj = random_tensor(rng, 2, 1, 30);

    auto forward = [&](std::array<Tensor, 4>& relu_in, std::array<Tensor, 4>& conv_in) {
        Tensor cur = x;
        for (int j = 0; j < 4; ++j) {
            conv_in[j] = cur;
            Tensor c = conv1d_dilated(cur, ks[static_cast<std::size_t>(j)], dil[static_cast<std::size_t>(j)]);
            relu_in[j] = c;
            cur = relu(c);
        }
        return cur;
    };
    auto f = [&]() {
        std::array<Tensor, 4> a, b;
        Tensor out = forward(a, b);
        double s = 0.0;
        for (std::size_t i = 0; i < out.v.size(); ++i) s += proj.v[i] * out.v[i];
        return s;
    };

    std::array<Tensor, 4> relu_in, conv_in;
    forward(relu_in, conv_in);
    Tensor d = proj;
    std::array<ConvGrads, 4> grads;
    for (int j = 3; j >= 0; --j) {
        Tensor drelu = relu_backward(d, relu_in[static_cast<std::size_t>(j)]);
        grads[static_cast<std::size_t>(j)] = conv1d_dilated_backward(
            drelu, conv_in[static_cast<std::size_t>(j)], ks[static_cast<std::size_t>(j)],
            dil[static_cast<std::size_t>(j)]);
        d = grads[static_cast<std::size_t>(j)].input_grad;
    }

    for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t i = 0; i < 3; ++i)
            CHECK(oracles::grad_matches(grads[j].kernel_grad[i], oracles::central_diff(f, ks[j].w[i]),
                                        1e-5));
    for (std::size_t i = 0; i < x.v.size(); ++i)
        CHECK(oracles::grad_matches(d.v[i], oracles::central_diff(f, x.v[i]), 1e-5));
}
