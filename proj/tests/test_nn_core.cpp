#include <doctest.h>

#include <cmath>

#include "etpick/heatmap.hpp"
#include "etpick/params.hpp"
#include "etpick/rng.hpp"
#include "etpick/tape.hpp"

using namespace etpick;

namespace {

TensorD random_tensor(std::vector<int> shape, std::uint64_t seed, double scale = 1.0) {
    TensorD t(std::move(shape));
    Rng rng(seed);
    for (auto& v : t.data) v = scale * rng.normal();
    return t;
}

// Brute-force output-shape oracle: walks every (k, stride, pad) placement.
int brute_out_dim(int in, int k, int stride, int pad) {
    int n = 0;
    for (int start = -pad;; start += stride) {
        if (start + k > in + pad) break;
        ++n;
    }
    return n;
}

}  // namespace

TEST_CASE("conv3 identity kernel") {
    TensorD x = random_tensor({1, 3, 3, 3}, 1);
    TensorD w({1, 1, 1, 1, 1});
    w[0] = 1.0;
    TensorD b({1});
    TensorD y;
    ops::conv3_forward(x, w, b, 1, 0, y);
    CHECK(y.shape == x.shape);
    for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(y[i] == doctest::Approx(x[i]));
}

TEST_CASE("conv3 all-ones 3x3x3 kernel sums the 27-neighborhood") {
    TensorD x({1, 5, 5, 5}, 1.0);
    TensorD w({1, 1, 3, 3, 3}, 1.0);
    TensorD b({1});
    TensorD y;
    ops::conv3_forward(x, w, b, 1, 1, y);
    REQUIRE(y.shape == std::vector<int>{1, 5, 5, 5});
    CHECK(y.at4(0, 2, 2, 2) == doctest::Approx(27.0));
    CHECK(y.at4(0, 0, 0, 0) == doctest::Approx(8.0));  // corner sees 2x2x2
}

TEST_CASE("conv3/maxpool3 output shape law matches brute-force index walk") {
    for (int in : {5, 6, 7, 9, 12}) {
        for (int k : {1, 3, 5}) {
            for (int stride : {1, 2}) {
                for (int pad : {0, 1, 2}) {
                    if (in + 2 * pad < k) continue;
                    CHECK(ops::conv_out_dim(in, k, stride, pad) == brute_out_dim(in, k, stride, pad));
                }
            }
        }
    }
}

TEST_CASE("conv3 gradients match central finite differences") {
    TensorD x = random_tensor({2, 6, 6, 6}, 2);
    TensorD w = random_tensor({3, 2, 3, 3, 3}, 3, 0.5);
    TensorD b = random_tensor({3}, 4, 0.1);
    TensorD wsum = random_tensor({3, 3, 3, 3}, 5);  // scalarization weights

    auto scalar_fn = [&](const std::vector<TensorD>& in) {
        nn::Graph<double> g;
        int xi = g.leaf(in[0], false);
        int wi = g.leaf(in[1], false);
        int bi = g.leaf(in[2], false);
        int y = nn::conv3(g, xi, wi, bi, 2, 1);
        double s = 0.0;
        for (std::int64_t i = 0; i < g.value(y).numel(); ++i) s += g.value(y)[i] * wsum[i];
        return s;
    };

    nn::Graph<double> g;
    int xi = g.leaf(x, true);
    int wi = g.leaf(w, true);
    int bi = g.leaf(b, true);
    int y = nn::conv3(g, xi, wi, bi, 2, 1);
    int loss = nn::dot_const(g, y, wsum);
    g.backward(loss);

    auto rep = nn::grad_check(scalar_fn, {x, w, b}, {g.grad(xi), g.grad(wi), g.grad(bi)}, 1e-4);
    CHECK(rep.max_rel_err < 1e-4);
    CHECK(rep.checked == x.numel() + w.numel() + b.numel());
}

TEST_CASE("maxpool3 constant input and spike dilation") {
    TensorD x({1, 4, 4, 4}, 2.5);
    TensorD y;
    ops::maxpool3_forward(x, 3, 1, 1, y, nullptr);
    for (auto v : y.data) CHECK(v == doctest::Approx(2.5));

    TensorD spike({1, 7, 7, 7});
    spike.at4(0, 3, 3, 3) = 1.0;
    ops::maxpool3_forward(spike, 3, 1, 1, y, nullptr);
    for (int z = 0; z < 7; ++z)
        for (int yy = 0; yy < 7; ++yy)
            for (int xx = 0; xx < 7; ++xx) {
                const bool inside = std::abs(z - 3) <= 1 && std::abs(yy - 3) <= 1 && std::abs(xx - 3) <= 1;
                CHECK(y.at4(0, z, yy, xx) == doctest::Approx(inside ? 1.0 : 0.0));
            }
}

TEST_CASE("maxpool3 gradient matches finite differences") {
    TensorD x = random_tensor({2, 5, 5, 5}, 6);
    TensorD wsum = random_tensor({2, 3, 3, 3}, 7);

    auto scalar_fn = [&](const std::vector<TensorD>& in) {
        nn::Graph<double> g;
        int xi = g.leaf(in[0], false);
        int y = nn::maxpool3(g, xi, 3, 2, 1);
        double s = 0.0;
        for (std::int64_t i = 0; i < g.value(y).numel(); ++i) s += g.value(y)[i] * wsum[i];
        return s;
    };
    nn::Graph<double> g;
    int xi = g.leaf(x, true);
    int y = nn::maxpool3(g, xi, 3, 2, 1);
    int loss = nn::dot_const(g, y, wsum);
    g.backward(loss);
    auto rep = nn::grad_check(scalar_fn, {x}, {g.grad(xi)}, 1e-4);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("sigmoid, upsample2, relu basics") {
    TensorD x({1, 1, 1, 1});
    TensorD y;
    ops::sigmoid_forward(x, y);
    CHECK(y[0] == doctest::Approx(0.5));

    TensorD v({1, 1, 1, 1});
    v[0] = 3.25;
    ops::upsample2_forward(v, y);
    REQUIRE(y.shape == std::vector<int>{1, 2, 2, 2});
    for (auto e : y.data) CHECK(e == doctest::Approx(3.25));

    TensorD r({1, 1, 1, 2});
    r[0] = -1.0;
    r[1] = 2.0;
    ops::relu_forward(r, y);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 2.0);
}

TEST_CASE("elementwise and structural op gradients match finite differences") {
    TensorD a = random_tensor({2, 4, 4, 4}, 8);
    TensorD b = random_tensor({3, 4, 4, 4}, 9);
    TensorD wsum = random_tensor({5, 8, 8, 8}, 10);

    auto build = [&](nn::Graph<double>& g, int ai, int bi) {
        int r = nn::relu(g, ai);
        int s = nn::sigmoid(g, r);
        int c = nn::concat_channels(g, s, bi);
        int u = nn::upsample2(g, c);
        return u;
    };
    auto scalar_fn = [&](const std::vector<TensorD>& in) {
        nn::Graph<double> g;
        int ai = g.leaf(in[0], false);
        int bi = g.leaf(in[1], false);
        int u = build(g, ai, bi);
        double s = 0.0;
        for (std::int64_t i = 0; i < g.value(u).numel(); ++i) s += g.value(u)[i] * wsum[i];
        return s;
    };
    nn::Graph<double> g;
    int ai = g.leaf(a, true);
    int bi = g.leaf(b, true);
    int u = build(g, ai, bi);
    int loss = nn::dot_const(g, u, wsum);
    g.backward(loss);
    auto rep = nn::grad_check(scalar_fn, {a, b}, {g.grad(ai), g.grad(bi)}, 1e-4);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("groupnorm normalizes per group and its gradient checks out") {
    TensorD x = random_tensor({4, 3, 3, 3}, 11, 2.0);
    TensorD gain({4}, 1.0);
    TensorD shift({4});
    TensorD y;
    ops::GroupNormStats<double> stats;
    ops::groupnorm_forward(x, 2, gain, shift, 1e-5, y, &stats);

    // per-group statistics oracle
    const std::int64_t n = 2 * 27;
    for (int grp = 0; grp < 2; ++grp) {
        double sum = 0.0, sq = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
            const double v = y[grp * n + i];
            sum += v;
            sq += v * v;
        }
        const double mean = sum / static_cast<double>(n);
        const double var = sq / static_cast<double>(n) - mean * mean;
        CHECK(std::abs(mean) < 1e-6);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
    }

    CHECK_THROWS(ops::groupnorm_forward<double>(x, 3, gain, shift, 1e-5, y, nullptr));

    TensorD g2 = random_tensor({4}, 12, 0.5);
    TensorD s2 = random_tensor({4}, 13, 0.5);
    TensorD wsum = random_tensor({4, 3, 3, 3}, 14);
    auto scalar_fn = [&](const std::vector<TensorD>& in) {
        nn::Graph<double> g;
        int xi = g.leaf(in[0], false);
        int gi = g.leaf(in[1], false);
        int si = g.leaf(in[2], false);
        int yid = nn::groupnorm(g, xi, 2, gi, si);
        double s = 0.0;
        for (std::int64_t i = 0; i < g.value(yid).numel(); ++i) s += g.value(yid)[i] * wsum[i];
        return s;
    };
    nn::Graph<double> g;
    int xi = g.leaf(x, true);
    int gi = g.leaf(g2, true);
    int si = g.leaf(s2, true);
    int yid = nn::groupnorm(g, xi, 2, gi, si);
    int loss = nn::dot_const(g, yid, wsum);
    g.backward(loss);
    auto rep = nn::grad_check(scalar_fn, {x, g2, s2}, {g.grad(xi), g.grad(gi), g.grad(si)}, 1e-4);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("grad_check on a linear function sits at machine precision") {
    TensorD x = random_tensor({2, 2, 2, 2}, 15);
    TensorD wsum = random_tensor({2, 2, 2, 2}, 16);
    auto scalar_fn = [&](const std::vector<TensorD>& in) {
        double s = 0.0;
        for (std::int64_t i = 0; i < in[0].numel(); ++i) s += in[0][i] * wsum[i];
        return s;
    };
    auto rep = nn::grad_check(scalar_fn, {x}, {wsum}, 1e-4);
    CHECK(rep.max_rel_err < 1e-9);
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
    ParamSet<double> ps;
    ps.add("w", random_tensor({4}, 17));
    TensorD before = ps.at("w");
    auto st = OptimizerState<double>::init(ps, AdamConfig{});
    std::vector<TensorD> grads{TensorD({4})};
    adam_step(ps, grads, st);
    for (int i = 0; i < 4; ++i) CHECK(ps.at("w")[i] == before[i]);
    CHECK(st.step == 1);
}

TEST_CASE("adam single step matches the hand-computed update") {
    // theta = 1, g = 0.3, lr = 0.1, defaults otherwise
    ParamSet<double> ps;
    TensorD w({1});
    w[0] = 1.0;
    ps.add("w", std::move(w));
    AdamConfig cfg;
    cfg.lr = 0.1;
    auto st = OptimizerState<double>::init(ps, cfg);
    TensorD g({1});
    g[0] = 0.3;
    adam_step(ps, {g}, st);

    const double m = 0.1 * 0.3;            // (1-b1)*g
    const double v = 0.001 * 0.09;         // (1-b2)*g^2
    const double mhat = m / (1.0 - 0.9);   // bias corrected, t=1
    const double vhat = v / (1.0 - 0.999);
    const double expect = 1.0 - 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
    CHECK(ps.at("w")[0] == doctest::Approx(expect).epsilon(1e-7));
}

TEST_CASE("adam drives theta^2 toward zero") {
    ParamSet<double> ps;
    TensorD w({1});
    w[0] = 1.0;
    ps.add("w", std::move(w));
    AdamConfig cfg;
    cfg.lr = 0.05;
    auto st = OptimizerState<double>::init(ps, cfg);
    for (int i = 0; i < 100; ++i) {
        TensorD g({1});
        g[0] = 2.0 * ps.at("w")[0];
        adam_step(ps, {g}, st);
    }
    CHECK(std::abs(ps.at("w")[0]) < 0.5);
}

TEST_CASE("adam rejects misaligned gradients") {
    ParamSet<double> ps;
    ps.add("w", TensorD({2}));
    auto st = OptimizerState<double>::init(ps, AdamConfig{});
    CHECK_THROWS(adam_step(ps, {}, st));
    std::vector<TensorD> wrong{TensorD({3})};
    CHECK_THROWS(adam_step(ps, wrong, st));
}

TEST_CASE("reweighted loss gradient matches finite differences (tape node)") {
    TensorD target({1, 2, 2, 2});
    target[0] = 1.0;
    target[3] = 0.7;
    TensorD pred = random_tensor({1, 2, 2, 2}, 18, 0.2);
    for (auto& v : pred.data) v = 0.5 + 0.3 * std::tanh(v);
    LossConfig cfg;

    auto scalar_fn = [&](const std::vector<TensorD>& in) {
        return reweighted_mse(in[0], target, cfg);
    };
    nn::Graph<double> g;
    int pi = g.leaf(pred, true);
    int loss = reweighted_mse_node(g, pi, target, cfg);
    g.backward(loss);
    auto rep = nn::grad_check(scalar_fn, {pred}, {g.grad(pi)}, 1e-4);
    CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("ops reject shape mismatches") {
    TensorD a({1, 2, 2, 2});
    TensorD b({1, 3, 3, 3});
    TensorD y;
    CHECK_THROWS(ops::add_forward(a, b, y));
    TensorD w({1, 2, 3, 3, 3});  // expects 2 input channels
    TensorD bias({1});
    CHECK_THROWS(ops::conv3_forward(a, w, bias, 1, 1, y));
    CHECK_THROWS(ops::concat_channels_forward(a, b, y));
}

TEST_CASE("ParamSet clone is a deep copy and EMA math holds") {
    ParamSet<double> student;
    student.add("w", random_tensor({8}, 19));
    ParamSet<double> teacher = student.clone();
    student.at("w")[0] += 1.0;
    CHECK(teacher.at("w")[0] != student.at("w")[0]);

    // alpha edge cases
    ParamSet<double> t2 = teacher.clone();
    ema_update(t2, student, 1.0);
    CHECK(t2.bytes_identical(student));
    ParamSet<double> t3 = teacher.clone();
    ema_update(t3, student, 0.0);
    CHECK(t3.bytes_identical(teacher));
}

TEST_CASE("EMA closed form: n repeats of a constant student") {
    ParamSet<double> teacher;
    teacher.add("w", TensorD({1}));
    ParamSet<double> student;
    TensorD one({1});
    one[0] = 1.0;
    student.add("w", std::move(one));
    const double alpha = 0.1;
    for (int i = 0; i < 10; ++i) ema_update(teacher, student, alpha);
    CHECK(teacher.at("w")[0] == doctest::Approx(1.0 - std::pow(0.9, 10)).epsilon(1e-12));
}
