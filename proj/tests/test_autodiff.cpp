#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "urtf/autodiff.hpp"

using namespace urtf::ad;

namespace {

Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    std::normal_distribution<double> dist(0.0, 1.0);
    for (auto& v : t.data) v = dist(rng);
    return t;
}

}  // namespace

TEST_CASE("shape checks") {
    Tape tape;
    auto a = tape.input(Tensor::zeros({2, 3}));
    auto b = tape.input(Tensor::zeros({3, 1}));
    CHECK(tape.value(tape.matmul(a, b)).shape == std::vector<int>{2, 1});
    CHECK_THROWS_AS(tape.add(a, b), ShapeMismatch);
    CHECK_THROWS_AS(tape.matmul(b, a), ShapeMismatch);
}

TEST_CASE("cross_entropy of uniform logits is ln V") {
    for (int v : {2, 5, 117}) {
        Tape tape;
        auto logits = tape.input(Tensor::zeros({v}));
        auto loss = tape.cross_entropy(logits, v / 2);
        CHECK(tape.value(loss).data[0] == doctest::Approx(std::log(v)).epsilon(1e-12));
    }
}

TEST_CASE("cross_entropy gradient is softmax minus onehot") {
    std::mt19937_64 rng(3);
    Tape tape;
    auto logits = tape.input(random_tensor({7}, rng));
    int target = 4;
    auto loss = tape.cross_entropy(logits, target);
    auto g = tape.grad(loss, {logits})[0];

    const auto& x = tape.value(logits);
    double mx = *std::max_element(x.data.begin(), x.data.end());
    double z = 0;
    for (double v : x.data) z += std::exp(v - mx);
    for (int i = 0; i < 7; ++i) {
        double soft = std::exp(x.data[i] - mx) / z;
        double want = soft - (i == target ? 1.0 : 0.0);
        CHECK(tape.value(g).data[i] == doctest::Approx(want).epsilon(1e-10));
    }
}

TEST_CASE("first and second derivatives of powers") {
    Tape tape;
    auto x = tape.input(Tensor::scalar(3.0));
    auto sq = tape.mul(x, x);
    auto g = tape.grad(sq, {x})[0];
    CHECK(tape.value(g).data[0] == doctest::Approx(6.0));

    Tape tape2;
    auto y = tape2.input(Tensor::scalar(2.0));
    auto cube = tape2.mul(tape2.mul(y, y), y);
    auto g1 = tape2.grad(cube, {y})[0];
    CHECK(tape2.value(g1).data[0] == doctest::Approx(12.0));
    auto g2 = tape2.grad(g1, {y})[0];
    CHECK(tape2.value(g2).data[0] == doctest::Approx(12.0));  // d²(y³)/dy² = 6y
}

TEST_CASE("grad requires scalar loss; finite_diff_check rejects epsilon 0") {
    Tape tape;
    auto v = tape.input(Tensor::zeros({3}));
    CHECK_THROWS_AS(tape.grad(v, {v}), NotScalar);
    CHECK_THROWS_AS(
        finite_diff_check([](const std::vector<Tensor>&) { return 0.0; }, {}, {}, 0.0),
        std::invalid_argument);
}

TEST_CASE("finite differences agree on every primitive") {
    std::mt19937_64 rng(17);

    // scalar functions exercising each primitive's backward rule
    struct Case {
        const char* name;
        std::vector<std::vector<int>> shapes;
        std::function<NodeId(Tape&, const std::vector<NodeId>&)> build;
    };
    std::vector<Case> cases{
        {"add_mul_sub", {{4}, {4}},
         [](Tape& t, const std::vector<NodeId>& p) {
             return t.sum(t.mul(t.add(p[0], p[1]), t.sub(p[0], p[1])));
         }},
        {"scale_mean", {{6}},
         [](Tape& t, const std::vector<NodeId>& p) { return t.mean(t.scale(p[0], 2.5)); }},
        {"matmul_transpose", {{2, 3}, {2, 3}},
         [](Tape& t, const std::vector<NodeId>& p) {
             return t.sum(t.mul(t.matmul(p[0], t.transpose(p[1])),
                                t.matmul(p[0], t.transpose(p[1]))));
         }},
        {"log_softmax_pick", {{5}},
         [](Tape& t, const std::vector<NodeId>& p) {
             return t.scale(t.pick(t.log_softmax(p[0]), 2), -1.0);
         }},
        {"exp_sum", {{4}},
         [](Tape& t, const std::vector<NodeId>& p) { return t.sum(t.exp(p[0])); }},
        {"gather_scatter_rows", {{5, 3}},
         [](Tape& t, const std::vector<NodeId>& p) {
             auto g = t.gather_rows(p[0], {1, 1, 4});
             return t.sum(t.mul(g, g));
         }},
        {"concat_slice", {{3}, {4}},
         [](Tape& t, const std::vector<NodeId>& p) {
             auto c = t.concat(p[0], p[1]);
             auto s = t.slice(c, 1, 5);
             return t.sum(t.mul(s, s));
         }},
        {"broadcast_pad", {{1}, {3}},
         [](Tape& t, const std::vector<NodeId>& p) {
             auto b = t.broadcast(t.sum(p[0]), {4});
             auto padded = t.pad(p[1], 1, 4);
             return t.sum(t.mul(b, padded));
         }},
        {"cross_entropy", {{6}},
         [](Tape& t, const std::vector<NodeId>& p) { return t.cross_entropy(p[0], 3); }},
    };

    for (const auto& c : cases) {
        CAPTURE(c.name);
        std::vector<Tensor> params;
        for (const auto& s : c.shapes) params.push_back(random_tensor(s, rng));

        Tape tape;
        std::vector<NodeId> ids;
        for (const auto& p : params) ids.push_back(tape.input(p));
        auto loss = c.build(tape, ids);
        auto grads = tape.grad(loss, ids);
        std::vector<Tensor> analytic;
        for (auto g : grads) analytic.push_back(tape.value(g));

        auto f = [&](const std::vector<Tensor>& xs) {
            Tape t2;
            std::vector<NodeId> id2;
            for (const auto& x : xs) id2.push_back(t2.input(x));
            return t2.value(c.build(t2, id2)).data[0];
        };
        double err = finite_diff_check(f, params, analytic, 1e-5);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("finite differences on a random 50-parameter composite") {
    std::mt19937_64 rng(23);
    std::vector<Tensor> params{random_tensor({5, 4}, rng), random_tensor({4, 5}, rng),
                               random_tensor({10}, rng)};
    auto build = [](Tape& t, const std::vector<NodeId>& p) {
        auto prod = t.matmul(p[0], p[1]);                   // 5x5
        auto row = t.gather_rows(prod, {0, 3});             // 2x5
        auto flat = t.reshape(row, {10});
        auto mixed = t.mul(flat, p[2]);
        auto ls = t.log_softmax(mixed);
        return t.add(t.mean(t.exp(ls)), t.cross_entropy(mixed, 7));
    };
    Tape tape;
    std::vector<NodeId> ids;
    for (const auto& p : params) ids.push_back(tape.input(p));
    auto grads = tape.grad(build(tape, ids), ids);
    std::vector<Tensor> analytic;
    for (auto g : grads) analytic.push_back(tape.value(g));
    auto f = [&](const std::vector<Tensor>& xs) {
        Tape t2;
        std::vector<NodeId> id2;
        for (const auto& x : xs) id2.push_back(t2.input(x));
        return t2.value(build(t2, id2)).data[0];
    };
    CHECK(finite_diff_check(f, params, analytic, 1e-5) < 1e-4);
}

TEST_CASE("linear function has near-zero finite-difference error") {
    Tensor w = Tensor::zeros({8});
    for (int i = 0; i < 8; ++i) w.data[i] = 0.5 * i - 2;
    auto f = [&](const std::vector<Tensor>& xs) {
        double s = 0;
        for (int i = 0; i < 8; ++i) s += w.data[i] * xs[0].data[i];
        return s;
    };
    std::mt19937_64 rng(29);
    CHECK(finite_diff_check(f, {random_tensor({8}, rng)}, {w}, 1e-5) < 1e-8);
}

TEST_CASE("gradient linearity on random inputs") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        Tape tape;
        auto x = tape.input(random_tensor({6}, rng));
        auto f1 = tape.sum(tape.mul(x, x));
        auto f2 = tape.mean(tape.exp(x));
        auto combined = tape.add(f1, f2);
        auto g_comb = tape.grad(combined, {x})[0];
        auto g_sum = tape.add(tape.grad(f1, {x})[0], tape.grad(f2, {x})[0]);
        for (int i = 0; i < 6; ++i)
            CHECK(tape.value(g_comb).data[i] ==
                  doctest::Approx(tape.value(g_sum).data[i]).epsilon(1e-12));
    }
}

TEST_CASE("replay determinism: same inputs, bit-identical outputs") {
    std::mt19937_64 rng(37);
    auto t0 = random_tensor({4, 4}, rng);
    auto run = [&] {
        Tape tape;
        auto a = tape.input(t0);
        auto loss = tape.sum(tape.mul(tape.matmul(a, a), tape.exp(tape.scale(a, 0.1))));
        auto g = tape.grad(loss, {a})[0];
        return std::make_pair(tape.value(loss).data[0], tape.value(g).data);
    };
    auto r1 = run();
    auto r2 = run();
    CHECK(r1.first == r2.first);
    CHECK(r1.second == r2.second);
}

TEST_CASE("one inner step then outer loss matches closed form (1-2a) rule") {
    std::mt19937_64 rng(41);
    const double alpha = 0.07;
    auto theta0 = random_tensor({5}, rng);
    auto a_t = random_tensor({5}, rng);
    auto b_t = random_tensor({5}, rng);

    Tape tape;
    auto theta = tape.input(theta0);
    auto a = tape.input(a_t);
    auto b = tape.input(b_t);
    auto diff_in = tape.sub(theta, a);
    auto inner = tape.sum(tape.mul(diff_in, diff_in));
    auto g_in = tape.grad(inner, {theta})[0];
    auto theta1 = tape.sub(theta, tape.scale(g_in, alpha));
    auto diff_out = tape.sub(theta1, b);
    auto outer = tape.sum(tape.mul(diff_out, diff_out));
    auto g_out = tape.grad(outer, {theta})[0];

    // d/dθ ||θ1 - b||² with θ1 = (1-2α)θ + 2αa  is (1-2α)·2(θ1 - b)
    for (int i = 0; i < 5; ++i) {
        double t1 = (1 - 2 * alpha) * theta0.data[i] + 2 * alpha * a_t.data[i];
        double want = (1 - 2 * alpha) * 2 * (t1 - b_t.data[i]);
        CHECK(std::abs(tape.value(g_out).data[i] - want) < 1e-8);
    }
}

TEST_CASE("detach blocks gradient flow") {
    Tape tape;
    auto x = tape.input(Tensor::scalar(2.0));
    auto frozen = tape.detach(tape.mul(x, x));
    auto loss = tape.mul(frozen, x);  // d/dx = 4 (frozen treated as constant)
    auto g = tape.grad(loss, {x})[0];
    CHECK(tape.value(g).data[0] == doctest::Approx(4.0));
}
