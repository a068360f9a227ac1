#include "doctest.h"

#include "qig/tape.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace qig;
using namespace qig::ad;

namespace {

NodeId vec_leaf(Tape& t, const std::vector<double>& v) {
    return t.leaf(Tensor::vector(v));
}

} // namespace

TEST_CASE("square of a scalar: value and gradient") {
    Tape t;
    const NodeId theta = t.leaf(Tensor::scalar(3.0));
    const NodeId y = t.square(theta);
    CHECK(t.value(y).scalar_value() == doctest::Approx(9.0));
    const NodeId wrt[1] = {theta};
    const auto g = t.gradient(y, std::span<const NodeId>(wrt));
    CHECK(g[0].scalar_value() == doctest::Approx(6.0));
}

TEST_CASE("identity passes values through") {
    Tape t;
    const NodeId x = t.leaf(Tensor::scalar(-2.75));
    const NodeId y = t.offset(x, 0.0);
    CHECK(t.value(y).scalar_value() == -2.75);
}

TEST_CASE("unreachable parameters get zero gradients") {
    Tape t;
    const NodeId theta = t.leaf(Tensor::vector({1.0, 2.0}));
    const NodeId other = t.leaf(Tensor::scalar(5.0));
    const NodeId y = t.square(other);
    const NodeId wrt[2] = {theta, other};
    const auto g = t.gradient(y, std::span<const NodeId>(wrt));
    CHECK(g[0].data[0] == 0.0);
    CHECK(g[0].data[1] == 0.0);
    CHECK(g[1].scalar_value() == doctest::Approx(10.0));
}

TEST_CASE("gradient of a non-scalar output is an error") {
    Tape t;
    const NodeId x = t.leaf(Tensor::vector({1.0, 2.0}));
    const NodeId y = t.scale(x, 2.0);
    const NodeId wrt[1] = {x};
    CHECK_THROWS_AS((void)t.gradient(y, std::span<const NodeId>(wrt)), Error);
}

TEST_CASE("shape mismatch errors name the offending shapes") {
    Tape t;
    const NodeId a = t.leaf(Tensor::vector({1.0, 2.0}));
    const NodeId b = t.leaf(Tensor::vector({1.0, 2.0, 3.0}));
    CHECK_THROWS_WITH_AS((void)t.add(a, b), doctest::Contains("[2]"), Error);
    CHECK_THROWS_WITH_AS((void)t.matmul(a, b), doctest::Contains("2-D"), Error);
}

// A composite touching most primitives; used by the finite-difference checks.
static NodeId composite(Tape& t, NodeId p /* 10-vector */) {
    auto idx = std::make_shared<std::vector<std::int64_t>>(
        std::vector<std::int64_t>{0, 2, 4, 6, 8, 1, 3, 5, 7, 9, 0, 5});
    const NodeId shuffled = t.gather(p, idx, {3, 4});
    const NodeId m = t.matmul(shuffled, t.transpose(shuffled)); // [3,3]
    const NodeId act = t.leaky_relu(t.reshape(m, {9}), 0.2);
    const NodeId s1 = t.sum(t.mul(act, act));
    const NodeId s2 = t.dot(p, p);
    const NodeId mix = t.add(t.scale(s1, 0.125), t.sqrt(t.offset(s2, 1.0)));
    return t.square(t.offset(mix, -0.5));
}

TEST_CASE("random composite matches central finite differences") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const std::vector<double> x = test::random_vector(10, rng);
        Tape t;
        const NodeId p = vec_leaf(t, x);
        const NodeId y = composite(t, p);
        const NodeId wrt[1] = {p};
        const auto g = t.gradient(y, std::span<const NodeId>(wrt));
        const auto fd = test::central_diff(
            [&](const std::vector<double>& v) {
                Tape t2;
                return t2.value(composite(t2, vec_leaf(t2, v))).scalar_value();
            },
            x);
        CHECK(test::max_rel_error(g[0].data, fd) < 1e-6);
    }
}

TEST_CASE("per-primitive gradients match finite differences on 100 seeds") {
    using Builder = std::function<NodeId(Tape&, NodeId)>;
    const std::vector<std::pair<const char*, Builder>> cases = {
        {"add", [](Tape& t, NodeId p) {
             return t.sum(t.add(p, t.constant(Tensor::vector({1, 2, 3, 4}))));
         }},
        {"sub_scalar_broadcast", [](Tape& t, NodeId p) {
             return t.sum(t.square(t.sub(p, t.constant(Tensor::scalar(0.5)))));
         }},
        {"mul", [](Tape& t, NodeId p) { return t.sum(t.mul(p, p)); }},
        {"div", [](Tape& t, NodeId p) {
             return t.sum(t.div(p, t.constant(Tensor::scalar(3.0))));
         }},
        {"div_by_sum", [](Tape& t, NodeId p) {
             const NodeId sq = t.mul(p, p);
             return t.dot(t.div(sq, t.sum(sq)), t.constant(Tensor::vector({1, -2, 3, -4})));
         }},
        {"neg_offset_scale", [](Tape& t, NodeId p) {
             return t.sum(t.scale(t.offset(t.neg(p), 2.0), 1.5));
         }},
        {"sqrt", [](Tape& t, NodeId p) {
             return t.sum(t.sqrt(t.offset(t.square(p), 1.0)));
         }},
        {"atan2", [](Tape& t, NodeId p) {
             const NodeId shifted = t.offset(p, 3.0);
             return t.sum(t.atan2(p, shifted));
         }},
        {"dot", [](Tape& t, NodeId p) { return t.dot(p, p); }},
        {"matmul_transpose", [](Tape& t, NodeId p) {
             const NodeId m = t.reshape(p, {2, 2});
             return t.sum(t.matmul(m, t.transpose(m)));
         }},
        {"gather_scatter", [](Tape& t, NodeId p) {
             auto gi = std::make_shared<std::vector<std::int64_t>>(
                 std::vector<std::int64_t>{3, 3, -1, 0, 2, 1});
             const NodeId gathered = t.gather(p, gi, {6});
             auto si = std::make_shared<std::vector<std::int64_t>>(
                 std::vector<std::int64_t>{0, 1, 0, 1, -1, 2});
             return t.sum(t.square(t.scatter_add(gathered, si, {3})));
         }},
        {"leaky_relu", [](Tape& t, NodeId p) { return t.sum(t.leaky_relu(p, 0.2)); }},
        {"relu", [](Tape& t, NodeId p) { return t.sum(t.mul(t.relu(p), p)); }},
        {"max_reduce", [](Tape& t, NodeId p) { return t.square(t.max_reduce(p)); }},
    };
    Rng rng(23);
    for (int seed = 0; seed < 100; ++seed) {
        const auto& [name, builder] = cases[static_cast<std::size_t>(seed) % cases.size()];
        const std::vector<double> x = test::random_vector(4, rng);
        Tape t;
        const NodeId p = vec_leaf(t, x);
        const NodeId wrt[1] = {p};
        const auto g = t.gradient(builder(t, p), std::span<const NodeId>(wrt));
        const auto fd = test::central_diff(
            [&](const std::vector<double>& v) {
                Tape t2;
                return t2.value(builder(t2, vec_leaf(t2, v))).scalar_value();
            },
            x);
        INFO(name);
        CHECK(test::max_rel_error(g[0].data, fd) < 1e-5);
    }
}

TEST_CASE("gradients are linear in the output") {
    Rng rng(31);
    const std::vector<double> x = test::random_vector(10, rng);
    const double a = 1.7;
    const double b = -0.3;
    Tape t;
    const NodeId p = vec_leaf(t, x);
    const NodeId f = composite(t, p);
    const NodeId g = t.dot(p, p);
    const NodeId combo = t.add(t.scale(f, a), t.scale(g, b));
    const NodeId wrt[1] = {p};
    const auto grad_f = t.gradient(f, std::span<const NodeId>(wrt));
    const auto grad_g = t.gradient(g, std::span<const NodeId>(wrt));
    const auto grad_combo = t.gradient(combo, std::span<const NodeId>(wrt));
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(grad_combo[0].data[i] ==
              doctest::Approx(a * grad_f[0].data[i] + b * grad_g[0].data[i]).epsilon(1e-12));
    }
}

TEST_CASE("replaying the record reproduces values bit-identically") {
    Rng rng(37);
    const std::vector<double> x = test::random_vector(10, rng);
    Tape t;
    const NodeId p = vec_leaf(t, x);
    const NodeId y = composite(t, p);
    const double first = t.value(y).scalar_value();
    const double replayed = t.replay(y).scalar_value();
    CHECK(first == replayed);
}

// d/dw [ (d/dx f_w(x))^T v ]: the reverse-over-reverse path the gradient
// penalty relies on.
TEST_CASE("second-order path matches finite differences over w") {
    Rng rng(41);
    const std::vector<double> x0 = test::random_vector(4, rng);
    const std::vector<double> v = test::random_vector(4, rng);
    for (int trial = 0; trial < 10; ++trial) {
        const std::vector<double> w0 = test::random_vector(8, rng);
        const auto inner = [&](Tape& t, NodeId w, NodeId x) {
            // f_w(x) = sum(leaky(W x)) with W the 2x4 reshape of w[0..8)
            const NodeId wm = t.reshape(w, {2, 4});
            const NodeId xm = t.reshape(x, {4, 1});
            return t.sum(t.leaky_relu(t.matmul(wm, xm), 0.2));
        };
        const auto scalar_fn = [&](const std::vector<double>& w_val) {
            Tape t;
            const NodeId w = vec_leaf(t, w_val);
            const NodeId x = vec_leaf(t, x0);
            const NodeId f = inner(t, w, x);
            const NodeId gx = t.gradient_node(f, x);
            return t.value(t.dot(gx, t.constant(Tensor::vector(v)))).scalar_value();
        };
        Tape t;
        const NodeId w = vec_leaf(t, w0);
        const NodeId x = vec_leaf(t, x0);
        const NodeId f = inner(t, w, x);
        const NodeId gx = t.gradient_node(f, x);
        const NodeId target = t.dot(gx, t.constant(Tensor::vector(v)));
        const NodeId wrt[1] = {w};
        const auto grad_w = t.gradient(target, std::span<const NodeId>(wrt));
        const auto fd = test::central_diff(scalar_fn, w0);
        CHECK(test::max_rel_error(grad_w[0].data, fd) < 1e-5);
    }
}

TEST_CASE("input-gradient node of a linear map recovers the weights") {
    Tape t;
    const NodeId w = t.leaf(Tensor::vector({2.0, -1.0, 0.5}));
    const NodeId x = t.leaf(Tensor::vector({0.3, 0.7, -0.2}));
    const NodeId score = t.dot(w, x);
    const NodeId gx = t.gradient_node(score, x);
    CHECK(t.value(gx).data[0] == doctest::Approx(2.0));
    CHECK(t.value(gx).data[1] == doctest::Approx(-1.0));
    CHECK(t.value(gx).data[2] == doctest::Approx(0.5));

    // (|w| - 1)^2 for scalar-like critic D(x) = w.x; weight-gradient of the
    // penalty at w = (2,0,0) is 2(|w|-1) w/|w| = (2,0,0)
    Tape t2;
    const NodeId w2 = t2.leaf(Tensor::vector({2.0, 0.0, 0.0}));
    const NodeId x2 = t2.leaf(Tensor::vector({0.1, 0.2, 0.3}));
    const NodeId score2 = t2.dot(w2, x2);
    const NodeId g2 = t2.gradient_node(score2, x2);
    const NodeId pen = t2.square(t2.offset(t2.sqrt(t2.dot(g2, g2)), -1.0));
    CHECK(t2.value(pen).scalar_value() == doctest::Approx(1.0));
    const NodeId wrt[1] = {w2};
    const auto gw = t2.gradient(pen, std::span<const NodeId>(wrt));
    CHECK(gw[0].data[0] == doctest::Approx(2.0));
    CHECK(gw[0].data[1] == doctest::Approx(0.0));
    CHECK(gw[0].data[2] == doctest::Approx(0.0));
}

TEST_CASE("constant network has zero input gradient and zero penalty gradient") {
    Tape t;
    const NodeId c = t.leaf(Tensor::scalar(3.0));
    const NodeId x = t.leaf(Tensor::vector({1.0, 2.0}));
    const NodeId score = t.add(c, t.scale(t.dot(x, x), 0.0));
    const NodeId gx = t.gradient_node(score, x);
    CHECK(t.value(gx).data[0] == 0.0);
    CHECK(t.value(gx).data[1] == 0.0);
    const NodeId pen = t.square(t.offset(t.sqrt(t.dot(gx, gx)), -1.0));
    CHECK(t.value(pen).scalar_value() == doctest::Approx(1.0));
    const NodeId wrt[1] = {c};
    const auto gw = t.gradient(pen, std::span<const NodeId>(wrt));
    CHECK(gw[0].scalar_value() == 0.0);
}

TEST_CASE("gradient_node refuses primitives without a differentiable backward") {
    Tape t;
    const NodeId x = t.leaf(Tensor::vector({1.0, 2.0}));
    const NodeId y = t.sum(t.sqrt(x));
    CHECK_THROWS_AS((void)t.gradient_node(y, x), Error);
}
