#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "paverl/neural.hpp"

using namespace paverl;
using namespace paverl::neural;

namespace {

MatrixXd random_batch(int rows, int cols, std::uint64_t seed) {
    Rng rng(seed);
    MatrixXd x(rows, cols);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    return x;
}

}  // namespace

TEST_CASE("mlp_new builds the requested topology deterministically") {
    const Mlp m = mlp_new({4, 8, 3}, Head::Linear, 42);
    CHECK(m.input_size() == 4);
    CHECK(m.output_size() == 3);
    CHECK(m.layer_count() == 2);
    REQUIRE(m.weights.size() == 2);
    CHECK(m.weights[0].rows() == 8);
    CHECK(m.weights[0].cols() == 4);
    CHECK(m.weights[1].rows() == 3);
    CHECK(m.parameter_count() == 4 * 8 + 8 + 8 * 3 + 3);
    CHECK(m.biases[0].isZero());

    const Mlp same = mlp_new({4, 8, 3}, Head::Linear, 42);
    CHECK(m.weights[0] == same.weights[0]);
    const Mlp other = mlp_new({4, 8, 3}, Head::Linear, 43);
    CHECK(m.weights[0] != other.weights[0]);

    CHECK_THROWS_AS(mlp_new({4}, Head::Linear, 0), ValidationError);
    CHECK_THROWS_AS(mlp_new({4, 0, 3}, Head::Linear, 0), ValidationError);
}

TEST_CASE("forward computes the exact affine-rectifier chain") {
    // Hand-built 2-2-1 net so the arithmetic can be checked on paper.
    Mlp m = mlp_new({2, 2, 1}, Head::Linear, 0);
    m.weights[0] << 1.0, -1.0,
                    0.5, 0.5;
    m.biases[0] << 0.0, -1.0;
    m.weights[1] << 2.0, 3.0;
    m.biases[1] << 0.25;

    VectorXd x(2);
    x << 2.0, 1.0;
    // Layer 1: z = (1*2 - 1*1, 0.5*2 + 0.5*1 - 1) = (1.0, 0.5); relu keeps both.
    // Head: 2*1.0 + 3*0.5 + 0.25 = 3.75.
    const VectorXd y = forward(m, x);
    REQUIRE(y.size() == 1);
    CHECK(y(0) == 3.75);

    // Negative pre-activation is clipped by the rectifier.
    x << -2.0, 0.0;
    // z = (-2.0, -2.0) -> relu (0, 0) -> head 0.25.
    CHECK(forward(m, x)(0) == 0.25);

    VectorXd wrong(3);
    wrong.setZero();
    CHECK_THROWS_AS(forward(m, wrong), ValidationError);
}

TEST_CASE("batched forward equals per-column vector forward") {
    const Mlp m = mlp_new({5, 16, 4}, Head::Softmax, 7);
    const MatrixXd x = random_batch(5, 9, 11);
    const MatrixXd batch = forward(m, x);
    REQUIRE(batch.cols() == 9);
    for (int j = 0; j < 9; ++j) {
        const VectorXd single = forward(m, VectorXd(x.col(j)));
        CHECK((batch.col(j) - single).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("softmax head emits probability columns") {
    const Mlp m = mlp_new({3, 8, 5}, Head::Softmax, 3);
    const MatrixXd p = forward(m, random_batch(3, 12, 5));
    for (int j = 0; j < p.cols(); ++j) {
        CHECK(p.col(j).sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(p.col(j).minCoeff() > 0.0);
    }
}

TEST_CASE("backward matches central differences on a regression loss") {
    const Mlp m = mlp_new({6, 12, 10, 3}, Head::Linear, 17);
    const MatrixXd x = random_batch(6, 8, 23);
    const MatrixXd y = random_batch(3, 8, 29);
    const double inv_n = 1.0 / static_cast<double>(x.cols());

    ForwardCache cache;
    const MatrixXd out = forward(m, x, &cache);
    const MatrixXd analytic_grad = 2.0 * (out - y) * inv_n;

    const auto loss = [&](const MatrixXd& o) { return (o - y).squaredNorm() * inv_n; };
    const double err = grad_check(m, x, loss, 1e-5, analytic_grad);
    CHECK(err < 1e-5);
}

TEST_CASE("backward applies the exact softmax Jacobian") {
    const Mlp m = mlp_new({4, 10, 6}, Head::Softmax, 31);
    const MatrixXd x = random_batch(4, 5, 37);
    const std::vector<int> labels = {0, 3, 5, 2, 1};

    ForwardCache cache;
    const MatrixXd p = forward(m, x, &cache);
    // Cross-entropy at one label per column; gradient w.r.t. probabilities.
    MatrixXd analytic_grad = MatrixXd::Zero(6, 5);
    for (int j = 0; j < 5; ++j) {
        analytic_grad(labels[static_cast<std::size_t>(j)], j) =
            -1.0 / p(labels[static_cast<std::size_t>(j)], j) / 5.0;
    }
    const auto loss = [&](const MatrixXd& o) {
        double s = 0.0;
        for (int j = 0; j < 5; ++j) s -= std::log(o(labels[static_cast<std::size_t>(j)], j));
        return s / 5.0;
    };
    CHECK(grad_check(m, x, loss, 1e-6, analytic_grad) < 1e-5);
}

TEST_CASE("grad_check flags a corrupted backward pass") {
    const Mlp m = mlp_new({5, 9, 2}, Head::Linear, 41);
    const MatrixXd x = random_batch(5, 4, 43);
    const MatrixXd y = random_batch(2, 4, 47);
    const double inv_n = 0.25;

    ForwardCache cache;
    const MatrixXd out = forward(m, x, &cache);
    const MatrixXd analytic_grad = 2.0 * (out - y) * inv_n;
    Gradients corrupted = backward(m, cache, analytic_grad);
    corrupted.weights[0] *= 1.5;  // deliberate sabotage

    const auto loss = [&](const MatrixXd& o) { return (o - y).squaredNorm() * inv_n; };
    CHECK(grad_check(m, x, loss, 1e-5, analytic_grad, &corrupted) > 1e-2);
}

TEST_CASE("backward rejects a cache from a different network") {
    const Mlp a = mlp_new({3, 6, 2}, Head::Linear, 1);
    const Mlp b = mlp_new({3, 6, 2}, Head::Linear, 2);
    const MatrixXd x = random_batch(3, 4, 3);
    ForwardCache cache;
    forward(a, x, &cache);
    const MatrixXd g = MatrixXd::Ones(2, 4);
    CHECK_NOTHROW(backward(a, cache, g));
    CHECK_THROWS_AS(backward(b, cache, g), ValidationError);
}

TEST_CASE("sgd applies the textbook update") {
    Mlp m = mlp_new({2, 2}, Head::Linear, 5);
    const MatrixXd w_before = m.weights[0];
    Gradients g;
    g.weights = {MatrixXd::Ones(2, 2)};
    g.biases = {VectorXd::Constant(2, 0.5)};
    OptimizerState opt = make_optimizer(OptimizerKind::Sgd, 0.1);
    optimizer_step(m, g, opt);
    CHECK((m.weights[0] - (w_before.array() - 0.1).matrix()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(m.biases[0](0) == -0.05);
}

TEST_CASE("adam's first step has magnitude ~lr in each coordinate") {
    Mlp m = mlp_new({3, 2}, Head::Linear, 9);
    const MatrixXd w_before = m.weights[0];
    Gradients g;
    g.weights = {MatrixXd::Constant(2, 3, 4.0)};  // any positive constant
    g.biases = {VectorXd::Zero(2)};
    OptimizerState opt = make_optimizer(OptimizerKind::Adam, 1e-3);
    optimizer_step(m, g, opt);
    // Bias-corrected m-hat = g, v-hat = g*g, so step = lr * g / (|g| + eps).
    const MatrixXd step = w_before - m.weights[0];
    CHECK(step.minCoeff() == doctest::Approx(1e-3).epsilon(1e-6));
    CHECK(step.maxCoeff() == doctest::Approx(1e-3).epsilon(1e-6));
    CHECK(opt.step_count == 1);
}

TEST_CASE("non-finite gradients are rejected, parameters untouched") {
    Mlp m = mlp_new({2, 2}, Head::Linear, 13);
    const MatrixXd w_before = m.weights[0];
    Gradients g;
    g.weights = {MatrixXd::Constant(2, 2, std::numeric_limits<double>::quiet_NaN())};
    g.biases = {VectorXd::Zero(2)};
    OptimizerState opt = make_optimizer(OptimizerKind::Adam, 1e-3);
    CHECK_THROWS_AS(optimizer_step(m, g, opt), ValidationError);
    CHECK(m.weights[0] == w_before);
}

TEST_CASE("model files round-trip bit-identically and detect tampering") {
    const Mlp m = mlp_new({7, 11, 4}, Head::Softmax, 99);
    const std::string path = "/tmp/paverl_test_mlp.json";
    save_mlp(m, path);
    const Mlp back = load_mlp(path);
    CHECK(back.sizes == m.sizes);
    CHECK(back.head == m.head);
    for (int l = 0; l < m.layer_count(); ++l) {
        CHECK(back.weights[static_cast<std::size_t>(l)] == m.weights[static_cast<std::size_t>(l)]);
        CHECK(back.biases[static_cast<std::size_t>(l)] == m.biases[static_cast<std::size_t>(l)]);
    }

    // Flip one hex digit of the payload: the checksum must catch it.
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const auto pos = text.find("\"params\"");
    REQUIRE(pos != std::string::npos);
    const auto digit = text.find_first_of("0123456789abcdef", pos + 10);
    REQUIRE(digit != std::string::npos);
    text[digit] = text[digit] == '0' ? '1' : '0';
    std::ofstream out(path);
    out << text;
    out.close();
    CHECK_THROWS_AS(load_mlp(path), ConfigError);
    std::remove(path.c_str());
}

TEST_CASE("optimizer state round-trips bit-identically") {
    Mlp m = mlp_new({4, 6, 2}, Head::Linear, 55);
    OptimizerState opt = make_optimizer(OptimizerKind::Adam, 2.5e-4);
    // Take a few steps so the moments are populated with nontrivial values.
    for (int i = 0; i < 3; ++i) {
        const MatrixXd x = random_batch(4, 5, 60 + static_cast<std::uint64_t>(i));
        ForwardCache cache;
        const MatrixXd out = forward(m, x, &cache);
        optimizer_step(m, backward(m, cache, out * 0.2), opt);
    }
    const OptimizerState back = optimizer_from_json_string(optimizer_to_json_string(opt));
    CHECK(back.step_count == opt.step_count);
    CHECK(back.learning_rate == opt.learning_rate);
    REQUIRE(back.first_moment_w.size() == opt.first_moment_w.size());
    for (std::size_t l = 0; l < opt.first_moment_w.size(); ++l) {
        CHECK(back.first_moment_w[l] == opt.first_moment_w[l]);
        CHECK(back.second_moment_w[l] == opt.second_moment_w[l]);
    }
}
