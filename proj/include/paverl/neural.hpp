#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "paverl/common.hpp"

namespace paverl::neural {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Head { Linear, Softmax };

// Small fixed-topology feed-forward network: rectifier hidden layers and a
// linear or softmax head. Samples are columns, so a batch forward is a chain
// of matrix-matrix products.
struct Mlp {
    std::vector<int> sizes;          // layer widths, input first
    Head head = Head::Linear;
    std::uint64_t seed = 0;
    std::vector<MatrixXd> weights;   // weights[l] is sizes[l+1] x sizes[l]
    std::vector<VectorXd> biases;

    int input_size() const { return sizes.front(); }
    int output_size() const { return sizes.back(); }
    int layer_count() const { return static_cast<int>(weights.size()); }
    std::size_t parameter_count() const;
};

// Deterministic initialization: weights uniform in
// [-sqrt(3/fan_in), sqrt(3/fan_in)] (unit fan-in variance), biases zero.
Mlp mlp_new(const std::vector<int>& sizes, Head head, std::uint64_t seed);

// Activation cache from a forward pass; required by backward().
struct ForwardCache {
    MatrixXd input;                      // input batch, features x batch
    std::vector<MatrixXd> pre_activations;
    std::vector<MatrixXd> activations;   // post-rectifier (hidden) / head output (last)
    std::uint64_t net_tag = 0;           // guards against stale caches
};

// Batched forward pass: x is (input_size x batch). The softmax head returns
// per-column probability vectors.
MatrixXd forward(const Mlp& m, const MatrixXd& x, ForwardCache* cache = nullptr);
VectorXd forward(const Mlp& m, const VectorXd& x, ForwardCache* cache = nullptr);

struct Gradients {
    std::vector<MatrixXd> weights;
    std::vector<VectorXd> biases;

    void setZero();
    double squaredNorm() const;
    bool allFinite() const;
};

// Exact backpropagation of `output_gradient` (dLoss/dOutput, same shape as the
// forward output; for the softmax head this is the gradient w.r.t. the
// probabilities and the softmax Jacobian is applied internally).
Gradients backward(const Mlp& m, const ForwardCache& cache, const MatrixXd& output_gradient);

// Central-difference verification of backward() for an arbitrary scalar loss.
// `loss_of_output` maps network output to a scalar; `analytic_output_gradient`
// is dLoss/dOutput at the unperturbed point (same shape as the output) and
// feeds backward() to obtain the analytic parameter gradients. Pass
// `override_grads` to check an externally supplied gradient instead. Checks
// every parameter, or a seeded random subsample above 10^4 parameters.
// Returns the maximum relative error.
double grad_check(Mlp m, const MatrixXd& x,
                  const std::function<double(const MatrixXd&)>& loss_of_output, double eps,
                  const MatrixXd& analytic_output_gradient,
                  const Gradients* override_grads = nullptr);

enum class OptimizerKind { Sgd, Adam };

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::Adam;
    double learning_rate = 1e-3;
    // Adam accumulators, lazily shaped on the first step.
    std::vector<MatrixXd> first_moment_w, second_moment_w;
    std::vector<VectorXd> first_moment_b, second_moment_b;
    std::int64_t step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

OptimizerState make_optimizer(OptimizerKind kind, double learning_rate);

// In-place parameter update. Throws ValidationError on non-finite gradients
// (update rejected, parameters untouched).
void optimizer_step(Mlp& m, const Gradients& grads, OptimizerState& opt);

// Versioned JSON model file with hex-encoded parameters; load(save(m)) is
// bit-identical. Includes an FNV-1a checksum of the payload.
void save_mlp(const Mlp& m, const std::string& path);
Mlp load_mlp(const std::string& path);

std::string mlp_to_json_string(const Mlp& m);
Mlp mlp_from_json_string(const std::string& text);

// Bit-exact optimizer round-trip (hex-encoded moments) for training
// checkpoints.
std::string optimizer_to_json_string(const OptimizerState& opt);
OptimizerState optimizer_from_json_string(const std::string& text);

}  // namespace paverl::neural
