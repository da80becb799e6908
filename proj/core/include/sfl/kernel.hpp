#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "sfl/network.hpp"
#include "sfl/tensor.hpp"

namespace sfl {

struct ParamEntry {
    std::size_t layer_index = 0;
    Tensor weights;
    Tensor bias;
    bool operator==(const ParamEntry&) const = default;
};

/// Trainable weights of a (sub)network, one entry per Conv1D/Dense layer
/// in ascending layer order.
struct ParameterSet {
    std::vector<ParamEntry> entries;
    bool operator==(const ParameterSet&) const = default;
};

// Gradients mirror the parameter layout exactly.
using GradientSet = ParameterSet;

/// Seeded uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per trainable layer.
ParameterSet init_params(const NetworkSpec& spec, std::uint64_t seed);

struct ForwardTrace {
    std::vector<Tensor> inputs;  // input of every layer, in order
    Tensor output;
};

/// Forward pass over a (batch, C, L) input; caches every layer input for backward.
ForwardTrace forward(const NetworkSpec& spec, const ParameterSet& params, const Tensor& input);

struct LossResult {
    double loss = 0.0;
    Tensor dlogits;
};

/// Mean softmax cross-entropy over the batch plus its logits gradient.
LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<std::uint32_t>& labels);

/// Row-wise softmax of (batch, C) logits.
Tensor softmax(const Tensor& logits);

struct BackwardResult {
    GradientSet grads;
    Tensor dinput;  // gradient w.r.t. the network input (cut-layer gradient for a server subnet)
};

BackwardResult backward(const NetworkSpec& spec, const ParameterSet& params,
                        const std::vector<Tensor>& activations, const Tensor& dout);

/// Pure SGD update: p <- p - eta * g. Inputs are not modified.
ParameterSet sgd_step(const ParameterSet& params, const GradientSet& grads, double eta);

/// Max relative error between analytic and central-difference gradients over
/// every parameter. Returns 0 for a parameter-free network.
double gradient_check(const NetworkSpec& spec, const ParameterSet& params, const Tensor& input,
                      const std::vector<std::uint32_t>& labels, double eps);

}  // namespace sfl
