#include "sfl/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace sfl {

namespace {

std::runtime_error layer_error(std::size_t idx, const std::string& what) {
    return std::runtime_error("layer " + std::to_string(idx) + ": " + what);
}

Tensor conv1d_forward(const LayerSpec& l, const Tensor& w, const Tensor& b, const Tensor& x) {
    const std::size_t B = x.shape[0], Cin = x.shape[1], L = x.shape[2];
    const std::size_t Cout = l.out_channels, K = l.kernel_size;
    const std::size_t Lout = output_length(L, K, l.stride, l.padding);
    Tensor y = Tensor::zeros({B, Cout, Lout});
    const long pad = static_cast<long>(l.padding);
    for (std::size_t bi = 0; bi < B; ++bi) {
        for (std::size_t oc = 0; oc < Cout; ++oc) {
            const double bias = b.data[oc];
            for (std::size_t t = 0; t < Lout; ++t) {
                double acc = bias;
                const long base = static_cast<long>(t * l.stride) - pad;
                for (std::size_t ic = 0; ic < Cin; ++ic) {
                    const double* xr = &x.data[(bi * Cin + ic) * L];
                    const double* wr = &w.data[(oc * Cin + ic) * K];
                    for (std::size_t j = 0; j < K; ++j) {
                        const long pos = base + static_cast<long>(j);
                        if (pos >= 0 && pos < static_cast<long>(L)) acc += wr[j] * xr[pos];
                    }
                }
                y.at3(bi, oc, t) = acc;
            }
        }
    }
    return y;
}

void conv1d_backward(const LayerSpec& l, const Tensor& w, const Tensor& x, const Tensor& dy,
                     Tensor& dw, Tensor& db, Tensor& dx) {
    const std::size_t B = x.shape[0], Cin = x.shape[1], L = x.shape[2];
    const std::size_t Cout = l.out_channels, K = l.kernel_size;
    const std::size_t Lout = dy.shape[2];
    const long pad = static_cast<long>(l.padding);
    for (std::size_t bi = 0; bi < B; ++bi) {
        for (std::size_t oc = 0; oc < Cout; ++oc) {
            for (std::size_t t = 0; t < Lout; ++t) {
                const double g = dy.at3(bi, oc, t);
                if (g == 0.0) continue;
                db.data[oc] += g;
                const long base = static_cast<long>(t * l.stride) - pad;
                for (std::size_t ic = 0; ic < Cin; ++ic) {
                    const double* xr = &x.data[(bi * Cin + ic) * L];
                    double* dxr = &dx.data[(bi * Cin + ic) * L];
                    const double* wr = &w.data[(oc * Cin + ic) * K];
                    double* dwr = &dw.data[(oc * Cin + ic) * K];
                    for (std::size_t j = 0; j < K; ++j) {
                        const long pos = base + static_cast<long>(j);
                        if (pos >= 0 && pos < static_cast<long>(L)) {
                            dwr[j] += g * xr[pos];
                            dxr[pos] += g * wr[j];
                        }
                    }
                }
            }
        }
    }
    // db must account for zero-gradient rows skipped above: the skip is exact
    // (adding zero), nothing further to do.
}

Tensor maxpool_forward(const LayerSpec& l, const Tensor& x) {
    const std::size_t B = x.shape[0], C = x.shape[1], L = x.shape[2];
    const std::size_t Lout = output_length(L, l.kernel_size, l.stride, 0);
    Tensor y = Tensor::zeros({B, C, Lout});
    for (std::size_t bi = 0; bi < B; ++bi)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t t = 0; t < Lout; ++t) {
                const std::size_t base = t * l.stride;
                double best = x.at3(bi, c, base);
                for (std::size_t j = 1; j < l.kernel_size; ++j)
                    best = std::max(best, x.at3(bi, c, base + j));
                y.at3(bi, c, t) = best;
            }
    return y;
}

// Gradient routed to the first-index maximum of each window.
void maxpool_backward(const LayerSpec& l, const Tensor& x, const Tensor& dy, Tensor& dx) {
    const std::size_t B = x.shape[0], C = x.shape[1];
    const std::size_t Lout = dy.shape[2];
    for (std::size_t bi = 0; bi < B; ++bi)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t t = 0; t < Lout; ++t) {
                const std::size_t base = t * l.stride;
                std::size_t arg = base;
                double best = x.at3(bi, c, base);
                for (std::size_t j = 1; j < l.kernel_size; ++j) {
                    const double v = x.at3(bi, c, base + j);
                    if (v > best) {
                        best = v;
                        arg = base + j;
                    }
                }
                dx.at3(bi, c, arg) += dy.at3(bi, c, t);
            }
}

Tensor dense_forward(const LayerSpec& l, const Tensor& w, const Tensor& b, const Tensor& x) {
    const std::size_t B = x.shape[0], In = l.in_features, Out = l.out_features;
    Tensor y = Tensor::zeros({B, Out});
    for (std::size_t bi = 0; bi < B; ++bi)
        for (std::size_t o = 0; o < Out; ++o) {
            double acc = b.data[o];
            const double* wr = &w.data[o * In];
            const double* xr = &x.data[bi * In];
            for (std::size_t i = 0; i < In; ++i) acc += wr[i] * xr[i];
            y.at2(bi, o) = acc;
        }
    return y;
}

void dense_backward(const LayerSpec& l, const Tensor& w, const Tensor& x, const Tensor& dy,
                    Tensor& dw, Tensor& db, Tensor& dx) {
    const std::size_t B = x.shape[0], In = l.in_features, Out = l.out_features;
    for (std::size_t bi = 0; bi < B; ++bi)
        for (std::size_t o = 0; o < Out; ++o) {
            const double g = dy.at2(bi, o);
            if (g == 0.0) continue;
            db.data[o] += g;
            double* dwr = &dw.data[o * In];
            const double* xr = &x.data[bi * In];
            const double* wr = &w.data[o * In];
            double* dxr = &dx.data[bi * In];
            for (std::size_t i = 0; i < In; ++i) {
                dwr[i] += g * xr[i];
                dxr[i] += g * wr[i];
            }
        }
}

std::vector<std::size_t> with_batch(std::size_t batch, const std::vector<std::size_t>& s) {
    std::vector<std::size_t> out = {batch};
    out.insert(out.end(), s.begin(), s.end());
    return out;
}

}  // namespace

ParameterSet init_params(const NetworkSpec& spec, std::uint64_t seed) {
    propagate_shapes(spec);  // validate before allocating
    std::mt19937_64 rng(seed);
    ParameterSet params;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        if (!l.trainable()) continue;
        std::size_t fan_in;
        Tensor w, b;
        if (l.kind == LayerKind::Conv1D) {
            fan_in = l.in_channels * l.kernel_size;
            w = Tensor::zeros({l.out_channels, l.in_channels, l.kernel_size});
            b = Tensor::zeros({l.out_channels});
        } else {
            fan_in = l.in_features;
            w = Tensor::zeros({l.out_features, l.in_features});
            b = Tensor::zeros({l.out_features});
        }
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& v : w.data) v = dist(rng);
        for (auto& v : b.data) v = dist(rng);
        params.entries.push_back({i, std::move(w), std::move(b)});
    }
    return params;
}

static const ParamEntry* find_entry(const ParameterSet& params, std::size_t layer_index) {
    for (const auto& e : params.entries)
        if (e.layer_index == layer_index) return &e;
    return nullptr;
}

ForwardTrace forward(const NetworkSpec& spec, const ParameterSet& params, const Tensor& input) {
    if (input.shape.size() != 3 || input.shape[1] != spec.in_channels ||
        input.shape[2] != spec.in_length)
        throw std::runtime_error("forward: input shape " + shape_string(input.shape) +
                                 " does not match network input (B," +
                                 std::to_string(spec.in_channels) + "," +
                                 std::to_string(spec.in_length) + ")");
    ForwardTrace trace;
    Tensor cur = input;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        trace.inputs.push_back(cur);
        switch (l.kind) {
            case LayerKind::Conv1D: {
                const ParamEntry* e = find_entry(params, i);
                if (!e) throw layer_error(i, "missing Conv1D parameters");
                if (cur.shape[1] != l.in_channels)
                    throw layer_error(i, "Conv1D channel mismatch");
                cur = conv1d_forward(l, e->weights, e->bias, cur);
                break;
            }
            case LayerKind::MaxPool1D:
                if (cur.shape.size() != 3) throw layer_error(i, "MaxPool1D expects (B,C,L)");
                cur = maxpool_forward(l, cur);
                break;
            case LayerKind::Dense: {
                const ParamEntry* e = find_entry(params, i);
                if (!e) throw layer_error(i, "missing Dense parameters");
                if (cur.shape.size() != 2 || cur.shape[1] != l.in_features)
                    throw layer_error(i, "Dense input width mismatch, got " +
                                             shape_string(cur.shape));
                cur = dense_forward(l, e->weights, e->bias, cur);
                break;
            }
            case LayerKind::LeakyReLU: {
                Tensor y = cur;
                for (auto& v : y.data)
                    if (v <= 0.0) v *= l.negative_slope;
                cur = std::move(y);
                break;
            }
            case LayerKind::Flatten: {
                if (cur.shape.size() != 3) throw layer_error(i, "Flatten expects (B,C,L)");
                Tensor y = cur;
                y.shape = {cur.shape[0], cur.shape[1] * cur.shape[2]};
                cur = std::move(y);
                break;
            }
        }
    }
    trace.output = std::move(cur);
    return trace;
}

Tensor softmax(const Tensor& logits) {
    const std::size_t B = logits.shape[0], C = logits.shape[1];
    Tensor p = Tensor::zeros({B, C});
    for (std::size_t b = 0; b < B; ++b) {
        double mx = logits.at2(b, 0);
        for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, logits.at2(b, c));
        double sum = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            const double e = std::exp(logits.at2(b, c) - mx);
            p.at2(b, c) = e;
            sum += e;
        }
        for (std::size_t c = 0; c < C; ++c) p.at2(b, c) /= sum;
    }
    return p;
}

LossResult softmax_cross_entropy(const Tensor& logits,
                                 const std::vector<std::uint32_t>& labels) {
    const std::size_t B = logits.shape[0], C = logits.shape[1];
    if (labels.size() != B)
        throw std::invalid_argument("softmax_cross_entropy: label count != batch size");
    for (auto y : labels)
        if (y >= C)
            throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(y) +
                                        " out of range [0," + std::to_string(C) + ")");
    Tensor p = softmax(logits);
    LossResult r;
    r.dlogits = p;
    double loss = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        loss -= std::log(p.at2(b, labels[b]));
        r.dlogits.at2(b, labels[b]) -= 1.0;
    }
    const double inv_b = 1.0 / static_cast<double>(B);
    for (auto& v : r.dlogits.data) v *= inv_b;
    r.loss = loss * inv_b;
    return r;
}

BackwardResult backward(const NetworkSpec& spec, const ParameterSet& params,
                        const std::vector<Tensor>& activations, const Tensor& dout) {
    if (activations.size() != spec.layers.size())
        throw std::runtime_error("backward: activation cache does not match network depth");
    BackwardResult result;
    // Gradient entries are created in ascending layer order to mirror params.
    for (const auto& e : params.entries)
        result.grads.entries.push_back(
            {e.layer_index, Tensor::zeros(e.weights.shape), Tensor::zeros(e.bias.shape)});

    Tensor d = dout;
    for (std::size_t ri = spec.layers.size(); ri-- > 0;) {
        const LayerSpec& l = spec.layers[ri];
        const Tensor& x = activations[ri];
        switch (l.kind) {
            case LayerKind::Conv1D: {
                const ParamEntry* e = find_entry(params, ri);
                if (!e) throw layer_error(ri, "missing Conv1D parameters");
                ParamEntry* ge = nullptr;
                for (auto& g : result.grads.entries)
                    if (g.layer_index == ri) ge = &g;
                Tensor dx = Tensor::zeros(x.shape);
                conv1d_backward(l, e->weights, x, d, ge->weights, ge->bias, dx);
                d = std::move(dx);
                break;
            }
            case LayerKind::MaxPool1D: {
                Tensor dx = Tensor::zeros(x.shape);
                maxpool_backward(l, x, d, dx);
                d = std::move(dx);
                break;
            }
            case LayerKind::Dense: {
                const ParamEntry* e = find_entry(params, ri);
                if (!e) throw layer_error(ri, "missing Dense parameters");
                ParamEntry* ge = nullptr;
                for (auto& g : result.grads.entries)
                    if (g.layer_index == ri) ge = &g;
                Tensor dx = Tensor::zeros(x.shape);
                dense_backward(l, e->weights, x, d, ge->weights, ge->bias, dx);
                d = std::move(dx);
                break;
            }
            case LayerKind::LeakyReLU: {
                Tensor dx = d;
                for (std::size_t i = 0; i < dx.size(); ++i)
                    if (x.data[i] <= 0.0) dx.data[i] *= l.negative_slope;
                d = std::move(dx);
                break;
            }
            case LayerKind::Flatten: {
                Tensor dx = d;
                dx.shape = x.shape;
                d = std::move(dx);
                break;
            }
        }
    }
    result.dinput = std::move(d);
    return result;
}

ParameterSet sgd_step(const ParameterSet& params, const GradientSet& grads, double eta) {
    if (params.entries.size() != grads.entries.size())
        throw std::invalid_argument("sgd_step: entry count mismatch");
    ParameterSet out = params;
    for (std::size_t i = 0; i < out.entries.size(); ++i) {
        auto& p = out.entries[i];
        const auto& g = grads.entries[i];
        if (p.weights.shape != g.weights.shape || p.bias.shape != g.bias.shape)
            throw std::invalid_argument("sgd_step: shape mismatch at entry " + std::to_string(i));
        for (std::size_t j = 0; j < p.weights.size(); ++j)
            p.weights.data[j] -= eta * g.weights.data[j];
        for (std::size_t j = 0; j < p.bias.size(); ++j)
            p.bias.data[j] -= eta * g.bias.data[j];
    }
    return out;
}

namespace {

struct TailLoss {
    double loss = 0.0;
    std::uint64_t pattern = 0;  // hash of relu signs and pool argmaxes
};

// Loss of the network tail starting at `start` on the cached layer input.
// Perturbing a parameter of layer `start` leaves every earlier activation
// untouched, so the prefix never needs recomputing. The pattern hash pins the
// piecewise-linear region: probes whose +eps/-eps patterns differ straddle a
// kink, where a central difference has no meaning.
TailLoss tail_loss(const NetworkSpec& spec, const ParameterSet& params, std::size_t start,
                   const Tensor& x_start, const std::vector<std::uint32_t>& labels) {
    Tensor cur = x_start;
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::uint64_t v) {
        h ^= v;
        h *= 1099511628211ULL;
    };
    for (std::size_t i = start; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        switch (l.kind) {
            case LayerKind::Conv1D: {
                const ParamEntry* e = find_entry(params, i);
                if (!e) throw layer_error(i, "missing Conv1D parameters");
                cur = conv1d_forward(l, e->weights, e->bias, cur);
                break;
            }
            case LayerKind::MaxPool1D: {
                const std::size_t B = cur.shape[0], C = cur.shape[1], L = cur.shape[2];
                const std::size_t Lout = output_length(L, l.kernel_size, l.stride, 0);
                Tensor y = Tensor::zeros({B, C, Lout});
                for (std::size_t bi = 0; bi < B; ++bi)
                    for (std::size_t c = 0; c < C; ++c)
                        for (std::size_t t = 0; t < Lout; ++t) {
                            std::size_t arg = t * l.stride;
                            double best = cur.at3(bi, c, arg);
                            for (std::size_t j = 1; j < l.kernel_size; ++j) {
                                const double v = cur.at3(bi, c, t * l.stride + j);
                                if (v > best) {
                                    best = v;
                                    arg = t * l.stride + j;
                                }
                            }
                            y.at3(bi, c, t) = best;
                            mix(arg + 1);
                        }
                cur = std::move(y);
                break;
            }
            case LayerKind::Dense: {
                const ParamEntry* e = find_entry(params, i);
                if (!e) throw layer_error(i, "missing Dense parameters");
                cur = dense_forward(l, e->weights, e->bias, cur);
                break;
            }
            case LayerKind::LeakyReLU:
                for (auto& v : cur.data) {
                    mix(v > 0.0 ? 2 : 1);
                    if (v <= 0.0) v *= l.negative_slope;
                }
                break;
            case LayerKind::Flatten:
                cur.shape = {cur.shape[0], cur.shape[1] * cur.shape[2]};
                break;
        }
    }
    return {softmax_cross_entropy(cur, labels).loss, h};
}

}  // namespace

double gradient_check(const NetworkSpec& spec, const ParameterSet& params, const Tensor& input,
                      const std::vector<std::uint32_t>& labels, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("gradient_check: eps must be > 0");
    auto trace = forward(spec, params, input);
    auto lr = softmax_cross_entropy(trace.output, labels);
    auto analytic = backward(spec, params, trace.inputs, lr.dlogits).grads;

    double max_rel = 0.0;
    ParameterSet work = params;
    for (std::size_t e = 0; e < work.entries.size(); ++e) {
        const std::size_t li = work.entries[e].layer_index;
        const Tensor& x_start = trace.inputs[li];
        for (int which = 0; which < 2; ++which) {
            Tensor& t = which == 0 ? work.entries[e].weights : work.entries[e].bias;
            const Tensor& g = which == 0 ? analytic.entries[e].weights : analytic.entries[e].bias;
            for (std::size_t j = 0; j < t.size(); ++j) {
                const double orig = t.data[j];
                t.data[j] = orig + eps;
                const TailLoss lp = tail_loss(spec, work, li, x_start, labels);
                t.data[j] = orig - eps;
                const TailLoss lm = tail_loss(spec, work, li, x_start, labels);
                t.data[j] = orig;
                if (lp.pattern != lm.pattern) continue;  // probe straddles a kink
                const double numeric = (lp.loss - lm.loss) / (2.0 * eps);
                // The difference quotient carries roundoff of order
                // eps_machine * loss / (2 eps) ~ 1e-11; gradients below the
                // 1e-6 floor are compared absolutely instead of relatively.
                const double denom =
                    std::max({std::abs(g.data[j]), std::abs(numeric), 1e-6});
                max_rel = std::max(max_rel, std::abs(g.data[j] - numeric) / denom);
            }
        }
    }
    return max_rel;
}

}  // namespace sfl
