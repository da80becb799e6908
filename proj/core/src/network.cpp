#include "sfl/network.hpp"

#include <stdexcept>
#include <string>

namespace sfl {

LayerSpec LayerSpec::conv1d(std::size_t in_ch, std::size_t out_ch, std::size_t k,
                            std::size_t pad, std::size_t stride) {
    LayerSpec l;
    l.kind = LayerKind::Conv1D;
    l.in_channels = in_ch;
    l.out_channels = out_ch;
    l.kernel_size = k;
    l.stride = stride;
    l.padding = pad;
    if (stride == 0) throw std::invalid_argument("conv1d: stride must be >= 1");
    if (k == 0) throw std::invalid_argument("conv1d: kernel_size must be >= 1");
    return l;
}

LayerSpec LayerSpec::maxpool1d(std::size_t f, std::size_t s) {
    LayerSpec l;
    l.kind = LayerKind::MaxPool1D;
    l.kernel_size = f;
    l.stride = s;
    if (f == 0 || s == 0) throw std::invalid_argument("maxpool1d: f and s must be >= 1");
    return l;
}

LayerSpec LayerSpec::dense(std::size_t in_f, std::size_t out_f) {
    LayerSpec l;
    l.kind = LayerKind::Dense;
    l.in_features = in_f;
    l.out_features = out_f;
    return l;
}

LayerSpec LayerSpec::leaky_relu(double slope) {
    LayerSpec l;
    l.kind = LayerKind::LeakyReLU;
    if (!(slope > 0.0 && slope < 1.0))
        throw std::invalid_argument("leaky_relu: slope must be in (0,1)");
    l.negative_slope = slope;
    return l;
}

LayerSpec LayerSpec::flatten() {
    LayerSpec l;
    l.kind = LayerKind::Flatten;
    return l;
}

std::size_t output_length(std::size_t a_in, std::size_t f, std::size_t s, std::size_t p) {
    if (f == 0 || s == 0) throw std::invalid_argument("output_length: f and s must be >= 1");
    if (a_in + 2 * p < f)
        throw std::invalid_argument("output_length: window f=" + std::to_string(f) +
                                    " larger than padded input " + std::to_string(a_in + 2 * p));
    return (a_in + 2 * p - f) / s + 1;
}

static std::runtime_error layer_error(std::size_t idx, const std::string& what) {
    return std::runtime_error("layer " + std::to_string(idx) + ": " + what);
}

std::vector<std::vector<std::size_t>> propagate_shapes(const NetworkSpec& spec) {
    std::vector<std::vector<std::size_t>> shapes;
    shapes.reserve(spec.layers.size() + 1);
    std::vector<std::size_t> cur = {spec.in_channels, spec.in_length};
    shapes.push_back(cur);
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        switch (l.kind) {
            case LayerKind::Conv1D: {
                if (cur.size() != 2) throw layer_error(i, "Conv1D expects a (C,L) input");
                if (cur[0] != l.in_channels)
                    throw layer_error(i, "Conv1D in_channels " + std::to_string(l.in_channels) +
                                             " != input channels " + std::to_string(cur[0]));
                cur = {l.out_channels,
                       output_length(cur[1], l.kernel_size, l.stride, l.padding)};
                break;
            }
            case LayerKind::MaxPool1D: {
                if (cur.size() != 2) throw layer_error(i, "MaxPool1D expects a (C,L) input");
                cur = {cur[0], output_length(cur[1], l.kernel_size, l.stride, 0)};
                break;
            }
            case LayerKind::Dense: {
                if (cur.size() != 1) throw layer_error(i, "Dense expects a flat input");
                if (cur[0] != l.in_features)
                    throw layer_error(i, "Dense in_features " + std::to_string(l.in_features) +
                                             " != input width " + std::to_string(cur[0]));
                cur = {l.out_features};
                break;
            }
            case LayerKind::LeakyReLU:
                break;  // shape preserved
            case LayerKind::Flatten: {
                if (cur.size() != 2) throw layer_error(i, "Flatten expects a (C,L) input");
                cur = {cur[0] * cur[1]};
                break;
            }
        }
        shapes.push_back(cur);
    }
    return shapes;
}

std::vector<std::size_t> output_shape(const NetworkSpec& spec) {
    return propagate_shapes(spec).back();
}

}  // namespace sfl
