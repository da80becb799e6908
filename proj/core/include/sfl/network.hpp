#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "sfl/tensor.hpp"

namespace sfl {

enum class LayerKind : std::uint8_t { Conv1D, MaxPool1D, Dense, LeakyReLU, Flatten };

struct LayerSpec {
    LayerKind kind = LayerKind::Flatten;
    // Conv1D (kernel_size/stride/padding also used by MaxPool1D, padding always 0 there)
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel_size = 0;
    std::size_t stride = 1;
    std::size_t padding = 0;
    // Dense
    std::size_t in_features = 0;
    std::size_t out_features = 0;
    // LeakyReLU
    double negative_slope = 0.01;

    static LayerSpec conv1d(std::size_t in_ch, std::size_t out_ch, std::size_t k,
                            std::size_t pad = 0, std::size_t stride = 1);
    static LayerSpec maxpool1d(std::size_t f, std::size_t s);
    static LayerSpec dense(std::size_t in_f, std::size_t out_f);
    static LayerSpec leaky_relu(double slope = 0.01);
    static LayerSpec flatten();

    bool trainable() const { return kind == LayerKind::Conv1D || kind == LayerKind::Dense; }
    bool operator==(const LayerSpec&) const = default;
};

struct NetworkSpec {
    std::vector<LayerSpec> layers;
    std::size_t in_channels = 1;
    std::size_t in_length = 0;
    std::size_t num_classes = 0;

    bool operator==(const NetworkSpec&) const = default;
};

/// Output length of a sliding window (conv or pool) over a padded 1-d input.
/// Throws if the window does not fit: a_in + 2p < f.
std::size_t output_length(std::size_t a_in, std::size_t f, std::size_t s, std::size_t p);

/// Per-layer input shapes (batch dimension excluded): {C,L} for spatial
/// layers, {F} after a Flatten. Entry i is the input shape of layer i;
/// the final entry is the network output shape. Throws with the offending
/// layer index on any inconsistency.
std::vector<std::vector<std::size_t>> propagate_shapes(const NetworkSpec& spec);

/// Shape of the network output (excluding batch).
std::vector<std::size_t> output_shape(const NetworkSpec& spec);

}  // namespace sfl
