#include "sfl/variants.hpp"

#include <numeric>
#include <stdexcept>

namespace sfl {

namespace {

// Table-style baseline: 4 conv + 2 dense on a 1x130 input, 5 classes.
// A leaky activation follows every conv and the first dense layer.
NetworkSpec ecg_baseline() {
    NetworkSpec net;
    net.in_channels = 1;
    net.in_length = 130;
    net.num_classes = 5;
    net.layers = {
        LayerSpec::conv1d(1, 16, 7),    // 0: 130 -> 124
        LayerSpec::leaky_relu(),        // 1
        LayerSpec::maxpool1d(2, 2),     // 2: 124 -> 62
        LayerSpec::conv1d(16, 16, 5),   // 3: 62 -> 58
        LayerSpec::leaky_relu(),        // 4
        LayerSpec::conv1d(16, 16, 5),   // 5: 58 -> 54
        LayerSpec::leaky_relu(),        // 6
        LayerSpec::conv1d(16, 16, 5),   // 7: 54 -> 50
        LayerSpec::leaky_relu(),        // 8
        LayerSpec::maxpool1d(2, 2),     // 9: 50 -> 25
        LayerSpec::flatten(),           // 10: 25x16 -> 400
        LayerSpec::dense(400, 128),     // 11
        LayerSpec::leaky_relu(),        // 12
        LayerSpec::dense(128, 5),       // 13
    };
    return net;
}

// Pooled-cut family: shared client side conv7/pool/conv5 plus a cut pool,
// server side two convs (no pool) into the dense head.
NetworkSpec pooled_variant(std::size_t pool_f, std::size_t pool_s, std::size_t server_ch1,
                           std::size_t server_ch2) {
    const std::size_t cut_len = output_length(58, pool_f, pool_s, 0);
    const std::size_t after1 = output_length(cut_len, 5, 1, 0);
    const std::size_t after2 = output_length(after1, 5, 1, 0);
    NetworkSpec net;
    net.in_channels = 1;
    net.in_length = 130;
    net.num_classes = 5;
    net.layers = {
        LayerSpec::conv1d(1, 16, 7),
        LayerSpec::leaky_relu(),
        LayerSpec::maxpool1d(2, 2),
        LayerSpec::conv1d(16, 16, 5),
        LayerSpec::leaky_relu(),
        LayerSpec::maxpool1d(pool_f, pool_s),            // cut pool, client side
        LayerSpec::conv1d(16, server_ch1, 5),
        LayerSpec::leaky_relu(),
        LayerSpec::conv1d(server_ch1, server_ch2, 5),
        LayerSpec::leaky_relu(),
        LayerSpec::flatten(),
        LayerSpec::dense(after2 * server_ch2, 128),
        LayerSpec::leaky_relu(),
        LayerSpec::dense(128, 5),
    };
    return net;
}

// Scaled-up speech-command baseline: same 4conv+2dense shape on a 1x8000 input.
NetworkSpec sc_baseline() {
    NetworkSpec net;
    net.in_channels = 1;
    net.in_length = 8000;
    net.num_classes = 10;
    net.layers = {
        LayerSpec::conv1d(1, 16, 7),    // 0: 8000 -> 7994
        LayerSpec::leaky_relu(),        // 1
        LayerSpec::maxpool1d(4, 4),     // 2: 7994 -> 1998
        LayerSpec::conv1d(16, 16, 5),   // 3: 1998 -> 1994
        LayerSpec::leaky_relu(),        // 4
        LayerSpec::maxpool1d(2, 2),     // 5: 1994 -> 997
        LayerSpec::conv1d(16, 16, 5),   // 6: 997 -> 993
        LayerSpec::leaky_relu(),        // 7
        LayerSpec::conv1d(16, 16, 5),   // 8: 993 -> 989
        LayerSpec::leaky_relu(),        // 9
        LayerSpec::maxpool1d(4, 4),     // 10: 989 -> 247
        LayerSpec::flatten(),           // 11: 247x16 -> 3952
        LayerSpec::dense(3952, 128),    // 12
        LayerSpec::leaky_relu(),        // 13
        LayerSpec::dense(128, 10),      // 14
    };
    return net;
}

}  // namespace

Rational make_rational(std::uint64_t num, std::uint64_t den) {
    if (den == 0) throw std::invalid_argument("Rational: zero denominator");
    const std::uint64_t g = std::gcd(num == 0 ? den : num, den);
    return {num / g, den / g};
}

ArchitectureVariant build_variant(const std::string& id) {
    ArchitectureVariant v;
    v.id = id;
    if (id == "baseline_t1_ecg" || id == "t2_no1" || id == "cut2") {
        v.split = {ecg_baseline(), 5};
    } else if (id == "cut1") {
        v.split = {ecg_baseline(), 3};
    } else if (id == "cut3") {
        v.split = {ecg_baseline(), 8};
    } else if (id == "t2_no2") {
        v.split = {pooled_variant(2, 2, 16, 16), 6};
    } else if (id == "t2_no3") {
        v.split = {pooled_variant(2, 2, 32, 32), 6};
    } else if (id == "t2_no4") {
        v.split = {pooled_variant(4, 2, 32, 32), 6};
    } else if (id == "t2_no5") {
        v.split = {pooled_variant(6, 2, 32, 32), 6};
    } else if (id == "t2_no6") {
        v.split = {pooled_variant(8, 2, 32, 32), 6};
    } else if (id == "t2_no7") {
        v.split = {pooled_variant(2, 4, 32, 32), 6};
    } else if (id == "t2_no8") {
        v.split = {pooled_variant(2, 4, 32, 64), 6};
    } else if (id == "baseline_t1_sc") {
        v.split = {sc_baseline(), 6};
    } else {
        throw std::invalid_argument("build_variant: unknown variant id '" + id + "'");
    }
    propagate_shapes(v.split.full);
    return v;
}

std::pair<NetworkSpec, NetworkSpec> split_at(const NetworkSpec& spec, std::size_t cut_index) {
    if (cut_index < 1 || cut_index >= spec.layers.size())
        throw std::invalid_argument("split_at: cut index " + std::to_string(cut_index) +
                                    " out of range [1," + std::to_string(spec.layers.size()) +
                                    ")");
    auto shapes = propagate_shapes(spec);
    NetworkSpec client;
    client.in_channels = spec.in_channels;
    client.in_length = spec.in_length;
    client.num_classes = spec.num_classes;
    client.layers.assign(spec.layers.begin(),
                         spec.layers.begin() + static_cast<long>(cut_index));
    NetworkSpec server;
    const auto& cut = shapes[cut_index];
    if (cut.size() != 2)
        throw std::invalid_argument("split_at: cut layer output must be spatial (C,L)");
    server.in_channels = cut[0];
    server.in_length = cut[1];
    server.num_classes = spec.num_classes;
    server.layers.assign(spec.layers.begin() + static_cast<long>(cut_index),
                         spec.layers.end());
    return {std::move(client), std::move(server)};
}

std::pair<ParameterSet, ParameterSet> split_params(const SplitSpec& split,
                                                   const ParameterSet& full) {
    ParameterSet client, server;
    for (const auto& e : full.entries) {
        if (e.layer_index < split.cut_index)
            client.entries.push_back(e);
        else
            server.entries.push_back({e.layer_index - split.cut_index, e.weights, e.bias});
    }
    return {std::move(client), std::move(server)};
}

ParameterSet merge_params(const SplitSpec& split, const ParameterSet& client,
                          const ParameterSet& server) {
    ParameterSet full = client;
    for (const auto& e : server.entries)
        full.entries.push_back({e.layer_index + split.cut_index, e.weights, e.bias});
    return full;
}

std::vector<std::size_t> cut_shape(const SplitSpec& split) {
    return propagate_shapes(split.full)[split.cut_index];
}

Rational reduction_factor(const ArchitectureVariant& variant) {
    const NetworkSpec ref = ecg_baseline();
    const NetworkSpec& full = variant.split.full;
    if (full.in_channels != 1 || full.in_length != 130 || full.layers.size() < 5 ||
        variant.split.cut_index < 5)
        throw std::invalid_argument(
            "reduction_factor: variant '" + variant.id +
            "' does not cut after the 58-wide reference point");
    for (std::size_t i = 0; i < 5; ++i)
        if (!(full.layers[i] == ref.layers[i]))
            throw std::invalid_argument(
                "reduction_factor: variant '" + variant.id +
                "' does not share the reference client prefix");
    const auto cut = cut_shape(variant.split);
    return make_rational(cut[1], 58);
}

std::uint64_t param_payload_bytes(const ParameterSet& params, std::uint64_t element_bytes) {
    std::uint64_t total = 4;  // entry count
    for (const auto& e : params.entries) {
        total += 4;  // layer index
        total += 2 + 4 * e.weights.shape.size() + element_bytes * e.weights.size();
        total += 2 + 4 * e.bias.shape.size() + element_bytes * e.bias.size();
    }
    return total;
}

std::uint64_t estimate_comm_bytes(const ArchitectureVariant& variant, std::uint64_t num_samples,
                                  std::uint64_t epochs, std::uint64_t batch_size,
                                  std::uint64_t element_bytes, std::uint64_t label_bytes) {
    if (num_samples == 0 || epochs == 0 || batch_size == 0)
        throw std::invalid_argument("estimate_comm_bytes: counts must be positive");
    const auto cut = cut_shape(variant.split);
    const std::uint64_t per_sample = static_cast<std::uint64_t>(cut[0]) * cut[1];
    auto [client_spec, server_spec] = split_at(variant.split.full, variant.split.cut_index);
    (void)server_spec;
    const ParameterSet client_params = init_params(client_spec, 0);
    const std::uint64_t smashed = 2 * per_sample * num_samples * element_bytes;  // A and dA
    const std::uint64_t labels = num_samples * label_bytes;
    const std::uint64_t model_sync = 2 * param_payload_bytes(client_params, 8);
    return epochs * (smashed + labels) + epochs * model_sync;
}

}  // namespace sfl
