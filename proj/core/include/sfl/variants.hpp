#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "sfl/kernel.hpp"
#include "sfl/network.hpp"

namespace sfl {

/// A full network plus the index of the first server-side layer.
struct SplitSpec {
    NetworkSpec full;
    std::size_t cut_index = 1;
    bool operator==(const SplitSpec&) const = default;
};

struct ArchitectureVariant {
    std::string id;
    SplitSpec split;
    bool operator==(const ArchitectureVariant&) const = default;
};

/// Exact reduced fraction.
struct Rational {
    std::uint64_t num = 0;
    std::uint64_t den = 1;
    double real() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool operator==(const Rational&) const = default;
};

Rational make_rational(std::uint64_t num, std::uint64_t den);

/// Known ids: baseline_t1_ecg, baseline_t1_sc, t2_no1 .. t2_no8, cut1, cut2, cut3.
ArchitectureVariant build_variant(const std::string& id);

std::pair<NetworkSpec, NetworkSpec> split_at(const NetworkSpec& spec, std::size_t cut_index);

/// Split a full-network ParameterSet into (client, server) halves; server
/// entries are re-indexed relative to the server subnetwork.
std::pair<ParameterSet, ParameterSet> split_params(const SplitSpec& split,
                                                   const ParameterSet& full);

/// Inverse of split_params.
ParameterSet merge_params(const SplitSpec& split, const ParameterSet& client,
                          const ParameterSet& server);

/// Cut-layer output shape (excluding batch): {C, L}.
std::vector<std::size_t> cut_shape(const SplitSpec& split);

/// Cut-layer length over the 58-wide reference point of the pooled-cut family.
/// Only defined for variants whose client side starts with the baseline
/// conv7/pool/conv5 prefix on a 1x130 input.
Rational reduction_factor(const ArchitectureVariant& variant);

/// Analytic client byte total: smashed data + cut gradients + labels per epoch,
/// plus two client-model syncs per epoch. Framing overhead excluded.
std::uint64_t estimate_comm_bytes(const ArchitectureVariant& variant, std::uint64_t num_samples,
                                  std::uint64_t epochs, std::uint64_t batch_size,
                                  std::uint64_t element_bytes, std::uint64_t label_bytes);

/// Serialized payload size of a ParameterSet at the given element width,
/// excluding the frame header (matches estimate_comm_bytes' model term).
std::uint64_t param_payload_bytes(const ParameterSet& params, std::uint64_t element_bytes);

}  // namespace sfl
