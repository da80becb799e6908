#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sfl/tensor.hpp"

namespace sfl {

struct Sample {
    Tensor sequence;  // (channels, length)
    std::uint32_t label = 0;
};

struct Dataset {
    std::vector<Sample> samples;
    std::size_t num_classes = 0;
    std::size_t channels() const { return samples.empty() ? 0 : samples[0].sequence.shape[0]; }
    std::size_t length() const { return samples.empty() ? 0 : samples[0].sequence.shape[1]; }
};

enum class PartitionLaw : std::uint8_t { IIDBalanced, ImbalancedNormal, NonIID };

struct PartitionPlan {
    std::vector<std::vector<std::size_t>> client_indices;
    PartitionLaw law = PartitionLaw::IIDBalanced;
    double sigma = 0.0;               // ImbalancedNormal
    std::size_t classes_per_client = 0;  // NonIID
};

/// Class-conditional sinusoid mixtures with seeded noise; classes are
/// separable by a small CNN (and already by nearest centroid).
Dataset synth_sequences(std::size_t n_samples, std::size_t num_classes, std::size_t length,
                        std::size_t channels, std::uint64_t seed);

PartitionPlan partition_iid(const Dataset& data, std::size_t clients, std::uint64_t seed);

/// Shard sizes drawn from Normal(n/K, sigma*n/K), floored at min_shard and
/// renormalized by largest remainder to sum to n.
PartitionPlan partition_imbalanced(const Dataset& data, std::size_t clients, double sigma,
                                   std::uint64_t seed, std::size_t min_shard = 1);

/// Each client receives samples from exactly classes_per_client distinct
/// classes; classes are dealt round-robin over a shuffled class list and each
/// class's samples are split evenly among its holders.
PartitionPlan partition_noniid(const Dataset& data, std::size_t clients,
                               std::size_t classes_per_client, std::uint64_t seed);

/// CSV rows: integer label, then decimal features; no header. Single channel.
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& data, const std::string& path);

/// Batch assembly: stack the given samples into a (B, C, L) tensor + labels.
std::pair<Tensor, std::vector<std::uint32_t>> make_batch(const Dataset& data,
                                                         const std::vector<std::size_t>& indices);

}  // namespace sfl
