#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "sfl/channel.hpp"
#include "sfl/data.hpp"
#include "sfl/kernel.hpp"
#include "sfl/metrics.hpp"
#include "sfl/variants.hpp"

namespace sfl {

/// Disjoint client-id sets covering [0, K). Groups are canonicalized:
/// members ascending, groups ordered by smallest member, so the aggregate
/// is independent of the caller's listing order.
struct GroupAssignment {
    std::vector<std::vector<std::uint32_t>> groups;

    static GroupAssignment singletons(std::size_t clients);
    static GroupAssignment single(std::size_t clients);
    /// Contiguous split of [0,K) into `count` groups of near-equal size.
    static GroupAssignment contiguous(std::size_t clients, std::size_t count);

    void validate(std::size_t clients) const;
    void normalize();
};

struct RoundConfig {
    std::size_t rounds = 100;
    std::size_t local_epochs = 1;  // E; must be 1 for SL
    double eta = 0.001;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
    ArchitectureVariant variant;
    PartitionPlan partition;
    WirePrecision wire = WirePrecision::F32;
    std::size_t eval_every = 1;

    std::size_t num_clients() const { return partition.client_indices.size(); }
    /// Throws on an invalid configuration (empty shard, SL epoch rule, ...).
    void validate_for(const char* protocol) const;
};

/// Deterministic per-(round, client) shuffle seed.
std::uint64_t batch_order_seed(std::uint64_t seed, std::size_t round, std::size_t client);

/// One epoch's mini-batch index lists after a seeded shuffle of the shard.
std::vector<std::vector<std::size_t>> make_epoch_batches(const std::vector<std::size_t>& shard,
                                                         std::size_t batch_size,
                                                         std::mt19937_64& rng);

/// Sample-count-weighted elementwise mean, accumulated in list order.
ParameterSet fedavg_aggregate(const std::vector<ParameterSet>& models,
                              const std::vector<std::uint64_t>& sample_counts);

/// Plain mini-batch SGD over a shard for `epochs` passes; batch order drawn
/// from a generator seeded with `order_seed`.
ParameterSet train_local(const NetworkSpec& spec, ParameterSet params, const Dataset& data,
                         const std::vector<std::size_t>& shard, std::size_t epochs,
                         std::size_t batch_size, double eta, std::uint64_t order_seed);

/// Server-side split step: forward the smashed batch, update the server
/// model in place, return the cut-layer gradient.
Tensor server_group_step(const NetworkSpec& server_net, ParameterSet& server_params,
                         const Tensor& smashed, const std::vector<std::uint32_t>& labels,
                         double eta);

/// Client-side split pass: per batch send Smashed, await the matching
/// SmashedGrad, backprop and update; sends the final model up when done.
ParameterSet client_pass(const NetworkSpec& client_net, ParameterSet h, const Dataset& data,
                         const std::vector<std::vector<std::vector<std::size_t>>>& epochs,
                         std::uint32_t client_id, double eta, Endpoint& server);

// Message-driven loops shared by the loopback and socket transports.
void fl_client_loop(const RoundConfig& cfg, std::uint32_t client_id, Endpoint& server,
                    const Dataset& train, const std::vector<std::size_t>& shard);
void split_client_loop(const RoundConfig& cfg, std::uint32_t client_id, Endpoint& server,
                       const Dataset& train, const std::vector<std::size_t>& shard,
                       std::size_t epochs);
/// Final models after the last round; FL leaves the full model in `client`.
struct FinalModels {
    ParameterSet client;
    ParameterSet server;
};

MetricsLog fl_server_loop(const RoundConfig& cfg, std::vector<Endpoint*>& clients,
                          const std::vector<std::uint64_t>& sample_counts, const Dataset& test,
                          FinalModels* final_models = nullptr);
MetricsLog sl_server_loop(const RoundConfig& cfg, std::vector<Endpoint*>& clients,
                          const std::vector<std::uint64_t>& sample_counts, const Dataset& test,
                          FinalModels* final_models = nullptr);
MetricsLog sflg_server_loop(const RoundConfig& cfg, const GroupAssignment& groups,
                            std::vector<Endpoint*>& clients,
                            const std::vector<std::uint64_t>& sample_counts, const Dataset& test,
                            FinalModels* final_models = nullptr);

// In-process runs over loopback channels (one thread per client).
MetricsLog run_fl(const RoundConfig& cfg, const Dataset& train, const Dataset& test,
                  FinalModels* final_models = nullptr);
MetricsLog run_sl(const RoundConfig& cfg, const Dataset& train, const Dataset& test,
                  FinalModels* final_models = nullptr);
MetricsLog run_sflg(const RoundConfig& cfg, const GroupAssignment& groups, const Dataset& train,
                    const Dataset& test, FinalModels* final_models = nullptr);

/// Single-model SGD on the full training set with the same batch-order
/// scheme as client 0; the baseline every protocol is compared against.
MetricsLog centralized_train(const NetworkSpec& full, const Dataset& train, const Dataset& test,
                             std::size_t rounds, std::size_t epochs_per_round, double eta,
                             std::size_t batch_size, std::uint64_t seed,
                             std::size_t eval_every = 1);

}  // namespace sfl
