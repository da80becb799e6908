#include "sfl/protocols.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>

namespace sfl {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

Message expect(Endpoint& ep, MsgKind kind) {
    Message m = ep.recv();
    if (m.kind != kind)
        throw std::runtime_error("protocol error: expected message kind " +
                                 std::to_string(static_cast<int>(kind)) + ", got " +
                                 std::to_string(static_cast<int>(m.kind)));
    return m;
}

using Clock = std::chrono::steady_clock;

std::uint64_t millis_since(Clock::time_point start) {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count());
}

void record_round(MetricsLog& log, std::size_t round, double acc,
                  const std::vector<Endpoint*>& clients, Clock::time_point start) {
    RoundRecord r;
    r.round = round;
    r.test_accuracy = acc;
    for (const Endpoint* ep : clients) {
        // Server-side endpoint: received == client up, sent == client down.
        r.bytes_up.push_back(ep->bytes_received());
        r.bytes_down.push_back(ep->bytes_sent());
    }
    r.wall_millis = millis_since(start);
    log.records.push_back(std::move(r));
}

std::vector<std::vector<std::vector<std::size_t>>> plan_epochs(
    const RoundConfig& cfg, std::size_t round, std::uint32_t client,
    const std::vector<std::size_t>& shard, std::size_t epochs) {
    std::mt19937_64 rng(batch_order_seed(cfg.seed, round, client));
    std::vector<std::vector<std::vector<std::size_t>>> out;
    out.reserve(epochs);
    for (std::size_t e = 0; e < epochs; ++e)
        out.push_back(make_epoch_batches(shard, cfg.batch_size, rng));
    return out;
}

}  // namespace

GroupAssignment GroupAssignment::singletons(std::size_t clients) {
    GroupAssignment g;
    for (std::size_t k = 0; k < clients; ++k)
        g.groups.push_back({static_cast<std::uint32_t>(k)});
    return g;
}

GroupAssignment GroupAssignment::single(std::size_t clients) {
    GroupAssignment g;
    g.groups.emplace_back();
    for (std::size_t k = 0; k < clients; ++k)
        g.groups[0].push_back(static_cast<std::uint32_t>(k));
    return g;
}

GroupAssignment GroupAssignment::contiguous(std::size_t clients, std::size_t count) {
    if (count == 0 || count > clients)
        throw std::invalid_argument("GroupAssignment: need 1 <= groups <= clients");
    GroupAssignment g;
    g.groups.resize(count);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t sz = clients / count + (i < clients % count ? 1 : 0);
        for (std::size_t j = 0; j < sz; ++j)
            g.groups[i].push_back(static_cast<std::uint32_t>(pos++));
    }
    return g;
}

void GroupAssignment::validate(std::size_t clients) const {
    std::set<std::uint32_t> seen;
    for (const auto& g : groups) {
        if (g.empty()) throw std::invalid_argument("GroupAssignment: empty group");
        for (auto k : g) {
            if (k >= clients)
                throw std::invalid_argument("GroupAssignment: client id " + std::to_string(k) +
                                            " out of range");
            if (!seen.insert(k).second)
                throw std::invalid_argument("GroupAssignment: client " + std::to_string(k) +
                                            " appears in two groups");
        }
    }
    if (seen.size() != clients)
        throw std::invalid_argument("GroupAssignment: groups must cover all " +
                                    std::to_string(clients) + " clients");
}

void GroupAssignment::normalize() {
    for (auto& g : groups) std::sort(g.begin(), g.end());
    std::sort(groups.begin(), groups.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
}

void RoundConfig::validate_for(const char* protocol) const {
    if (rounds == 0 || batch_size == 0 || local_epochs == 0)
        throw std::invalid_argument("RoundConfig: rounds, batch_size and local_epochs must be "
                                    "positive");
    if (!(eta > 0.0)) throw std::invalid_argument("RoundConfig: eta must be positive");
    if (partition.client_indices.empty())
        throw std::invalid_argument("RoundConfig: no clients in partition");
    for (std::size_t k = 0; k < partition.client_indices.size(); ++k)
        if (partition.client_indices[k].empty())
            throw std::invalid_argument("RoundConfig: client " + std::to_string(k) +
                                        " has an empty shard");
    if (std::string(protocol) == "sl" && local_epochs != 1)
        throw std::invalid_argument("RoundConfig: SL requires local_epochs == 1");
}

std::uint64_t batch_order_seed(std::uint64_t seed, std::size_t round, std::size_t client) {
    return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(round) * 0x100000001B3ULL +
                                        static_cast<std::uint64_t>(client)));
}

std::vector<std::vector<std::size_t>> make_epoch_batches(const std::vector<std::size_t>& shard,
                                                         std::size_t batch_size,
                                                         std::mt19937_64& rng) {
    std::vector<std::size_t> order = shard;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t pos = 0; pos < order.size(); pos += batch_size) {
        const std::size_t end = std::min(order.size(), pos + batch_size);
        batches.emplace_back(order.begin() + static_cast<long>(pos),
                             order.begin() + static_cast<long>(end));
    }
    return batches;
}

ParameterSet fedavg_aggregate(const std::vector<ParameterSet>& models,
                              const std::vector<std::uint64_t>& sample_counts) {
    if (models.empty()) throw std::invalid_argument("fedavg_aggregate: empty model list");
    if (models.size() != sample_counts.size())
        throw std::invalid_argument("fedavg_aggregate: model/count size mismatch");
    const double total = static_cast<double>(
        std::accumulate(sample_counts.begin(), sample_counts.end(), std::uint64_t{0}));
    if (total <= 0.0) throw std::invalid_argument("fedavg_aggregate: counts must be positive");

    ParameterSet out = models[0];
    for (auto& e : out.entries) {
        std::fill(e.weights.data.begin(), e.weights.data.end(), 0.0);
        std::fill(e.bias.data.begin(), e.bias.data.end(), 0.0);
    }
    for (std::size_t i = 0; i < models.size(); ++i) {
        const double wgt = static_cast<double>(sample_counts[i]) / total;
        const auto& m = models[i];
        if (m.entries.size() != out.entries.size())
            throw std::invalid_argument("fedavg_aggregate: entry count mismatch at model " +
                                        std::to_string(i));
        for (std::size_t e = 0; e < out.entries.size(); ++e) {
            if (m.entries[e].weights.shape != out.entries[e].weights.shape ||
                m.entries[e].bias.shape != out.entries[e].bias.shape)
                throw std::invalid_argument("fedavg_aggregate: shape mismatch at model " +
                                            std::to_string(i));
            for (std::size_t j = 0; j < out.entries[e].weights.size(); ++j)
                out.entries[e].weights.data[j] += wgt * m.entries[e].weights.data[j];
            for (std::size_t j = 0; j < out.entries[e].bias.size(); ++j)
                out.entries[e].bias.data[j] += wgt * m.entries[e].bias.data[j];
        }
    }
    return out;
}

ParameterSet train_local(const NetworkSpec& spec, ParameterSet params, const Dataset& data,
                         const std::vector<std::size_t>& shard, std::size_t epochs,
                         std::size_t batch_size, double eta, std::uint64_t order_seed) {
    std::mt19937_64 rng(order_seed);
    for (std::size_t e = 0; e < epochs; ++e) {
        for (const auto& batch : make_epoch_batches(shard, batch_size, rng)) {
            auto [x, y] = make_batch(data, batch);
            auto trace = forward(spec, params, x);
            auto lr = softmax_cross_entropy(trace.output, y);
            auto back = backward(spec, params, trace.inputs, lr.dlogits);
            params = sgd_step(params, back.grads, eta);
        }
    }
    return params;
}

Tensor server_group_step(const NetworkSpec& server_net, ParameterSet& server_params,
                         const Tensor& smashed, const std::vector<std::uint32_t>& labels,
                         double eta) {
    auto trace = forward(server_net, server_params, smashed);
    auto lr = softmax_cross_entropy(trace.output, labels);
    auto back = backward(server_net, server_params, trace.inputs, lr.dlogits);
    server_params = sgd_step(server_params, back.grads, eta);
    return std::move(back.dinput);
}

ParameterSet client_pass(const NetworkSpec& client_net, ParameterSet h, const Dataset& data,
                         const std::vector<std::vector<std::vector<std::size_t>>>& epochs,
                         std::uint32_t client_id, double eta, Endpoint& server) {
    for (std::size_t e = 0; e < epochs.size(); ++e) {
        for (std::size_t b = 0; b < epochs[e].size(); ++b) {
            auto [x, y] = make_batch(data, epochs[e][b]);
            auto trace = forward(client_net, h, x);
            server.send(Message::smashed(client_id, static_cast<std::uint32_t>(e),
                                         static_cast<std::uint32_t>(b), trace.output,
                                         std::move(y)));
            Message g = expect(server, MsgKind::SmashedGrad);
            if (g.client_id != client_id || g.epoch != e || g.batch_index != b)
                throw std::runtime_error(
                    "protocol error: out-of-order SmashedGrad (client " +
                    std::to_string(g.client_id) + ", epoch " + std::to_string(g.epoch) +
                    ", batch " + std::to_string(g.batch_index) + ") expected (" +
                    std::to_string(client_id) + ", " + std::to_string(e) + ", " +
                    std::to_string(b) + ")");
            auto back = backward(client_net, h, trace.inputs, g.tensor);
            h = sgd_step(h, back.grads, eta);
        }
    }
    server.send(Message::model(MsgKind::ModelUp, h));
    return h;
}

void fl_client_loop(const RoundConfig& cfg, std::uint32_t client_id, Endpoint& server,
                    const Dataset& train, const std::vector<std::size_t>& shard) {
    const NetworkSpec& full = cfg.variant.split.full;
    for (;;) {
        Message m = expect(server, MsgKind::Control);
        if (m.control == ControlType::Terminate) return;
        if (m.control != ControlType::RoundBegin)
            throw std::runtime_error("fl_client_loop: unexpected control message");
        const std::size_t round = m.round;
        Message md = expect(server, MsgKind::ModelDown);
        ParameterSet params =
            train_local(full, std::move(md.params), train, shard, cfg.local_epochs,
                        cfg.batch_size, cfg.eta, batch_order_seed(cfg.seed, round, client_id));
        server.send(Message::model(MsgKind::ModelUp, std::move(params)));
    }
}

void split_client_loop(const RoundConfig& cfg, std::uint32_t client_id, Endpoint& server,
                       const Dataset& train, const std::vector<std::size_t>& shard,
                       std::size_t epochs) {
    auto [client_net, server_net] =
        split_at(cfg.variant.split.full, cfg.variant.split.cut_index);
    (void)server_net;
    for (;;) {
        Message m = expect(server, MsgKind::Control);
        if (m.control == ControlType::Terminate) return;
        if (m.control != ControlType::RoundBegin)
            throw std::runtime_error("split_client_loop: unexpected control message");
        const std::size_t round = m.round;
        Message md = expect(server, MsgKind::ModelDown);
        client_pass(client_net, std::move(md.params), train,
                    plan_epochs(cfg, round, client_id, shard, epochs), client_id, cfg.eta,
                    server);
    }
}

MetricsLog fl_server_loop(const RoundConfig& cfg, std::vector<Endpoint*>& clients,
                          const std::vector<std::uint64_t>& sample_counts, const Dataset& test,
                          FinalModels* final_models) {
    const NetworkSpec& full = cfg.variant.split.full;
    ParameterSet w = init_params(full, cfg.seed);
    MetricsLog log;
    const auto start = Clock::now();
    const std::size_t K = clients.size();
    for (std::size_t t = 0; t < cfg.rounds; ++t) {
        for (std::size_t k = 0; k < K; ++k) {
            clients[k]->send(
                Message::make_control(ControlType::RoundBegin, static_cast<std::uint32_t>(t)));
            clients[k]->send(Message::model(MsgKind::ModelDown, w));
        }
        std::vector<ParameterSet> models;
        models.reserve(K);
        for (std::size_t k = 0; k < K; ++k)
            models.push_back(expect(*clients[k], MsgKind::ModelUp).params);
        w = fedavg_aggregate(models, sample_counts);
        if ((t + 1) % cfg.eval_every == 0 || t + 1 == cfg.rounds)
            record_round(log, t + 1, evaluate(full, w, test), clients, start);
    }
    if (final_models) final_models->client = w;
    for (auto* ep : clients) ep->send(Message::make_control(ControlType::Terminate));
    return log;
}

MetricsLog sl_server_loop(const RoundConfig& cfg, std::vector<Endpoint*>& clients,
                          const std::vector<std::uint64_t>& sample_counts, const Dataset& test,
                          FinalModels* final_models) {
    (void)sample_counts;
    auto [client_net, server_net] =
        split_at(cfg.variant.split.full, cfg.variant.split.cut_index);
    auto [h, w] = split_params(cfg.variant.split, init_params(cfg.variant.split.full, cfg.seed));
    MetricsLog log;
    const auto start = Clock::now();
    for (std::size_t t = 0; t < cfg.rounds; ++t) {
        for (std::size_t k = 0; k < clients.size(); ++k) {
            clients[k]->send(
                Message::make_control(ControlType::RoundBegin, static_cast<std::uint32_t>(t)));
            clients[k]->send(Message::model(MsgKind::ModelDown, h));
            for (;;) {
                Message m = clients[k]->recv();
                if (m.kind == MsgKind::Smashed) {
                    Tensor da = server_group_step(server_net, w, m.tensor, m.labels, cfg.eta);
                    clients[k]->send(Message::smashed_grad(m.client_id, m.epoch, m.batch_index,
                                                           std::move(da)));
                } else if (m.kind == MsgKind::ModelUp) {
                    h = std::move(m.params);  // relay to the next client
                    break;
                } else {
                    throw std::runtime_error("sl_server_loop: unexpected message kind");
                }
            }
        }
        if ((t + 1) % cfg.eval_every == 0 || t + 1 == cfg.rounds)
            record_round(log, t + 1, evaluate_split(client_net, h, server_net, w, test),
                         clients, start);
    }
    if (final_models) *final_models = {h, w};
    for (auto* ep : clients) ep->send(Message::make_control(ControlType::Terminate));
    return log;
}

MetricsLog sflg_server_loop(const RoundConfig& cfg, const GroupAssignment& groups_in,
                            std::vector<Endpoint*>& clients,
                            const std::vector<std::uint64_t>& sample_counts, const Dataset& test,
                            FinalModels* final_models) {
    GroupAssignment groups = groups_in;
    groups.normalize();
    groups.validate(clients.size());
    auto [client_net, server_net] =
        split_at(cfg.variant.split.full, cfg.variant.split.cut_index);
    auto [h, w] = split_params(cfg.variant.split, init_params(cfg.variant.split.full, cfg.seed));
    MetricsLog log;
    const auto start = Clock::now();
    const std::size_t K = clients.size();
    for (std::size_t t = 0; t < cfg.rounds; ++t) {
        for (std::size_t k = 0; k < K; ++k) {
            clients[k]->send(
                Message::make_control(ControlType::RoundBegin, static_cast<std::uint32_t>(t)));
            clients[k]->send(Message::model(MsgKind::ModelDown, h));
        }
        std::vector<ParameterSet> group_models;
        std::vector<std::uint64_t> group_counts;
        std::vector<ParameterSet> client_models(K);
        for (const auto& group : groups.groups) {
            ParameterSet wg = w;
            std::uint64_t ng = 0;
            for (std::uint32_t k : group) {  // serial within the group, ascending id
                ParameterSet wk = std::move(wg);
                for (;;) {
                    Message m = clients[k]->recv();
                    if (m.kind == MsgKind::Smashed) {
                        Tensor da =
                            server_group_step(server_net, wk, m.tensor, m.labels, cfg.eta);
                        clients[k]->send(Message::smashed_grad(m.client_id, m.epoch,
                                                               m.batch_index, std::move(da)));
                    } else if (m.kind == MsgKind::ModelUp) {
                        client_models[k] = std::move(m.params);
                        break;
                    } else {
                        throw std::runtime_error("sflg_server_loop: unexpected message kind");
                    }
                }
                wg = std::move(wk);
                ng += sample_counts[k];
            }
            group_models.push_back(std::move(wg));
            group_counts.push_back(ng);
        }
        w = fedavg_aggregate(group_models, group_counts);
        h = fedavg_aggregate(client_models, sample_counts);
        if ((t + 1) % cfg.eval_every == 0 || t + 1 == cfg.rounds)
            record_round(log, t + 1, evaluate_split(client_net, h, server_net, w, test),
                         clients, start);
    }
    if (final_models) *final_models = {h, w};
    for (auto* ep : clients) ep->send(Message::make_control(ControlType::Terminate));
    return log;
}

namespace {

template <typename ClientFn, typename ServerFn>
MetricsLog run_loopback(const RoundConfig& cfg, ClientFn client_fn, ServerFn server_fn) {
    const std::size_t K = cfg.num_clients();
    std::vector<std::unique_ptr<Endpoint>> server_side;
    std::vector<std::unique_ptr<Endpoint>> client_side;
    std::vector<Endpoint*> server_ptrs;
    for (std::size_t k = 0; k < K; ++k) {
        auto [a, b] = make_loopback_pair();
        server_side.push_back(std::make_unique<Endpoint>(a, cfg.wire));
        client_side.push_back(std::make_unique<Endpoint>(b, cfg.wire));
        server_ptrs.push_back(server_side.back().get());
    }
    std::vector<std::uint64_t> counts;
    for (const auto& shard : cfg.partition.client_indices) counts.push_back(shard.size());

    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(K);
    for (std::size_t k = 0; k < K; ++k) {
        threads.emplace_back([&, k] {
            try {
                client_fn(static_cast<std::uint32_t>(k), *client_side[k],
                          cfg.partition.client_indices[k]);
            } catch (...) {
                errors[k] = std::current_exception();
                client_side[k].reset();  // close the channel so the server unblocks
            }
        });
    }
    MetricsLog log;
    std::exception_ptr server_error;
    try {
        log = server_fn(server_ptrs, counts);
    } catch (...) {
        server_error = std::current_exception();
        for (auto& ep : server_side) ep.reset();  // unblock clients
    }
    for (auto& th : threads) th.join();
    if (server_error) std::rethrow_exception(server_error);
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return log;
}

}  // namespace

MetricsLog run_fl(const RoundConfig& cfg, const Dataset& train, const Dataset& test,
                  FinalModels* final_models) {
    cfg.validate_for("fl");
    return run_loopback(
        cfg,
        [&](std::uint32_t k, Endpoint& ep, const std::vector<std::size_t>& shard) {
            fl_client_loop(cfg, k, ep, train, shard);
        },
        [&](std::vector<Endpoint*>& eps, const std::vector<std::uint64_t>& counts) {
            return fl_server_loop(cfg, eps, counts, test, final_models);
        });
}

MetricsLog run_sl(const RoundConfig& cfg, const Dataset& train, const Dataset& test,
                  FinalModels* final_models) {
    cfg.validate_for("sl");
    return run_loopback(
        cfg,
        [&](std::uint32_t k, Endpoint& ep, const std::vector<std::size_t>& shard) {
            split_client_loop(cfg, k, ep, train, shard, 1);
        },
        [&](std::vector<Endpoint*>& eps, const std::vector<std::uint64_t>& counts) {
            return sl_server_loop(cfg, eps, counts, test, final_models);
        });
}

MetricsLog run_sflg(const RoundConfig& cfg, const GroupAssignment& groups, const Dataset& train,
                    const Dataset& test, FinalModels* final_models) {
    cfg.validate_for("sflg");
    groups.validate(cfg.num_clients());
    return run_loopback(
        cfg,
        [&](std::uint32_t k, Endpoint& ep, const std::vector<std::size_t>& shard) {
            split_client_loop(cfg, k, ep, train, shard, cfg.local_epochs);
        },
        [&](std::vector<Endpoint*>& eps, const std::vector<std::uint64_t>& counts) {
            return sflg_server_loop(cfg, groups, eps, counts, test, final_models);
        });
}

MetricsLog centralized_train(const NetworkSpec& full, const Dataset& train, const Dataset& test,
                             std::size_t rounds, std::size_t epochs_per_round, double eta,
                             std::size_t batch_size, std::uint64_t seed,
                             std::size_t eval_every) {
    std::vector<std::size_t> all(train.samples.size());
    std::iota(all.begin(), all.end(), 0);
    ParameterSet params = init_params(full, seed);
    MetricsLog log;
    const auto start = Clock::now();
    std::vector<Endpoint*> none;
    for (std::size_t t = 0; t < rounds; ++t) {
        params = train_local(full, std::move(params), train, all, epochs_per_round, batch_size,
                             eta, batch_order_seed(seed, t, 0));
        if ((t + 1) % eval_every == 0 || t + 1 == rounds)
            record_round(log, t + 1, evaluate(full, params, test), none, start);
    }
    return log;
}

}  // namespace sfl
