#include <benchmark/benchmark.h>

#include "sfl/data.hpp"
#include "sfl/kernel.hpp"
#include "sfl/protocols.hpp"
#include "sfl/variants.hpp"
#include "sfl/wire.hpp"

namespace {

struct Fixture {
    sfl::ArchitectureVariant variant = sfl::build_variant("t2_no1");
    sfl::ParameterSet params = sfl::init_params(variant.split.full, 7);
    sfl::Dataset data = sfl::synth_sequences(64, 5, 130, 1, 7);
    sfl::Tensor x;
    std::vector<std::uint32_t> y;

    Fixture() {
        std::vector<std::size_t> idx(32);
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::tie(x, y) = sfl::make_batch(data, idx);
    }
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

void BM_Forward(benchmark::State& state) {
    auto& f = fixture();
    for (auto _ : state) {
        auto trace = sfl::forward(f.variant.split.full, f.params, f.x);
        benchmark::DoNotOptimize(trace.output.data.data());
    }
}
BENCHMARK(BM_Forward);

void BM_ForwardBackward(benchmark::State& state) {
    auto& f = fixture();
    for (auto _ : state) {
        auto trace = sfl::forward(f.variant.split.full, f.params, f.x);
        auto [loss, dlogits] = sfl::softmax_cross_entropy(trace.output, f.y);
        auto back = sfl::backward(f.variant.split.full, f.params, trace.inputs, dlogits);
        benchmark::DoNotOptimize(back.grads.entries.data());
        benchmark::DoNotOptimize(loss);
    }
}
BENCHMARK(BM_ForwardBackward);

void BM_EncodeDecodeSmashed(benchmark::State& state) {
    auto& f = fixture();
    auto [client_net, _] = sfl::split_at(f.variant.split.full, f.variant.split.cut_index);
    auto [h, unused] = sfl::split_params(f.variant.split, f.params);
    auto cut = sfl::forward(client_net, h, f.x);
    auto msg = sfl::Message::smashed(0, 0, 0, cut.output, f.y);
    for (auto _ : state) {
        auto frame = sfl::encode_message(msg, sfl::WirePrecision::F32);
        auto round_trip = sfl::decode_message(frame);
        benchmark::DoNotOptimize(round_trip.tensor.data.data());
    }
}
BENCHMARK(BM_EncodeDecodeSmashed);

void BM_FedAvg(benchmark::State& state) {
    auto& f = fixture();
    std::vector<sfl::ParameterSet> models;
    std::vector<std::uint64_t> counts;
    for (std::uint64_t k = 0; k < 5; ++k) {
        models.push_back(sfl::init_params(f.variant.split.full, 100 + k));
        counts.push_back(100 + 7 * k);
    }
    for (auto _ : state) {
        auto avg = sfl::fedavg_aggregate(models, counts);
        benchmark::DoNotOptimize(avg.entries.data());
    }
}
BENCHMARK(BM_FedAvg);

}  // namespace

BENCHMARK_MAIN();
