#include "sfl/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace sfl {

std::uint64_t RoundRecord::total_up() const {
    return std::accumulate(bytes_up.begin(), bytes_up.end(), std::uint64_t{0});
}

std::uint64_t RoundRecord::total_down() const {
    return std::accumulate(bytes_down.begin(), bytes_down.end(), std::uint64_t{0});
}

namespace {

std::size_t count_correct(const Tensor& logits, const std::vector<std::uint32_t>& labels) {
    std::size_t correct = 0;
    const std::size_t C = logits.shape[1];
    for (std::size_t b = 0; b < logits.shape[0]; ++b) {
        std::size_t arg = 0;
        double best = logits.at2(b, 0);
        for (std::size_t c = 1; c < C; ++c)
            if (logits.at2(b, c) > best) {  // strict: ties keep the lowest index
                best = logits.at2(b, c);
                arg = c;
            }
        if (arg == labels[b]) ++correct;
    }
    return correct;
}

}  // namespace

double evaluate(const NetworkSpec& spec, const ParameterSet& params, const Dataset& testset,
                std::size_t eval_batch) {
    if (testset.samples.empty()) throw std::invalid_argument("evaluate: empty test set");
    std::size_t correct = 0;
    const std::size_t n = testset.samples.size();
    for (std::size_t start = 0; start < n; start += eval_batch) {
        const std::size_t end = std::min(n, start + eval_batch);
        std::vector<std::size_t> idx(end - start);
        std::iota(idx.begin(), idx.end(), start);
        auto [x, y] = make_batch(testset, idx);
        auto trace = forward(spec, params, x);
        correct += count_correct(trace.output, y);
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

double evaluate_split(const NetworkSpec& client_net, const ParameterSet& client_params,
                      const NetworkSpec& server_net, const ParameterSet& server_params,
                      const Dataset& testset, std::size_t eval_batch) {
    if (testset.samples.empty()) throw std::invalid_argument("evaluate_split: empty test set");
    std::size_t correct = 0;
    const std::size_t n = testset.samples.size();
    for (std::size_t start = 0; start < n; start += eval_batch) {
        const std::size_t end = std::min(n, start + eval_batch);
        std::vector<std::size_t> idx(end - start);
        std::iota(idx.begin(), idx.end(), start);
        auto [x, y] = make_batch(testset, idx);
        auto cut = forward(client_net, client_params, x);
        auto trace = forward(server_net, server_params, cut.output);
        correct += count_correct(trace.output, y);
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

void write_csv(const MetricsLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_csv: cannot open '" + path + "'");
    out << "round,accuracy,bytes_up,bytes_down,wall_millis\n";
    char acc[32];
    std::size_t prev_round = 0;
    bool first = true;
    for (const auto& r : log.records) {
        if (!first && r.round <= prev_round)
            throw std::runtime_error("write_csv: rounds must be strictly increasing");
        prev_round = r.round;
        first = false;
        std::snprintf(acc, sizeof acc, "%.17g", r.test_accuracy);
        out << r.round << ',' << acc << ',' << r.total_up() << ',' << r.total_down() << ','
            << r.wall_millis << '\n';
    }
    if (!out) throw std::runtime_error("write_csv: write failure on '" + path + "'");
}

}  // namespace sfl
