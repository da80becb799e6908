#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sfl/data.hpp"
#include "sfl/kernel.hpp"
#include "sfl/network.hpp"

namespace sfl {

struct RoundRecord {
    std::size_t round = 0;
    double test_accuracy = 0.0;
    std::vector<std::uint64_t> bytes_up;    // cumulative, per client
    std::vector<std::uint64_t> bytes_down;  // cumulative, per client
    std::uint64_t wall_millis = 0;

    std::uint64_t total_up() const;
    std::uint64_t total_down() const;
};

struct MetricsLog {
    std::string config_fingerprint;
    std::vector<RoundRecord> records;
};

/// Fraction of argmax-correct predictions; ties go to the lowest class index.
double evaluate(const NetworkSpec& spec, const ParameterSet& params, const Dataset& testset,
                std::size_t eval_batch = 256);

/// Composed split evaluation: client subnet feeding the server subnet.
double evaluate_split(const NetworkSpec& client_net, const ParameterSet& client_params,
                      const NetworkSpec& server_net, const ParameterSet& server_params,
                      const Dataset& testset, std::size_t eval_batch = 256);

/// Header "round,accuracy,bytes_up,bytes_down,wall_millis"; byte columns are
/// totals across clients.
void write_csv(const MetricsLog& log, const std::string& path);

}  // namespace sfl
