#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sfl/protocols.hpp"

namespace sfl {

/// Flat experiment configuration; every key is overridable from the CLI.
struct ExperimentConfig {
    std::string protocol = "sflg";            // fl | sl | sflg
    std::string groups = "1";                 // count or explicit "0,1|2,3" (sflg only)
    std::string variant = "t2_no1";
    std::string dataset = "synthetic";        // synthetic | csv
    std::string csv_path;
    std::size_t n_samples = 2000;
    std::size_t test_samples = 1000;
    std::size_t clients = 5;
    std::string partition = "iid";            // iid | imbalanced | noniid
    double sigma = 0.5;
    std::size_t classes_per_client = 1;
    std::size_t rounds = 100;
    std::size_t local_epochs = 1;
    double eta = 0.001;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
    std::string transport = "loopback";       // loopback | socket
    std::string host = "127.0.0.1";
    std::uint16_t port = 4750;
    std::string role = "server";              // socket mode: server | client
    std::size_t client_id = 0;
    std::string wire = "f32";                 // f32 | f64
    std::string out = "metrics.csv";
    std::size_t eval_every = 1;

    std::string fingerprint() const;
};

/// Flat key=value file, '#' comments. Unknown keys are an error.
ExperimentConfig parse_config_file(const std::string& path);
void apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Every violated invariant, one message each; empty means valid.
std::vector<std::string> validate(const ExperimentConfig& cfg);

GroupAssignment parse_groups(const std::string& spec, std::size_t clients);

/// Executes the configured experiment end-to-end and writes the metrics CSV.
/// Returns the process exit status.
int run_experiment(const ExperimentConfig& cfg);

}  // namespace sfl
