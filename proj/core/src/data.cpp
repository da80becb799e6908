#include "sfl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace sfl {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

Dataset synth_sequences(std::size_t n_samples, std::size_t num_classes, std::size_t length,
                        std::size_t channels, std::uint64_t seed) {
    if (n_samples == 0 || num_classes == 0 || length == 0 || channels == 0)
        throw std::invalid_argument("synth_sequences: all parameters must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> amp(0.8, 1.2);
    std::normal_distribution<double> noise(0.0, 0.25);
    Dataset data;
    data.num_classes = num_classes;
    data.samples.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const std::uint32_t cls = static_cast<std::uint32_t>(i % num_classes);
        Tensor seq = Tensor::zeros({channels, length});
        const double freq = 1.5 + static_cast<double>(cls);
        const double phase = kTwoPi * static_cast<double>(cls) / static_cast<double>(num_classes);
        const double a = amp(rng);
        for (std::size_t c = 0; c < channels; ++c) {
            const double coff = 0.7 * static_cast<double>(c);
            for (std::size_t t = 0; t < length; ++t) {
                const double u = static_cast<double>(t) / static_cast<double>(length);
                double v = a * std::sin(kTwoPi * freq * u + phase + coff);
                v += 0.4 * a * std::sin(2.0 * kTwoPi * freq * u + coff);
                v += noise(rng);
                seq.data[c * length + t] = v;
            }
        }
        data.samples.push_back({std::move(seq), cls});
    }
    return data;
}

PartitionPlan partition_iid(const Dataset& data, std::size_t clients, std::uint64_t seed) {
    const std::size_t n = data.samples.size();
    if (clients == 0 || clients > n)
        throw std::invalid_argument("partition_iid: need 1 <= clients <= samples");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    PartitionPlan plan;
    plan.law = PartitionLaw::IIDBalanced;
    plan.client_indices.resize(clients);
    std::size_t pos = 0;
    for (std::size_t k = 0; k < clients; ++k) {
        std::size_t sz = n / clients + (k < n % clients ? 1 : 0);
        plan.client_indices[k].assign(order.begin() + static_cast<long>(pos),
                                      order.begin() + static_cast<long>(pos + sz));
        pos += sz;
    }
    for (auto& shard : plan.client_indices) std::sort(shard.begin(), shard.end());
    return plan;
}

PartitionPlan partition_imbalanced(const Dataset& data, std::size_t clients, double sigma,
                                   std::uint64_t seed, std::size_t min_shard) {
    const std::size_t n = data.samples.size();
    if (clients == 0 || clients > n)
        throw std::invalid_argument("partition_imbalanced: need 1 <= clients <= samples");
    if (!(sigma > 0.0)) throw std::invalid_argument("partition_imbalanced: sigma must be > 0");
    if (min_shard == 0) min_shard = 1;
    if (min_shard * clients > n)
        throw std::invalid_argument("partition_imbalanced: min shard size infeasible");

    std::mt19937_64 rng(seed);
    const double mean = static_cast<double>(n) / static_cast<double>(clients);
    std::normal_distribution<double> law(mean, sigma * mean);
    std::vector<double> weights(clients);
    std::size_t floored = 0;
    for (auto& w : weights) {
        double v = law(rng);
        if (v <= static_cast<double>(min_shard)) {
            v = static_cast<double>(min_shard);
            ++floored;
        }
        w = v;
    }
    if (floored == clients)
        throw std::runtime_error(
            "partition_imbalanced: degenerate draw, all shard weights hit the floor "
            "(sigma too large for this client count/seed)");

    // Largest-remainder apportionment of n among the weights.
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<std::size_t> sizes(clients);
    std::vector<std::pair<double, std::size_t>> remainders(clients);
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < clients; ++k) {
        const double target = static_cast<double>(n) * weights[k] / total;
        sizes[k] = static_cast<std::size_t>(target);
        remainders[k] = {target - static_cast<double>(sizes[k]), k};
        assigned += sizes[k];
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++sizes[remainders[i % clients].second];
    // Enforce the floor, taking from the largest shard.
    for (std::size_t k = 0; k < clients; ++k) {
        while (sizes[k] < min_shard) {
            auto big = std::max_element(sizes.begin(), sizes.end()) - sizes.begin();
            --sizes[static_cast<std::size_t>(big)];
            ++sizes[k];
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    PartitionPlan plan;
    plan.law = PartitionLaw::ImbalancedNormal;
    plan.sigma = sigma;
    plan.client_indices.resize(clients);
    std::size_t pos = 0;
    for (std::size_t k = 0; k < clients; ++k) {
        plan.client_indices[k].assign(order.begin() + static_cast<long>(pos),
                                      order.begin() + static_cast<long>(pos + sizes[k]));
        pos += sizes[k];
    }
    for (auto& shard : plan.client_indices) std::sort(shard.begin(), shard.end());
    return plan;
}

PartitionPlan partition_noniid(const Dataset& data, std::size_t clients,
                               std::size_t classes_per_client, std::uint64_t seed) {
    const std::size_t n = data.samples.size();
    const std::size_t num_classes = data.num_classes;
    if (clients == 0) throw std::invalid_argument("partition_noniid: clients must be positive");
    if (classes_per_client == 0 || classes_per_client > num_classes)
        throw std::invalid_argument(
            "partition_noniid: need 1 <= classes_per_client <= num_classes");

    std::mt19937_64 rng(seed);
    std::vector<std::uint32_t> class_order(num_classes);
    std::iota(class_order.begin(), class_order.end(), 0);
    std::shuffle(class_order.begin(), class_order.end(), rng);

    // Deal class slots round-robin: client k holds slots [k*cpc, (k+1)*cpc).
    // Consecutive slots cycle through the shuffled class list, so each
    // client's classes are distinct as long as classes_per_client <= classes.
    std::vector<std::vector<std::uint32_t>> holders(num_classes);  // class -> clients
    for (std::size_t k = 0; k < clients; ++k)
        for (std::size_t j = 0; j < classes_per_client; ++j) {
            const std::uint32_t cls = class_order[(k * classes_per_client + j) % num_classes];
            holders[cls].push_back(static_cast<std::uint32_t>(k));
        }

    std::vector<std::vector<std::size_t>> by_class(num_classes);
    for (std::size_t i = 0; i < n; ++i) by_class[data.samples[i].label].push_back(i);
    for (auto& v : by_class) std::shuffle(v.begin(), v.end(), rng);

    PartitionPlan plan;
    plan.law = PartitionLaw::NonIID;
    plan.classes_per_client = classes_per_client;
    plan.client_indices.resize(clients);
    for (std::size_t cls = 0; cls < num_classes; ++cls) {
        const auto& hs = holders[cls];
        if (hs.empty()) continue;
        const auto& pool = by_class[cls];
        if (pool.size() < hs.size())
            throw std::runtime_error("partition_noniid: class " + std::to_string(cls) +
                                     " has " + std::to_string(pool.size()) +
                                     " samples for " + std::to_string(hs.size()) +
                                     " holders; assignment infeasible");
        std::size_t pos = 0;
        for (std::size_t h = 0; h < hs.size(); ++h) {
            std::size_t sz = pool.size() / hs.size() + (h < pool.size() % hs.size() ? 1 : 0);
            auto& shard = plan.client_indices[hs[h]];
            shard.insert(shard.end(), pool.begin() + static_cast<long>(pos),
                         pool.begin() + static_cast<long>(pos + sz));
            pos += sz;
        }
    }
    for (auto& shard : plan.client_indices) std::sort(shard.begin(), shard.end());
    return plan;
}

Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open '" + path + "'");
    Dataset data;
    std::string line;
    std::size_t row = 0;
    std::size_t width = 0;
    std::uint32_t max_label = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<double> fields;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                double v = std::stod(cell, &used);
                while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used])))
                    ++used;
                if (used != cell.size()) throw std::invalid_argument(cell);
                fields.push_back(v);
            } catch (const std::exception&) {
                throw std::runtime_error("load_csv: non-numeric field '" + cell + "' at row " +
                                         std::to_string(row));
            }
        }
        if (fields.size() < 2)
            throw std::runtime_error("load_csv: malformed row " + std::to_string(row) +
                                     " (need a label and at least one feature)");
        if (width == 0)
            width = fields.size();
        else if (fields.size() != width)
            throw std::runtime_error("load_csv: inconsistent width at row " +
                                     std::to_string(row) + " (" +
                                     std::to_string(fields.size()) + " vs " +
                                     std::to_string(width) + ")");
        const double lab = fields[0];
        if (lab < 0 || lab != std::floor(lab))
            throw std::runtime_error("load_csv: label must be a non-negative integer at row " +
                                     std::to_string(row));
        Sample s;
        s.label = static_cast<std::uint32_t>(lab);
        max_label = std::max(max_label, s.label);
        s.sequence = Tensor({1, width - 1},
                            std::vector<double>(fields.begin() + 1, fields.end()));
        data.samples.push_back(std::move(s));
    }
    if (data.samples.empty()) throw std::runtime_error("load_csv: '" + path + "' is empty");
    data.num_classes = max_label + 1;
    return data;
}

void save_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_csv: cannot open '" + path + "'");
    char buf[32];
    for (const auto& s : data.samples) {
        out << s.label;
        for (double v : s.sequence.data) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << ',' << buf;
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("save_csv: write failure on '" + path + "'");
}

std::pair<Tensor, std::vector<std::uint32_t>> make_batch(
    const Dataset& data, const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw std::invalid_argument("make_batch: empty index list");
    const std::size_t C = data.channels(), L = data.length();
    Tensor x = Tensor::zeros({indices.size(), C, L});
    std::vector<std::uint32_t> y(indices.size());
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const Sample& s = data.samples[indices[b]];
        std::copy(s.sequence.data.begin(), s.sequence.data.end(),
                  x.data.begin() + static_cast<long>(b * C * L));
        y[b] = s.label;
    }
    return {std::move(x), std::move(y)};
}

}  // namespace sfl
