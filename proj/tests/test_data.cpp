#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <set>
#include <string>

#include "sfl/data.hpp"

using namespace sfl;

namespace {

std::set<std::size_t> used_indices(const PartitionPlan& plan) {
    std::set<std::size_t> all;
    for (const auto& shard : plan.client_indices)
        for (std::size_t i : shard) {
            auto [it, fresh] = all.insert(i);
            REQUIRE(fresh);  // disjointness
        }
    return all;
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("synthetic generator determinism and shape") {
    Dataset a = synth_sequences(200, 5, 130, 1, 9);
    Dataset b = synth_sequences(200, 5, 130, 1, 9);
    Dataset c = synth_sequences(200, 5, 130, 1, 10);
    REQUIRE(a.samples.size() == 200);
    CHECK(a.num_classes == 5);
    CHECK(a.channels() == 1);
    CHECK(a.length() == 130);
    bool equal = a.samples.size() == b.samples.size();
    bool differs = false;
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        equal = equal && a.samples[i].sequence == b.samples[i].sequence &&
                a.samples[i].label == b.samples[i].label;
        differs = differs || !(a.samples[i].sequence == c.samples[i].sequence);
    }
    CHECK(equal);
    CHECK(differs);  // a different seed actually changes the data

    // balanced labels by construction
    std::vector<std::size_t> counts(5, 0);
    for (const auto& s : a.samples) {
        REQUIRE(s.label < 5);
        ++counts[s.label];
    }
    for (std::size_t c5 : counts) CHECK(c5 == 40);
}

TEST_CASE("classes are separable by nearest centroid") {
    Dataset train = synth_sequences(1000, 5, 130, 1, 3);
    Dataset probe = synth_sequences(500, 5, 130, 1, 4);
    const std::size_t dim = 130;
    std::vector<std::vector<double>> centroid(5, std::vector<double>(dim, 0.0));
    std::vector<double> n(5, 0.0);
    for (const auto& s : train.samples) {
        for (std::size_t i = 0; i < dim; ++i) centroid[s.label][i] += s.sequence.data[i];
        n[s.label] += 1.0;
    }
    for (std::size_t c = 0; c < 5; ++c)
        for (auto& v : centroid[c]) v /= n[c];
    std::size_t correct = 0;
    for (const auto& s : probe.samples) {
        std::size_t best = 0;
        double best_d = 1e300;
        for (std::size_t c = 0; c < 5; ++c) {
            double d = 0;
            for (std::size_t i = 0; i < dim; ++i) {
                const double diff = s.sequence.data[i] - centroid[c][i];
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        if (best == s.label) ++correct;
    }
    CHECK(static_cast<double>(correct) / 500.0 > 0.6);
}

TEST_CASE("iid partition is balanced, disjoint and deterministic") {
    Dataset data = synth_sequences(100, 5, 16, 1, 1);
    PartitionPlan p = partition_iid(data, 4, 7);
    REQUIRE(p.client_indices.size() == 4);
    for (const auto& shard : p.client_indices) CHECK(shard.size() == 25);
    CHECK(used_indices(p).size() == 100);

    PartitionPlan q = partition_iid(data, 4, 7);
    CHECK(p.client_indices == q.client_indices);

    // n=11360, K=10: every shard exactly 1136
    Dataset big = synth_sequences(11360, 10, 8, 1, 2);
    PartitionPlan r = partition_iid(big, 10, 3);
    for (const auto& shard : r.client_indices) CHECK(shard.size() == 1136);

    // K=1 degenerates to all data on one client
    PartitionPlan one = partition_iid(data, 1, 5);
    REQUIRE(one.client_indices.size() == 1);
    CHECK(one.client_indices[0].size() == 100);
}

TEST_CASE("imbalanced partition conserves n and spreads with sigma") {
    Dataset data = synth_sequences(2000, 5, 16, 1, 6);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        PartitionPlan lo = partition_imbalanced(data, 8, 0.1, seed);
        PartitionPlan hi = partition_imbalanced(data, 8, 0.9, seed);
        std::size_t lo_sum = 0, hi_sum = 0, lo_min = 1u << 30, lo_max = 0, hi_min = 1u << 30,
                    hi_max = 0;
        for (const auto& s : lo.client_indices) {
            lo_sum += s.size();
            lo_min = std::min(lo_min, s.size());
            lo_max = std::max(lo_max, s.size());
            CHECK(!s.empty());
        }
        for (const auto& s : hi.client_indices) {
            hi_sum += s.size();
            hi_min = std::min(hi_min, s.size());
            hi_max = std::max(hi_max, s.size());
        }
        CHECK(lo_sum == 2000);  // conservation for any seed
        CHECK(hi_sum == 2000);
        CHECK(used_indices(hi).size() == 2000);
        // larger sigma never shrinks the spread on the same draw
        CHECK(hi_max - hi_min >= lo_max - lo_min);
    }

    // sigma -> 0 converges to the balanced split
    PartitionPlan tiny = partition_imbalanced(data, 8, 1e-9, 3);
    for (const auto& s : tiny.client_indices) CHECK(s.size() == 250);
}

TEST_CASE("non-iid partition label cardinality is exact") {
    Dataset data = synth_sequences(1000, 10, 16, 1, 8);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        for (std::size_t cpc : {1, 2, 3, 10}) {
            PartitionPlan p = partition_noniid(data, 10, cpc, seed);
            REQUIRE(p.client_indices.size() == 10);
            used_indices(p);
            for (const auto& shard : p.client_indices) {
                std::set<std::uint32_t> labels;
                for (std::size_t i : shard) labels.insert(data.samples[i].label);
                CHECK(labels.size() == cpc);
            }
        }
    }

    // 10 clients, 10 classes, 1 class each: a bijection of classes to clients
    PartitionPlan bij = partition_noniid(data, 10, 1, 4);
    std::set<std::uint32_t> owners;
    for (const auto& shard : bij.client_indices) {
        REQUIRE(!shard.empty());
        owners.insert(data.samples[shard[0]].label);
    }
    CHECK(owners.size() == 10);

    CHECK_THROWS(partition_noniid(data, 10, 11, 1));  // more classes than exist
}

TEST_CASE("csv round trip") {
    const std::string path = temp_path("sfl_data_roundtrip.csv");
    Dataset data = synth_sequences(25, 3, 20, 1, 12);
    save_csv(data, path);
    Dataset back = load_csv(path);
    REQUIRE(back.samples.size() == data.samples.size());
    CHECK(back.num_classes == data.num_classes);
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        CHECK(back.samples[i].label == data.samples[i].label);
        CHECK(back.samples[i].sequence == data.samples[i].sequence);
    }
    std::remove(path.c_str());
}

TEST_CASE("csv hand-written rows and malformed inputs") {
    const std::string path = temp_path("sfl_data_hand.csv");
    {
        FILE* f = std::fopen(path.c_str(), "w");
        std::fputs("1,0.5,-2.25,3\n0,1,2,4.5\n", f);
        std::fclose(f);
    }
    Dataset d = load_csv(path);
    REQUIRE(d.samples.size() == 2);
    CHECK(d.num_classes == 2);
    CHECK(d.samples[0].label == 1);
    CHECK(d.samples[0].sequence.data == std::vector<double>{0.5, -2.25, 3.0});
    CHECK(d.samples[1].sequence.data == std::vector<double>{1.0, 2.0, 4.5});

    {
        FILE* f = std::fopen(path.c_str(), "w");
        std::fclose(f);
    }
    CHECK_THROWS(load_csv(path));  // empty file

    {
        FILE* f = std::fopen(path.c_str(), "w");
        std::fputs("0,1,2\n1,3\n", f);  // ragged row
        std::fclose(f);
    }
    CHECK_THROWS(load_csv(path));
    std::remove(path.c_str());
}

TEST_CASE("batch assembly stacks samples in index order") {
    Dataset data = synth_sequences(10, 2, 6, 1, 13);
    auto [x, y] = make_batch(data, {7, 2, 5});
    REQUIRE(x.shape == std::vector<std::size_t>{3, 1, 6});
    REQUIRE(y.size() == 3);
    CHECK(y[0] == data.samples[7].label);
    CHECK(y[2] == data.samples[5].label);
    for (std::size_t i = 0; i < 6; ++i) CHECK(x.at3(1, 0, i) == data.samples[2].sequence.data[i]);
}
