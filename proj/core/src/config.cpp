#include "sfl/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace sfl {

namespace {

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw std::invalid_argument("config: key '" + key + "' needs an unsigned integer, got '" +
                                    v + "'");
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "' needs a number, got '" + v + "'");
    }
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

void apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "protocol") cfg.protocol = value;
    else if (key == "groups") cfg.groups = value;
    else if (key == "variant") cfg.variant = value;
    else if (key == "dataset") cfg.dataset = value;
    else if (key == "csv_path") cfg.csv_path = value;
    else if (key == "n_samples") cfg.n_samples = to_u64(key, value);
    else if (key == "test_samples") cfg.test_samples = to_u64(key, value);
    else if (key == "clients") cfg.clients = to_u64(key, value);
    else if (key == "partition") cfg.partition = value;
    else if (key == "sigma") cfg.sigma = to_double(key, value);
    else if (key == "classes_per_client") cfg.classes_per_client = to_u64(key, value);
    else if (key == "rounds") cfg.rounds = to_u64(key, value);
    else if (key == "local_epochs") cfg.local_epochs = to_u64(key, value);
    else if (key == "eta") cfg.eta = to_double(key, value);
    else if (key == "batch_size") cfg.batch_size = to_u64(key, value);
    else if (key == "seed") cfg.seed = to_u64(key, value);
    else if (key == "transport") cfg.transport = value;
    else if (key == "host") cfg.host = value;
    else if (key == "port") cfg.port = static_cast<std::uint16_t>(to_u64(key, value));
    else if (key == "role") cfg.role = value;
    else if (key == "client_id") cfg.client_id = to_u64(key, value);
    else if (key == "wire") cfg.wire = value;
    else if (key == "out") cfg.out = value;
    else if (key == "eval_every") cfg.eval_every = to_u64(key, value);
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
    ExperimentConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: line " + std::to_string(lineno) +
                                     " is not key=value");
        apply_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

std::string ExperimentConfig::fingerprint() const {
    std::ostringstream out;
    out << "protocol=" << protocol << ";groups=" << groups << ";variant=" << variant
        << ";dataset=" << dataset << ";csv_path=" << csv_path << ";n_samples=" << n_samples
        << ";test_samples=" << test_samples << ";clients=" << clients
        << ";partition=" << partition << ";sigma=" << sigma
        << ";classes_per_client=" << classes_per_client << ";rounds=" << rounds
        << ";local_epochs=" << local_epochs << ";eta=" << eta << ";batch_size=" << batch_size
        << ";seed=" << seed << ";wire=" << wire << ";eval_every=" << eval_every;
    return out.str();
}

GroupAssignment parse_groups(const std::string& spec, std::size_t clients) {
    if (spec.find_first_not_of("0123456789") == std::string::npos && !spec.empty())
        return GroupAssignment::contiguous(clients, to_u64("groups", spec));
    GroupAssignment g;
    std::stringstream groups_ss(spec);
    std::string group;
    while (std::getline(groups_ss, group, '|')) {
        std::vector<std::uint32_t> members;
        std::stringstream ss(group);
        std::string id;
        while (std::getline(ss, id, ',')) {
            id = trim(id);
            if (!id.empty())
                members.push_back(static_cast<std::uint32_t>(to_u64("groups", id)));
        }
        if (!members.empty()) g.groups.push_back(std::move(members));
    }
    g.validate(clients);
    return g;
}

std::vector<std::string> validate(const ExperimentConfig& cfg) {
    std::vector<std::string> errors;
    if (cfg.protocol != "fl" && cfg.protocol != "sl" && cfg.protocol != "sflg")
        errors.push_back("protocol: must be fl, sl or sflg (got '" + cfg.protocol + "')");
    ArchitectureVariant variant;
    bool have_variant = false;
    try {
        variant = build_variant(cfg.variant);
        have_variant = true;
    } catch (const std::exception& e) {
        errors.push_back(std::string("variant: ") + e.what());
    }
    if (cfg.dataset != "synthetic" && cfg.dataset != "csv")
        errors.push_back("dataset: must be synthetic or csv (got '" + cfg.dataset + "')");
    if (cfg.dataset == "csv" && cfg.csv_path.empty())
        errors.push_back("csv_path: required when dataset=csv");
    if (cfg.dataset == "synthetic" && cfg.n_samples == 0)
        errors.push_back("n_samples: must be positive");
    if (cfg.test_samples == 0) errors.push_back("test_samples: must be positive");
    if (cfg.clients == 0) errors.push_back("clients: must be positive");
    if (cfg.partition != "iid" && cfg.partition != "imbalanced" && cfg.partition != "noniid")
        errors.push_back("partition: must be iid, imbalanced or noniid (got '" + cfg.partition +
                         "')");
    if (cfg.partition == "imbalanced" && !(cfg.sigma > 0.0))
        errors.push_back("sigma: must be positive for the imbalanced partition");
    if (cfg.partition == "noniid") {
        if (cfg.classes_per_client == 0) errors.push_back("classes_per_client: must be positive");
        if (have_variant && cfg.classes_per_client > variant.split.full.num_classes)
            errors.push_back("classes_per_client: " + std::to_string(cfg.classes_per_client) +
                             " exceeds num_classes " +
                             std::to_string(variant.split.full.num_classes));
    }
    if (cfg.rounds == 0) errors.push_back("rounds: must be positive");
    if (cfg.local_epochs == 0) errors.push_back("local_epochs: must be positive");
    if (cfg.protocol == "sl" && cfg.local_epochs != 1)
        errors.push_back("local_epochs: SL requires local_epochs=1");
    if (!(cfg.eta > 0.0)) errors.push_back("eta: must be positive");
    if (cfg.batch_size == 0) errors.push_back("batch_size: must be positive");
    if (cfg.protocol == "sflg") {
        try {
            parse_groups(cfg.groups, cfg.clients);
        } catch (const std::exception& e) {
            errors.push_back(std::string("groups: ") + e.what());
        }
    }
    if (cfg.transport != "loopback" && cfg.transport != "socket")
        errors.push_back("transport: must be loopback or socket (got '" + cfg.transport + "')");
    if (cfg.transport == "socket") {
        if (cfg.role != "server" && cfg.role != "client")
            errors.push_back("role: must be server or client for socket transport");
        if (cfg.role == "client" && cfg.client_id >= cfg.clients)
            errors.push_back("client_id: out of range [0," + std::to_string(cfg.clients) + ")");
    }
    if (cfg.wire != "f32" && cfg.wire != "f64")
        errors.push_back("wire: must be f32 or f64 (got '" + cfg.wire + "')");
    if (cfg.eval_every == 0) errors.push_back("eval_every: must be positive");
    if (cfg.out.empty()) errors.push_back("out: must be a writable path");
    return errors;
}

namespace {

struct BuiltExperiment {
    RoundConfig round;
    Dataset train;
    Dataset test;
    GroupAssignment groups;
};

BuiltExperiment build_experiment(const ExperimentConfig& cfg) {
    BuiltExperiment b;
    b.round.variant = build_variant(cfg.variant);
    const NetworkSpec& full = b.round.variant.split.full;
    if (cfg.dataset == "synthetic") {
        b.train = synth_sequences(cfg.n_samples, full.num_classes, full.in_length,
                                  full.in_channels, cfg.seed);
        b.test = synth_sequences(cfg.test_samples, full.num_classes, full.in_length,
                                 full.in_channels, cfg.seed + 1);
    } else {
        Dataset all = load_csv(cfg.csv_path);
        if (cfg.test_samples >= all.samples.size())
            throw std::runtime_error("config: test_samples must be smaller than the csv rows");
        if (all.length() != full.in_length || all.channels() != full.in_channels)
            throw std::runtime_error("config: csv sample shape (" +
                                     std::to_string(all.channels()) + "," +
                                     std::to_string(all.length()) +
                                     ") does not match variant input (" +
                                     std::to_string(full.in_channels) + "," +
                                     std::to_string(full.in_length) + ")");
        const std::size_t train_n = all.samples.size() - cfg.test_samples;
        b.train.num_classes = b.test.num_classes = all.num_classes;
        b.train.samples.assign(all.samples.begin(),
                               all.samples.begin() + static_cast<long>(train_n));
        b.test.samples.assign(all.samples.begin() + static_cast<long>(train_n),
                              all.samples.end());
    }
    if (cfg.partition == "iid")
        b.round.partition = partition_iid(b.train, cfg.clients, cfg.seed);
    else if (cfg.partition == "imbalanced")
        b.round.partition =
            partition_imbalanced(b.train, cfg.clients, cfg.sigma, cfg.seed, cfg.batch_size);
    else
        b.round.partition =
            partition_noniid(b.train, cfg.clients, cfg.classes_per_client, cfg.seed);
    b.round.rounds = cfg.rounds;
    b.round.local_epochs = cfg.local_epochs;
    b.round.eta = cfg.eta;
    b.round.batch_size = cfg.batch_size;
    b.round.seed = cfg.seed;
    b.round.wire = cfg.wire == "f64" ? WirePrecision::F64 : WirePrecision::F32;
    b.round.eval_every = cfg.eval_every;
    if (cfg.protocol == "sflg") b.groups = parse_groups(cfg.groups, cfg.clients);
    return b;
}

void print_summary(const MetricsLog& log) {
    if (log.records.empty()) {
        std::printf("no rounds recorded\n");
        return;
    }
    const auto& last = log.records.back();
    std::printf("final accuracy %.4f after round %zu, total client bytes up %llu / down %llu\n",
                last.test_accuracy, last.round,
                static_cast<unsigned long long>(last.total_up()),
                static_cast<unsigned long long>(last.total_down()));
}

int run_socket_server(const ExperimentConfig& cfg, const BuiltExperiment& b) {
    SocketListener listener(cfg.host, cfg.port);
    std::vector<std::unique_ptr<Endpoint>> owned(cfg.clients);
    for (std::size_t i = 0; i < cfg.clients; ++i) {
        auto ep = std::make_unique<Endpoint>(listener.accept_channel(), b.round.wire);
        Message hello = ep->recv();
        if (hello.kind != MsgKind::Control || hello.control != ControlType::Hello)
            throw std::runtime_error("socket server: expected Hello from connecting client");
        if (hello.arg >= cfg.clients || owned[hello.arg])
            throw std::runtime_error("socket server: bad or duplicate client id " +
                                     std::to_string(hello.arg));
        owned[hello.arg] = std::move(ep);
    }
    std::vector<Endpoint*> endpoints;
    for (auto& ep : owned) endpoints.push_back(ep.get());
    std::vector<std::uint64_t> counts;
    for (const auto& shard : b.round.partition.client_indices) counts.push_back(shard.size());

    MetricsLog log;
    if (cfg.protocol == "fl")
        log = fl_server_loop(b.round, endpoints, counts, b.test);
    else if (cfg.protocol == "sl")
        log = sl_server_loop(b.round, endpoints, counts, b.test);
    else
        log = sflg_server_loop(b.round, b.groups, endpoints, counts, b.test);
    log.config_fingerprint = cfg.fingerprint();
    write_csv(log, cfg.out);
    print_summary(log);
    return 0;
}

int run_socket_client(const ExperimentConfig& cfg, const BuiltExperiment& b) {
    Endpoint ep(connect_channel(cfg.host, cfg.port), b.round.wire);
    ep.send(Message::make_control(ControlType::Hello, 0, static_cast<std::uint32_t>(cfg.client_id)));
    const auto& shard = b.round.partition.client_indices[cfg.client_id];
    if (cfg.protocol == "fl")
        fl_client_loop(b.round, static_cast<std::uint32_t>(cfg.client_id), ep, b.train, shard);
    else
        split_client_loop(b.round, static_cast<std::uint32_t>(cfg.client_id), ep, b.train, shard,
                          cfg.protocol == "sl" ? 1 : b.round.local_epochs);
    return 0;
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg) {
    const auto errors = validate(cfg);
    if (!errors.empty()) {
        for (const auto& e : errors) std::fprintf(stderr, "config error: %s\n", e.c_str());
        return 2;
    }
    BuiltExperiment b = build_experiment(cfg);
    b.round.validate_for(cfg.protocol.c_str());

    if (cfg.transport == "socket")
        return cfg.role == "server" ? run_socket_server(cfg, b) : run_socket_client(cfg, b);

    MetricsLog log;
    if (cfg.protocol == "fl")
        log = run_fl(b.round, b.train, b.test);
    else if (cfg.protocol == "sl")
        log = run_sl(b.round, b.train, b.test);
    else
        log = run_sflg(b.round, b.groups, b.train, b.test);
    log.config_fingerprint = cfg.fingerprint();
    write_csv(log, cfg.out);
    print_summary(log);
    return 0;
}

}  // namespace sfl
