#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "sfl/channel.hpp"
#include "sfl/kernel.hpp"
#include "sfl/variants.hpp"
#include "sfl/wire.hpp"

using namespace sfl;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, bool f32_clean) {
    Tensor t = Tensor::zeros(shape);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    for (auto& v : t.data) {
        v = dist(rng);
        if (f32_clean) v = static_cast<double>(static_cast<float>(v));
    }
    return t;
}

Message random_message(std::mt19937_64& rng, WirePrecision precision) {
    std::uniform_int_distribution<int> kind(0, 6);
    std::uniform_int_distribution<std::uint32_t> u32(0, 1 << 20);
    const bool f32 = precision == WirePrecision::F32;
    switch (kind(rng)) {
        case 0:
        case 1: {
            ParameterSet p;
            std::uniform_int_distribution<std::size_t> n(1, 3);
            const std::size_t entries = n(rng);
            for (std::size_t e = 0; e < entries; ++e) {
                ParamEntry pe;
                pe.layer_index = e * 2;
                pe.weights = random_tensor({n(rng), n(rng), n(rng)}, rng, false);
                pe.bias = random_tensor({n(rng)}, rng, false);
                p.entries.push_back(std::move(pe));
            }
            return Message::model(kind(rng) % 2 ? MsgKind::ModelUp : MsgKind::ModelDown,
                                  std::move(p));
        }
        case 2: {
            std::uniform_int_distribution<std::size_t> n(1, 6);
            const std::size_t batch = n(rng);
            std::vector<std::uint32_t> labels;
            for (std::size_t i = 0; i < batch; ++i) labels.push_back(u32(rng) % 10);
            return Message::smashed(u32(rng), u32(rng), u32(rng),
                                    random_tensor({batch, n(rng), n(rng)}, rng, f32),
                                    std::move(labels));
        }
        case 3: {
            std::uniform_int_distribution<std::size_t> n(1, 6);
            return Message::smashed_grad(u32(rng), u32(rng), u32(rng),
                                         random_tensor({n(rng), n(rng), n(rng)}, rng, f32));
        }
        case 4: {
            Message m;
            m.kind = MsgKind::EvalRequest;
            return m;
        }
        case 5: {
            Message m;
            m.kind = MsgKind::EvalReply;
            m.value = 0.25 * u32(rng);
            return m;
        }
        default:
            return Message::make_control(static_cast<ControlType>(u32(rng) % 4), u32(rng),
                                         u32(rng));
    }
}

}  // namespace

TEST_CASE("decode(encode(m)) == m over 1000 random messages") {
    std::mt19937_64 rng(2024);
    std::size_t mismatches = 0;
    for (int i = 0; i < 1000; ++i) {
        const WirePrecision p = i % 2 ? WirePrecision::F32 : WirePrecision::F64;
        Message m = random_message(rng, p);
        if (!(decode_message(encode_message(m, p)) == m)) ++mismatches;
    }
    CHECK(mismatches == 0);
}

TEST_CASE("frame header arithmetic") {
    Message c = Message::make_control(ControlType::Terminate);
    auto frame = encode_message(c);
    CHECK(frame.size() >= kFrameHeaderBytes);
    CHECK(frame[0] == 'S');
    CHECK(frame[1] == 'F');
    CHECK(frame[2] == 'L');
    CHECK(frame[3] == 'G');
    CHECK(frame[4] == 1);  // version
    std::uint64_t len = 0;
    for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(frame[6 + i]) << (8 * i);
    CHECK(frame.size() == kFrameHeaderBytes + len);
}

TEST_CASE("a (1,16,29) f32 smashed frame carries exactly 1856 activation bytes") {
    std::mt19937_64 rng(7);
    Tensor a = random_tensor({1, 16, 29}, rng, true);
    Message with = Message::smashed(0, 0, 0, a, {1});
    Message without = Message::smashed(0, 0, 0, Tensor::zeros({1, 16, 29}), {1});
    without.tensor.shape = {1, 16, 0};
    without.tensor.data.clear();
    const std::size_t activation_bytes =
        encode_message(with, WirePrecision::F32).size() -
        encode_message(without, WirePrecision::F32).size();
    CHECK(activation_bytes == 16 * 29 * 4);
}

TEST_CASE("model parameters travel as f64 regardless of the endpoint precision") {
    ParameterSet p = init_params(build_variant("t2_no1").split.full, 5);
    Message m = Message::model(MsgKind::ModelDown, p);
    Message f32 = decode_message(encode_message(m, WirePrecision::F32));
    CHECK(f32.params == p);  // bit exact, not rounded through f32
    CHECK(encode_message(m, WirePrecision::F32) == encode_message(m, WirePrecision::F64));
}

TEST_CASE("malformed frames raise their named errors") {
    auto good = encode_message(Message::make_control(ControlType::RoundBegin, 3));

    auto truncated = good;
    truncated.resize(kFrameHeaderBytes - 2);
    CHECK_THROWS_AS(decode_message(truncated), TruncatedFrame);

    auto magic = good;
    magic[0] = 'X';
    CHECK_THROWS_AS(decode_message(magic), BadMagic);

    auto kind = good;
    kind[5] = 0x7F;
    CHECK_THROWS_AS(decode_message(kind), UnknownKind);

    auto lied = good;
    lied.push_back(0);  // trailing byte the length field does not cover
    CHECK_THROWS_AS(decode_message(lied), LengthMismatch);
}

TEST_CASE("loopback conservation: bytes sent equal bytes received") {
    auto [a, b] = make_loopback_pair();
    Endpoint alice(a), bob(b);
    std::mt19937_64 rng(11);
    for (int i = 0; i < 50; ++i) {
        alice.send(random_message(rng, WirePrecision::F64));
        (void)bob.recv();
        if (i % 3 == 0) {
            bob.send(Message::make_control(ControlType::RoundEnd, i));
            (void)alice.recv();
        }
    }
    CHECK(alice.bytes_sent() == bob.bytes_received());
    CHECK(bob.bytes_sent() == alice.bytes_received());
    CHECK(alice.bytes_sent() > 0);
}

TEST_CASE("socket and loopback counters agree on a scripted exchange") {
    std::mt19937_64 rng_a(99), rng_b(99);

    // loopback leg
    auto [la, lb] = make_loopback_pair();
    Endpoint l_client(la, WirePrecision::F32), l_server(lb, WirePrecision::F32);
    // socket leg
    SocketListener listener("127.0.0.1", 0);
    Endpoint s_client(connect_channel("127.0.0.1", listener.port()), WirePrecision::F32);
    Endpoint s_server(listener.accept_channel(), WirePrecision::F32);

    for (int i = 0; i < 20; ++i) {
        Message up_l = random_message(rng_a, WirePrecision::F32);
        Message up_s = random_message(rng_b, WirePrecision::F32);
        REQUIRE(up_l == up_s);
        l_client.send(up_l);
        s_client.send(up_s);
        CHECK(l_server.recv() == s_server.recv());
        l_server.send(Message::make_control(ControlType::RoundEnd, i));
        s_server.send(Message::make_control(ControlType::RoundEnd, i));
        (void)l_client.recv();
        (void)s_client.recv();
    }
    CHECK(l_client.bytes_sent() == s_client.bytes_sent());
    CHECK(l_client.bytes_received() == s_client.bytes_received());
    CHECK(l_server.bytes_sent() == s_server.bytes_sent());
    CHECK(l_server.bytes_received() == s_server.bytes_received());
}
