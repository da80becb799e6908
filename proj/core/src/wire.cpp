#include "sfl/wire.hpp"

#include <cstring>
#include <limits>

namespace sfl {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 24));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

struct Reader {
    const std::vector<std::uint8_t>& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw TruncatedFrame("frame truncated inside payload");
    }
    std::uint8_t u8() {
        need(1);
        return buf[pos++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[pos++]) << (8 * i);
        return v;
    }
    double f64() {
        std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    float f32() {
        std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
};

void put_tensor(std::vector<std::uint8_t>& out, const Tensor& t, WirePrecision prec) {
    out.push_back(static_cast<std::uint8_t>(prec));
    if (t.shape.size() > 255) throw WireError("tensor rank exceeds 255");
    out.push_back(static_cast<std::uint8_t>(t.shape.size()));
    for (auto d : t.shape) {
        if (d > std::numeric_limits<std::uint32_t>::max())
            throw WireError("tensor dimension exceeds 2^32-1");
        put_u32(out, static_cast<std::uint32_t>(d));
    }
    if (prec == WirePrecision::F64)
        for (double v : t.data) put_f64(out, v);
    else
        for (double v : t.data) put_f32(out, static_cast<float>(v));
}

Tensor get_tensor(Reader& r) {
    const std::uint8_t tag = r.u8();
    if (tag != 1 && tag != 2) throw WireError("unknown tensor dtype tag");
    const std::uint8_t ndim = r.u8();
    std::vector<std::size_t> shape(ndim);
    for (auto& d : shape) d = r.u32();
    Tensor t = Tensor::zeros(shape);
    if (tag == 2)
        for (auto& v : t.data) v = r.f64();
    else
        for (auto& v : t.data) v = static_cast<double>(r.f32());
    return t;
}

void put_params(std::vector<std::uint8_t>& out, const ParameterSet& p) {
    put_u32(out, static_cast<std::uint32_t>(p.entries.size()));
    for (const auto& e : p.entries) {
        put_u32(out, static_cast<std::uint32_t>(e.layer_index));
        put_tensor(out, e.weights, WirePrecision::F64);
        put_tensor(out, e.bias, WirePrecision::F64);
    }
}

ParameterSet get_params(Reader& r) {
    ParameterSet p;
    const std::uint32_t n = r.u32();
    p.entries.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        ParamEntry e;
        e.layer_index = r.u32();
        e.weights = get_tensor(r);
        e.bias = get_tensor(r);
        p.entries.push_back(std::move(e));
    }
    return p;
}

}  // namespace

Message Message::make_control(ControlType t, std::uint32_t round, std::uint32_t arg) {
    Message m;
    m.kind = MsgKind::Control;
    m.control = t;
    m.round = round;
    m.arg = arg;
    return m;
}

Message Message::model(MsgKind kind, ParameterSet p) {
    Message m;
    m.kind = kind;
    m.params = std::move(p);
    return m;
}

Message Message::smashed(std::uint32_t client, std::uint32_t epoch, std::uint32_t batch,
                         Tensor a, std::vector<std::uint32_t> y) {
    Message m;
    m.kind = MsgKind::Smashed;
    m.client_id = client;
    m.epoch = epoch;
    m.batch_index = batch;
    m.tensor = std::move(a);
    m.labels = std::move(y);
    return m;
}

Message Message::smashed_grad(std::uint32_t client, std::uint32_t epoch, std::uint32_t batch,
                              Tensor da) {
    Message m;
    m.kind = MsgKind::SmashedGrad;
    m.client_id = client;
    m.epoch = epoch;
    m.batch_index = batch;
    m.tensor = std::move(da);
    return m;
}

std::vector<std::uint8_t> encode_message(const Message& m, WirePrecision precision) {
    std::vector<std::uint8_t> payload;
    switch (m.kind) {
        case MsgKind::ModelDown:
        case MsgKind::ModelUp:
            put_params(payload, m.params);
            break;
        case MsgKind::Smashed:
            put_u32(payload, m.client_id);
            put_u32(payload, m.epoch);
            put_u32(payload, m.batch_index);
            put_tensor(payload, m.tensor, precision);
            put_u32(payload, static_cast<std::uint32_t>(m.labels.size()));
            for (auto y : m.labels) put_u32(payload, y);
            break;
        case MsgKind::SmashedGrad:
            put_u32(payload, m.client_id);
            put_u32(payload, m.epoch);
            put_u32(payload, m.batch_index);
            put_tensor(payload, m.tensor, precision);
            break;
        case MsgKind::EvalRequest:
            break;
        case MsgKind::EvalReply:
            put_f64(payload, m.value);
            break;
        case MsgKind::Control:
            payload.push_back(static_cast<std::uint8_t>(m.control));
            put_u32(payload, m.round);
            put_u32(payload, m.arg);
            break;
    }
    std::vector<std::uint8_t> frame;
    frame.reserve(kFrameHeaderBytes + payload.size());
    frame.push_back('S');
    frame.push_back('F');
    frame.push_back('L');
    frame.push_back('G');
    frame.push_back(1);  // version
    frame.push_back(static_cast<std::uint8_t>(m.kind));
    put_u64(frame, payload.size());
    frame.insert(frame.end(), payload.begin(), payload.end());
    return frame;
}

Message decode_message(const std::vector<std::uint8_t>& frame) {
    if (frame.size() < kFrameHeaderBytes) throw TruncatedFrame("frame shorter than header");
    if (frame[0] != 'S' || frame[1] != 'F' || frame[2] != 'L' || frame[3] != 'G')
        throw BadMagic("bad frame magic");
    if (frame[4] != 1) throw BadMagic("unsupported frame version");
    if (frame[5] > static_cast<std::uint8_t>(MsgKind::Control))
        throw UnknownKind("unknown message kind " + std::to_string(frame[5]));
    Reader hdr{frame, 6};
    const std::uint64_t payload_len = hdr.u64();
    if (frame.size() != kFrameHeaderBytes + payload_len)
        throw LengthMismatch("frame length " + std::to_string(frame.size()) +
                             " does not match header payload length " +
                             std::to_string(payload_len));

    Message m;
    m.kind = static_cast<MsgKind>(frame[5]);
    Reader r{frame, kFrameHeaderBytes};
    switch (m.kind) {
        case MsgKind::ModelDown:
        case MsgKind::ModelUp:
            m.params = get_params(r);
            break;
        case MsgKind::Smashed: {
            m.client_id = r.u32();
            m.epoch = r.u32();
            m.batch_index = r.u32();
            m.tensor = get_tensor(r);
            const std::uint32_t n = r.u32();
            m.labels.resize(n);
            for (auto& y : m.labels) y = r.u32();
            break;
        }
        case MsgKind::SmashedGrad:
            m.client_id = r.u32();
            m.epoch = r.u32();
            m.batch_index = r.u32();
            m.tensor = get_tensor(r);
            break;
        case MsgKind::EvalRequest:
            break;
        case MsgKind::EvalReply:
            m.value = r.f64();
            break;
        case MsgKind::Control:
            m.control = static_cast<ControlType>(r.u8());
            m.round = r.u32();
            m.arg = r.u32();
            break;
    }
    if (r.pos != frame.size())
        throw LengthMismatch("payload has " + std::to_string(frame.size() - r.pos) +
                             " trailing bytes");
    return m;
}

}  // namespace sfl
