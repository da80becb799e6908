#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sfl/kernel.hpp"
#include "sfl/tensor.hpp"

namespace sfl {

enum class MsgKind : std::uint8_t {
    ModelDown = 0,
    ModelUp = 1,
    Smashed = 2,
    SmashedGrad = 3,
    EvalRequest = 4,
    EvalReply = 5,
    Control = 6,
};

enum class ControlType : std::uint8_t {
    RoundBegin = 0,
    RoundEnd = 1,
    Terminate = 2,
    Hello = 3,
};

enum class WirePrecision : std::uint8_t { F32 = 1, F64 = 2 };

struct Message {
    MsgKind kind = MsgKind::Control;
    // ModelDown / ModelUp
    ParameterSet params;
    // Smashed / SmashedGrad
    std::uint32_t client_id = 0;
    std::uint32_t epoch = 0;
    std::uint32_t batch_index = 0;
    Tensor tensor;                       // A or dA
    std::vector<std::uint32_t> labels;   // Smashed only
    // Control
    ControlType control = ControlType::RoundBegin;
    std::uint32_t round = 0;
    std::uint32_t arg = 0;
    // EvalReply
    double value = 0.0;

    bool operator==(const Message&) const = default;

    static Message make_control(ControlType t, std::uint32_t round = 0, std::uint32_t arg = 0);
    static Message model(MsgKind kind, ParameterSet p);
    static Message smashed(std::uint32_t client, std::uint32_t epoch, std::uint32_t batch,
                           Tensor a, std::vector<std::uint32_t> y);
    static Message smashed_grad(std::uint32_t client, std::uint32_t epoch, std::uint32_t batch,
                                Tensor da);
};

struct WireError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TruncatedFrame : WireError {
    using WireError::WireError;
};
struct BadMagic : WireError {
    using WireError::WireError;
};
struct UnknownKind : WireError {
    using WireError::WireError;
};
struct LengthMismatch : WireError {
    using WireError::WireError;
};

constexpr std::size_t kFrameHeaderBytes = 14;  // magic(4) version(1) kind(1) length(8)

/// Frame: "SFLG" | version=1 | kind | payload length (u64 LE) | payload.
/// Smashed-data tensors use `precision`; model parameters always travel as f64.
std::vector<std::uint8_t> encode_message(const Message& m,
                                         WirePrecision precision = WirePrecision::F64);
Message decode_message(const std::vector<std::uint8_t>& frame);

}  // namespace sfl
