#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "sfl/wire.hpp"

namespace sfl {

/// Reliable, ordered, frame-oriented byte transport between two peers.
class ByteChannel {
public:
    virtual ~ByteChannel() = default;
    virtual void send(const std::vector<std::uint8_t>& frame) = 0;
    virtual std::vector<std::uint8_t> recv() = 0;
};

/// In-process channel pair backed by two FIFO queues.
std::pair<std::shared_ptr<ByteChannel>, std::shared_ptr<ByteChannel>> make_loopback_pair();

/// Blocking TCP stream channel. recv() reassembles one frame per call.
class SocketChannel : public ByteChannel {
public:
    explicit SocketChannel(int fd);
    ~SocketChannel() override;
    SocketChannel(const SocketChannel&) = delete;
    SocketChannel& operator=(const SocketChannel&) = delete;

    void send(const std::vector<std::uint8_t>& frame) override;
    std::vector<std::uint8_t> recv() override;

private:
    int fd_;
};

class SocketListener {
public:
    SocketListener(const std::string& host, std::uint16_t port);
    ~SocketListener();
    std::shared_ptr<ByteChannel> accept_channel();
    std::uint16_t port() const { return port_; }

private:
    int fd_;
    std::uint16_t port_;
};

std::shared_ptr<ByteChannel> connect_channel(const std::string& host, std::uint16_t port);

/// Message endpoint over a ByteChannel with monotone byte counters.
/// send/recv are single-owner; counters may be read from any thread.
class Endpoint {
public:
    Endpoint(std::shared_ptr<ByteChannel> channel, WirePrecision precision = WirePrecision::F64)
        : channel_(std::move(channel)), precision_(precision) {}

    void send(const Message& m) {
        auto frame = encode_message(m, precision_);
        channel_->send(frame);
        bytes_sent_.fetch_add(frame.size(), std::memory_order_relaxed);
    }

    Message recv() {
        auto frame = channel_->recv();
        bytes_received_.fetch_add(frame.size(), std::memory_order_relaxed);
        return decode_message(frame);
    }

    std::uint64_t bytes_sent() const { return bytes_sent_.load(std::memory_order_relaxed); }
    std::uint64_t bytes_received() const {
        return bytes_received_.load(std::memory_order_relaxed);
    }
    WirePrecision precision() const { return precision_; }

private:
    std::shared_ptr<ByteChannel> channel_;
    WirePrecision precision_;
    std::atomic<std::uint64_t> bytes_sent_{0};
    std::atomic<std::uint64_t> bytes_received_{0};
};

}  // namespace sfl
