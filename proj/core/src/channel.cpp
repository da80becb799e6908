#include "sfl/channel.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>

namespace sfl {

namespace {

struct FrameQueue {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::vector<std::uint8_t>> frames;
    bool closed = false;

    void push(const std::vector<std::uint8_t>& frame) {
        {
            std::lock_guard lock(mu);
            frames.push_back(frame);
        }
        cv.notify_one();
    }

    std::vector<std::uint8_t> pop() {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return !frames.empty() || closed; });
        if (frames.empty()) throw std::runtime_error("loopback: peer closed");
        auto f = std::move(frames.front());
        frames.pop_front();
        return f;
    }

    void close() {
        {
            std::lock_guard lock(mu);
            closed = true;
        }
        cv.notify_all();
    }
};

class LoopbackChannel : public ByteChannel {
public:
    LoopbackChannel(std::shared_ptr<FrameQueue> out, std::shared_ptr<FrameQueue> in)
        : out_(std::move(out)), in_(std::move(in)) {}
    ~LoopbackChannel() override { out_->close(); }

    void send(const std::vector<std::uint8_t>& frame) override { out_->push(frame); }
    std::vector<std::uint8_t> recv() override { return in_->pop(); }

private:
    std::shared_ptr<FrameQueue> out_;
    std::shared_ptr<FrameQueue> in_;
};

[[noreturn]] void throw_errno(const std::string& what) {
    throw std::runtime_error(what + ": " + std::strerror(errno));
}

void write_all(int fd, const std::uint8_t* data, std::size_t n) {
    while (n > 0) {
        const ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
        if (w < 0) {
            if (errno == EINTR) continue;
            throw_errno("socket send");
        }
        data += w;
        n -= static_cast<std::size_t>(w);
    }
}

void read_all(int fd, std::uint8_t* data, std::size_t n) {
    while (n > 0) {
        const ssize_t r = ::recv(fd, data, n, 0);
        if (r < 0) {
            if (errno == EINTR) continue;
            throw_errno("socket recv");
        }
        if (r == 0) throw std::runtime_error("socket recv: peer closed");
        data += r;
        n -= static_cast<std::size_t>(r);
    }
}

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (host.empty() || host == "0.0.0.0") {
        addr.sin_addr.s_addr = INADDR_ANY;
        return addr;
    }
    if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;
    hostent* he = gethostbyname(host.c_str());
    if (!he || he->h_addrtype != AF_INET)
        throw std::runtime_error("cannot resolve host '" + host + "'");
    std::memcpy(&addr.sin_addr, he->h_addr_list[0], sizeof(addr.sin_addr));
    return addr;
}

}  // namespace

std::pair<std::shared_ptr<ByteChannel>, std::shared_ptr<ByteChannel>> make_loopback_pair() {
    auto a2b = std::make_shared<FrameQueue>();
    auto b2a = std::make_shared<FrameQueue>();
    return {std::make_shared<LoopbackChannel>(a2b, b2a),
            std::make_shared<LoopbackChannel>(b2a, a2b)};
}

SocketChannel::SocketChannel(int fd) : fd_(fd) {
    int one = 1;
    setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

SocketChannel::~SocketChannel() {
    if (fd_ >= 0) ::close(fd_);
}

void SocketChannel::send(const std::vector<std::uint8_t>& frame) {
    write_all(fd_, frame.data(), frame.size());
}

std::vector<std::uint8_t> SocketChannel::recv() {
    std::vector<std::uint8_t> frame(kFrameHeaderBytes);
    read_all(fd_, frame.data(), kFrameHeaderBytes);
    std::uint64_t payload_len = 0;
    for (int i = 0; i < 8; ++i)
        payload_len |= static_cast<std::uint64_t>(frame[6 + i]) << (8 * i);
    frame.resize(kFrameHeaderBytes + payload_len);
    read_all(fd_, frame.data() + kFrameHeaderBytes, payload_len);
    return frame;
}

SocketListener::SocketListener(const std::string& host, std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw_errno("socket");
    int one = 1;
    setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr = resolve(host, port);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) throw_errno("bind");
    if (::listen(fd_, 64) < 0) throw_errno("listen");
    socklen_t len = sizeof addr;
    if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) < 0)
        throw_errno("getsockname");
    port_ = ntohs(addr.sin_port);
}

SocketListener::~SocketListener() {
    if (fd_ >= 0) ::close(fd_);
}

std::shared_ptr<ByteChannel> SocketListener::accept_channel() {
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd < 0) throw_errno("accept");
    return std::make_shared<SocketChannel>(fd);
}

std::shared_ptr<ByteChannel> connect_channel(const std::string& host, std::uint16_t port) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw_errno("socket");
    sockaddr_in addr = resolve(host.empty() ? "127.0.0.1" : host, port);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
        ::close(fd);
        throw_errno("connect");
    }
    return std::make_shared<SocketChannel>(fd);
}

}  // namespace sfl
