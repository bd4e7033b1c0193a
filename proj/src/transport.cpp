#include "streamcl/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <string>

#include "streamcl/errors.hpp"

namespace streamcl {

namespace {

// One direction of an in-process pipe.
struct Lane {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::uint8_t> bytes;
  bool closed = false;
};

class InprocStream final : public ByteStream {
 public:
  InprocStream(std::shared_ptr<Lane> in, std::shared_ptr<Lane> out)
      : in_(std::move(in)), out_(std::move(out)) {}
  ~InprocStream() override { close(); }

  void write(std::span<const std::uint8_t> bytes) override {
    {
      std::lock_guard lock(out_->mu);
      if (out_->closed) throw TransportError("write on closed in-process stream");
      out_->bytes.insert(out_->bytes.end(), bytes.begin(), bytes.end());
    }
    out_->cv.notify_all();
  }

  std::size_t read(std::span<std::uint8_t> out, bool block) override {
    std::unique_lock lock(in_->mu);
    if (block) in_->cv.wait(lock, [&] { return !in_->bytes.empty() || in_->closed; });
    if (in_->bytes.empty()) {
      if (in_->closed) throw TransportError("in-process stream closed by peer");
      return 0;
    }
    const std::size_t n = std::min(out.size(), in_->bytes.size());
    std::copy_n(in_->bytes.begin(), n, out.begin());
    in_->bytes.erase(in_->bytes.begin(), in_->bytes.begin() + static_cast<std::ptrdiff_t>(n));
    return n;
  }

  void close() override {
    for (const auto& lane : {in_, out_}) {
      {
        std::lock_guard lock(lane->mu);
        lane->closed = true;
      }
      lane->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<Lane> in_;
  std::shared_ptr<Lane> out_;
};

class TcpStream final : public ByteStream {
 public:
  explicit TcpStream(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
  ~TcpStream() override { close(); }

  void write(std::span<const std::uint8_t> bytes) override {
    if (fd_ < 0) throw TransportError("write on closed socket");
    std::size_t done = 0;
    while (done < bytes.size()) {
      const ssize_t n = ::send(fd_, bytes.data() + done, bytes.size() - done, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("socket send failed: ") + std::strerror(errno));
      }
      done += static_cast<std::size_t>(n);
    }
  }

  std::size_t read(std::span<std::uint8_t> out, bool block) override {
    if (fd_ < 0) throw TransportError("read on closed socket");
    for (;;) {
      pollfd pfd{fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, block ? -1 : 0);
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("poll failed: ") + std::strerror(errno));
      }
      if (ready == 0) return 0;
      const ssize_t n = ::recv(fd_, out.data(), out.size(), 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("socket recv failed: ") + std::strerror(errno));
      }
      if (n == 0) throw TransportError("socket closed by peer");
      return static_cast<std::size_t>(n);
    }
  }

  void close() override {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_;
};

[[noreturn]] void throw_errno(const char* what) {
  throw TransportError(std::string(what) + ": " + std::strerror(errno));
}

}  // namespace

StreamPair make_inproc_pair() {
  auto a_to_b = std::make_shared<Lane>();
  auto b_to_a = std::make_shared<Lane>();
  return {std::make_unique<InprocStream>(b_to_a, a_to_b), std::make_unique<InprocStream>(a_to_b, b_to_a)};
}

TcpListener::TcpListener() {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw_errno("socket");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) throw_errno("bind");
  if (::listen(fd_, 1) < 0) throw_errno("listen");
  socklen_t len = sizeof(addr);
  if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) < 0) throw_errno("getsockname");
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<ByteStream> TcpListener::accept() {
  for (;;) {
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd >= 0) return std::make_unique<TcpStream>(fd);
    if (errno != EINTR) throw_errno("accept");
  }
}

std::unique_ptr<ByteStream> tcp_connect(std::uint16_t port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw_errno("socket");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    ::close(fd);
    throw_errno("connect");
  }
  return std::make_unique<TcpStream>(fd);
}

StreamPair make_tcp_pair() {
  TcpListener listener;
  auto client = tcp_connect(listener.port());
  auto server = listener.accept();
  return {std::move(client), std::move(server)};
}

MessageChannel::MessageChannel(std::unique_ptr<ByteStream> stream) : stream_(std::move(stream)) {}

void MessageChannel::send(const StreamMessage& msg) {
  const auto bytes = encode_message(msg);
  stream_->write(bytes);
  if (msg.kind == MessageKind::Frame) ++frames_sent_;
}

std::optional<StreamMessage> MessageChannel::take_buffered() {
  auto decoded = try_decode(buffer_);
  if (!decoded) return std::nullopt;
  buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(decoded->consumed));
  if (decoded->message.kind == MessageKind::Frame) ++frames_received_;
  return std::move(decoded->message);
}

bool MessageChannel::fill(bool block) {
  std::uint8_t chunk[64 * 1024];
  const std::size_t n = stream_->read(chunk, block);
  buffer_.insert(buffer_.end(), chunk, chunk + n);
  return n > 0;
}

std::optional<StreamMessage> MessageChannel::poll() {
  if (auto msg = take_buffered()) return msg;
  while (fill(false)) {
    if (auto msg = take_buffered()) return msg;
  }
  return std::nullopt;
}

StreamMessage MessageChannel::receive() {
  for (;;) {
    if (auto msg = take_buffered()) return std::move(*msg);
    fill(true);
  }
}

void MessageChannel::close() { stream_->close(); }

}  // namespace streamcl
