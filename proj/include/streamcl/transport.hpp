#pragma once

// Reliable ordered byte streams (in-process pipe or TCP loopback) and a
// message channel that frames StreamMessages over them.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "streamcl/stream_proto.hpp"

namespace streamcl {

class ByteStream {
 public:
  virtual ~ByteStream() = default;

  /// Writes all bytes. Throws TransportError if the stream is closed.
  virtual void write(std::span<const std::uint8_t> bytes) = 0;
  /// Reads up to out.size() bytes. Non-blocking reads return 0 when nothing
  /// is buffered. Throws TransportError once the peer has closed and no
  /// buffered bytes remain.
  virtual std::size_t read(std::span<std::uint8_t> out, bool block) = 0;
  virtual void close() = 0;
};

using StreamPair = std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>>;

/// Two connected endpoints backed by in-memory queues.
StreamPair make_inproc_pair();

/// Listens on 127.0.0.1 with an ephemeral port.
class TcpListener {
 public:
  TcpListener();
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  [[nodiscard]] std::uint16_t port() const { return port_; }
  std::unique_ptr<ByteStream> accept();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

std::unique_ptr<ByteStream> tcp_connect(std::uint16_t port);

/// Connected TCP loopback pair (listens, connects, accepts).
StreamPair make_tcp_pair();

class MessageChannel {
 public:
  explicit MessageChannel(std::unique_ptr<ByteStream> stream);

  void send(const StreamMessage& msg);
  /// Next message if one is fully available, without blocking.
  std::optional<StreamMessage> poll();
  /// Blocks until a full message arrives.
  StreamMessage receive();
  void close();

  [[nodiscard]] std::uint64_t frames_sent() const { return frames_sent_; }
  [[nodiscard]] std::uint64_t frames_received() const { return frames_received_; }

 private:
  std::optional<StreamMessage> take_buffered();
  bool fill(bool block);

  std::unique_ptr<ByteStream> stream_;
  std::vector<std::uint8_t> buffer_;
  std::uint64_t frames_sent_ = 0;
  std::uint64_t frames_received_ = 0;
};

}  // namespace streamcl
