#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "streamcl/stream_proto.hpp"
#include "streamcl/transport.hpp"

namespace streamcl {

enum class PumpEvent { Idle, Handshake, FrameCached, CacheFull, EndOfStream };

/// Trainer-side end of the stream: answers the handshake, caches incoming
/// frames in a Scheduler and forwards its PAUSE/RESUME controls to the
/// producer. It stops reading while the cache is full, so frames the producer
/// sent before seeing PAUSE wait in the transport, never in the cache.
class SchedulingUnit {
 public:
  SchedulingUnit(MessageChannel& channel, std::size_t capacity);

  /// Reads at most one message. Returns CacheFull without reading while the
  /// cache is full, and EndOfStream once END has been received.
  PumpEvent pump(bool block);
  /// Drains the cache; sends RESUME to a paused producer unless the stream ended.
  DrainResult drain();

  [[nodiscard]] const Scheduler& scheduler() const { return scheduler_; }
  [[nodiscard]] bool ended() const { return ended_; }
  [[nodiscard]] std::uint64_t pauses_sent() const { return pauses_sent_; }
  [[nodiscard]] std::uint64_t resumes_sent() const { return resumes_sent_; }
  /// A control message could not be delivered because the producer left.
  [[nodiscard]] bool peer_closed() const { return peer_closed_; }

 private:
  bool send_control(MessageKind kind);

  MessageChannel& channel_;
  Scheduler scheduler_;
  bool ended_ = false;
  bool peer_closed_ = false;
  std::optional<std::uint32_t> last_step_;
  std::uint64_t pauses_sent_ = 0;
  std::uint64_t resumes_sent_ = 0;
};

}  // namespace streamcl
