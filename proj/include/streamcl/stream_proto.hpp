#pragma once

// Framed wire protocol between the field producer and the trainer, and the
// bounded frame cache that pauses and resumes the producer.
//
// Layout of every message:
//   "SCL1" | kind (u8) | payload_len (u32 LE) | payload
// FRAME payload:
//   step_index, dx, dy, dz (u32 LE each) | dx*dy*dz float32 LE, z-fastest

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "streamcl/field_sim.hpp"

namespace streamcl {

enum class MessageKind : std::uint8_t { Hello = 0, Frame = 1, Pause = 2, Resume = 3, End = 4 };

std::string_view to_string(MessageKind kind);

struct StreamMessage {
  MessageKind kind = MessageKind::Hello;
  FieldFrame frame;  // meaningful only for MessageKind::Frame

  static StreamMessage control(MessageKind kind) { return {kind, {}}; }
  static StreamMessage with_frame(FieldFrame frame) {
    return {MessageKind::Frame, std::move(frame)};
  }
  /// Bit-exact comparison (frame payload compared only for FRAME).
  [[nodiscard]] bool identical(const StreamMessage& other) const;
};

inline constexpr std::size_t kHeaderSize = 9;
inline constexpr std::size_t kFrameMetaSize = 16;

/// Throws ProtocolError for a frame with non-finite values or zero dims.
std::vector<std::uint8_t> encode_message(const StreamMessage& msg);

struct Decoded {
  StreamMessage message;
  std::size_t consumed = 0;
};

/// Decodes the message at the front of `buf`. Returns nullopt when `buf`
/// holds only a valid prefix. Throws ProtocolError on malformed bytes.
std::optional<Decoded> try_decode(std::span<const std::uint8_t> buf);

/// Decodes exactly one message occupying all of `buf`. Throws
/// IncompleteMessage for a truncated buffer and ProtocolError otherwise.
StreamMessage decode_message(std::span<const std::uint8_t> buf);

struct DrainResult {
  std::vector<FieldFrame> frames;
  std::optional<MessageKind> control;  // RESUME if the producer had been paused
};

/// Bounded FIFO frame cache. PAUSE is emitted when the cache becomes full,
/// RESUME when a drain empties a cache that had paused the producer.
class Scheduler {
 public:
  explicit Scheduler(std::size_t capacity);

  /// Throws SchedulerError when the cache is already full.
  std::optional<MessageKind> push(FieldFrame frame);
  /// Throws SchedulerError when the cache is empty.
  DrainResult drain();

  [[nodiscard]] std::size_t capacity() const { return capacity_; }
  [[nodiscard]] std::size_t size() const { return cache_.size(); }
  [[nodiscard]] bool empty() const { return cache_.empty(); }
  [[nodiscard]] bool full() const { return cache_.size() == capacity_; }
  [[nodiscard]] bool producer_paused() const { return paused_; }
  [[nodiscard]] std::uint64_t frames_seen() const { return frames_seen_; }

 private:
  std::size_t capacity_;
  std::deque<FieldFrame> cache_;
  bool paused_ = false;
  std::uint64_t frames_seen_ = 0;
};

}  // namespace streamcl
