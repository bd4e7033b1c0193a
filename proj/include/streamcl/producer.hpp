#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "streamcl/field_sim.hpp"
#include "streamcl/transport.hpp"

namespace streamcl {

enum class ProducerStatus { Handshaking, Streaming, Paused, Finished, Aborted };

/// Streams generate_frame(config, t) for t = 0..steps-1, honoring PAUSE/RESUME.
///
/// step() does one non-blocking unit of work so that a single thread can
/// interleave producer and trainer deterministically; run() loops until the
/// stream ends, blocking while paused.
class Producer {
 public:
  Producer(SimConfig config, MessageChannel& channel);

  ProducerStatus step();
  ProducerStatus run();

  /// Test hook: close the connection after `frames` frames have been sent.
  void abort_after(std::size_t frames) { abort_after_ = frames; }

  [[nodiscard]] ProducerStatus status() const { return status_; }
  [[nodiscard]] std::size_t next_step() const { return next_; }

 private:
  void handle_control(const StreamMessage& msg);

  SimConfig config_;
  MessageChannel& channel_;
  ProducerStatus status_ = ProducerStatus::Handshaking;
  bool hello_sent_ = false;
  bool paused_ = false;
  std::size_t next_ = 0;
  std::optional<std::size_t> abort_after_;
};

/// Runs a producer to completion; returns Finished or Aborted.
ProducerStatus run_producer(const SimConfig& config, MessageChannel& channel);

}  // namespace streamcl
