#include "streamcl/scheduling_unit.hpp"

#include <string>

#include "streamcl/errors.hpp"

namespace streamcl {

SchedulingUnit::SchedulingUnit(MessageChannel& channel, std::size_t capacity)
    : channel_(channel), scheduler_(capacity) {}

PumpEvent SchedulingUnit::pump(bool block) {
  if (ended_) return PumpEvent::EndOfStream;
  if (scheduler_.full()) return PumpEvent::CacheFull;

  std::optional<StreamMessage> msg;
  if (block) {
    msg = channel_.receive();
  } else {
    msg = channel_.poll();
  }
  if (!msg) return PumpEvent::Idle;

  switch (msg->kind) {
    case MessageKind::Hello:
      send_control(MessageKind::Hello);
      return PumpEvent::Handshake;
    case MessageKind::Frame: {
      const std::uint32_t step = msg->frame.step_index;
      if (last_step_ && step <= *last_step_) {
        throw ProtocolError("non-increasing step index " + std::to_string(step));
      }
      last_step_ = step;
      if (scheduler_.push(std::move(msg->frame))) {
        if (send_control(MessageKind::Pause)) ++pauses_sent_;
        return PumpEvent::CacheFull;
      }
      return PumpEvent::FrameCached;
    }
    case MessageKind::End:
      ended_ = true;
      return PumpEvent::EndOfStream;
    default:
      throw ProtocolError("trainer received unexpected " + std::string(to_string(msg->kind)));
  }
}

bool SchedulingUnit::send_control(MessageKind kind) {
  if (peer_closed_) return false;
  try {
    channel_.send(StreamMessage::control(kind));
    return true;
  } catch (const TransportError&) {
    // Frames the producer sent before leaving may still be buffered; the
    // next read reports the closure once they are consumed.
    peer_closed_ = true;
    return false;
  }
}

DrainResult SchedulingUnit::drain() {
  DrainResult result = scheduler_.drain();
  if (result.control && !ended_) {
    if (send_control(*result.control)) ++resumes_sent_;
  }
  return result;
}

}  // namespace streamcl
