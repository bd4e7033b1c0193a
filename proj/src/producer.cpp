#include "streamcl/producer.hpp"

#include "streamcl/errors.hpp"

namespace streamcl {

Producer::Producer(SimConfig config, MessageChannel& channel)
    : config_(config), channel_(channel) {
  config_.validate();
}

void Producer::handle_control(const StreamMessage& msg) {
  switch (msg.kind) {
    case MessageKind::Hello:
      if (status_ == ProducerStatus::Handshaking) status_ = ProducerStatus::Streaming;
      break;
    case MessageKind::Pause:
      paused_ = true;
      break;
    case MessageKind::Resume:
      paused_ = false;
      break;
    default:
      throw ProtocolError("producer received unexpected " + std::string(to_string(msg.kind)));
  }
}

ProducerStatus Producer::step() {
  if (status_ == ProducerStatus::Finished || status_ == ProducerStatus::Aborted) return status_;
  try {
    if (!hello_sent_) {
      channel_.send(StreamMessage::control(MessageKind::Hello));
      hello_sent_ = true;
    }
    while (auto msg = channel_.poll()) handle_control(*msg);
    if (status_ == ProducerStatus::Handshaking) return status_;
    if (paused_) return status_ = ProducerStatus::Paused;
    if (abort_after_ && next_ == *abort_after_) {
      channel_.close();
      return status_ = ProducerStatus::Aborted;
    }
    if (next_ < config_.steps) {
      channel_.send(StreamMessage::with_frame(generate_frame(config_, next_)));
      ++next_;
      return status_ = ProducerStatus::Streaming;
    }
    channel_.send(StreamMessage::control(MessageKind::End));
    return status_ = ProducerStatus::Finished;
  } catch (const TransportError&) {
    return status_ = ProducerStatus::Aborted;
  }
}

ProducerStatus Producer::run() {
  for (;;) {
    const ProducerStatus s = step();
    if (s == ProducerStatus::Finished || s == ProducerStatus::Aborted) return s;
    if (s == ProducerStatus::Handshaking || s == ProducerStatus::Paused) {
      try {
        handle_control(channel_.receive());
      } catch (const TransportError&) {
        return status_ = ProducerStatus::Aborted;
      }
    }
  }
}

ProducerStatus run_producer(const SimConfig& config, MessageChannel& channel) {
  Producer producer(config, channel);
  return producer.run();
}

}  // namespace streamcl
