#include "streamcl/stream_proto.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "streamcl/errors.hpp"

namespace streamcl {

namespace {

constexpr std::uint8_t kMagic[4] = {'S', 'C', 'L', '1'};
constexpr std::uint8_t kMaxKind = static_cast<std::uint8_t>(MessageKind::End);

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::string_view to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::Hello: return "HELLO";
    case MessageKind::Frame: return "FRAME";
    case MessageKind::Pause: return "PAUSE";
    case MessageKind::Resume: return "RESUME";
    case MessageKind::End: return "END";
  }
  return "?";
}

bool StreamMessage::identical(const StreamMessage& other) const {
  if (kind != other.kind) return false;
  return kind != MessageKind::Frame || frame.identical(other.frame);
}

std::vector<std::uint8_t> encode_message(const StreamMessage& msg) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.push_back(static_cast<std::uint8_t>(msg.kind));
  if (msg.kind != MessageKind::Frame) {
    put_u32(out, 0);
    return out;
  }
  const FieldFrame& f = msg.frame;
  if (f.dims.count() == 0) throw ProtocolError("frame with zero-sized dims");
  if (f.values.size() != f.dims.count()) throw ProtocolError("frame value count does not match dims");
  const std::uint64_t payload = kFrameMetaSize + 4ULL * f.values.size();
  if (payload > UINT32_MAX) throw ProtocolError("frame too large for wire format");
  out.reserve(kHeaderSize + payload);
  put_u32(out, static_cast<std::uint32_t>(payload));
  put_u32(out, f.step_index);
  put_u32(out, f.dims.x);
  put_u32(out, f.dims.y);
  put_u32(out, f.dims.z);
  for (float v : f.values) {
    if (!std::isfinite(v)) throw ProtocolError("non-finite value in frame");
    put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

std::optional<Decoded> try_decode(std::span<const std::uint8_t> buf) {
  if (buf.empty()) return std::nullopt;
  const std::size_t magic_avail = std::min<std::size_t>(buf.size(), 4);
  if (std::memcmp(buf.data(), kMagic, magic_avail) != 0) throw ProtocolError("bad magic");
  if (buf.size() < 5) return std::nullopt;
  const std::uint8_t kind_byte = buf[4];
  if (kind_byte > kMaxKind) throw ProtocolError("unknown message kind " + std::to_string(kind_byte));
  if (buf.size() < kHeaderSize) return std::nullopt;
  const auto kind = static_cast<MessageKind>(kind_byte);
  const std::uint32_t payload_len = get_u32(buf.data() + 5);

  if (kind != MessageKind::Frame) {
    if (payload_len != 0) throw ProtocolError("control message with non-empty payload");
    return Decoded{StreamMessage::control(kind), kHeaderSize};
  }
  if (payload_len < kFrameMetaSize) throw ProtocolError("frame payload shorter than its header");
  if (buf.size() < kHeaderSize + kFrameMetaSize) return std::nullopt;

  const std::uint8_t* meta = buf.data() + kHeaderSize;
  FieldFrame frame;
  frame.step_index = get_u32(meta);
  frame.dims = {get_u32(meta + 4), get_u32(meta + 8), get_u32(meta + 12)};
  const std::uint64_t count = static_cast<std::uint64_t>(frame.dims.x) * frame.dims.y * frame.dims.z;
  if (count == 0) throw ProtocolError("frame with zero-sized dims");
  if (kFrameMetaSize + 4 * count != payload_len) {
    throw ProtocolError("payload length does not match frame dims");
  }
  const std::size_t total = kHeaderSize + payload_len;
  if (buf.size() < total) return std::nullopt;

  frame.values.resize(count);
  const std::uint8_t* p = meta + kFrameMetaSize;
  for (std::size_t i = 0; i < count; ++i, p += 4) {
    const float v = std::bit_cast<float>(get_u32(p));
    if (!std::isfinite(v)) throw ProtocolError("non-finite value in frame");
    frame.values[i] = v;
  }
  return Decoded{StreamMessage::with_frame(std::move(frame)), total};
}

StreamMessage decode_message(std::span<const std::uint8_t> buf) {
  auto decoded = try_decode(buf);
  if (!decoded) throw IncompleteMessage("incomplete message");
  if (decoded->consumed != buf.size()) throw ProtocolError("trailing bytes after message");
  return std::move(decoded->message);
}

Scheduler::Scheduler(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("cache capacity must be positive");
}

std::optional<MessageKind> Scheduler::push(FieldFrame frame) {
  if (full()) throw SchedulerError("scheduler overflow: push into a full cache");
  cache_.push_back(std::move(frame));
  ++frames_seen_;
  if (full()) {
    paused_ = true;
    return MessageKind::Pause;
  }
  return std::nullopt;
}

DrainResult Scheduler::drain() {
  if (cache_.empty()) throw SchedulerError("drain on empty cache");
  DrainResult result;
  result.frames.reserve(cache_.size());
  for (auto& f : cache_) result.frames.push_back(std::move(f));
  cache_.clear();
  if (paused_) {
    paused_ = false;
    result.control = MessageKind::Resume;
  }
  return result;
}

}  // namespace streamcl
