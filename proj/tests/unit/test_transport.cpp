#include <gtest/gtest.h>

#include <numeric>
#include <thread>

#include "protocol_sim.hpp"
#include "streamcl/errors.hpp"
#include "streamcl/producer.hpp"
#include "streamcl/scheduling_unit.hpp"
#include "streamcl/transport.hpp"

using namespace streamcl;

namespace {

SimConfig tiny_sim(std::size_t steps) {
  SimConfig c;
  c.grid_size = 4;
  c.steps = steps;
  return c;
}

std::vector<StreamMessage> drain_channel(MessageChannel& ch) {
  std::vector<StreamMessage> out;
  while (auto m = ch.poll()) out.push_back(std::move(*m));
  return out;
}

}  // namespace

TEST(Transport, InprocBytesInOrder) {
  auto [a, b] = make_inproc_pair();
  const std::vector<std::uint8_t> msg{1, 2, 3, 4, 5};
  a->write(msg);
  std::uint8_t buf[3];
  EXPECT_EQ(b->read(buf, false), 3u);
  EXPECT_EQ(buf[0], 1);
  EXPECT_EQ(b->read(buf, false), 2u);
  EXPECT_EQ(buf[1], 5);
  EXPECT_EQ(b->read(buf, false), 0u);
}

TEST(Transport, InprocCloseSignalsPeer) {
  auto [a, b] = make_inproc_pair();
  a->write(std::vector<std::uint8_t>{9});
  a->close();
  std::uint8_t buf[4];
  EXPECT_EQ(b->read(buf, true), 1u);  // buffered bytes survive the close
  EXPECT_THROW(b->read(buf, true), TransportError);
  EXPECT_THROW(b->write(std::vector<std::uint8_t>{1}), TransportError);
}

TEST(Transport, TcpLoopbackCarriesMessages) {
  auto [client, server] = make_tcp_pair();
  MessageChannel tx(std::move(client));
  MessageChannel rx(std::move(server));
  const FieldFrame f = generate_frame(tiny_sim(2), 1);
  tx.send(StreamMessage::with_frame(f));
  tx.send(StreamMessage::control(MessageKind::End));
  EXPECT_TRUE(rx.receive().frame.identical(f));
  EXPECT_EQ(rx.receive().kind, MessageKind::End);
  tx.close();
  EXPECT_THROW(rx.receive(), TransportError);
}

// Delivers an encoded stream one byte at a time; the channel must reassemble.
TEST(Transport, ChannelReassemblesFragments) {
  auto [a, b] = make_inproc_pair();
  MessageChannel rx(std::move(b));
  const FieldFrame f = generate_frame(tiny_sim(1), 0);
  auto bytes = encode_message(StreamMessage::with_frame(f));
  const auto end = encode_message(StreamMessage::control(MessageKind::End));
  bytes.insert(bytes.end(), end.begin(), end.end());
  std::size_t got = 0;
  for (std::uint8_t byte : bytes) {
    a->write(std::span(&byte, 1));
    while (auto m = rx.poll()) {
      if (got == 0) EXPECT_TRUE(m->frame.identical(f));
      if (got == 1) EXPECT_EQ(m->kind, MessageKind::End);
      ++got;
    }
  }
  EXPECT_EQ(got, 2u);
}

TEST(Producer, ThreeFramesThenEnd) {
  auto [a, b] = make_inproc_pair();
  MessageChannel prod_ch(std::move(a));
  MessageChannel peer(std::move(b));
  peer.send(StreamMessage::control(MessageKind::Hello));
  EXPECT_EQ(run_producer(tiny_sim(3), prod_ch), ProducerStatus::Finished);
  const auto msgs = drain_channel(peer);
  ASSERT_EQ(msgs.size(), 5u);
  EXPECT_EQ(msgs[0].kind, MessageKind::Hello);
  for (std::uint32_t i = 0; i < 3; ++i) {
    EXPECT_EQ(msgs[i + 1].kind, MessageKind::Frame);
    EXPECT_EQ(msgs[i + 1].frame.step_index, i);
  }
  EXPECT_EQ(msgs[4].kind, MessageKind::End);
}

TEST(Producer, PauseHoldsFramesUntilResume) {
  auto [a, b] = make_inproc_pair();
  MessageChannel prod_ch(std::move(a));
  MessageChannel peer(std::move(b));
  Producer producer(tiny_sim(4), prod_ch);

  EXPECT_EQ(producer.step(), ProducerStatus::Handshaking);
  peer.send(StreamMessage::control(MessageKind::Hello));
  EXPECT_EQ(producer.step(), ProducerStatus::Streaming);  // sends frame 0
  auto msgs = drain_channel(peer);
  ASSERT_EQ(msgs.size(), 2u);
  EXPECT_EQ(msgs[1].frame.step_index, 0u);

  peer.send(StreamMessage::control(MessageKind::Pause));
  for (int i = 0; i < 10; ++i) EXPECT_EQ(producer.step(), ProducerStatus::Paused);
  EXPECT_TRUE(drain_channel(peer).empty());

  peer.send(StreamMessage::control(MessageKind::Resume));
  while (producer.step() != ProducerStatus::Finished) {
  }
  msgs = drain_channel(peer);
  ASSERT_EQ(msgs.size(), 4u);
  for (std::uint32_t i = 0; i < 3; ++i) EXPECT_EQ(msgs[i].frame.step_index, i + 1);
  EXPECT_EQ(msgs[3].kind, MessageKind::End);
}

TEST(Producer, ClosedTransportAborts) {
  auto [a, b] = make_inproc_pair();
  MessageChannel prod_ch(std::move(a));
  MessageChannel peer(std::move(b));
  peer.send(StreamMessage::control(MessageKind::Hello));
  peer.send(StreamMessage::control(MessageKind::Pause));
  std::thread closer([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    peer.close();
  });
  EXPECT_EQ(run_producer(tiny_sim(5), prod_ch), ProducerStatus::Aborted);
  closer.join();
}

TEST(Protocol, RandomInterleavingsDeliverExactlyOnceInOrder) {
  const SimConfig sim = tiny_sim(10);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const std::size_t cap = 1 + seed % 5;
    const auto trace = testkit::simulate_protocol(sim, cap, seed, 0.1 + 0.8 * double(seed % 7) / 6.0);
    ASSERT_TRUE(trace.ended) << seed;
    EXPECT_TRUE(trace.producer_finished);
    std::vector<std::uint32_t> expected(10);
    std::iota(expected.begin(), expected.end(), 0u);
    ASSERT_EQ(trace.drained_steps, expected) << "seed " << seed;
    EXPECT_LE(trace.max_cache, cap);
    EXPECT_EQ(trace.pause_at_full, trace.pauses);
    EXPECT_EQ(trace.full_without_pause, 0u);
  }
}

TEST(SchedulingUnit, ThreadedTcpEndToEnd) {
  auto [client, server] = make_tcp_pair();
  MessageChannel prod_ch(std::move(client));
  MessageChannel trainer_ch(std::move(server));
  const SimConfig sim = tiny_sim(10);
  ProducerStatus status{};
  std::thread producer([&] { status = run_producer(sim, prod_ch); });

  SchedulingUnit unit(trainer_ch, 3);
  std::vector<std::uint32_t> steps;
  for (;;) {
    const PumpEvent ev = unit.pump(true);
    if (ev == PumpEvent::CacheFull || (ev == PumpEvent::EndOfStream && !unit.scheduler().empty())) {
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
      for (const auto& f : unit.drain().frames) steps.push_back(f.step_index);
    }
    if (ev == PumpEvent::EndOfStream) break;
  }
  producer.join();
  EXPECT_EQ(status, ProducerStatus::Finished);
  std::vector<std::uint32_t> expected(10);
  std::iota(expected.begin(), expected.end(), 0u);
  EXPECT_EQ(steps, expected);
  EXPECT_EQ(unit.pauses_sent(), 3u);  // after frames 2, 5, 8
}

TEST(SchedulingUnit, RejectsOutOfOrderFrames) {
  auto [a, b] = make_inproc_pair();
  MessageChannel tx(std::move(a));
  MessageChannel rx(std::move(b));
  SchedulingUnit unit(rx, 4);
  const SimConfig sim = tiny_sim(3);
  tx.send(StreamMessage::with_frame(generate_frame(sim, 1)));
  tx.send(StreamMessage::with_frame(generate_frame(sim, 0)));
  EXPECT_EQ(unit.pump(false), PumpEvent::FrameCached);
  EXPECT_THROW(unit.pump(false), ProtocolError);
}
