#include <gtest/gtest.h>

#include <thread>

#include "twinbed/plant/plant.hpp"
#include "twinbed/tagbus/frame.hpp"
#include "twinbed/tagbus/link.hpp"
#include "twinbed/tagbus/server.hpp"

using namespace twinbed;
using namespace twinbed::tagbus;

TEST(Frame, StatusRoundTrip) {
  const auto msg = make_status(42);
  const auto bytes = encode_frame(msg);
  ASSERT_GT(bytes.size(), kFrameHeaderBytes);
  const std::size_t declared = (std::size_t{bytes[0]} << 24) | (std::size_t{bytes[1]} << 16) |
                               (std::size_t{bytes[2]} << 8) | std::size_t{bytes[3]};
  EXPECT_EQ(declared, bytes.size() - kFrameHeaderBytes);
  const auto back = decode_frame(bytes);
  EXPECT_EQ(back.message, msg);
  EXPECT_EQ(back.consumed, bytes.size());
}

TEST(Frame, WriteCarriesFalseValue) {
  const auto msg = make_write(7, {make_tag("CW_TEMP", 200.0, 30000)});
  const auto back = decode_frame(encode_frame(msg)).message;
  ASSERT_EQ(back.op, Op::Write);
  ASSERT_EQ(back.writes.count("CW_TEMP"), 1u);
  EXPECT_EQ(std::get<double>(back.writes.at("CW_TEMP").value), 200.0);
}

TEST(Frame, ValueTypesSurvive) {
  auto msg = make_reply(make_read(3, {"A", "B", "C", "D"}));
  msg.reply["A"] = make_tag("A", 0.1, 1);
  msg.reply["B"] = make_tag("B", std::int64_t{-9007199254740993}, 2, Quality::Stale);
  msg.reply["C"] = make_tag("C", true, 3, Quality::Forced);
  msg.reply["D"] = make_tag("D", std::string("FREEZE"), 4);
  EXPECT_EQ(decode_frame(encode_frame(msg)).message, msg);
}

TEST(Frame, EmptyInputIsIncomplete) {
  EXPECT_THROW(decode_frame(Bytes{}), FrameIncomplete);
}

TEST(Frame, ShortPayloadIsIncomplete) {
  const Bytes b = {0, 0, 0, 5, '{', '}', ' '};
  EXPECT_THROW(decode_frame(b), FrameIncomplete);
}

TEST(Frame, OversizeHeaderRejected) {
  const Bytes b = {0x7f, 0xff, 0xff, 0xff};
  EXPECT_THROW(decode_frame(b), FrameTooLarge);
}

TEST(Frame, GarbagePayloadRejected) {
  const std::string body = "{\"op\":\"NOPE\",\"id\":1}";
  Bytes b = {0, 0, 0, static_cast<std::uint8_t>(body.size())};
  b.insert(b.end(), body.begin(), body.end());
  EXPECT_THROW(decode_frame(b), ProtocolError);
}

TEST(Frame, TrailingBytesLeftUnconsumed) {
  auto a = encode_frame(make_status(1));
  const auto first = a.size();
  const auto b = encode_frame(make_status(2));
  a.insert(a.end(), b.begin(), b.end());
  const auto d = decode_frame(a);
  EXPECT_EQ(d.consumed, first);
  EXPECT_EQ(d.message.id, 1u);
}

TEST(Frame, RequestWithReplyFieldsInvalid) {
  auto msg = make_read(1, {"X"});
  msg.reply["X"] = make_tag("X", 1.0, 0);
  EXPECT_THROW(encode_frame(msg), ProtocolError);
}

TEST(Loopback, ReadNominalPlant) {
  plant::PlantSim sim;
  sim.step();
  LoopbackLink link([&](const Message& m) { return sim.handle(m); });
  TagClient client(link);
  const auto v = client.read_tag("CW_TEMP");
  EXPECT_NEAR(*v.as_double(), 14.77, 0.1);
  EXPECT_EQ(v.quality, Quality::Good);
}

TEST(Loopback, DownLinkThrowsTransport) {
  LoopbackLink link([](const Message& m) { return make_reply(m); });
  link.set_down(true);
  TagClient client(link);
  EXPECT_THROW(client.status(), TransportError);
}

TEST(Loopback, RemoteErrorSurfaces) {
  LoopbackLink link([](const Message& m) { return make_error_reply(m, "unknown tag NOPE"); });
  TagClient client(link);
  EXPECT_THROW(client.read_tag("NOPE"), RemoteError);
}

TEST(Tcp, ServerAnswersConcurrentClients) {
  TagServer server([](const Message& m) {
    auto r = make_reply(m);
    for (const auto& t : m.tags) r.reply[t] = make_tag(t, static_cast<double>(t.size()), 0);
    return r;
  }, 0);
  std::vector<std::thread> clients;
  std::atomic<int> good{0};
  for (int c = 0; c < 4; ++c) {
    clients.emplace_back([&, c] {
      TagClient client(std::make_unique<TcpLink>("127.0.0.1", server.port()));
      for (int i = 0; i < 50; ++i) {
        const std::string tag(static_cast<std::size_t>(1 + (c + i) % 7), 'T');
        if (*client.read_tag(tag).as_double() == static_cast<double>(tag.size())) ++good;
      }
    });
  }
  for (auto& t : clients) t.join();
  server.stop();
  EXPECT_EQ(good.load(), 200);
}

TEST(Tcp, HandlerExceptionBecomesErrorReply) {
  TagServer server([](const Message&) -> Message { throw std::runtime_error("boom"); }, 0);
  TagClient client(std::make_unique<TcpLink>("127.0.0.1", server.port()));
  try {
    client.status();
    FAIL() << "expected RemoteError";
  } catch (const RemoteError& e) {
    EXPECT_NE(std::string(e.what()).find("boom"), std::string::npos);
  }
  server.stop();
}

TEST(Tcp, MalformedFrameClosesOnlyThatConnection) {
  TagServer server([](const Message& m) { return make_reply(m); }, 0);
  {
    auto raw = connect_tcp("127.0.0.1", server.port(), 1000);
    const Bytes junk = {0, 0, 0, 3, 'x', 'y', 'z'};
    raw.send_all(junk);
    raw.set_timeout_ms(1000);
    EXPECT_FALSE(raw.read_frame().has_value());
  }
  TagClient client(std::make_unique<TcpLink>("127.0.0.1", server.port()));
  EXPECT_NO_THROW(client.status());
  server.stop();
}

TEST(Tcp, NoServerIsTransportError) {
  std::uint16_t port;
  {
    Listener l("127.0.0.1", 0);
    port = l.port();
  }
  TagClient client(std::make_unique<TcpLink>("127.0.0.1", port, 200));
  EXPECT_THROW(client.status(), TransportError);
}
