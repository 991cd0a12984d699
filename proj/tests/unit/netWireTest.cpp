#include <random>

#include <gtest/gtest.h>

#include "../support/expectCode.hpp"
#include <hicr/backends/net/wire.hpp>

using namespace hicr;
namespace wire = hicr::backend::net::wire;

namespace
{

struct Random
{
  std::mt19937_64 rng;

  uint64_t u64() { return rng(); }
  uint32_t u32() { return static_cast<uint32_t>(rng()); }
  uint8_t u8() { return static_cast<uint8_t>(rng()); }
  size_t below(size_t n) { return static_cast<size_t>(rng() % n); }

  /// A valid (seq, totalSeq) pair
  std::pair<uint32_t, uint32_t> sequence()
  {
    const auto total = static_cast<uint32_t>(1 + below(1000));
    return {static_cast<uint32_t>(below(total)), total};
  }

  std::vector<uint8_t> bytes()
  {
    std::vector<uint8_t> out(below(300));
    for (auto &b : out) b = u8();
    return out;
  }

  std::string text()
  {
    std::string out(below(40), ' ');
    for (auto &c : out) c = static_cast<char>('a' + below(26));
    return out;
  }

  std::vector<wire::ExchangeEntry> entries(bool withOwner)
  {
    std::vector<wire::ExchangeEntry> out(below(6));
    for (auto &e : out) e = wire::ExchangeEntry{u64(), withOwner ? u64() : 0, u64(), u64()};
    return out;
  }
};

template <typename M>
void expectRoundTrip(const M &message, wire::MessageType type)
{
  const auto frame = message.encode();
  EXPECT_EQ(frame.type, type);
  EXPECT_EQ(M::decode(frame.payload), message);

  // Any truncation is detected
  if (!frame.payload.empty())
  {
    const std::vector<uint8_t> cut(frame.payload.begin(), frame.payload.end() - 1);
    if (type != wire::MessageType::put && type != wire::MessageType::getResponse) EXPECT_HICR_ERROR(M::decode(cut), ErrorCode::protocolError);
  }
}

} // namespace

TEST(Wire, EveryMessageTypeRoundTrips)
{
  Random r{std::mt19937_64(7)};
  for (int trial = 0; trial < 300; trial++)
  {
    expectRoundTrip(wire::Hello{static_cast<wire::HelloRole>(r.below(2)), r.u64(), r.below(2) == 1, r.u64(), r.text()}, wire::MessageType::hello);

    wire::PeerTable table{r.u64(), r.u64(), {}};
    for (size_t i = r.below(5); i > 0; i--) table.peers.push_back({r.u64(), r.text()});
    expectRoundTrip(table, wire::MessageType::peerTable);

    expectRoundTrip(wire::ExchangeGather{r.u64(), r.entries(false)}, wire::MessageType::exchangeGather);
    expectRoundTrip(wire::ExchangeTable{r.u64(), static_cast<wire::ExchangeStatus>(r.below(2)), r.entries(true), r.text()}, wire::MessageType::exchangeTable);
    const auto [putSeq, putTotal] = r.sequence();
    expectRoundTrip(wire::Put{r.u64(), r.u64(), r.u64(), putSeq, putTotal, r.bytes()}, wire::MessageType::put);
    expectRoundTrip(wire::GetRequest{r.u64(), r.u64(), r.u64(), r.u64(), r.u64()}, wire::MessageType::getRequest);
    const auto [chunkSeq, chunkTotal] = r.sequence();
    expectRoundTrip(wire::GetResponse{r.u64(), r.u64(), chunkSeq, chunkTotal, r.bytes()}, wire::MessageType::getResponse);
    expectRoundTrip(wire::GetNack{r.u64(), static_cast<wire::NackReason>(1 + r.below(2))}, wire::MessageType::getNack);
    expectRoundTrip(wire::FenceToken{static_cast<wire::FenceKind>(r.below(2)), r.u64(), r.u64(), r.u64(), r.u64()}, wire::MessageType::fenceToken);
    expectRoundTrip(wire::SpawnAck{r.u64()}, wire::MessageType::spawnAck);
    expectRoundTrip(wire::TopologyReport{r.u64(), r.text()}, wire::MessageType::topologyReport);
    expectRoundTrip(wire::RpcRequest{r.u64(), r.u64(), r.bytes()}, wire::MessageType::rpcRequest);
    expectRoundTrip(wire::RpcResponse{r.u64(), r.u8(), r.bytes()}, wire::MessageType::rpcResponse);
    expectRoundTrip(wire::Bye{}, wire::MessageType::bye);
  }
}

TEST(Wire, PutLayoutMatchesTheDocumentedBytes)
{
  const wire::Put put{0x0102030405060708, 9, 10, 11, 12, {0xAA, 0xBB}};
  const auto bytes = wire::encodeFrame(put.encode());
  // length:u32le | type | tag:u64le | bufferId:u64le | offset:u64le | seq:u32le | totalSeq:u32le | data
  const std::vector<uint8_t> expected{34, 0, 0, 0, 5, 8, 7, 6, 5, 4, 3, 2, 1, 9, 0, 0, 0, 0, 0, 0, 0, 10, 0, 0, 0, 0, 0, 0, 0, 11, 0, 0, 0, 12, 0, 0, 0, 0xAA, 0xBB};
  EXPECT_EQ(bytes, expected);
}

TEST(Wire, RpcLayoutsMatchTheDocumentedBytes)
{
  const auto request = wire::encodeFrame(wire::RpcRequest{1, 2, {7}}.encode());
  const std::vector<uint8_t> expectedRequest{21, 0, 0, 0, 12, 1, 0, 0, 0, 0, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 7};
  EXPECT_EQ(request, expectedRequest);

  const auto response = wire::encodeFrame(wire::RpcResponse{3, 1, {}}.encode());
  const std::vector<uint8_t> expectedResponse{13, 0, 0, 0, 13, 3, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0};
  EXPECT_EQ(response, expectedResponse);
}

TEST(Wire, DecoderReassemblesFramesFromArbitraryChunks)
{
  Random r{std::mt19937_64(11)};
  for (int trial = 0; trial < 50; trial++)
  {
    std::vector<wire::Frame> frames;
    std::vector<uint8_t> stream;
    for (size_t i = 1 + r.below(20); i > 0; i--)
    {
      frames.push_back(wire::Put{r.u64(), r.u64(), r.u64(), 0, 1, r.bytes()}.encode());
      const auto encoded = wire::encodeFrame(frames.back());
      stream.insert(stream.end(), encoded.begin(), encoded.end());
    }

    wire::FrameDecoder decoder;
    std::vector<wire::Frame> decoded;
    for (size_t at = 0; at < stream.size();)
    {
      const auto chunk = std::min(stream.size() - at, 1 + r.below(64));
      decoder.feed(std::span(stream.data() + at, chunk));
      at += chunk;
      while (auto f = decoder.next()) decoded.push_back(std::move(*f));
    }
    EXPECT_EQ(decoded, frames);
    EXPECT_EQ(decoder.buffered(), 0u);
  }
}

TEST(Wire, DecoderRejectsUnknownTypesAndOversizedLengths)
{
  wire::FrameDecoder unknown;
  unknown.feed(std::vector<uint8_t>{0, 0, 0, 0, 99});
  EXPECT_HICR_ERROR(unknown.next(), ErrorCode::protocolError);

  wire::FrameDecoder oversized;
  oversized.feed(std::vector<uint8_t>{0xFF, 0xFF, 0xFF, 0x7F, 5});
  EXPECT_HICR_ERROR(oversized.next(), ErrorCode::protocolError);

  wire::FrameDecoder partial;
  partial.feed(std::vector<uint8_t>{3, 0, 0});
  EXPECT_FALSE(partial.next().has_value());

  EXPECT_HICR_ERROR(wire::Hello::decode(std::vector<uint8_t>{7}), ErrorCode::protocolError);
  EXPECT_HICR_ERROR(wire::SpawnAck::decode(std::vector<uint8_t>(9, 0)), ErrorCode::protocolError);
  EXPECT_HICR_ERROR(wire::Put::decode(wire::Put{1, 2, 3, 4, 4, {}}.encode().payload), ErrorCode::protocolError);
}
