// SPDX-License-Identifier: Apache-2.0

/**
 * @file wire.hpp
 * @brief Frame layout and message codecs of the TCP backend
 *
 * Frame: length:u32le | msgType:u8 | payload, where length counts payload bytes only. All integers are little-endian.
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hicr::backend::net::wire
{

enum class MessageType : uint8_t
{
  hello = 1,
  peerTable = 2,
  exchangeGather = 3,
  exchangeTable = 4,
  put = 5,
  getRequest = 6,
  getResponse = 7,
  getNack = 8,
  fenceToken = 9,
  spawnAck = 10,
  topologyReport = 11,
  rpcRequest = 12,
  rpcResponse = 13,
  bye = 14,
};

[[nodiscard]] bool isKnownType(uint8_t type);

constexpr size_t headerBytes = 5;
/// Larger transfers are split into sequenced frames
constexpr size_t maxPayloadBytes = 16U << 20;

struct Frame
{
  MessageType type;
  std::vector<uint8_t> payload;

  bool operator==(const Frame &) const = default;
};

std::vector<uint8_t> encodeFrame(const Frame &frame);

/**
 * Incremental decoder: feed arbitrary byte chunks, take complete frames. Throws ProtocolError on an unknown type or an
 * oversized length.
 */
class FrameDecoder
{
  public:

  void feed(std::span<const uint8_t> bytes);
  std::optional<Frame> next();
  [[nodiscard]] size_t buffered() const { return _buffer.size() - _consumed; }

  private:

  std::vector<uint8_t> _buffer;
  size_t _consumed = 0;
};

class Writer
{
  public:

  Writer &u8(uint8_t v);
  Writer &u32(uint32_t v);
  Writer &u64(uint64_t v);
  Writer &bytes(std::span<const uint8_t> data);
  /// u32 length prefix followed by the bytes
  Writer &blob(std::span<const uint8_t> data);
  Writer &text(const std::string &s);

  std::vector<uint8_t> take() { return std::move(_out); }

  private:

  std::vector<uint8_t> _out;
};

/// Bounds-checked reader; throws ProtocolError past the end
class Reader
{
  public:

  explicit Reader(std::span<const uint8_t> data)
    : _data(data)
  {}

  uint8_t u8();
  uint32_t u32();
  uint64_t u64();
  std::span<const uint8_t> bytes(size_t n);
  std::span<const uint8_t> rest();
  std::vector<uint8_t> blob();
  std::string text();

  [[nodiscard]] bool done() const { return _cursor == _data.size(); }
  /// Throws ProtocolError unless every byte was consumed
  void expectEnd() const;

  private:

  std::span<const uint8_t> _data;
  size_t _cursor = 0;
};

// Message bodies. Each encodes to a frame and decodes from a payload, throwing ProtocolError when malformed.

enum class HelloRole : uint8_t
{
  control = 0,
  data = 1
};

struct Hello
{
  HelloRole role = HelloRole::control;
  /// Launch index (control, launch-time), 0 (control, runtime-joined) or the sender's instance id (data)
  uint64_t index = 0;
  bool joined = false;
  uint64_t ticket = 0;
  std::string dataAddress;

  Frame encode() const;
  static Hello decode(std::span<const uint8_t> payload);
  bool operator==(const Hello &) const = default;
};

struct PeerEntry
{
  uint64_t id = 0;
  std::string address;
  bool operator==(const PeerEntry &) const = default;
};

struct PeerTable
{
  uint64_t selfId = 0;
  uint64_t rootId = 0;
  std::vector<PeerEntry> peers;

  Frame encode() const;
  static PeerTable decode(std::span<const uint8_t> payload);
  bool operator==(const PeerTable &) const = default;
};

struct ExchangeEntry
{
  uint64_t key = 0;
  uint64_t owner = 0;
  uint64_t size = 0;
  uint64_t bufferId = 0;
  bool operator==(const ExchangeEntry &) const = default;
};

struct ExchangeGather
{
  uint64_t tag = 0;
  std::vector<ExchangeEntry> entries;

  Frame encode() const;
  static ExchangeGather decode(std::span<const uint8_t> payload);
  bool operator==(const ExchangeGather &) const = default;
};

enum class ExchangeStatus : uint8_t
{
  ok = 0,
  duplicateKey = 1,
};

struct ExchangeTable
{
  uint64_t tag = 0;
  ExchangeStatus status = ExchangeStatus::ok;
  std::vector<ExchangeEntry> entries;
  std::string message;

  Frame encode() const;
  static ExchangeTable decode(std::span<const uint8_t> payload);
  bool operator==(const ExchangeTable &) const = default;
};

struct Put
{
  uint64_t tag = 0;
  uint64_t bufferId = 0;
  uint64_t offset = 0;
  uint32_t seq = 0;
  uint32_t totalSeq = 1;
  std::vector<uint8_t> data;

  Frame encode() const;
  static Put decode(std::span<const uint8_t> payload);
  bool operator==(const Put &) const = default;
};

struct GetRequest
{
  uint64_t tag = 0;
  uint64_t requestId = 0;
  uint64_t bufferId = 0;
  uint64_t offset = 0;
  uint64_t size = 0;

  Frame encode() const;
  static GetRequest decode(std::span<const uint8_t> payload);
  bool operator==(const GetRequest &) const = default;
};

struct GetResponse
{
  uint64_t requestId = 0;
  uint64_t chunkOffset = 0;
  uint32_t seq = 0;
  uint32_t totalSeq = 1;
  std::vector<uint8_t> data;

  Frame encode() const;
  static GetResponse decode(std::span<const uint8_t> payload);
  bool operator==(const GetResponse &) const = default;
};

enum class NackReason : uint8_t
{
  unknownBuffer = 1,
  outOfBounds = 2,
};

struct GetNack
{
  uint64_t requestId = 0;
  NackReason reason = NackReason::unknownBuffer;

  Frame encode() const;
  static GetNack decode(std::span<const uint8_t> payload);
  bool operator==(const GetNack &) const = default;
};

enum class FenceKind : uint8_t
{
  request = 0,
  reply = 1
};

/**
 * Request: "I have sent you `count` puts under `tag` so far". Reply: "I have applied `count` of them, `errors` of which
 * were rejected".
 */
struct FenceToken
{
  FenceKind kind = FenceKind::request;
  uint64_t tag = 0;
  uint64_t fenceId = 0;
  uint64_t count = 0;
  uint64_t errors = 0;

  Frame encode() const;
  static FenceToken decode(std::span<const uint8_t> payload);
  bool operator==(const FenceToken &) const = default;
};

struct SpawnAck
{
  uint64_t assignedId = 0;

  Frame encode() const;
  static SpawnAck decode(std::span<const uint8_t> payload);
  bool operator==(const SpawnAck &) const = default;
};

struct TopologyReport
{
  uint64_t ticket = 0;
  std::string topologyJson;

  Frame encode() const;
  static TopologyReport decode(std::span<const uint8_t> payload);
  bool operator==(const TopologyReport &) const = default;
};

struct RpcRequest
{
  uint64_t seq = 0;
  uint64_t nameHash = 0;
  std::vector<uint8_t> argument;

  Frame encode() const;
  static RpcRequest decode(std::span<const uint8_t> payload);
  bool operator==(const RpcRequest &) const = default;
};

struct RpcResponse
{
  uint64_t seq = 0;
  uint8_t status = 0;
  std::vector<uint8_t> result;

  Frame encode() const;
  static RpcResponse decode(std::span<const uint8_t> payload);
  bool operator==(const RpcResponse &) const = default;
};

struct Bye
{
  Frame encode() const;
  static Bye decode(std::span<const uint8_t> payload);
  bool operator==(const Bye &) const = default;
};

} // namespace hicr::backend::net::wire
