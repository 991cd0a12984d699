// SPDX-License-Identifier: Apache-2.0

#include <string>

#include <hicr/backends/net/wire.hpp>
#include <hicr/core/exceptions.hpp>

namespace hicr::backend::net::wire
{

namespace
{

template <typename T>
void putLittleEndian(std::vector<uint8_t> &out, T value)
{
  for (size_t i = 0; i < sizeof(T); i++) out.push_back(static_cast<uint8_t>(value >> (8 * i)));
}

template <typename T>
T getLittleEndian(const uint8_t *p)
{
  T value = 0;
  for (size_t i = 0; i < sizeof(T); i++) value |= static_cast<T>(p[i]) << (8 * i);
  return value;
}

Frame frameOf(MessageType type, Writer &w) { return Frame{type, w.take()}; }

void writeEntries(Writer &w, const std::vector<ExchangeEntry> &entries, bool withOwner)
{
  w.u32(static_cast<uint32_t>(entries.size()));
  for (const auto &e : entries)
  {
    w.u64(e.key);
    if (withOwner) w.u64(e.owner);
    w.u64(e.size).u64(e.bufferId);
  }
}

std::vector<ExchangeEntry> readEntries(Reader &r, bool withOwner)
{
  const auto count = r.u32();
  std::vector<ExchangeEntry> entries;
  for (uint32_t i = 0; i < count; i++)
  {
    ExchangeEntry e;
    e.key = r.u64();
    if (withOwner) e.owner = r.u64();
    e.size = r.u64();
    e.bufferId = r.u64();
    entries.push_back(e);
  }
  return entries;
}

} // namespace

bool isKnownType(uint8_t type) { return type >= 1 && type <= 14; }

std::vector<uint8_t> encodeFrame(const Frame &frame)
{
  if (frame.payload.size() > maxPayloadBytes) raise(ErrorCode::protocolError, "frame payload exceeds the maximum");
  std::vector<uint8_t> out;
  out.reserve(headerBytes + frame.payload.size());
  putLittleEndian<uint32_t>(out, static_cast<uint32_t>(frame.payload.size()));
  out.push_back(static_cast<uint8_t>(frame.type));
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

void FrameDecoder::feed(std::span<const uint8_t> bytes)
{
  if (_consumed > 0 && _consumed == _buffer.size())
  {
    _buffer.clear();
    _consumed = 0;
  }
  _buffer.insert(_buffer.end(), bytes.begin(), bytes.end());
}

std::optional<Frame> FrameDecoder::next()
{
  if (buffered() < headerBytes) return std::nullopt;
  const uint8_t *head = _buffer.data() + _consumed;
  const auto length = getLittleEndian<uint32_t>(head);
  const auto type = head[4];
  if (!isKnownType(type)) raise(ErrorCode::protocolError, "unknown message type " + std::to_string(type));
  if (length > maxPayloadBytes) raise(ErrorCode::protocolError, "frame length " + std::to_string(length) + " exceeds the maximum");
  if (buffered() < headerBytes + length) return std::nullopt;

  Frame frame{static_cast<MessageType>(type), std::vector<uint8_t>(head + headerBytes, head + headerBytes + length)};
  _consumed += headerBytes + length;
  return frame;
}

Writer &Writer::u8(uint8_t v)
{
  _out.push_back(v);
  return *this;
}

Writer &Writer::u32(uint32_t v)
{
  putLittleEndian(_out, v);
  return *this;
}

Writer &Writer::u64(uint64_t v)
{
  putLittleEndian(_out, v);
  return *this;
}

Writer &Writer::bytes(std::span<const uint8_t> data)
{
  _out.insert(_out.end(), data.begin(), data.end());
  return *this;
}

Writer &Writer::blob(std::span<const uint8_t> data)
{
  u32(static_cast<uint32_t>(data.size()));
  return bytes(data);
}

Writer &Writer::text(const std::string &s) { return blob(std::span(reinterpret_cast<const uint8_t *>(s.data()), s.size())); }

std::span<const uint8_t> Reader::bytes(size_t n)
{
  if (n > _data.size() - _cursor) raise(ErrorCode::protocolError, "message truncated");
  auto view = _data.subspan(_cursor, n);
  _cursor += n;
  return view;
}

uint8_t Reader::u8() { return bytes(1)[0]; }
uint32_t Reader::u32() { return getLittleEndian<uint32_t>(bytes(4).data()); }
uint64_t Reader::u64() { return getLittleEndian<uint64_t>(bytes(8).data()); }
std::span<const uint8_t> Reader::rest() { return bytes(_data.size() - _cursor); }

std::vector<uint8_t> Reader::blob()
{
  const auto view = bytes(u32());
  return {view.begin(), view.end()};
}

std::string Reader::text()
{
  const auto view = bytes(u32());
  return {view.begin(), view.end()};
}

void Reader::expectEnd() const
{
  if (!done()) raise(ErrorCode::protocolError, "trailing bytes in message");
}

Frame Hello::encode() const
{
  Writer w;
  w.u8(static_cast<uint8_t>(role)).u64(index).u8(joined ? 1 : 0).u64(ticket).text(dataAddress);
  return frameOf(MessageType::hello, w);
}

Hello Hello::decode(std::span<const uint8_t> payload)
{
  Reader r(payload);
  Hello m;
  const auto role = r.u8();
  if (role > 1) raise(ErrorCode::protocolError, "unknown hello role");
  m.role = static_cast<HelloRole>(role);
  m.index = r.u64();
  m.joined = r.u8() != 0;
  m.ticket = r.u64();
  m.dataAddress = r.text();
  r.expectEnd();
  return m;
}

Frame PeerTable::encode() const
{
  Writer w;
  w.u64(selfId).u64(rootId).u32(static_cast<uint32_t>(peers.size()));
  for (const auto &p : peers) w.u64(p.id).text(p.address);
  return frameOf(MessageType::peerTable, w);
}

PeerTable PeerTable::decode(std::span<const uint8_t> payload)
{
  Reader r(payload);
  PeerTable m;
  m.selfId = r.u64();
  m.rootId = r.u64();
  const auto count = r.u32();
  for (uint32_t i = 0; i < count; i++)
  {
    PeerEntry p;
    p.id = r.u64();
    p.address = r.text();
    m.peers.push_back(std::move(p));
  }
  r.expectEnd();
  return m;
}

Frame ExchangeGather::encode() const
{
  Writer w;
  w.u64(tag);
  writeEntries(w, entries, false);
  return frameOf(MessageType::exchangeGather, w);
}

ExchangeGather ExchangeGather::decode(std::span<const uint8_t> payload)
{
  Reader r(payload);
  ExchangeGather m;
  m.tag = r.u64();
  m.entries = readEntries(r, false);
  r.expectEnd();
  return m;
}

Frame ExchangeTable::encode() const
{
  Writer w;
  w.u64(tag).u8(static_cast<uint8_t>(status));
  writeEntries(w, entries, true);
  w.text(message);
  return frameOf(MessageType::exchangeTable, w);
}

ExchangeTable ExchangeTable::decode(std::span<const uint8_t> payload)
{
  Reader r(payload);
  ExchangeTable m;
  m.tag = r.u64();
  const auto status = r.u8();
  if (status > 1) raise(ErrorCode::protocolError, "unknown exchange status");
  m.status = static_cast<ExchangeStatus>(status);
  m.entries = readEntries(r, true);
  m.message = r.text();
  r.expectEnd();
  return m;
}

Frame Put::encode() const
{
  Writer w;
  w.u64(tag).u64(bufferId).u64(offset).u32(seq).u32(totalSeq).bytes(data);
  return frameOf(MessageType::put, w);
}

Put Put::decode(std::span<const uint8_t> payload)
{
  Reader r(payload);
  Put m;
  m.tag = r.u64();
  m.bufferId = r.u64();
  m.offset = r.u64();
  m.seq = r.u32();
  m.totalSeq = r.u32();
  const auto data = r.rest();
  m.data.assign(data.begin(), data.end());
  if (m.totalSeq == 0 || m.seq >= m.totalSeq) raise(ErrorCode::protocolError, "put sequence out of range");
  return m;
}

Frame GetRequest::encode() const
{
  Writer w;
  w.u64(tag).u64(requestId).u64(bufferId).u64(offset).u64(size);
  return frameOf(MessageType::getRequest, w);
}

GetRequest GetRequest::decode(std::span<const uint8_t> payload)
{
  Reader r(payload);
  GetRequest m;
  m.tag = r.u64();
  m.requestId = r.u64();
  m.bufferId = r.u64();
  m.offset = r.u64();
  m.size = r.u64();
  r.expectEnd();
  return m;
}

Frame GetResponse::encode() const
{
  Writer w;
  w.u64(requestId).u64(chunkOffset).u32(seq).u32(totalSeq).bytes(data);
  return frameOf(MessageType::getResponse, w);
}

GetResponse GetResponse::decode(std::span<const uint8_t> payload)
{
  Reader r(payload);
  GetResponse m;
  m.requestId = r.u64();
  m.chunkOffset = r.u64();
  m.seq = r.u32();
  m.totalSeq = r.u32();
  const auto data = r.rest();
  m.data.assign(data.begin(), data.end());
  if (m.totalSeq == 0 || m.seq >= m.totalSeq) raise(ErrorCode::protocolError, "get response sequence out of range");
  return m;
}

Frame GetNack::encode() const
{
  Writer w;
  w.u64(requestId).u8(static_cast<uint8_t>(reason));
  return frameOf(MessageType::getNack, w);
}

GetNack GetNack::decode(std::span<const uint8_t> payload)
{
  Reader r(payload);
  GetNack m;
  m.requestId = r.u64();
  const auto reason = r.u8();
  if (reason < 1 || reason > 2) raise(ErrorCode::protocolError, "unknown nack reason");
  m.reason = static_cast<NackReason>(reason);
  r.expectEnd();
  return m;
}

Frame FenceToken::encode() const
{
  Writer w;
  w.u8(static_cast<uint8_t>(kind)).u64(tag).u64(fenceId).u64(count).u64(errors);
  return frameOf(MessageType::fenceToken, w);
}

FenceToken FenceToken::decode(std::span<const uint8_t> payload)
{
  Reader r(payload);
  FenceToken m;
  const auto kind = r.u8();
  if (kind > 1) raise(ErrorCode::protocolError, "unknown fence token kind");
  m.kind = static_cast<FenceKind>(kind);
  m.tag = r.u64();
  m.fenceId = r.u64();
  m.count = r.u64();
  m.errors = r.u64();
  r.expectEnd();
  return m;
}

Frame SpawnAck::encode() const
{
  Writer w;
  w.u64(assignedId);
  return frameOf(MessageType::spawnAck, w);
}

SpawnAck SpawnAck::decode(std::span<const uint8_t> payload)
{
  Reader r(payload);
  SpawnAck m;
  m.assignedId = r.u64();
  r.expectEnd();
  return m;
}

Frame TopologyReport::encode() const
{
  Writer w;
  w.u64(ticket).text(topologyJson);
  return frameOf(MessageType::topologyReport, w);
}

TopologyReport TopologyReport::decode(std::span<const uint8_t> payload)
{
  Reader r(payload);
  TopologyReport m;
  m.ticket = r.u64();
  m.topologyJson = r.text();
  r.expectEnd();
  return m;
}

Frame RpcRequest::encode() const
{
  Writer w;
  w.u64(seq).u64(nameHash).blob(argument);
  return frameOf(MessageType::rpcRequest, w);
}

RpcRequest RpcRequest::decode(std::span<const uint8_t> payload)
{
  Reader r(payload);
  RpcRequest m;
  m.seq = r.u64();
  m.nameHash = r.u64();
  m.argument = r.blob();
  r.expectEnd();
  return m;
}

Frame RpcResponse::encode() const
{
  Writer w;
  w.u64(seq).u8(status).blob(result);
  return frameOf(MessageType::rpcResponse, w);
}

RpcResponse RpcResponse::decode(std::span<const uint8_t> payload)
{
  Reader r(payload);
  RpcResponse m;
  m.seq = r.u64();
  m.status = r.u8();
  m.result = r.blob();
  r.expectEnd();
  return m;
}

Frame Bye::encode() const { return Frame{MessageType::bye, {}}; }

Bye Bye::decode(std::span<const uint8_t> payload)
{
  Reader(payload).expectEnd();
  return {};
}

} // namespace hicr::backend::net::wire
