// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cstdio>

#include <hicr/core/exceptions.hpp>
#include <hicr/core/hash.hpp>

#include "coordinator.hpp"

namespace hicr::backend::net
{

uint64_t spawnServiceHash() { return fnv1a64("hicr.spawn"); }

namespace
{

constexpr uint8_t spawnUnsatisfiable = 1;
constexpr uint8_t spawnFailed = 2;

} // namespace

Coordinator::Coordinator(const Address &address, uint64_t launchCount)
  : _launchCount(launchCount),
    _listener(Socket::listen(address)),
    _nextId(launchCount)
{
  _acceptor = std::thread([this] { acceptLoop(); });
  _watchdog = std::thread([this] { watchdogLoop(); });
}

Coordinator::~Coordinator() { stop(std::chrono::milliseconds(0)); }

void Coordinator::stop(std::chrono::milliseconds grace)
{
  {
    std::unique_lock lock(_mutex);
    if (_stopping && !_acceptor.joinable()) return;
    _cv.wait_for(lock, grace, [&] { return std::all_of(_connections.begin(), _connections.end(), [](const auto &c) { return c->closed; }); });
    _stopping = true;
  }
  _cv.notify_all();
  _listener.shutdown();
  if (_acceptor.joinable()) _acceptor.join();
  if (_watchdog.joinable()) _watchdog.join();

  std::vector<ConnectionPtr> connections;
  {
    std::lock_guard lock(_mutex);
    connections = _connections;
  }
  for (const auto &c : connections) c->socket.shutdown();
  for (const auto &c : connections)
    if (c->reader.joinable()) c->reader.join();
}

void Coordinator::acceptLoop()
{
  while (true)
  {
    auto socket = _listener.accept();
    if (!socket.valid()) return;

    auto connection = std::make_shared<Connection>();
    connection->socket = std::move(socket);
    std::lock_guard lock(_mutex);
    if (_stopping) return;
    _connections.push_back(connection);
    connection->reader = std::thread([this, connection] { readLoop(connection); });
  }
}

void Coordinator::readLoop(const ConnectionPtr &connection)
{
  while (true)
  {
    std::optional<wire::Frame> frame;
    try
    {
      frame = connection->socket.readFrame();
    }
    catch (const Exception &e)
    {
      std::fprintf(stderr, "[hicr-net] coordinator: %s\n", e.what());
    }
    if (!frame) break;

    try
    {
      handle(connection, *frame);
    }
    catch (const Exception &e)
    {
      std::fprintf(stderr, "[hicr-net] coordinator dropped a frame: %s\n", e.what());
    }
  }

  std::lock_guard lock(_mutex);
  connection->closed = true;
  _cv.notify_all();
}

void Coordinator::handle(const ConnectionPtr &connection, const wire::Frame &frame)
{
  std::lock_guard lock(_mutex);
  switch (frame.type)
  {
  case wire::MessageType::hello: onHello(connection, wire::Hello::decode(frame.payload)); break;
  case wire::MessageType::topologyReport: onTopologyReport(connection, wire::TopologyReport::decode(frame.payload)); break;
  case wire::MessageType::exchangeGather: onGather(connection, wire::ExchangeGather::decode(frame.payload)); break;
  case wire::MessageType::bye: onBye(connection); break;
  case wire::MessageType::rpcRequest:
  {
    auto request = wire::RpcRequest::decode(frame.payload);
    if (request.nameHash != spawnServiceHash()) raise(ErrorCode::protocolError, "unexpected request on a control connection");
    onSpawnRequest(connection, request);
    break;
  }
  default: raise(ErrorCode::protocolError, "unexpected message type on a control connection");
  }
}

void Coordinator::onHello(const ConnectionPtr &connection, const wire::Hello &hello)
{
  if (hello.role != wire::HelloRole::control || connection->hello) raise(ErrorCode::protocolError, "bad control hello");
  connection->hello = true;
  connection->joined = hello.joined;
  connection->launchIndex = hello.index;
  connection->ticket = hello.ticket;
  connection->dataAddress = hello.dataAddress;

  if (hello.joined) return; // admission continues with the topology report

  if (hello.index >= _launchCount || _members.contains(hello.index)) raise(ErrorCode::protocolError, "duplicate or out-of-range launch index");
  connection->id = hello.index;
  _members[hello.index] = connection;
  if (!_tablePublished && _members.size() == _launchCount)
  {
    _tablePublished = true;
    broadcastPeerTable();
  }
}

void Coordinator::onTopologyReport(const ConnectionPtr &connection, const wire::TopologyReport &report)
{
  if (!connection->hello || !connection->joined || connection->reportedTopology) raise(ErrorCode::protocolError, "unexpected topology report");
  try
  {
    connection->reportedTopology = deserializeTopology(report.topologyJson);
  }
  catch (const Exception &)
  {
    connection->reportedTopology = Topology{};
  }

  const auto t = _tickets.find(connection->ticket);
  if (t == _tickets.end())
  {
    _waitingCandidates.push_back(connection);
    return;
  }
  evaluateCandidate(connection, t->second);
}

void Coordinator::onSpawnRequest(const ConnectionPtr &connection, const wire::RpcRequest &request)
{
  wire::Reader r(request.argument);
  const auto ticketId = r.u64();
  const auto count = r.u64();
  const auto required = r.text();
  const auto timeoutMs = r.u64();
  r.expectEnd();

  auto &ticket = _tickets[ticketId];
  ticket.requester = connection;
  ticket.rpcSequence = request.seq;
  ticket.count = count;
  ticket.deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeoutMs);
  try
  {
    ticket.required = deserializeTopology(required);
  }
  catch (const Exception &e)
  {
    failTicket(ticket, spawnUnsatisfiable, std::string("malformed template topology: ") + e.what());
    return;
  }

  std::vector<ConnectionPtr> waiting;
  std::swap(waiting, _waitingCandidates);
  for (const auto &candidate : waiting)
  {
    if (candidate->ticket == ticketId)
      evaluateCandidate(candidate, ticket);
    else
      _waitingCandidates.push_back(candidate);
  }
}

void Coordinator::evaluateCandidate(const ConnectionPtr &candidate, Ticket &ticket)
{
  if (ticket.done)
  {
    send(*candidate, wire::Bye{}.encode());
    return;
  }
  if (!satisfies(*candidate->reportedTopology, ticket.required))
  {
    send(*candidate, wire::Bye{}.encode());
    failTicket(ticket, spawnUnsatisfiable, "a new instance reported a topology that does not satisfy the template");
    return;
  }

  ticket.admitted.push_back(candidate);
  if (ticket.admitted.size() < ticket.count) return;

  // The whole ticket is admitted at once, so a failed spawn never leaves a partial deployment behind
  wire::Writer result;
  result.u32(static_cast<uint32_t>(ticket.admitted.size()));
  for (const auto &c : ticket.admitted)
  {
    c->id = _nextId++;
    _members[*c->id] = c;
    send(*c, wire::SpawnAck{*c->id}.encode());
    result.u64(*c->id);
  }
  ticket.done = true;
  broadcastPeerTable();
  send(*ticket.requester, wire::RpcResponse{ticket.rpcSequence, 0, result.take()}.encode());
  _cv.notify_all();
}

void Coordinator::failTicket(Ticket &ticket, uint8_t code, const std::string &message)
{
  if (ticket.done) return;
  ticket.done = true;
  for (const auto &c : ticket.admitted) send(*c, wire::Bye{}.encode());
  ticket.admitted.clear();

  wire::Writer w;
  w.u8(code).text(message);
  if (ticket.requester) send(*ticket.requester, wire::RpcResponse{ticket.rpcSequence, 2, w.take()}.encode());
}

void Coordinator::watchdogLoop()
{
  std::unique_lock lock(_mutex);
  while (!_stopping)
  {
    _cv.wait_for(lock, std::chrono::milliseconds(50));
    const auto now = std::chrono::steady_clock::now();
    for (auto &[id, ticket] : _tickets)
      if (!ticket.done && now >= ticket.deadline)
        failTicket(ticket, spawnFailed, std::to_string(ticket.admitted.size()) + " of " + std::to_string(ticket.count) + " new instances were admitted before the deadline");
  }
}

void Coordinator::onGather(const ConnectionPtr &connection, const wire::ExchangeGather &gather)
{
  if (!connection->id) raise(ErrorCode::protocolError, "exchange from a process that is not a member");
  auto &rounds = _rounds[gather.tag];
  auto round = std::find_if(rounds.begin(), rounds.end(), [&](const Round &r) { return !r.contributions.contains(*connection->id); });
  if (round == rounds.end()) round = rounds.insert(rounds.end(), Round{});

  auto entries = gather.entries;
  for (auto &e : entries) e.owner = *connection->id;
  round->contributions[*connection->id] = std::move(entries);
  completeRounds(gather.tag);
}

void Coordinator::completeRounds(uint64_t tag)
{
  auto &rounds = _rounds[tag];
  while (!rounds.empty())
  {
    auto &round = rounds.front();
    for (const auto &[id, member] : _members)
      if (!round.contributions.contains(id)) return;

    wire::ExchangeTable table;
    table.tag = tag;
    for (auto &[id, entries] : round.contributions) table.entries.insert(table.entries.end(), entries.begin(), entries.end());
    std::stable_sort(table.entries.begin(), table.entries.end(), [](const auto &a, const auto &b) { return a.key < b.key; });
    for (size_t i = 1; i < table.entries.size(); i++)
      if (table.entries[i].key == table.entries[i - 1].key)
      {
        table.status = wire::ExchangeStatus::duplicateKey;
        table.message = "key " + std::to_string(table.entries[i].key) + " contributed by instances " + std::to_string(table.entries[i - 1].owner) + " and " +
                        std::to_string(table.entries[i].owner);
        table.entries.clear();
        break;
      }

    const auto frame = table.encode();
    for (const auto &[id, member] : _members) send(*member, frame);
    rounds.pop_front();
  }
}

void Coordinator::onBye(const ConnectionPtr &connection)
{
  if (!connection->id) return;
  _byes[*connection->id] = true;
  for (const auto &[id, member] : _members)
    if (!_byes[id]) return;

  const auto frame = wire::Bye{}.encode();
  for (const auto &[id, member] : _members) send(*member, frame);
  for (const auto &candidate : _waitingCandidates) send(*candidate, frame);
  _waitingCandidates.clear();
}

void Coordinator::broadcastPeerTable()
{
  wire::PeerTable table;
  table.rootId = 0;
  for (const auto &[id, member] : _members) table.peers.push_back({id, member->dataAddress});
  for (const auto &[id, member] : _members)
  {
    table.selfId = id;
    send(*member, table.encode());
  }
}

void Coordinator::send(Connection &connection, const wire::Frame &frame)
{
  std::lock_guard lock(connection.writeMutex);
  try
  {
    connection.socket.writeFrame(frame);
  }
  catch (const Exception &e)
  {
    std::fprintf(stderr, "[hicr-net] coordinator could not reach a member: %s\n", e.what());
  }
}

} // namespace hicr::backend::net
