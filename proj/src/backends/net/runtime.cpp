// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <deque>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <thread>

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <hicr/backends/host/topologyManager.hpp>
#include <hicr/backends/net/runtime.hpp>
#include <hicr/backends/net/wire.hpp>
#include <hicr/core/exceptions.hpp>
#include <hicr/core/hash.hpp>

#include "coordinator.hpp"
#include "socket.hpp"

extern char **environ;

namespace hicr::backend::net
{

namespace
{

using Clock = std::chrono::steady_clock;

/// Sequence numbers with this bit belong to the runtime's own requests, never to the instance manager's
constexpr uint64_t internalSequenceBit = uint64_t{1} << 63;

/// Leaves room for the PUT / GET_RESP headers inside one frame
constexpr size_t chunkBytes = wire::maxPayloadBytes - 64;

/// Exit status of a runtime-joined process the coordinator turned away
constexpr int rejectedExitStatus = 75;

const uint64_t lockAcquireHash = fnv1a64("hicr.lock.acquire");
const uint64_t lockReleaseHash = fnv1a64("hicr.lock.release");

std::optional<std::string> readVariable(const char *name)
{
  const char *value = std::getenv(name);
  if (value == nullptr) return std::nullopt;
  return std::string(value);
}

uint64_t parseUnsigned(const char *name, const std::string &text)
{
  try
  {
    size_t consumed = 0;
    const auto value = std::stoull(text, &consumed);
    if (consumed != text.size()) throw std::invalid_argument(name);
    return value;
  }
  catch (const std::exception &)
  {
    raise(ErrorCode::missingEnvironment, std::string(name) + " is not a decimal number");
  }
}

std::vector<uint8_t> encodeU64(uint64_t value)
{
  wire::Writer w;
  w.u64(value);
  return w.take();
}

uint64_t decodeU64(const std::vector<uint8_t> &bytes)
{
  wire::Reader r(bytes);
  const auto value = r.u64();
  r.expectEnd();
  return value;
}

std::vector<std::string> ownCommandLine()
{
  std::ifstream in("/proc/self/cmdline", std::ios::binary);
  const std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::string> args;
  size_t start = 0;
  for (size_t i = 0; i < raw.size(); i++)
    if (raw[i] == '\0')
    {
      args.push_back(raw.substr(start, i - start));
      start = i + 1;
    }
  return args;
}

void reap(const std::vector<pid_t> &children, bool kill)
{
  for (const auto pid : children)
  {
    if (kill) ::kill(pid, SIGKILL);
    int status = 0;
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {}
  }
}

} // namespace

LaunchEnvironment LaunchEnvironment::fromEnvironment()
{
  const auto required = [](const char *name) {
    auto value = readVariable(name);
    if (!value || value->empty()) raise(ErrorCode::missingEnvironment, std::string(name) + " is not set");
    return *value;
  };

  LaunchEnvironment e;
  e.index = parseUnsigned("HICR_INSTANCE_INDEX", required("HICR_INSTANCE_INDEX"));
  e.count = parseUnsigned("HICR_INSTANCE_COUNT", required("HICR_INSTANCE_COUNT"));
  e.coordinatorAddress = required("HICR_COORD_ADDR");
  if (const auto joined = readVariable("HICR_JOINED_AT_RUNTIME"); joined && !joined->empty())
  {
    if (*joined != "0" && *joined != "1") raise(ErrorCode::missingEnvironment, "HICR_JOINED_AT_RUNTIME must be 0 or 1");
    e.joinedAtRuntime = *joined == "1";
  }
  if (e.joinedAtRuntime) e.spawnTicket = parseUnsigned("HICR_SPAWN_TICKET", required("HICR_SPAWN_TICKET"));
  if (e.count == 0) raise(ErrorCode::missingEnvironment, "HICR_INSTANCE_COUNT must be positive");
  if (!e.joinedAtRuntime && e.index >= e.count) raise(ErrorCode::missingEnvironment, "HICR_INSTANCE_INDEX must be below HICR_INSTANCE_COUNT");
  return e;
}

bool LaunchEnvironment::present() { return std::getenv("HICR_INSTANCE_COUNT") != nullptr; }

struct Runtime::Impl
{
  struct Outgoing
  {
    InstanceId peer = 0;
    Socket socket;
    std::mutex mutex;
    std::condition_variable cv;
    std::deque<wire::Frame> queue;
    bool writing = false;
    bool stop = false;
    /// Read without the mutex by fences waiting on the state mutex
    std::atomic<bool> broken{false};
    /// Frames of PUT messages enqueued so far, per tag
    std::map<Tag, uint64_t> putsSent;
    std::thread writer;
  };
  using OutgoingPtr = std::shared_ptr<Outgoing>;

  struct Incoming
  {
    Socket socket;
    std::thread reader;
  };

  struct PendingGet
  {
    Tag tag = 0;
    LocalSlotPtr destination;
    size_t destinationOffset = 0;
    uint64_t size = 0;
    uint32_t chunks = 0;
  };

  struct FenceWait
  {
    InstanceId peer;
    Tag tag;
    uint64_t fenceId;
    uint64_t expected;
  };

  struct FenceReply
  {
    uint64_t count;
    uint64_t errors;
  };

  struct Waiter
  {
    bool done = false;
    uint8_t status = 0;
    std::vector<uint8_t> payload;
  };

  using Responder = std::function<void(uint8_t status, std::vector<uint8_t> payload)>;

  struct LockState
  {
    bool held = false;
    std::deque<Responder> waiting;
  };

  Impl(LaunchEnvironment e, NetConfig c)
    : environment(std::move(e)),
      config(std::move(c))
  {}

  ~Impl() { stopFlows(); }

  // ---- configuration and bootstrap ----

  const LaunchEnvironment environment;
  const NetConfig config;
  std::unique_ptr<Coordinator> coordinator;

  Socket control;
  std::mutex controlWriteMutex;
  std::thread controlReader;

  Socket listener;
  std::thread acceptor;

  // ---- state shared with the progress flows ----

  mutable std::mutex stateMutex;
  std::condition_variable stateCv;
  bool haveView = false;
  DeploymentView deployment;
  std::optional<InstanceId> spawnAck;
  bool byeReceived = false;
  bool controlClosed = false;
  std::map<Tag, std::deque<wire::ExchangeTable>> tables;

  std::map<std::pair<InstanceId, Tag>, uint64_t> putsApplied;
  std::map<std::pair<InstanceId, Tag>, uint64_t> putsRejected;
  std::map<std::pair<InstanceId, Tag>, uint64_t> putsConfirmed;
  std::map<std::pair<InstanceId, Tag>, uint64_t> rejectionsReported;
  std::map<uint64_t, FenceReply> fenceReplies;
  std::atomic<uint64_t> nextFenceId{1};

  std::map<uint64_t, PendingGet> pendingGets;
  std::map<Tag, uint64_t> pendingGetsPerTag;
  std::map<Tag, ErrorCode> getFailures;
  uint64_t nextGetId = 1;

  std::map<uint64_t, Waiter> waiters;
  std::atomic<uint64_t> nextInternalSequence{internalSequenceBit | 1};

  RequestSink requestSink;
  ResponseSink responseSink;
  std::deque<std::tuple<InstanceId, uint64_t, uint64_t, std::vector<uint8_t>>> heldRequests;

  // ---- connections ----

  std::mutex connectionsMutex;
  std::map<InstanceId, OutgoingPtr> outgoing;
  std::vector<std::shared_ptr<Incoming>> incoming;
  bool stopping = false;

  // ---- registered memory ----

  mutable std::mutex registryMutex;
  std::map<uint64_t, LocalSlotPtr> buffers;
  uint64_t nextBufferId = 1;
  std::mutex memoryMutex;

  std::mutex lockServiceMutex;
  std::map<uint64_t, LockState> lockStates;

  std::mutex childrenMutex;
  std::vector<pid_t> children;
  std::atomic<uint64_t> spawnCounter{0};

  bool finalized = false;
  bool flowsStopped = false;

  InstanceId self() const
  {
    std::lock_guard lock(stateMutex);
    return deployment.selfId;
  }

  void bootstrap()
  {
    const auto start = Clock::now();
    const auto coordinatorAddress = Address::parse(environment.coordinatorAddress);
    if (environment.index == 0 && !environment.joinedAtRuntime) coordinator = std::make_unique<Coordinator>(coordinatorAddress, environment.count);

    listener = Socket::listen(Address{"0.0.0.0", 0});
    try
    {
      control = Socket::connect(coordinatorAddress, start + std::min(config.connectTimeout, config.bootstrapTimeout));
    }
    catch (const Exception &)
    {
      raise(ErrorCode::bootstrapTimeout, "coordinator at " + coordinatorAddress.str() + " not reachable");
    }

    // Peers reach this process on the interface its control connection uses
    const auto advertised = Address{control.localAddress().host, listener.localAddress().port};
    acceptor = std::thread([this] { acceptLoop(); });

    wire::Hello hello;
    hello.role = wire::HelloRole::control;
    hello.index = environment.index;
    hello.joined = environment.joinedAtRuntime;
    hello.ticket = environment.spawnTicket;
    hello.dataAddress = advertised.str();
    control.writeFrame(hello.encode());
    controlReader = std::thread([this] { controlLoop(); });

    if (environment.joinedAtRuntime)
    {
      const auto topology = config.topologySource ? config.topologySource() : host::TopologyManager().queryTopology();
      sendControl(wire::TopologyReport{environment.spawnTicket, serializeTopology(topology)}.encode());
    }

    std::unique_lock lock(stateMutex);
    const bool ready = stateCv.wait_until(lock, start + config.bootstrapTimeout, [&] {
      if (byeReceived || controlClosed) return true;
      return haveView && (!environment.joinedAtRuntime || spawnAck.has_value());
    });
    if (environment.joinedAtRuntime && (byeReceived || (!haveView && controlClosed)))
    {
      // The coordinator turned this process away (its topology misses the template, or the spawn already failed)
      std::fprintf(stderr, "[hicr-net] runtime-joined process was not admitted; exiting\n");
      std::fflush(nullptr);
      std::_Exit(rejectedExitStatus);
    }
    if (!ready || !haveView) raise(ErrorCode::bootstrapTimeout, "no peer table from the coordinator");
  }

  // ---- control connection ----

  void sendControl(const wire::Frame &frame)
  {
    std::lock_guard lock(controlWriteMutex);
    control.writeFrame(frame);
  }

  void controlLoop()
  {
    while (true)
    {
      std::optional<wire::Frame> frame;
      try
      {
        frame = control.readFrame();
      }
      catch (const Exception &e)
      {
        std::fprintf(stderr, "[hicr-net] control connection: %s\n", e.what());
      }
      if (!frame) break;

      try
      {
        handleControl(*frame);
      }
      catch (const Exception &e)
      {
        std::fprintf(stderr, "[hicr-net] dropped a control frame: %s\n", e.what());
      }
    }
    std::lock_guard lock(stateMutex);
    controlClosed = true;
    stateCv.notify_all();
  }

  void handleControl(const wire::Frame &frame)
  {
    switch (frame.type)
    {
    case wire::MessageType::peerTable:
    {
      auto table = wire::PeerTable::decode(frame.payload);
      std::lock_guard lock(stateMutex);
      // Tables only grow; an older one arriving late is ignored
      if (!haveView || table.peers.size() >= deployment.peers.size())
      {
        deployment.selfId = table.selfId;
        deployment.rootId = table.rootId;
        deployment.peers.clear();
        for (auto &p : table.peers) deployment.peers.push_back(PeerInfo{p.id, std::move(p.address)});
        haveView = true;
      }
      stateCv.notify_all();
      break;
    }
    case wire::MessageType::spawnAck:
    {
      const auto ack = wire::SpawnAck::decode(frame.payload);
      std::lock_guard lock(stateMutex);
      spawnAck = ack.assignedId;
      stateCv.notify_all();
      break;
    }
    case wire::MessageType::exchangeTable:
    {
      auto table = wire::ExchangeTable::decode(frame.payload);
      std::lock_guard lock(stateMutex);
      tables[table.tag].push_back(std::move(table));
      stateCv.notify_all();
      break;
    }
    case wire::MessageType::rpcResponse:
    {
      auto response = wire::RpcResponse::decode(frame.payload);
      dispatchResponse(response.seq, response.status, std::move(response.result));
      break;
    }
    case wire::MessageType::bye:
    {
      std::lock_guard lock(stateMutex);
      byeReceived = true;
      stateCv.notify_all();
      break;
    }
    default: raise(ErrorCode::protocolError, "unexpected message type from the coordinator");
    }
  }

  // ---- data connections ----

  void acceptLoop()
  {
    while (true)
    {
      auto socket = listener.accept();
      if (!socket.valid()) return;
      auto connection = std::make_shared<Incoming>();
      connection->socket = std::move(socket);
      std::lock_guard lock(connectionsMutex);
      if (stopping) return;
      incoming.push_back(connection);
      connection->reader = std::thread([this, connection] { readLoop(*connection); });
    }
  }

  void readLoop(Incoming &connection)
  {
    std::optional<InstanceId> sender;
    while (true)
    {
      std::optional<wire::Frame> frame;
      try
      {
        frame = connection.socket.readFrame();
      }
      catch (const Exception &e)
      {
        std::fprintf(stderr, "[hicr-net] data connection: %s\n", e.what());
      }
      if (!frame) return;

      try
      {
        if (!sender)
        {
          if (frame->type != wire::MessageType::hello) raise(ErrorCode::protocolError, "data connection did not start with HELLO");
          const auto hello = wire::Hello::decode(frame->payload);
          if (hello.role != wire::HelloRole::data) raise(ErrorCode::protocolError, "control HELLO on a data connection");
          sender = hello.index;
          continue;
        }
        handleData(*sender, *frame);
      }
      catch (const Exception &e)
      {
        std::fprintf(stderr, "[hicr-net] dropped a frame: %s\n", e.what());
      }
    }
  }

  void handleData(InstanceId sender, const wire::Frame &frame)
  {
    switch (frame.type)
    {
    case wire::MessageType::put: applyPut(sender, wire::Put::decode(frame.payload)); break;
    case wire::MessageType::getRequest: serveGet(sender, wire::GetRequest::decode(frame.payload)); break;
    case wire::MessageType::getResponse: applyGetResponse(wire::GetResponse::decode(frame.payload)); break;
    case wire::MessageType::getNack:
    {
      const auto nack = wire::GetNack::decode(frame.payload);
      finishGet(nack.requestId, nack.reason == wire::NackReason::unknownBuffer ? ErrorCode::invalidSlot : ErrorCode::outOfBounds);
      break;
    }
    case wire::MessageType::fenceToken:
    {
      const auto token = wire::FenceToken::decode(frame.payload);
      if (token.kind == wire::FenceKind::request)
      {
        wire::FenceToken reply{wire::FenceKind::reply, token.tag, token.fenceId, 0, 0};
        {
          std::lock_guard lock(stateMutex);
          reply.count = putsApplied[{sender, token.tag}];
          reply.errors = putsRejected[{sender, token.tag}];
        }
        sendData(sender, reply.encode());
      }
      else
      {
        std::lock_guard lock(stateMutex);
        fenceReplies[token.fenceId] = FenceReply{token.count, token.errors};
        stateCv.notify_all();
      }
      break;
    }
    case wire::MessageType::rpcRequest:
    {
      auto request = wire::RpcRequest::decode(frame.payload);
      dispatchRequest(sender, request.seq, request.nameHash, std::move(request.argument));
      break;
    }
    case wire::MessageType::rpcResponse:
    {
      auto response = wire::RpcResponse::decode(frame.payload);
      dispatchResponse(response.seq, response.status, std::move(response.result));
      break;
    }
    default: raise(ErrorCode::protocolError, "unexpected message type on a data connection");
    }
  }

  void applyPut(InstanceId sender, const wire::Put &put)
  {
    const auto slot = lookup(put.bufferId);
    const bool accepted = slot != nullptr && put.offset <= slot->getSize() && put.data.size() <= slot->getSize() - put.offset;
    if (accepted && !put.data.empty())
    {
      std::lock_guard lock(memoryMutex);
      std::memcpy(static_cast<uint8_t *>(slot->getPointer()) + put.offset, put.data.data(), put.data.size());
    }

    std::lock_guard lock(stateMutex);
    putsApplied[{sender, put.tag}]++;
    if (!accepted) putsRejected[{sender, put.tag}]++;
  }

  void serveGet(InstanceId requester, const wire::GetRequest &request)
  {
    const auto slot = lookup(request.bufferId);
    if (slot == nullptr || request.offset > slot->getSize() || request.size > slot->getSize() - request.offset)
    {
      const auto reason = slot == nullptr ? wire::NackReason::unknownBuffer : wire::NackReason::outOfBounds;
      sendData(requester, wire::GetNack{request.requestId, reason}.encode());
      return;
    }

    const auto chunks = std::max<uint64_t>(1, (request.size + chunkBytes - 1) / chunkBytes);
    for (uint64_t i = 0; i < chunks; i++)
    {
      wire::GetResponse response;
      response.requestId = request.requestId;
      response.chunkOffset = i * chunkBytes;
      response.seq = static_cast<uint32_t>(i);
      response.totalSeq = static_cast<uint32_t>(chunks);
      const auto length = std::min<uint64_t>(chunkBytes, request.size - response.chunkOffset);
      {
        std::lock_guard lock(memoryMutex);
        const auto *base = static_cast<const uint8_t *>(slot->getPointer()) + request.offset + response.chunkOffset;
        response.data.assign(base, base + length);
      }
      sendData(requester, response.encode());
    }
  }

  void applyGetResponse(const wire::GetResponse &response)
  {
    PendingGet target;
    {
      std::lock_guard lock(stateMutex);
      const auto it = pendingGets.find(response.requestId);
      if (it == pendingGets.end()) raise(ErrorCode::protocolError, "response to an unknown get");
      target = it->second;
    }
    if (response.chunkOffset + response.data.size() > target.size) raise(ErrorCode::protocolError, "get response exceeds the requested range");
    if (!response.data.empty())
    {
      std::lock_guard lock(memoryMutex);
      std::memcpy(static_cast<uint8_t *>(target.destination->getPointer()) + target.destinationOffset + response.chunkOffset, response.data.data(), response.data.size());
    }

    bool complete = false;
    {
      std::lock_guard lock(stateMutex);
      const auto it = pendingGets.find(response.requestId);
      if (it == pendingGets.end()) return;
      complete = ++it->second.chunks == response.totalSeq;
    }
    if (complete) finishGet(response.requestId, std::nullopt);
  }

  void finishGet(uint64_t requestId, std::optional<ErrorCode> failure)
  {
    std::lock_guard lock(stateMutex);
    const auto it = pendingGets.find(requestId);
    if (it == pendingGets.end()) return;
    const auto tag = it->second.tag;
    pendingGets.erase(it);
    pendingGetsPerTag[tag]--;
    if (failure && !getFailures.contains(tag)) getFailures[tag] = *failure;
    stateCv.notify_all();
  }

  OutgoingPtr connectionTo(InstanceId peer)
  {
    std::lock_guard lock(connectionsMutex);
    if (stopping) raise(ErrorCode::peerUnreachable, "the runtime is shutting down");
    if (const auto it = outgoing.find(peer); it != outgoing.end()) return it->second;

    std::string address;
    InstanceId sender;
    {
      std::lock_guard state(stateMutex);
      const auto p = std::find_if(deployment.peers.begin(), deployment.peers.end(), [&](const PeerInfo &info) { return info.id == peer; });
      if (p == deployment.peers.end()) raise(ErrorCode::peerUnreachable, "instance " + std::to_string(peer) + " is not part of the deployment");
      address = p->address;
      sender = deployment.selfId;
    }

    auto connection = std::make_shared<Outgoing>();
    connection->peer = peer;
    connection->socket = Socket::connect(Address::parse(address), Clock::now() + config.connectTimeout);
    wire::Hello hello;
    hello.role = wire::HelloRole::data;
    hello.index = sender;
    connection->socket.writeFrame(hello.encode());
    connection->writer = std::thread([this, connection] { writeLoop(*connection); });
    outgoing[peer] = connection;
    return connection;
  }

  void writeLoop(Outgoing &connection)
  {
    std::unique_lock lock(connection.mutex);
    while (true)
    {
      connection.cv.wait(lock, [&] { return connection.stop || !connection.queue.empty(); });
      if (connection.queue.empty()) return;

      auto frame = std::move(connection.queue.front());
      connection.queue.pop_front();
      connection.writing = true;
      lock.unlock();
      bool failed = false;
      try
      {
        connection.socket.writeFrame(frame);
      }
      catch (const Exception &e)
      {
        std::fprintf(stderr, "[hicr-net] lost connection to instance %lu: %s\n", static_cast<unsigned long>(connection.peer), e.what());
        failed = true;
      }
      lock.lock();
      connection.writing = false;
      if (failed)
      {
        connection.broken = true;
        connection.queue.clear();
      }
      connection.cv.notify_all();
      if (failed)
      {
        lock.unlock();
        std::lock_guard state(stateMutex);
        stateCv.notify_all();
        return;
      }
    }
  }

  void enqueue(Outgoing &connection, wire::Frame frame)
  {
    std::lock_guard lock(connection.mutex);
    if (connection.broken) raise(ErrorCode::peerUnreachable, "connection to instance " + std::to_string(connection.peer) + " is broken");
    connection.queue.push_back(std::move(frame));
    connection.cv.notify_all();
  }

  void sendData(InstanceId peer, wire::Frame frame) { enqueue(*connectionTo(peer), std::move(frame)); }

  // ---- registered memory ----

  LocalSlotPtr lookup(uint64_t bufferId) const
  {
    std::lock_guard lock(registryMutex);
    const auto it = buffers.find(bufferId);
    return it == buffers.end() ? nullptr : it->second;
  }

  LocalSlotPtr lookupChecked(uint64_t bufferId, uint64_t offset, uint64_t size) const
  {
    auto slot = lookup(bufferId);
    if (slot == nullptr) raise(ErrorCode::invalidSlot, "buffer " + std::to_string(bufferId) + " is not registered");
    if (offset > slot->getSize() || size > slot->getSize() - offset) raise(ErrorCode::outOfBounds, "range exceeds buffer " + std::to_string(bufferId));
    return slot;
  }

  // ---- requests ----

  void dispatchRequest(InstanceId caller, uint64_t sequence, uint64_t nameHash, std::vector<uint8_t> argument)
  {
    Responder responder = [this, caller, sequence](uint8_t status, std::vector<uint8_t> payload) { respond(caller, sequence, status, std::move(payload)); };
    if (nameHash == lockAcquireHash || nameHash == lockReleaseHash)
    {
      serveLock(nameHash == lockAcquireHash, argument, std::move(responder));
      return;
    }

    RequestSink sink;
    {
      std::lock_guard lock(stateMutex);
      if (!requestSink)
      {
        heldRequests.emplace_back(caller, sequence, nameHash, std::move(argument));
        return;
      }
      sink = requestSink;
    }
    sink(caller, sequence, nameHash, std::move(argument));
  }

  void dispatchResponse(uint64_t sequence, uint8_t status, std::vector<uint8_t> payload)
  {
    if ((sequence & internalSequenceBit) != 0)
    {
      std::lock_guard lock(stateMutex);
      const auto it = waiters.find(sequence);
      if (it == waiters.end()) return; // its requester gave up
      it->second = Waiter{true, status, std::move(payload)};
      stateCv.notify_all();
      return;
    }
    ResponseSink sink;
    {
      std::lock_guard lock(stateMutex);
      sink = responseSink;
    }
    if (sink) sink(sequence, status, std::move(payload));
  }

  void respond(InstanceId caller, uint64_t sequence, uint8_t status, std::vector<uint8_t> payload)
  {
    if (caller == self())
      dispatchResponse(sequence, status, std::move(payload));
    else
      sendData(caller, wire::RpcResponse{sequence, status, std::move(payload)}.encode());
  }

  uint64_t openWaiter()
  {
    const auto sequence = nextInternalSequence.fetch_add(1);
    std::lock_guard lock(stateMutex);
    waiters[sequence] = Waiter{};
    return sequence;
  }

  std::optional<Waiter> awaitWaiter(uint64_t sequence, std::optional<Clock::time_point> deadline)
  {
    std::unique_lock lock(stateMutex);
    const auto ready = [&] { return waiters[sequence].done; };
    if (deadline)
      stateCv.wait_until(lock, *deadline, ready);
    else
      stateCv.wait(lock, ready);
    auto waiter = std::move(waiters[sequence]);
    waiters.erase(sequence);
    if (!waiter.done) return std::nullopt;
    return waiter;
  }

  Waiter internalRequest(InstanceId target, uint64_t nameHash, std::vector<uint8_t> argument)
  {
    const auto sequence = openWaiter();
    try
    {
      if (target == self())
        dispatchRequest(target, sequence, nameHash, std::move(argument));
      else
        sendData(target, wire::RpcRequest{sequence, nameHash, std::move(argument)}.encode());
    }
    catch (...)
    {
      std::lock_guard lock(stateMutex);
      waiters.erase(sequence);
      throw;
    }
    return *awaitWaiter(sequence, std::nullopt);
  }

  void serveLock(bool acquire, const std::vector<uint8_t> &argument, Responder responder)
  {
    const auto bufferId = decodeU64(argument);
    if (lookup(bufferId) == nullptr)
    {
      responder(2, {});
      return;
    }

    Responder next;
    {
      std::lock_guard lock(lockServiceMutex);
      auto &state = lockStates[bufferId];
      if (acquire)
      {
        if (state.held)
        {
          state.waiting.push_back(std::move(responder));
          return;
        }
        state.held = true;
      }
      else
      {
        if (!state.held)
        {
          responder(2, {});
          return;
        }
        if (state.waiting.empty())
          state.held = false;
        else
        {
          // Ownership passes straight to the next waiter
          next = std::move(state.waiting.front());
          state.waiting.pop_front();
        }
      }
    }
    if (next) next(0, {});
    responder(0, {});
  }

  // ---- teardown ----

  void flushWriters(Clock::time_point deadline)
  {
    std::vector<OutgoingPtr> connections;
    {
      std::lock_guard lock(connectionsMutex);
      for (const auto &[peer, c] : outgoing) connections.push_back(c);
    }
    for (const auto &c : connections)
    {
      std::unique_lock lock(c->mutex);
      c->cv.wait_until(lock, deadline, [&] { return c->broken || (c->queue.empty() && !c->writing); });
    }
  }

  void stopFlows()
  {
    if (flowsStopped) return;
    flowsStopped = true;

    control.shutdown();
    if (controlReader.joinable()) controlReader.join();
    control.close();
    if (coordinator) coordinator->stop(config.teardownTimeout);

    std::vector<OutgoingPtr> writers;
    std::vector<std::shared_ptr<Incoming>> readers;
    {
      std::lock_guard lock(connectionsMutex);
      stopping = true;
      for (const auto &[peer, c] : outgoing) writers.push_back(c);
      readers = incoming;
    }
    listener.shutdown();
    if (acceptor.joinable()) acceptor.join();

    for (const auto &c : writers)
    {
      {
        std::lock_guard lock(c->mutex);
        c->stop = true;
      }
      c->cv.notify_all();
      if (c->writer.joinable()) c->writer.join();
      c->socket.close();
    }
    for (const auto &c : readers) c->socket.shutdown();
    for (const auto &c : readers)
      if (c->reader.joinable()) c->reader.join();
    coordinator.reset();
  }
};

Runtime::Runtime(LaunchEnvironment environment, NetConfig config)
  : _impl(std::make_unique<Impl>(std::move(environment), std::move(config)))
{
  _impl->bootstrap();
}

Runtime::~Runtime()
{
  try
  {
    finalize();
  }
  catch (const std::exception &e)
  {
    std::fprintf(stderr, "[hicr-net] teardown: %s\n", e.what());
  }
}

DeploymentView Runtime::view() const
{
  std::lock_guard lock(_impl->stateMutex);
  return _impl->deployment;
}

InstanceId Runtime::selfId() const { return _impl->self(); }

bool Runtime::joinedAtRuntime() const { return _impl->environment.joinedAtRuntime; }

const NetConfig &Runtime::config() const { return _impl->config; }

uint64_t Runtime::registerBuffer(const LocalSlotPtr &slot)
{
  std::lock_guard lock(_impl->registryMutex);
  const auto id = _impl->nextBufferId++;
  _impl->buffers[id] = slot;
  return id;
}

void Runtime::deregisterBuffer(uint64_t bufferId)
{
  std::lock_guard lock(_impl->registryMutex);
  _impl->buffers.erase(bufferId);
}

LocalSlotPtr Runtime::lookupBuffer(uint64_t bufferId) const { return _impl->lookup(bufferId); }

std::mutex &Runtime::memoryMutex() { return _impl->memoryMutex; }

void Runtime::put(const RemoteBuffer &destination, uint64_t offset, Tag tag, std::span<const uint8_t> data)
{
  if (destination.owner == selfId())
  {
    const auto slot = _impl->lookupChecked(destination.bufferId, offset, data.size());
    std::lock_guard lock(_impl->memoryMutex);
    if (!data.empty()) std::memmove(static_cast<uint8_t *>(slot->getPointer()) + offset, data.data(), data.size());
    return;
  }

  const auto chunks = std::max<size_t>(1, (data.size() + chunkBytes - 1) / chunkBytes);
  std::vector<wire::Frame> frames;
  frames.reserve(chunks);
  for (size_t i = 0; i < chunks; i++)
  {
    wire::Put message;
    message.tag = tag;
    message.bufferId = destination.bufferId;
    message.offset = offset + i * chunkBytes;
    message.seq = static_cast<uint32_t>(i);
    message.totalSeq = static_cast<uint32_t>(chunks);
    const auto begin = std::min(data.size(), i * chunkBytes);
    const auto end = std::min(data.size(), begin + chunkBytes);
    message.data.assign(data.begin() + static_cast<std::ptrdiff_t>(begin), data.begin() + static_cast<std::ptrdiff_t>(end));
    frames.push_back(message.encode());
  }

  // Counting and enqueueing together keeps a concurrent fence's announced count behind its frames
  auto connection = _impl->connectionTo(destination.owner);
  std::lock_guard lock(connection->mutex);
  if (connection->broken) raise(ErrorCode::peerUnreachable, "connection to instance " + std::to_string(destination.owner) + " is broken");
  for (auto &f : frames) connection->queue.push_back(std::move(f));
  connection->putsSent[tag] += chunks;
  connection->cv.notify_all();
}

void Runtime::get(const LocalSlotPtr &destination, size_t destinationOffset, const RemoteBuffer &source, uint64_t offset, uint64_t size, Tag tag)
{
  if (source.owner == selfId())
  {
    const auto slot = _impl->lookupChecked(source.bufferId, offset, size);
    std::lock_guard lock(_impl->memoryMutex);
    if (size > 0) std::memmove(static_cast<uint8_t *>(destination->getPointer()) + destinationOffset, static_cast<const uint8_t *>(slot->getPointer()) + offset, size);
    return;
  }

  uint64_t requestId;
  {
    std::lock_guard lock(_impl->stateMutex);
    requestId = _impl->nextGetId++;
    _impl->pendingGets[requestId] = Impl::PendingGet{tag, destination, destinationOffset, size, 0};
    _impl->pendingGetsPerTag[tag]++;
  }
  try
  {
    _impl->sendData(source.owner, wire::GetRequest{tag, requestId, source.bufferId, offset, size}.encode());
  }
  catch (...)
  {
    std::lock_guard lock(_impl->stateMutex);
    _impl->pendingGets.erase(requestId);
    _impl->pendingGetsPerTag[tag]--;
    throw;
  }
}

void Runtime::fence(Tag tag, std::optional<std::chrono::milliseconds> timeout)
{
  auto &impl = *_impl;
  const auto deadline = timeout ? std::optional(Clock::now() + *timeout) : std::nullopt;

  std::vector<Impl::OutgoingPtr> connections;
  {
    std::lock_guard lock(impl.connectionsMutex);
    for (const auto &[peer, c] : impl.outgoing) connections.push_back(c);
  }
  std::map<std::pair<InstanceId, Tag>, uint64_t> confirmed;
  {
    std::lock_guard lock(impl.stateMutex);
    confirmed = impl.putsConfirmed;
  }

  std::vector<Impl::FenceWait> waits;
  for (const auto &c : connections)
  {
    std::lock_guard lock(c->mutex);
    const auto sent = c->putsSent.find(tag);
    if (sent == c->putsSent.end() || sent->second <= confirmed[{c->peer, tag}]) continue;
    if (c->broken) raise(ErrorCode::peerUnreachable, "connection to instance " + std::to_string(c->peer) + " is broken");

    const auto fenceId = impl.nextFenceId.fetch_add(1);
    c->queue.push_back(wire::FenceToken{wire::FenceKind::request, tag, fenceId, sent->second, 0}.encode());
    c->cv.notify_all();
    waits.push_back(Impl::FenceWait{c->peer, tag, fenceId, sent->second});
  }

  std::unique_lock lock(impl.stateMutex);
  std::optional<InstanceId> lostPeer;
  const auto done = [&] {
    for (const auto &c : connections)
    {
      if (c->broken && std::any_of(waits.begin(), waits.end(), [&](const auto &w) { return w.peer == c->peer && !impl.fenceReplies.contains(w.fenceId); }))
      {
        lostPeer = c->peer;
        return true;
      }
    }
    if (impl.pendingGetsPerTag[tag] > 0) return false;
    return std::all_of(waits.begin(), waits.end(), [&](const auto &w) { return impl.fenceReplies.contains(w.fenceId); });
  };
  const bool completed = deadline ? impl.stateCv.wait_until(lock, *deadline, done) : (impl.stateCv.wait(lock, done), true);
  if (lostPeer) raise(ErrorCode::peerUnreachable, "instance " + std::to_string(*lostPeer) + " became unreachable during a fence");
  if (!completed) raise(ErrorCode::timeout, "fence on tag " + std::to_string(tag) + " timed out");

  uint64_t rejected = 0;
  for (const auto &w : waits)
  {
    const auto reply = impl.fenceReplies[w.fenceId];
    impl.fenceReplies.erase(w.fenceId);
    auto &c = impl.putsConfirmed[{w.peer, tag}];
    c = std::max(c, w.expected);
    auto &reported = impl.rejectionsReported[{w.peer, tag}];
    if (reply.errors > reported)
    {
      rejected += reply.errors - reported;
      reported = reply.errors;
    }
  }
  if (const auto failure = impl.getFailures.find(tag); failure != impl.getFailures.end())
  {
    const auto code = failure->second;
    impl.getFailures.erase(failure);
    raise(code, "a get under tag " + std::to_string(tag) + " was rejected by its source");
  }
  if (rejected > 0) raise(ErrorCode::outOfBounds, std::to_string(rejected) + " put(s) under tag " + std::to_string(tag) + " were rejected by their destination");
}

std::vector<GatheredEntry> Runtime::exchange(Tag tag, const std::vector<std::pair<Key, LocalSlotPtr>> &contributions)
{
  auto &impl = *_impl;
  wire::ExchangeGather gather;
  gather.tag = tag;
  std::vector<uint64_t> registered;
  for (const auto &[key, slot] : contributions)
  {
    const auto id = registerBuffer(slot);
    registered.push_back(id);
    gather.entries.push_back(wire::ExchangeEntry{key, 0, slot->getSize(), id});
  }
  const auto withdraw = [&] {
    for (const auto id : registered) deregisterBuffer(id);
  };

  try
  {
    impl.sendControl(gather.encode());
  }
  catch (...)
  {
    withdraw();
    throw;
  }

  std::unique_lock lock(impl.stateMutex);
  const bool arrived = impl.stateCv.wait_for(lock, impl.config.collectiveTimeout, [&] { return !impl.tables[tag].empty() || impl.controlClosed; });
  if (!arrived || impl.tables[tag].empty())
  {
    lock.unlock();
    withdraw();
    raise(ErrorCode::collectiveMismatch, "exchange on tag " + std::to_string(tag) + " did not complete; not every instance took part");
  }
  auto table = std::move(impl.tables[tag].front());
  impl.tables[tag].pop_front();
  lock.unlock();

  if (table.status == wire::ExchangeStatus::duplicateKey)
  {
    withdraw();
    raise(ErrorCode::duplicateKey, table.message);
  }

  std::vector<GatheredEntry> result;
  for (const auto &e : table.entries) result.push_back(GatheredEntry{e.key, e.owner, e.size, e.bufferId});
  return result;
}

void Runtime::lock(const RemoteBuffer &buffer)
{
  const auto response = _impl->internalRequest(buffer.owner, lockAcquireHash, encodeU64(buffer.bufferId));
  if (response.status != 0) raise(ErrorCode::invalidSlot, "lock target is not registered at its owner");
}

void Runtime::unlock(const RemoteBuffer &buffer)
{
  const auto response = _impl->internalRequest(buffer.owner, lockReleaseHash, encodeU64(buffer.bufferId));
  if (response.status != 0) raise(ErrorCode::invalidArgument, "unlock of a lock that is not held");
}

void Runtime::setApplicationSinks(RequestSink requests, ResponseSink responses)
{
  decltype(_impl->heldRequests) held;
  {
    std::lock_guard lock(_impl->stateMutex);
    _impl->requestSink = requests;
    _impl->responseSink = std::move(responses);
    std::swap(held, _impl->heldRequests);
  }
  for (auto &[caller, sequence, hash, argument] : held) requests(caller, sequence, hash, std::move(argument));
}

void Runtime::sendRequest(InstanceId target, uint64_t sequence, uint64_t nameHash, std::vector<uint8_t> argument)
{
  if (target == selfId())
    _impl->dispatchRequest(target, sequence, nameHash, std::move(argument));
  else
    _impl->sendData(target, wire::RpcRequest{sequence, nameHash, std::move(argument)}.encode());
}

void Runtime::sendResponse(InstanceId caller, uint64_t sequence, uint8_t status, std::vector<uint8_t> payload) { _impl->respond(caller, sequence, status, std::move(payload)); }

std::vector<InstanceId> Runtime::spawn(size_t count, const InstanceTemplate &instanceTemplate)
{
  auto &impl = *_impl;
  const auto ticket = (selfId() << 32) | (impl.spawnCounter.fetch_add(1) + 1);
  auto coordinatorAddress = impl.environment.coordinatorAddress;
  if (const auto it = instanceTemplate.metadata.find("hicr.coordAddressOverride"); it != instanceTemplate.metadata.end()) coordinatorAddress = it->second;

  // Register the ticket before any child can present it
  wire::Writer argument;
  argument.u64(ticket).u64(count).text(serializeTopology(instanceTemplate.requiredTopology)).u64(static_cast<uint64_t>(impl.config.spawnTimeout.count()));
  const auto sequence = impl.openWaiter();
  impl.sendControl(wire::RpcRequest{sequence, spawnServiceHash(), argument.take()}.encode());

  const auto args = ownCommandLine();
  std::vector<std::string> environment;
  for (char **e = environ; *e != nullptr; e++)
    if (std::strncmp(*e, "HICR_", 5) != 0) environment.emplace_back(*e);
  environment.push_back("HICR_INSTANCE_INDEX=0");
  environment.push_back("HICR_INSTANCE_COUNT=" + std::to_string(impl.environment.count));
  environment.push_back("HICR_COORD_ADDR=" + coordinatorAddress);
  environment.push_back("HICR_JOINED_AT_RUNTIME=1");
  environment.push_back("HICR_SPAWN_TICKET=" + std::to_string(ticket));

  std::vector<char *> argv;
  for (const auto &a : args) argv.push_back(const_cast<char *>(a.c_str()));
  argv.push_back(nullptr);
  std::vector<char *> envp;
  for (const auto &e : environment) envp.push_back(const_cast<char *>(e.c_str()));
  envp.push_back(nullptr);

  std::vector<pid_t> launched;
  for (size_t i = 0; i < count; i++)
  {
    pid_t pid;
    const int status = args.empty() ? ENOENT : posix_spawn(&pid, "/proc/self/exe", nullptr, nullptr, argv.data(), envp.data());
    if (status != 0)
    {
      reap(launched, true);
      std::lock_guard lock(impl.stateMutex);
      impl.waiters.erase(sequence);
      raise(ErrorCode::spawnFailure, std::string("cannot start a new process: ") + std::strerror(status));
    }
    launched.push_back(pid);
  }

  // The coordinator enforces spawnTimeout; the margin only covers a lost coordinator
  const auto response = impl.awaitWaiter(sequence, Clock::now() + impl.config.spawnTimeout + std::chrono::seconds(5));
  if (!response)
  {
    reap(launched, true);
    raise(ErrorCode::spawnFailure, "no answer from the coordinator");
  }
  if (response->status != 0)
  {
    reap(launched, true);
    wire::Reader r(response->payload);
    const auto code = r.u8();
    const auto message = r.text();
    raise(code == 1 ? ErrorCode::templateUnsatisfiable : ErrorCode::spawnFailure, message);
  }

  {
    std::lock_guard lock(impl.childrenMutex);
    impl.children.insert(impl.children.end(), launched.begin(), launched.end());
  }
  wire::Reader r(response->payload);
  std::vector<InstanceId> ids(r.u32());
  for (auto &id : ids) id = r.u64();
  return ids;
}

void Runtime::finalize()
{
  auto &impl = *_impl;
  if (impl.finalized) return;
  impl.finalized = true;

  const auto deadline = Clock::now() + impl.config.teardownTimeout;
  impl.flushWriters(deadline);
  try
  {
    impl.sendControl(wire::Bye{}.encode());
    std::unique_lock lock(impl.stateMutex);
    if (!impl.stateCv.wait_until(lock, deadline, [&] { return impl.byeReceived || impl.controlClosed; }))
      std::fprintf(stderr, "[hicr-net] teardown: not every instance finalized in time\n");
  }
  catch (const Exception &e)
  {
    std::fprintf(stderr, "[hicr-net] teardown: %s\n", e.what());
  }
  impl.stopFlows();

  std::vector<pid_t> children;
  {
    std::lock_guard lock(impl.childrenMutex);
    std::swap(children, impl.children);
  }
  reap(children, false);
}

} // namespace hicr::backend::net
