// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <hicr/backends/net/wire.hpp>
#include <hicr/core/definitions.hpp>
#include <hicr/core/topology.hpp>

#include "socket.hpp"

namespace hicr::backend::net
{

/// Name hash of the spawn request a member sends to the coordinator over its control connection
uint64_t spawnServiceHash();

/**
 * Runs inside launch index 0. Every process, including index 0 itself, holds one control connection to it.
 *
 * Admission: launch-time processes get their launch index as id; the peer table goes out once all of them said HELLO.
 * Runtime-joined processes present a spawn ticket and a topology report; a ticket's processes are admitted together,
 * with fresh ids, once all of them passed the template check.
 *
 * Collectives: the k-th gather a member sends under a tag belongs to the k-th round of that tag. A round completes when
 * every current member contributed; the table is then sent to all of them.
 *
 * Teardown: after every member sent BYE, each gets BYE back.
 */
class Coordinator
{
  public:

  Coordinator(const Address &address, uint64_t launchCount);
  ~Coordinator();

  /// Waits (bounded) for the members to close their control connections, then stops all flows
  void stop(std::chrono::milliseconds grace);

  private:

  struct Connection
  {
    Socket socket;
    std::mutex writeMutex;
    std::thread reader;
    bool closed = false;

    // Set once HELLO arrived
    bool hello = false;
    bool joined = false;
    uint64_t launchIndex = 0;
    uint64_t ticket = 0;
    std::string dataAddress;
    std::optional<InstanceId> id;
    std::optional<Topology> reportedTopology;
  };
  using ConnectionPtr = std::shared_ptr<Connection>;

  struct Round
  {
    std::map<InstanceId, std::vector<wire::ExchangeEntry>> contributions;
  };

  struct Ticket
  {
    ConnectionPtr requester;
    uint64_t rpcSequence = 0;
    uint64_t count = 0;
    Topology required;
    std::chrono::steady_clock::time_point deadline;
    std::vector<ConnectionPtr> admitted;
    bool done = false;
  };

  void acceptLoop();
  void readLoop(const ConnectionPtr &connection);
  void handle(const ConnectionPtr &connection, const wire::Frame &frame);
  void watchdogLoop();

  // The following run with _mutex held
  void onHello(const ConnectionPtr &connection, const wire::Hello &hello);
  void onTopologyReport(const ConnectionPtr &connection, const wire::TopologyReport &report);
  void onSpawnRequest(const ConnectionPtr &connection, const wire::RpcRequest &request);
  void onGather(const ConnectionPtr &connection, const wire::ExchangeGather &gather);
  void onBye(const ConnectionPtr &connection);
  void evaluateCandidate(const ConnectionPtr &candidate, Ticket &ticket);
  void failTicket(Ticket &ticket, uint8_t code, const std::string &message);
  void completeRounds(uint64_t tag);
  void broadcastPeerTable();

  static void send(Connection &connection, const wire::Frame &frame);

  const uint64_t _launchCount;
  Socket _listener;
  std::thread _acceptor;
  std::thread _watchdog;

  std::mutex _mutex;
  std::condition_variable _cv;
  bool _stopping = false;
  std::vector<ConnectionPtr> _connections;
  std::map<InstanceId, ConnectionPtr> _members;
  InstanceId _nextId;
  bool _tablePublished = false;
  std::map<uint64_t, std::deque<Round>> _rounds;
  std::map<uint64_t, Ticket> _tickets;
  /// Joined processes whose ticket is not known yet
  std::vector<ConnectionPtr> _waitingCandidates;
  std::map<InstanceId, bool> _byes;
};

} // namespace hicr::backend::net
