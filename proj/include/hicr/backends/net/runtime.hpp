// SPDX-License-Identifier: Apache-2.0

/**
 * @file runtime.hpp
 * @brief Per-process state of the TCP backend: bootstrap, peer connections, progress service and teardown
 */

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <hicr/core/definitions.hpp>
#include <hicr/core/instanceManager.hpp>
#include <hicr/core/memorySlot.hpp>
#include <hicr/core/topology.hpp>

namespace hicr::backend::net
{

/**
 * What the launcher (or a spawning instance) tells a process through its environment:
 * HICR_INSTANCE_INDEX, HICR_INSTANCE_COUNT, HICR_COORD_ADDR, HICR_JOINED_AT_RUNTIME and, for runtime-joined
 * processes, HICR_SPAWN_TICKET.
 */
struct LaunchEnvironment
{
  uint64_t index = 0;
  uint64_t count = 1;
  std::string coordinatorAddress;
  bool joinedAtRuntime = false;
  uint64_t spawnTicket = 0;

  /// Throws MissingEnvironment when a required variable is absent or malformed
  static LaunchEnvironment fromEnvironment();
  /// Whether the launcher variables are present at all
  static bool present();
};

struct NetConfig
{
  /// Bound on establishing any single connection; PeerUnreachable (or BootstrapTimeout for the coordinator) after it
  std::chrono::milliseconds connectTimeout{10000};
  /// Bound on the whole bootstrap, including waiting for the other launch-time instances
  std::chrono::milliseconds bootstrapTimeout{30000};
  /// Bound on one collective exchange; CollectiveMismatch after it
  std::chrono::milliseconds collectiveTimeout{60000};
  /// Bound on a spawn request, from launching the processes to every one of them being admitted
  std::chrono::milliseconds spawnTimeout{20000};
  /// Bound on the teardown handshake
  std::chrono::milliseconds teardownTimeout{30000};
  /// Topology reported by a runtime-joined process; defaults to the host's own discovery
  std::function<Topology()> topologySource;
};

struct PeerInfo
{
  InstanceId id = 0;
  std::string address;
  bool operator==(const PeerInfo &) const = default;
};

struct DeploymentView
{
  InstanceId selfId = 0;
  InstanceId rootId = 0;
  /// Ordered by id; only ever grows
  std::vector<PeerInfo> peers;
  bool operator==(const DeploymentView &) const = default;
};

/// Everything a peer needs to reach a registered buffer
struct RemoteBuffer
{
  InstanceId owner = 0;
  uint64_t bufferId = 0;
  uint64_t size = 0;
};

struct GatheredEntry
{
  Key key = 0;
  InstanceId owner = 0;
  uint64_t size = 0;
  uint64_t bufferId = 0;
};

/**
 * One per process. Launch index 0 additionally hosts the coordinator, which admits instances, serves collectives and
 * spawn requests, and orders teardown.
 *
 * Peer connections open lazily. Each process sends only on connections it opened, through one writer flow per peer,
 * and receives on connections it accepted, through one reader flow per peer; those readers are the progress service
 * that applies incoming puts and answers gets without application involvement.
 */
class Runtime
{
  public:

  /// Performs the bootstrap; throws BootstrapTimeout, or IoFailure when the coordinator address cannot be bound
  explicit Runtime(LaunchEnvironment environment, NetConfig config = {});
  ~Runtime();

  Runtime(const Runtime &) = delete;
  Runtime &operator=(const Runtime &) = delete;

  [[nodiscard]] DeploymentView view() const;
  [[nodiscard]] InstanceId selfId() const;
  [[nodiscard]] bool joinedAtRuntime() const;
  [[nodiscard]] const NetConfig &config() const;

  /// Buffers are what remote puts and gets address
  uint64_t registerBuffer(const LocalSlotPtr &slot);
  void deregisterBuffer(uint64_t bufferId);
  [[nodiscard]] LocalSlotPtr lookupBuffer(uint64_t bufferId) const;

  /// Held while bytes of registered buffers are written by the progress service
  [[nodiscard]] std::mutex &memoryMutex();

  /// The bytes are captured before returning
  void put(const RemoteBuffer &destination, uint64_t offset, Tag tag, std::span<const uint8_t> data);
  void get(const LocalSlotPtr &destination, size_t destinationOffset, const RemoteBuffer &source, uint64_t offset, uint64_t size, Tag tag);

  /// Completes this process's puts and gets under the tag; surfaces rejections reported by their targets
  void fence(Tag tag, std::optional<std::chrono::milliseconds> timeout);

  /// Registers the slots, runs the collective and returns the agreed table ordered by key
  std::vector<GatheredEntry> exchange(Tag tag, const std::vector<std::pair<Key, LocalSlotPtr>> &contributions);

  void lock(const RemoteBuffer &buffer);
  void unlock(const RemoteBuffer &buffer);

  // Request/response transport for the instance manager. Requests arriving before the sinks are set are held.
  using RequestSink = std::function<void(InstanceId caller, uint64_t sequence, uint64_t nameHash, std::vector<uint8_t> argument)>;
  using ResponseSink = std::function<void(uint64_t sequence, uint8_t status, std::vector<uint8_t> payload)>;
  void setApplicationSinks(RequestSink requests, ResponseSink responses);
  void sendRequest(InstanceId target, uint64_t sequence, uint64_t nameHash, std::vector<uint8_t> argument);
  void sendResponse(InstanceId caller, uint64_t sequence, uint8_t status, std::vector<uint8_t> payload);

  /**
   * Starts `count` copies of the current program marked as runtime-joined and returns their ids once the coordinator
   * admitted all of them. Throws TemplateUnsatisfiable when a new process reports a topology that misses the template,
   * SpawnFailure when they cannot all be admitted in time.
   *
   * Template metadata "hicr.coordAddressOverride" replaces the coordinator address handed to the children.
   */
  std::vector<InstanceId> spawn(size_t count, const InstanceTemplate &instanceTemplate);

  /// Collective teardown; every instance must call it (the destructor does). Idempotent.
  void finalize();

  private:

  struct Impl;
  std::unique_ptr<Impl> _impl;
};

} // namespace hicr::backend::net
