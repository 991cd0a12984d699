// SPDX-License-Identifier: Apache-2.0

/**
 * @file instanceManager.hpp
 * @brief Instances, instance templates and the abstract instance manager
 */

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <hicr/core/definitions.hpp>
#include <hicr/core/topology.hpp>

namespace hicr
{

enum class InstanceState
{
  active,
  finalized
};

/**
 * An independently executing participant of a deployment. Exactly one instance is root.
 */
struct Instance
{
  InstanceId id = 0;
  bool root = false;
  InstanceState state = InstanceState::active;

  [[nodiscard]] bool isRoot() const { return root; }
  bool operator==(const Instance &) const = default;
};

/**
 * Minimum hardware a newly created instance must offer, plus free-form metadata.
 */
struct InstanceTemplate
{
  Topology requiredTopology;
  std::map<std::string, std::string> metadata;
};

enum class RpcStatus : uint8_t
{
  ok = 0,
  unknownName = 1,
  failed = 2,
};

/**
 * A request waiting to be served by a listener.
 */
struct RpcRequest
{
  InstanceId caller = 0;
  uint64_t sequence = 0;
  uint64_t nameHash = 0;
  std::vector<uint8_t> argument;
};

struct RpcResponse
{
  RpcStatus status = RpcStatus::ok;
  std::vector<uint8_t> payload;
};

/**
 * Detects, lists and creates instances, and carries request/response messages between them.
 *
 * Request messages are either queued for an explicit listener (the RPC frontend) or, when their name hash belongs to a
 * registered service, answered by the backend's own progress flow. Services let frontends resolve metadata on a peer
 * without the peer's application code taking part.
 */
class InstanceManager
{
  public:

  /// Called on the progress flow; must not block. The responder may be invoked later from any flow, exactly once.
  using Responder = std::function<void(RpcStatus status, std::vector<uint8_t> payload)>;
  using ServiceHandler = std::function<void(InstanceId caller, std::vector<uint8_t> argument, Responder respond)>;

  virtual ~InstanceManager() = default;

  /// Every instance known so far, launch-time and runtime-created, ordered by id
  [[nodiscard]] virtual std::vector<Instance> getInstances() const = 0;
  [[nodiscard]] virtual Instance getCurrentInstance() const = 0;

  [[nodiscard]] InstanceTemplate createInstanceTemplate(Topology requiredTopology, std::map<std::string, std::string> metadata = {}) const;

  /**
   * Creates `count` (≥ 1) new non-root instances whose topologies satisfy the template.
   * Throws TemplateUnsatisfiable or SpawnFailure.
   */
  std::vector<Instance> createInstances(size_t count, const InstanceTemplate &instanceTemplate);

  /// Sends a request and returns its sequence number; throws PeerUnreachable for an unknown target
  uint64_t sendRequest(InstanceId target, uint64_t nameHash, const std::vector<uint8_t> &argument);

  /// Blocks until the response to `sequence` arrives; throws RpcTimeout when the timeout elapses first
  RpcResponse awaitResponse(uint64_t sequence, std::optional<std::chrono::milliseconds> timeout = std::nullopt);

  /// sendRequest followed by awaitResponse
  RpcResponse request(InstanceId target, uint64_t nameHash, const std::vector<uint8_t> &argument, std::optional<std::chrono::milliseconds> timeout = std::nullopt);

  /// Blocks until a non-service request is queued and removes it; requests are served in arrival order
  RpcRequest nextRequest();

  void respond(const RpcRequest &request, RpcStatus status, const std::vector<uint8_t> &payload);

  /// Throws DuplicateName when the hash already has a service
  void registerService(uint64_t nameHash, ServiceHandler handler);
  [[nodiscard]] bool isService(uint64_t nameHash) const;
  /// Later requests under the hash are queued for a listener again; a handler already running is unaffected
  void unregisterService(uint64_t nameHash);

  /// Leaves the deployment; further communication is undefined
  virtual void finalize() {}

  protected:

  virtual std::vector<Instance> spawn(size_t count, const InstanceTemplate &instanceTemplate) = 0;

  /// Whether a request can be addressed to this instance
  [[nodiscard]] virtual bool isReachable(InstanceId target) const = 0;

  virtual void transmitRequest(InstanceId target, uint64_t sequence, uint64_t nameHash, const std::vector<uint8_t> &argument) = 0;
  virtual void transmitResponse(InstanceId caller, uint64_t sequence, RpcStatus status, const std::vector<uint8_t> &payload) = 0;

  /// Backends call these when a message arrives
  void deliverRequest(RpcRequest request);
  void deliverResponse(uint64_t sequence, RpcStatus status, std::vector<uint8_t> payload);

  private:

  std::atomic<uint64_t> _nextSequence{1};

  mutable std::mutex _mutex;
  std::condition_variable _requestCv;
  std::condition_variable _responseCv;
  std::deque<RpcRequest> _pendingRequests;
  std::unordered_map<uint64_t, RpcResponse> _responses;
  std::unordered_map<uint64_t, ServiceHandler> _services;
};

} // namespace hicr
