// SPDX-License-Identifier: Apache-2.0

/**
 * @file rpcEngine.hpp
 * @brief Named remote procedure calls on top of an instance manager
 */

#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <hicr/core/instanceManager.hpp>

namespace hicr::rpc
{

/**
 * Functions are registered under a name and addressed on the wire by its FNV-1a 64-bit hash.
 *
 * The target serves requests only while listening: each listen() call executes exactly one request, inline on the
 * listening flow, and sends back the function's return bytes. Requests that arrive while nobody listens are queued.
 * requestRpc may be called from several flows at once.
 */
class RpcEngine
{
  public:

  using Function = std::function<std::vector<uint8_t>(const std::vector<uint8_t> &argument)>;

  explicit RpcEngine(InstanceManager &instances);

  /// Throws InvalidArgument (empty name), DuplicateName, or HashCollision (with another name or a reserved service)
  void registerRpc(const std::string &name, Function function);

  [[nodiscard]] bool isRegistered(const std::string &name) const;
  [[nodiscard]] std::vector<std::string> registeredNames() const;

  /**
   * Serves one request and returns 1. Requests for unknown names are answered with an error and do not count; listen
   * keeps waiting. A function that throws is answered with an error carrying the exception text.
   */
  size_t listen();

  /// Throws RpcUnknownName, RpcFailed, PeerUnreachable or RpcTimeout
  std::vector<uint8_t> requestRpc(InstanceId target, const std::string &name, const std::vector<uint8_t> &argument);

  void setTimeout(std::optional<std::chrono::milliseconds> timeout) { _timeout = timeout; }

  /// Hashes used by backends and frontends for their own services; never usable as RPC names
  static bool isReservedHash(uint64_t hash);

  private:

  struct Entry
  {
    std::string name;
    Function function;
  };

  InstanceManager &_instances;
  mutable std::mutex _mutex;
  std::map<uint64_t, Entry> _table;
  std::optional<std::chrono::milliseconds> _timeout;
};

} // namespace hicr::rpc
