// SPDX-License-Identifier: Apache-2.0

/**
 * @file instanceManager.hpp
 * @brief Instance manager over the TCP runtime: launcher-started and spawned processes
 */

#pragma once

#include <memory>

#include <hicr/backends/net/runtime.hpp>
#include <hicr/core/instanceManager.hpp>

namespace hicr::backend::net
{

/**
 * Instances are the processes in the runtime's peer table; the root is launch index 0. createInstances starts new
 * copies of the current program, which find out they were runtime-joined through Runtime::joinedAtRuntime().
 */
class InstanceManager final : public hicr::InstanceManager
{
  public:

  explicit InstanceManager(std::shared_ptr<Runtime> runtime);
  ~InstanceManager() override;

  [[nodiscard]] std::vector<Instance> getInstances() const override;
  [[nodiscard]] Instance getCurrentInstance() const override;
  [[nodiscard]] Runtime &getRuntime() const { return *_runtime; }

  /// Collective teardown of the whole deployment
  void finalize() override { _runtime->finalize(); }

  protected:

  std::vector<Instance> spawn(size_t count, const InstanceTemplate &instanceTemplate) override;

  [[nodiscard]] bool isReachable(InstanceId target) const override;
  void transmitRequest(InstanceId target, uint64_t sequence, uint64_t nameHash, const std::vector<uint8_t> &argument) override;
  void transmitResponse(InstanceId caller, uint64_t sequence, RpcStatus status, const std::vector<uint8_t> &payload) override;

  private:

  const std::shared_ptr<Runtime> _runtime;
};

} // namespace hicr::backend::net
