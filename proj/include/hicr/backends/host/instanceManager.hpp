// SPDX-License-Identifier: Apache-2.0

/**
 * @file instanceManager.hpp
 * @brief Instance manager for a single-process deployment
 */

#pragma once

#include <hicr/core/instanceManager.hpp>

namespace hicr::backend::host
{

/**
 * The deployment is the current process alone: one root instance. Requests addressed to it are delivered in-process,
 * so RPC and services work unchanged. No further instances can be created.
 */
class InstanceManager final : public hicr::InstanceManager
{
  public:

  /// `localTopology` is what a template is checked against
  explicit InstanceManager(Topology localTopology, InstanceId currentInstance = 0);

  [[nodiscard]] std::vector<Instance> getInstances() const override { return {getCurrentInstance()}; }
  [[nodiscard]] Instance getCurrentInstance() const override { return Instance{_self, true, InstanceState::active}; }

  protected:

  /// TemplateUnsatisfiable when this host could never satisfy the template, SpawnFailure otherwise
  std::vector<Instance> spawn(size_t count, const InstanceTemplate &instanceTemplate) override;

  [[nodiscard]] bool isReachable(InstanceId target) const override { return target == _self; }
  void transmitRequest(InstanceId target, uint64_t sequence, uint64_t nameHash, const std::vector<uint8_t> &argument) override;
  void transmitResponse(InstanceId caller, uint64_t sequence, RpcStatus status, const std::vector<uint8_t> &payload) override;

  private:

  const Topology _localTopology;
  const InstanceId _self;
};

} // namespace hicr::backend::host
