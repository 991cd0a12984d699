// SPDX-License-Identifier: Apache-2.0

#include <hicr/backends/host/instanceManager.hpp>
#include <hicr/core/exceptions.hpp>

namespace hicr::backend::host
{

InstanceManager::InstanceManager(Topology localTopology, InstanceId currentInstance)
  : _localTopology(std::move(localTopology)),
    _self(currentInstance)
{}

std::vector<Instance> InstanceManager::spawn(size_t, const InstanceTemplate &instanceTemplate)
{
  if (!satisfies(_localTopology, instanceTemplate.requiredTopology)) raise(ErrorCode::templateUnsatisfiable, "this host cannot provide the required topology");
  raise(ErrorCode::spawnFailure, "a single-process deployment cannot create instances");
}

void InstanceManager::transmitRequest(InstanceId, uint64_t sequence, uint64_t nameHash, const std::vector<uint8_t> &argument)
{
  deliverRequest(RpcRequest{_self, sequence, nameHash, argument});
}

void InstanceManager::transmitResponse(InstanceId, uint64_t sequence, RpcStatus status, const std::vector<uint8_t> &payload)
{
  deliverResponse(sequence, status, payload);
}

} // namespace hicr::backend::host
