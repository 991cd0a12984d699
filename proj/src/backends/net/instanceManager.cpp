// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include <hicr/backends/net/instanceManager.hpp>
#include <hicr/core/exceptions.hpp>

namespace hicr::backend::net
{

InstanceManager::InstanceManager(std::shared_ptr<Runtime> runtime)
  : _runtime(std::move(runtime))
{
  if (_runtime == nullptr) raise(ErrorCode::invalidArgument, "null runtime");
  _runtime->setApplicationSinks(
    [this](InstanceId caller, uint64_t sequence, uint64_t nameHash, std::vector<uint8_t> argument) {
      deliverRequest(RpcRequest{caller, sequence, nameHash, std::move(argument)});
    },
    [this](uint64_t sequence, uint8_t status, std::vector<uint8_t> payload) { deliverResponse(sequence, static_cast<RpcStatus>(status), std::move(payload)); });
}

InstanceManager::~InstanceManager() { _runtime->setApplicationSinks(nullptr, nullptr); }

std::vector<Instance> InstanceManager::getInstances() const
{
  const auto view = _runtime->view();
  std::vector<Instance> instances;
  for (const auto &p : view.peers) instances.push_back(Instance{p.id, p.id == view.rootId, InstanceState::active});
  return instances;
}

Instance InstanceManager::getCurrentInstance() const
{
  const auto view = _runtime->view();
  return Instance{view.selfId, view.selfId == view.rootId, InstanceState::active};
}

std::vector<Instance> InstanceManager::spawn(size_t count, const InstanceTemplate &instanceTemplate)
{
  std::vector<Instance> created;
  for (const auto id : _runtime->spawn(count, instanceTemplate)) created.push_back(Instance{id, false, InstanceState::active});
  return created;
}

bool InstanceManager::isReachable(InstanceId target) const
{
  const auto view = _runtime->view();
  return std::any_of(view.peers.begin(), view.peers.end(), [&](const PeerInfo &p) { return p.id == target; });
}

void InstanceManager::transmitRequest(InstanceId target, uint64_t sequence, uint64_t nameHash, const std::vector<uint8_t> &argument)
{
  _runtime->sendRequest(target, sequence, nameHash, argument);
}

void InstanceManager::transmitResponse(InstanceId caller, uint64_t sequence, RpcStatus status, const std::vector<uint8_t> &payload)
{
  _runtime->sendResponse(caller, sequence, static_cast<uint8_t>(status), payload);
}

} // namespace hicr::backend::net
