// SPDX-License-Identifier: Apache-2.0

#include <string>

#include <hicr/core/exceptions.hpp>
#include <hicr/core/instanceManager.hpp>

namespace hicr
{

InstanceTemplate InstanceManager::createInstanceTemplate(Topology requiredTopology, std::map<std::string, std::string> metadata) const
{
  requiredTopology.validate();
  return InstanceTemplate{std::move(requiredTopology), std::move(metadata)};
}

std::vector<Instance> InstanceManager::createInstances(size_t count, const InstanceTemplate &instanceTemplate)
{
  if (count == 0) raise(ErrorCode::invalidArgument, "instance count must be at least 1");
  auto created = spawn(count, instanceTemplate);
  if (created.size() != count) raise(ErrorCode::spawnFailure, "created " + std::to_string(created.size()) + " of " + std::to_string(count) + " instances");
  return created;
}

uint64_t InstanceManager::sendRequest(InstanceId target, uint64_t nameHash, const std::vector<uint8_t> &argument)
{
  if (!isReachable(target)) raise(ErrorCode::peerUnreachable, "instance " + std::to_string(target) + " is not part of the deployment");
  const auto sequence = _nextSequence.fetch_add(1, std::memory_order_relaxed);
  transmitRequest(target, sequence, nameHash, argument);
  return sequence;
}

RpcResponse InstanceManager::awaitResponse(uint64_t sequence, std::optional<std::chrono::milliseconds> timeout)
{
  std::unique_lock lock(_mutex);
  const auto ready = [&] { return _responses.contains(sequence); };
  if (timeout)
  {
    if (!_responseCv.wait_for(lock, *timeout, ready)) raise(ErrorCode::rpcTimeout, "no response to request " + std::to_string(sequence));
  }
  else
    _responseCv.wait(lock, ready);

  auto node = _responses.extract(sequence);
  return std::move(node.mapped());
}

RpcResponse InstanceManager::request(InstanceId target, uint64_t nameHash, const std::vector<uint8_t> &argument, std::optional<std::chrono::milliseconds> timeout)
{
  return awaitResponse(sendRequest(target, nameHash, argument), timeout);
}

RpcRequest InstanceManager::nextRequest()
{
  std::unique_lock lock(_mutex);
  _requestCv.wait(lock, [&] { return !_pendingRequests.empty(); });
  auto request = std::move(_pendingRequests.front());
  _pendingRequests.pop_front();
  return request;
}

void InstanceManager::respond(const RpcRequest &request, RpcStatus status, const std::vector<uint8_t> &payload)
{
  transmitResponse(request.caller, request.sequence, status, payload);
}

void InstanceManager::registerService(uint64_t nameHash, ServiceHandler handler)
{
  std::lock_guard lock(_mutex);
  if (!_services.emplace(nameHash, std::move(handler)).second) raise(ErrorCode::duplicateName, "service already registered for this hash");
}

bool InstanceManager::isService(uint64_t nameHash) const
{
  std::lock_guard lock(_mutex);
  return _services.contains(nameHash);
}

void InstanceManager::unregisterService(uint64_t nameHash)
{
  std::lock_guard lock(_mutex);
  _services.erase(nameHash);
}

void InstanceManager::deliverRequest(RpcRequest request)
{
  ServiceHandler handler;
  {
    std::lock_guard lock(_mutex);
    if (const auto s = _services.find(request.nameHash); s != _services.end())
      handler = s->second;
    else
    {
      _pendingRequests.push_back(std::move(request));
      _requestCv.notify_all();
      return;
    }
  }

  const auto caller = request.caller;
  const auto sequence = request.sequence;
  handler(caller, std::move(request.argument), [this, caller, sequence](RpcStatus status, std::vector<uint8_t> payload) {
    transmitResponse(caller, sequence, status, payload);
  });
}

void InstanceManager::deliverResponse(uint64_t sequence, RpcStatus status, std::vector<uint8_t> payload)
{
  {
    std::lock_guard lock(_mutex);
    _responses.insert_or_assign(sequence, RpcResponse{status, std::move(payload)});
  }
  _responseCv.notify_all();
}

} // namespace hicr
