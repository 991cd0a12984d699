// SPDX-License-Identifier: Apache-2.0

#include <array>

#include <hicr/core/exceptions.hpp>
#include <hicr/core/hash.hpp>
#include <hicr/frontends/rpc/rpcEngine.hpp>

namespace hicr::rpc
{

namespace
{

constexpr std::array reservedHashes{fnv1a64("hicr.lock.acquire"), fnv1a64("hicr.lock.release"), fnv1a64("hicr.spawn")};

std::vector<uint8_t> textBytes(const std::string &text) { return {text.begin(), text.end()}; }

std::string bytesText(const std::vector<uint8_t> &bytes) { return {bytes.begin(), bytes.end()}; }

} // namespace

RpcEngine::RpcEngine(InstanceManager &instances)
  : _instances(instances)
{}

bool RpcEngine::isReservedHash(uint64_t hash)
{
  for (const auto reserved : reservedHashes)
    if (reserved == hash) return true;
  return false;
}

void RpcEngine::registerRpc(const std::string &name, Function function)
{
  if (name.empty()) raise(ErrorCode::invalidArgument, "rpc name must not be empty");
  const auto hash = fnv1a64(name);
  if (isReservedHash(hash) || _instances.isService(hash)) raise(ErrorCode::hashCollision, "rpc name '" + name + "' hashes to a reserved service");

  std::lock_guard lock(_mutex);
  if (const auto it = _table.find(hash); it != _table.end())
  {
    if (it->second.name == name) raise(ErrorCode::duplicateName, "rpc '" + name + "' is already registered");
    raise(ErrorCode::hashCollision, "rpc names '" + name + "' and '" + it->second.name + "' share a hash");
  }
  _table.emplace(hash, Entry{name, std::move(function)});
}

bool RpcEngine::isRegistered(const std::string &name) const
{
  std::lock_guard lock(_mutex);
  const auto it = _table.find(fnv1a64(name));
  return it != _table.end() && it->second.name == name;
}

std::vector<std::string> RpcEngine::registeredNames() const
{
  std::lock_guard lock(_mutex);
  std::vector<std::string> names;
  for (const auto &[hash, entry] : _table) names.push_back(entry.name);
  return names;
}

size_t RpcEngine::listen()
{
  {
    std::lock_guard lock(_mutex);
    if (_table.empty()) raise(ErrorCode::invalidArgument, "listen with no registered rpc");
  }

  while (true)
  {
    const auto request = _instances.nextRequest();
    Function function;
    {
      std::lock_guard lock(_mutex);
      if (const auto it = _table.find(request.nameHash); it != _table.end()) function = it->second.function;
    }
    if (!function)
    {
      _instances.respond(request, RpcStatus::unknownName, textBytes("no rpc registered under hash " + std::to_string(request.nameHash)));
      continue;
    }

    std::vector<uint8_t> result;
    try
    {
      result = function(request.argument);
    }
    catch (const std::exception &e)
    {
      _instances.respond(request, RpcStatus::failed, textBytes(e.what()));
      return 1;
    }
    _instances.respond(request, RpcStatus::ok, result);
    return 1;
  }
}

std::vector<uint8_t> RpcEngine::requestRpc(InstanceId target, const std::string &name, const std::vector<uint8_t> &argument)
{
  auto response = _instances.request(target, fnv1a64(name), argument, _timeout);
  switch (response.status)
  {
  case RpcStatus::ok: return std::move(response.payload);
  case RpcStatus::unknownName: raise(ErrorCode::rpcUnknownName, "instance " + std::to_string(target) + " has no rpc '" + name + "'");
  case RpcStatus::failed: break;
  }
  raise(ErrorCode::rpcFailed, "rpc '" + name + "' failed on instance " + std::to_string(target) + ": " + bytesText(response.payload));
}

} // namespace hicr::rpc
