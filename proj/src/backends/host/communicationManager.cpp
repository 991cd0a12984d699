// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cstring>
#include <string>

#include <hicr/backends/host/communicationManager.hpp>
#include <hicr/core/exceptions.hpp>

namespace hicr::backend::host
{

namespace
{

std::vector<uint8_t> encodeToken(uint64_t id)
{
  std::vector<uint8_t> token(sizeof(id));
  std::memcpy(token.data(), &id, sizeof(id));
  return token;
}

uint64_t decodeToken(const std::vector<uint8_t> &token)
{
  if (token.size() != sizeof(uint64_t)) raise(ErrorCode::invalidSlot, "malformed host slot token");
  uint64_t id;
  std::memcpy(&id, token.data(), sizeof(id));
  return id;
}

} // namespace

CommunicationManager::CommunicationManager(InstanceId currentInstance, std::set<std::string> supportedSpaceKinds)
  : _self(currentInstance),
    _supportedSpaceKinds(std::move(supportedSpaceKinds))
{}

bool CommunicationManager::supportsMemorySpace(const MemorySpace &space) const
{
  return _supportedSpaceKinds.empty() || _supportedSpaceKinds.contains(space.kind);
}

std::pair<uint64_t, uint64_t> CommunicationManager::getCounters(Tag tag) const
{
  std::lock_guard lock(_mutex);
  const auto c = _tagCounters.find(tag);
  if (c == _tagCounters.end()) return {0, 0};
  return {c->second.initiated, c->second.completed};
}

void CommunicationManager::transfer(std::optional<Tag> tag, void *destination, const void *source, size_t size)
{
  std::lock_guard lock(_mutex);
  auto &counters = tag ? _tagCounters[*tag] : _localCounters;
  counters.initiated++;
  // memmove gives the intermediate-buffer semantics for overlapping ranges
  if (size > 0) std::memmove(destination, source, size);
  counters.completed++;
  _settled.notify_all();
}

LocalSlotPtr CommunicationManager::counterpartOf(const GlobalMemorySlot &slot) const
{
  if (!slot.hasLocalCounterpart()) raise(ErrorCode::peerUnreachable, "host backend cannot reach instance " + std::to_string(slot.getOwner()));
  const auto &local = slot.getLocalCounterpart();
  if (!local->isValid()) raise(ErrorCode::invalidSlot, "global slot's local counterpart was freed");
  return local;
}

void CommunicationManager::copyLocal(const LocalSlotPtr &destination, size_t destinationOffset, const LocalSlotPtr &source, size_t sourceOffset, size_t size)
{
  transfer(std::nullopt, destination->bytes().data() + destinationOffset, source->bytes().data() + sourceOffset, size);
}

void CommunicationManager::put(const GlobalSlotPtr &destination, size_t destinationOffset, const LocalSlotPtr &source, size_t sourceOffset, size_t size)
{
  const auto target = counterpartOf(*destination);
  transfer(destination->getTag(), target->bytes().data() + destinationOffset, source->bytes().data() + sourceOffset, size);
}

void CommunicationManager::get(const LocalSlotPtr &destination, size_t destinationOffset, const GlobalSlotPtr &source, size_t sourceOffset, size_t size)
{
  const auto origin = counterpartOf(*source);
  transfer(source->getTag(), destination->bytes().data() + destinationOffset, origin->bytes().data() + sourceOffset, size);
}

void CommunicationManager::fenceTag(Tag tag, std::optional<std::chrono::milliseconds> timeout)
{
  std::unique_lock lock(_mutex);
  const auto done = [&] {
    const auto c = _tagCounters.find(tag);
    return c == _tagCounters.end() || c->second.completed == c->second.initiated;
  };
  if (timeout)
  {
    if (!_settled.wait_for(lock, *timeout, done)) raise(ErrorCode::timeout, "fence on tag " + std::to_string(tag) + " timed out");
  }
  else
    _settled.wait(lock, done);
}

void CommunicationManager::fenceLocalTransfers()
{
  std::unique_lock lock(_mutex);
  _settled.wait(lock, [&] { return _localCounters.completed == _localCounters.initiated; });
}

std::vector<uint8_t> CommunicationManager::registerSlot(const LocalSlotPtr &slot)
{
  std::lock_guard lock(_mutex);
  const auto id = _nextToken++;
  _registry.emplace(id, slot);
  return encodeToken(id);
}

std::vector<CommunicationManager::ExchangeEntry> CommunicationManager::exchange(Tag tag, const std::vector<Contribution> &contributions)
{
  std::set<Key> keys;
  for (const auto &[key, slot] : contributions)
    if (!keys.insert(key).second) raise(ErrorCode::duplicateKey, "key " + std::to_string(key) + " contributed twice under tag " + std::to_string(tag));

  std::vector<ExchangeEntry> entries;
  for (const auto &[key, slot] : contributions) entries.push_back({key, _self, slot->getSize(), registerSlot(slot), slot});
  std::sort(entries.begin(), entries.end(), [](const auto &a, const auto &b) { return a.key < b.key; });
  return entries;
}

std::vector<uint8_t> CommunicationManager::registerPromoted(const LocalSlotPtr &slot) { return registerSlot(slot); }

void CommunicationManager::deregisterPromoted(const GlobalMemorySlot &slot)
{
  std::lock_guard lock(_mutex);
  if (_registry.erase(decodeToken(slot.getRemoteToken())) == 0) raise(ErrorCode::invalidSlot, "slot is not registered");
}

LocalSlotPtr CommunicationManager::resolveLocalToken(const std::vector<uint8_t> &token)
{
  std::lock_guard lock(_mutex);
  const auto r = _registry.find(decodeToken(token));
  return r == _registry.end() ? nullptr : r->second;
}

void CommunicationManager::lockGlobal(const GlobalMemorySlot &slot)
{
  const auto id = decodeToken(slot.getRemoteToken());
  std::unique_lock lock(_lockMutex);
  _lockCv.wait(lock, [&] { return !_heldLocks.contains(id); });
  _heldLocks.insert(id);
}

void CommunicationManager::unlockGlobal(const GlobalMemorySlot &slot)
{
  const auto id = decodeToken(slot.getRemoteToken());
  {
    std::lock_guard lock(_lockMutex);
    if (_heldLocks.erase(id) == 0) raise(ErrorCode::invalidArgument, "global lock is not held");
  }
  _lockCv.notify_all();
}

} // namespace hicr::backend::host
