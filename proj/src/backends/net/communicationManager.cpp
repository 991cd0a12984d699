// SPDX-License-Identifier: Apache-2.0

#include <cstring>

#include <hicr/backends/net/communicationManager.hpp>
#include <hicr/backends/net/wire.hpp>
#include <hicr/core/exceptions.hpp>

namespace hicr::backend::net
{

CommunicationManager::CommunicationManager(std::shared_ptr<Runtime> runtime)
  : _runtime(std::move(runtime))
{
  if (_runtime == nullptr) raise(ErrorCode::invalidArgument, "null runtime");
}

std::vector<uint8_t> CommunicationManager::makeToken(uint64_t bufferId, uint64_t size)
{
  wire::Writer w;
  w.u64(bufferId).u64(size);
  return w.take();
}

RemoteBuffer CommunicationManager::remoteOf(const GlobalMemorySlot &slot)
{
  const auto &token = slot.getRemoteToken();
  if (token.size() != 16) raise(ErrorCode::invalidSlot, "global slot carries a token of another backend");
  wire::Reader r(token);
  RemoteBuffer remote;
  remote.owner = slot.getOwner();
  remote.bufferId = r.u64();
  remote.size = r.u64();
  return remote;
}

void CommunicationManager::copyLocal(const LocalSlotPtr &destination, size_t destinationOffset, const LocalSlotPtr &source, size_t sourceOffset, size_t size)
{
  if (size == 0) return;
  std::lock_guard lock(_runtime->memoryMutex());
  std::memmove(static_cast<uint8_t *>(destination->getPointer()) + destinationOffset, static_cast<const uint8_t *>(source->getPointer()) + sourceOffset, size);
}

void CommunicationManager::put(const GlobalSlotPtr &destination, size_t destinationOffset, const LocalSlotPtr &source, size_t sourceOffset, size_t size)
{
  const auto *bytes = static_cast<const uint8_t *>(source->getPointer()) + sourceOffset;
  _runtime->put(remoteOf(*destination), destinationOffset, destination->getTag(), std::span(bytes, size));
}

void CommunicationManager::get(const LocalSlotPtr &destination, size_t destinationOffset, const GlobalSlotPtr &source, size_t sourceOffset, size_t size)
{
  _runtime->get(destination, destinationOffset, remoteOf(*source), sourceOffset, size, source->getTag());
}

void CommunicationManager::fenceTag(Tag tag, std::optional<std::chrono::milliseconds> timeout) { _runtime->fence(tag, timeout); }

std::vector<CommunicationManager::ExchangeEntry> CommunicationManager::exchange(Tag tag, const std::vector<Contribution> &contributions)
{
  const auto self = getCurrentInstanceId();
  std::vector<ExchangeEntry> entries;
  for (const auto &e : _runtime->exchange(tag, contributions))
  {
    LocalSlotPtr local = e.owner == self ? _runtime->lookupBuffer(e.bufferId) : nullptr;
    entries.push_back(ExchangeEntry{e.key, e.owner, e.size, makeToken(e.bufferId, e.size), std::move(local)});
  }
  return entries;
}

std::vector<uint8_t> CommunicationManager::registerPromoted(const LocalSlotPtr &slot) { return makeToken(_runtime->registerBuffer(slot), slot->getSize()); }

void CommunicationManager::deregisterPromoted(const GlobalMemorySlot &slot) { _runtime->deregisterBuffer(remoteOf(slot).bufferId); }

LocalSlotPtr CommunicationManager::resolveLocalToken(const std::vector<uint8_t> &token)
{
  if (token.size() != 16) return nullptr;
  wire::Reader r(token);
  const auto bufferId = r.u64();
  const auto size = r.u64();
  auto slot = _runtime->lookupBuffer(bufferId);
  return slot != nullptr && slot->getSize() == size ? slot : nullptr;
}

void CommunicationManager::lockGlobal(const GlobalMemorySlot &slot) { _runtime->lock(remoteOf(slot)); }

void CommunicationManager::unlockGlobal(const GlobalMemorySlot &slot) { _runtime->unlock(remoteOf(slot)); }

} // namespace hicr::backend::net
