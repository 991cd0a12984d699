// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <string>

#include <hicr/core/exceptions.hpp>
#include <hicr/core/memoryManager.hpp>

namespace hicr
{

MemoryManager::MemoryManager(std::vector<MemorySpace> spaces)
  : _spaces(std::move(spaces))
{
  for (const auto &s : _spaces) _usedBytes[s.spaceId] = 0;
}

bool MemoryManager::recognizes(const MemorySpace &space) const
{
  return std::find(_spaces.begin(), _spaces.end(), space) != _spaces.end();
}

size_t MemoryManager::getUsedBytes(const MemorySpace &space) const
{
  if (!recognizes(space)) raise(ErrorCode::unknownMemorySpace, "memory space " + std::to_string(space.spaceId) + " is not managed here");
  std::lock_guard lock(_mutex);
  return _usedBytes.at(space.spaceId);
}

LocalSlotPtr MemoryManager::allocate(const MemorySpace &space, size_t size)
{
  if (!recognizes(space)) raise(ErrorCode::unknownMemorySpace, "memory space " + std::to_string(space.spaceId) + " ('" + space.kind + "') is not managed here");
  if (size == 0) raise(ErrorCode::invalidArgument, "allocation size must be positive");

  {
    std::lock_guard lock(_mutex);
    auto &used = _usedBytes.at(space.spaceId);
    if (size > space.physicalSizeBytes - used)
      raise(ErrorCode::outOfMemory, "memory space " + std::to_string(space.spaceId) + " has " + std::to_string(space.physicalSizeBytes - used) + " bytes left, " + std::to_string(size) + " requested");
    used += size;
  }

  void *storage = allocateStorage(space, size);
  if (storage == nullptr)
  {
    std::lock_guard lock(_mutex);
    _usedBytes.at(space.spaceId) -= size;
    raise(ErrorCode::outOfMemory, "backing storage exhausted for " + std::to_string(size) + " bytes");
  }

  return std::make_shared<LocalMemorySlot>(_nextSlotId.fetch_add(1), space, storage, size, SlotOrigin::allocated);
}

LocalSlotPtr MemoryManager::registerExternal(const MemorySpace &space, void *storage, size_t size)
{
  if (!recognizes(space)) raise(ErrorCode::unknownMemorySpace, "memory space " + std::to_string(space.spaceId) + " is not managed here");
  if (storage == nullptr && size > 0) raise(ErrorCode::invalidArgument, "null storage");
  return std::make_shared<LocalMemorySlot>(_nextSlotId.fetch_add(1), space, storage, size, SlotOrigin::registered);
}

void MemoryManager::free(const LocalSlotPtr &slot)
{
  if (slot == nullptr) raise(ErrorCode::invalidArgument, "null slot");
  if (!recognizes(slot->getMemorySpace())) raise(ErrorCode::unknownMemorySpace, "slot belongs to a foreign memory space");
  if (slot->isPinned()) raise(ErrorCode::slotPinned, "slot " + std::to_string(slot->getId()) + " is pinned");
  if (!slot->invalidate()) raise(ErrorCode::invalidSlot, "slot " + std::to_string(slot->getId()) + " was already freed");

  if (slot->getOrigin() == SlotOrigin::allocated)
  {
    releaseStorage(slot->getMemorySpace(), slot->getPointer(), slot->getSize());
    std::lock_guard lock(_mutex);
    _usedBytes.at(slot->getMemorySpace().spaceId) -= slot->getSize();
  }
}

} // namespace hicr
