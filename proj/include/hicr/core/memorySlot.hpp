// SPDX-License-Identifier: Apache-2.0

/**
 * @file memorySlot.hpp
 * @brief Local and global memory slots
 */

#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <hicr/core/definitions.hpp>
#include <hicr/core/topology.hpp>

namespace hicr
{

enum class SlotOrigin
{
  /// Storage is owned by the memory manager and released on free
  allocated,
  /// Storage belongs to the caller; free only deregisters
  registered
};

/**
 * Describes a contiguous segment of memory within one memory space of the current instance.
 *
 * Slots are handed around as shared pointers. Freeing a slot invalidates it without destroying the object, so stale
 * handles are detected (InvalidSlot) instead of dereferenced.
 */
class LocalMemorySlot
{
  public:

  LocalMemorySlot(uint64_t slotId, MemorySpace memorySpace, void *pointer, size_t sizeBytes, SlotOrigin origin)
    : _slotId(slotId),
      _memorySpace(std::move(memorySpace)),
      _pointer(pointer),
      _sizeBytes(sizeBytes),
      _origin(origin)
  {}

  LocalMemorySlot(const LocalMemorySlot &) = delete;
  LocalMemorySlot &operator=(const LocalMemorySlot &) = delete;

  [[nodiscard]] uint64_t getId() const { return _slotId; }
  [[nodiscard]] const MemorySpace &getMemorySpace() const { return _memorySpace; }
  [[nodiscard]] void *getPointer() const { return _pointer; }
  [[nodiscard]] size_t getSize() const { return _sizeBytes; }
  [[nodiscard]] SlotOrigin getOrigin() const { return _origin; }
  [[nodiscard]] bool isValid() const { return _valid.load(std::memory_order_acquire); }

  /// Byte view of the whole slot; callers must not race with in-flight transfers
  [[nodiscard]] std::span<std::byte> bytes() const { return {static_cast<std::byte *>(_pointer), _sizeBytes}; }

  /// Marks the slot as unusable. Returns false if it was already invalid.
  bool invalidate() { return _valid.exchange(false, std::memory_order_acq_rel); }

  /// Pinned slots refuse to be freed (e.g. while published as a data object)
  void pin() { _pins.fetch_add(1, std::memory_order_acq_rel); }
  void unpin() { _pins.fetch_sub(1, std::memory_order_acq_rel); }
  [[nodiscard]] bool isPinned() const { return _pins.load(std::memory_order_acquire) > 0; }

  private:

  const uint64_t _slotId;
  const MemorySpace _memorySpace;
  void *const _pointer;
  const size_t _sizeBytes;
  const SlotOrigin _origin;
  std::atomic<bool> _valid{true};
  std::atomic<int> _pins{0};
};

using LocalSlotPtr = std::shared_ptr<LocalMemorySlot>;

/**
 * A memory slot made reachable by other instances, identified by (tag, key).
 *
 * The local counterpart is present exactly when the slot is owned by the current instance. The remote token is
 * opaque metadata interpreted only by the communication manager that produced the slot.
 */
class GlobalMemorySlot
{
  public:

  GlobalMemorySlot(Tag tag,
                   Key key,
                   InstanceId owner,
                   size_t sizeBytes,
                   LocalSlotPtr localCounterpart,
                   std::vector<uint8_t> remoteToken,
                   const void *creator)
    : _tag(tag),
      _key(key),
      _owner(owner),
      _sizeBytes(sizeBytes),
      _localCounterpart(std::move(localCounterpart)),
      _remoteToken(std::move(remoteToken)),
      _creator(creator)
  {}

  GlobalMemorySlot(const GlobalMemorySlot &) = delete;
  GlobalMemorySlot &operator=(const GlobalMemorySlot &) = delete;

  [[nodiscard]] Tag getTag() const { return _tag; }
  [[nodiscard]] Key getKey() const { return _key; }
  [[nodiscard]] InstanceId getOwner() const { return _owner; }
  [[nodiscard]] size_t getSize() const { return _sizeBytes; }
  [[nodiscard]] const LocalSlotPtr &getLocalCounterpart() const { return _localCounterpart; }
  [[nodiscard]] bool hasLocalCounterpart() const { return _localCounterpart != nullptr; }
  [[nodiscard]] const std::vector<uint8_t> &getRemoteToken() const { return _remoteToken; }

  /// Identity of the communication manager that produced this slot
  [[nodiscard]] const void *getCreator() const { return _creator; }

  [[nodiscard]] bool isValid() const
  {
    if (!_valid.load(std::memory_order_acquire)) return false;
    return _localCounterpart == nullptr || _localCounterpart->isValid();
  }
  void invalidate() { _valid.store(false, std::memory_order_release); }

  private:

  const Tag _tag;
  const Key _key;
  const InstanceId _owner;
  const size_t _sizeBytes;
  const LocalSlotPtr _localCounterpart;
  const std::vector<uint8_t> _remoteToken;
  const void *const _creator;
  std::atomic<bool> _valid{true};
};

using GlobalSlotPtr = std::shared_ptr<GlobalMemorySlot>;

} // namespace hicr
