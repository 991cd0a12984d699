// SPDX-License-Identifier: Apache-2.0

/**
 * @file memoryManager.hpp
 * @brief Abstract memory manager: allocation, registration and freeing of local memory slots
 */

#pragma once

#include <atomic>
#include <cstddef>
#include <map>
#include <mutex>
#include <vector>

#include <hicr/core/memorySlot.hpp>
#include <hicr/core/topology.hpp>

namespace hicr
{

/**
 * malloc/free for a set of recognized memory spaces.
 *
 * The base class owns capacity bookkeeping: per memory space, the sum of live allocated slot sizes never exceeds the
 * space's physical size, and free returns exactly the freed size. Registered slots do not count against capacity.
 * Backends supply only the raw storage.
 */
class MemoryManager
{
  public:

  explicit MemoryManager(std::vector<MemorySpace> spaces);
  virtual ~MemoryManager() = default;

  MemoryManager(const MemoryManager &) = delete;
  MemoryManager &operator=(const MemoryManager &) = delete;

  /// Throws UnknownMemorySpace, InvalidArgument for size 0, OutOfMemory past the space's capacity
  LocalSlotPtr allocate(const MemorySpace &space, size_t size);

  /// Wraps caller-owned storage; the caller guarantees it stays live and holds at least `size` bytes
  LocalSlotPtr registerExternal(const MemorySpace &space, void *storage, size_t size);

  /// Throws InvalidSlot on double free, SlotPinned while the slot is pinned
  void free(const LocalSlotPtr &slot);

  [[nodiscard]] bool recognizes(const MemorySpace &space) const;
  [[nodiscard]] const std::vector<MemorySpace> &getMemorySpaces() const { return _spaces; }

  /// Sum of live allocated slot sizes in the space
  [[nodiscard]] size_t getUsedBytes(const MemorySpace &space) const;

  protected:

  /// Returns zero-initialized storage of `size` bytes, or null when the backing store is exhausted
  virtual void *allocateStorage(const MemorySpace &space, size_t size) = 0;
  virtual void releaseStorage(const MemorySpace &space, void *storage, size_t size) = 0;

  private:

  const std::vector<MemorySpace> _spaces;
  mutable std::mutex _mutex;
  std::map<uint32_t, size_t> _usedBytes;
  std::atomic<uint64_t> _nextSlotId{0};
};

} // namespace hicr
