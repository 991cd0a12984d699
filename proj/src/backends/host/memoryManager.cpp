// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <cstring>

#include <hicr/backends/host/memoryManager.hpp>

namespace hicr::backend::host
{

namespace
{

constexpr size_t alignment = 64;

} // namespace

void *MemoryManager::allocateStorage(const MemorySpace &, size_t size)
{
  const size_t rounded = (size + alignment - 1) / alignment * alignment;
  void *storage = std::aligned_alloc(alignment, rounded);
  if (storage != nullptr) std::memset(storage, 0, rounded);
  return storage;
}

void MemoryManager::releaseStorage(const MemorySpace &, void *storage, size_t) { std::free(storage); }

} // namespace hicr::backend::host
