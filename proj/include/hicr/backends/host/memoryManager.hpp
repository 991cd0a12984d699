// SPDX-License-Identifier: Apache-2.0

/**
 * @file memoryManager.hpp
 * @brief Heap-backed memory manager for host memory spaces
 */

#pragma once

#include <hicr/core/memoryManager.hpp>

namespace hicr::backend::host
{

/**
 * Serves every given memory space from the process heap, 64-byte aligned and zero-filled. Each space still enforces
 * its own physical size as a capacity limit.
 */
class MemoryManager final : public hicr::MemoryManager
{
  public:

  explicit MemoryManager(std::vector<MemorySpace> spaces)
    : hicr::MemoryManager(std::move(spaces))
  {}

  explicit MemoryManager(const Topology &topology)
    : hicr::MemoryManager(topology.getMemorySpaces())
  {}

  protected:

  void *allocateStorage(const MemorySpace &space, size_t size) override;
  void releaseStorage(const MemorySpace &space, void *storage, size_t size) override;
};

} // namespace hicr::backend::host
