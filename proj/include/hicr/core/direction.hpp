// SPDX-License-Identifier: Apache-2.0

/**
 * @file direction.hpp
 * @brief memcpy direction legality and slot range checks
 */

#pragma once

#include <cstddef>
#include <string_view>

#include <hicr/core/memorySlot.hpp>

namespace hicr
{

enum class SlotKind
{
  local,
  global
};

/**
 * The three legal memcpy directions. A global-to-global pairing has no value here: neither end would orchestrate it.
 */
enum class MemcpyDirection
{
  localToLocal,
  localToGlobal,
  globalToLocal
};

std::string_view toString(MemcpyDirection direction);

/// Throws IllegalDirection for (global, global)
MemcpyDirection classifyMemcpy(SlotKind destination, SlotKind source);

/// Throws InvalidSlot for an invalidated slot and OutOfBounds unless offset + size <= slot size
void validateSlotRange(const LocalMemorySlot &slot, size_t offset, size_t size);
void validateSlotRange(const GlobalMemorySlot &slot, size_t offset, size_t size);

} // namespace hicr
