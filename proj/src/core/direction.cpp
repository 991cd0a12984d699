// SPDX-License-Identifier: Apache-2.0

#include <string>

#include <hicr/core/direction.hpp>
#include <hicr/core/exceptions.hpp>

namespace hicr
{

std::string_view toString(MemcpyDirection direction)
{
  switch (direction)
  {
  case MemcpyDirection::localToLocal: return "localToLocal";
  case MemcpyDirection::localToGlobal: return "localToGlobal";
  case MemcpyDirection::globalToLocal: return "globalToLocal";
  }
  return "unknown";
}

MemcpyDirection classifyMemcpy(SlotKind destination, SlotKind source)
{
  if (destination == SlotKind::local && source == SlotKind::local) return MemcpyDirection::localToLocal;
  if (destination == SlotKind::global && source == SlotKind::local) return MemcpyDirection::localToGlobal;
  if (destination == SlotKind::local && source == SlotKind::global) return MemcpyDirection::globalToLocal;
  raise(ErrorCode::illegalDirection, "global-to-global transfers are not permitted");
}

namespace
{

void checkRange(size_t slotSize, size_t offset, size_t size)
{
  // Written to avoid overflow of offset + size
  if (offset > slotSize || size > slotSize - offset)
    raise(ErrorCode::outOfBounds, "range [" + std::to_string(offset) + ", +" + std::to_string(size) + ") exceeds slot of " + std::to_string(slotSize) + " bytes");
}

} // namespace

void validateSlotRange(const LocalMemorySlot &slot, size_t offset, size_t size)
{
  if (!slot.isValid()) raise(ErrorCode::invalidSlot, "local slot " + std::to_string(slot.getId()) + " is no longer valid");
  checkRange(slot.getSize(), offset, size);
}

void validateSlotRange(const GlobalMemorySlot &slot, size_t offset, size_t size)
{
  if (!slot.isValid()) raise(ErrorCode::invalidSlot, "global slot (" + std::to_string(slot.getTag()) + "," + std::to_string(slot.getKey()) + ") is no longer valid");
  checkRange(slot.getSize(), offset, size);
}

} // namespace hicr
