// SPDX-License-Identifier: Apache-2.0

#include <cstring>
#include <string>

#include <hicr/core/communicationManager.hpp>
#include <hicr/core/exceptions.hpp>

namespace hicr
{

namespace
{

SlotKind kindOf(const SlotRef &ref) { return std::holds_alternative<LocalSlotPtr>(ref) ? SlotKind::local : SlotKind::global; }

template <typename T>
void appendScalar(std::vector<uint8_t> &out, T value)
{
  uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T>
T readScalar(std::span<const uint8_t> bytes, size_t &cursor)
{
  if (cursor + sizeof(T) > bytes.size()) raise(ErrorCode::invalidArgument, "truncated global slot encoding");
  T value;
  std::memcpy(&value, bytes.data() + cursor, sizeof(T));
  cursor += sizeof(T);
  return value;
}

} // namespace

bool CommunicationManager::supportsMemorySpace(const MemorySpace &) const { return true; }

TransferHandle CommunicationManager::memcpy(const SlotRef &destination, size_t destinationOffset, const SlotRef &source, size_t sourceOffset, size_t size)
{
  const auto direction = classifyMemcpy(kindOf(destination), kindOf(source));

  const auto checkLocal = [&](const LocalSlotPtr &slot, size_t offset) {
    if (slot == nullptr) raise(ErrorCode::invalidArgument, "null local slot");
    validateSlotRange(*slot, offset, size);
    if (!supportsMemorySpace(slot->getMemorySpace()))
      raise(ErrorCode::unsupportedSpacePair, "memory space kind '" + slot->getMemorySpace().kind + "' is not reachable by this communication manager");
  };
  const auto checkGlobal = [&](const GlobalSlotPtr &slot, size_t offset) {
    if (slot == nullptr) raise(ErrorCode::invalidArgument, "null global slot");
    if (slot->getCreator() != this) raise(ErrorCode::invalidSlot, "global slot was produced by a different communication manager");
    validateSlotRange(*slot, offset, size);
  };

  TransferHandle handle{_nextTransferId.fetch_add(1, std::memory_order_relaxed), direction, std::nullopt};

  switch (direction)
  {
  case MemcpyDirection::localToLocal:
  {
    const auto &dst = std::get<LocalSlotPtr>(destination);
    const auto &src = std::get<LocalSlotPtr>(source);
    checkLocal(dst, destinationOffset);
    checkLocal(src, sourceOffset);
    copyLocal(dst, destinationOffset, src, sourceOffset, size);
    break;
  }
  case MemcpyDirection::localToGlobal:
  {
    const auto &dst = std::get<GlobalSlotPtr>(destination);
    const auto &src = std::get<LocalSlotPtr>(source);
    checkGlobal(dst, destinationOffset);
    checkLocal(src, sourceOffset);
    handle.tag = dst->getTag();
    put(dst, destinationOffset, src, sourceOffset, size);
    break;
  }
  case MemcpyDirection::globalToLocal:
  {
    const auto &dst = std::get<LocalSlotPtr>(destination);
    const auto &src = std::get<GlobalSlotPtr>(source);
    checkLocal(dst, destinationOffset);
    checkGlobal(src, sourceOffset);
    handle.tag = src->getTag();
    get(dst, destinationOffset, src, sourceOffset, size);
    break;
  }
  }
  return handle;
}

void CommunicationManager::fence(Tag tag) { fenceTag(tag, getFenceTimeout()); }

void CommunicationManager::fenceLocal() { fenceLocalTransfers(); }

void CommunicationManager::setFenceTimeout(std::optional<std::chrono::milliseconds> timeout)
{
  std::lock_guard lock(_tableMutex);
  _fenceTimeout = timeout;
}

std::optional<std::chrono::milliseconds> CommunicationManager::getFenceTimeout() const
{
  std::lock_guard lock(_tableMutex);
  return _fenceTimeout;
}

std::vector<GlobalSlotPtr> CommunicationManager::exchangeGlobalSlots(Tag tag, const std::vector<Contribution> &contributions)
{
  for (const auto &[key, slot] : contributions)
  {
    if (slot == nullptr) raise(ErrorCode::invalidArgument, "null slot contributed under key " + std::to_string(key));
    if (!slot->isValid()) raise(ErrorCode::invalidSlot, "invalid slot contributed under key " + std::to_string(key));
  }

  auto entries = exchange(tag, contributions);

  const auto self = getCurrentInstanceId();
  size_t ownEntries = 0;
  std::vector<GlobalSlotPtr> result;
  result.reserve(entries.size());
  for (auto &entry : entries)
  {
    const bool own = entry.owner == self;
    if (own != (entry.localCounterpart != nullptr))
      raise(ErrorCode::collectiveMismatch, "exchange entry for key " + std::to_string(entry.key) + " disagrees on ownership");
    if (own) ownEntries++;
    result.push_back(makeGlobalSlot(tag, entry.key, entry.owner, entry.size, std::move(entry.localCounterpart), std::move(entry.token)));
  }
  if (ownEntries != contributions.size())
    raise(ErrorCode::collectiveMismatch, "exchange returned " + std::to_string(ownEntries) + " own entries for " + std::to_string(contributions.size()) + " contributions");

  std::lock_guard lock(_tableMutex);
  auto &table = _exchangedSlots[tag];
  for (const auto &slot : result) table.insert_or_assign(slot->getKey(), slot);
  return result;
}

GlobalSlotPtr CommunicationManager::getGlobalSlot(Tag tag, Key key) const
{
  std::lock_guard lock(_tableMutex);
  const auto t = _exchangedSlots.find(tag);
  if (t == _exchangedSlots.end()) raise(ErrorCode::notFound, "no exchange under tag " + std::to_string(tag));
  const auto k = t->second.find(key);
  if (k == t->second.end()) raise(ErrorCode::notFound, "no global slot for key " + std::to_string(key) + " under tag " + std::to_string(tag));
  return k->second;
}

std::vector<GlobalSlotPtr> CommunicationManager::getGlobalSlots(Tag tag) const
{
  std::lock_guard lock(_tableMutex);
  std::vector<GlobalSlotPtr> slots;
  if (const auto t = _exchangedSlots.find(tag); t != _exchangedSlots.end())
    for (const auto &[key, slot] : t->second) slots.push_back(slot);
  return slots;
}

GlobalSlotPtr CommunicationManager::promoteLocalSlot(const LocalSlotPtr &slot, Tag tag, Key key)
{
  if (slot == nullptr) raise(ErrorCode::invalidArgument, "null slot");
  if (!slot->isValid()) raise(ErrorCode::invalidSlot, "cannot promote an invalid slot");
  auto token = registerPromoted(slot);
  return makeGlobalSlot(tag, key, getCurrentInstanceId(), slot->getSize(), slot, std::move(token));
}

void CommunicationManager::destroyPromotedSlot(const GlobalSlotPtr &slot)
{
  if (slot == nullptr) raise(ErrorCode::invalidArgument, "null slot");
  if (slot->getCreator() != this || slot->getOwner() != getCurrentInstanceId())
    raise(ErrorCode::invalidSlot, "only the owner's communication manager can withdraw a promoted slot");
  deregisterPromoted(*slot);
  slot->invalidate();
}

std::vector<uint8_t> CommunicationManager::serializeGlobalSlot(const GlobalMemorySlot &slot) const
{
  std::vector<uint8_t> out;
  appendScalar<uint64_t>(out, slot.getTag());
  appendScalar<uint64_t>(out, slot.getKey());
  appendScalar<uint64_t>(out, slot.getOwner());
  appendScalar<uint64_t>(out, slot.getSize());
  appendScalar<uint32_t>(out, static_cast<uint32_t>(slot.getRemoteToken().size()));
  out.insert(out.end(), slot.getRemoteToken().begin(), slot.getRemoteToken().end());
  return out;
}

GlobalSlotPtr CommunicationManager::deserializeGlobalSlot(std::span<const uint8_t> bytes)
{
  size_t cursor = 0;
  const auto tag = readScalar<uint64_t>(bytes, cursor);
  const auto key = readScalar<uint64_t>(bytes, cursor);
  const auto owner = readScalar<uint64_t>(bytes, cursor);
  const auto size = readScalar<uint64_t>(bytes, cursor);
  const auto tokenLength = readScalar<uint32_t>(bytes, cursor);
  if (cursor + tokenLength != bytes.size()) raise(ErrorCode::invalidArgument, "global slot encoding has trailing or missing bytes");
  std::vector<uint8_t> token(bytes.begin() + static_cast<std::ptrdiff_t>(cursor), bytes.end());

  LocalSlotPtr local;
  if (owner == getCurrentInstanceId())
  {
    local = resolveLocalToken(token);
    if (local == nullptr) raise(ErrorCode::invalidSlot, "global slot refers to a withdrawn local slot");
  }
  return makeGlobalSlot(tag, key, owner, size, std::move(local), std::move(token));
}

void CommunicationManager::acquireGlobalLock(const GlobalSlotPtr &slot)
{
  if (slot == nullptr || slot->getCreator() != this) raise(ErrorCode::invalidSlot, "lock requires a global slot from this communication manager");
  lockGlobal(*slot);
}

void CommunicationManager::releaseGlobalLock(const GlobalSlotPtr &slot)
{
  if (slot == nullptr || slot->getCreator() != this) raise(ErrorCode::invalidSlot, "unlock requires a global slot from this communication manager");
  unlockGlobal(*slot);
}

GlobalSlotPtr CommunicationManager::makeGlobalSlot(Tag tag, Key key, InstanceId owner, size_t size, LocalSlotPtr local, std::vector<uint8_t> token) const
{
  return std::make_shared<GlobalMemorySlot>(tag, key, owner, size, std::move(local), std::move(token), this);
}

void barrier(CommunicationManager &communicationManager, Tag tag) { communicationManager.exchangeGlobalSlots(tag, {}); }

} // namespace hicr
