// SPDX-License-Identifier: Apache-2.0

#include <cstring>
#include <string>

#include <hicr/core/exceptions.hpp>
#include <hicr/core/hash.hpp>
#include <hicr/frontends/dataObject/dataObject.hpp>

namespace hicr::dataobject
{

namespace
{

template <typename T>
void append(std::vector<uint8_t> &out, T value)
{
  for (size_t i = 0; i < sizeof(T); i++) out.push_back(static_cast<uint8_t>(static_cast<uint64_t>(value) >> (8 * i)));
}

template <typename T>
T read(std::span<const uint8_t> bytes, size_t &cursor)
{
  if (cursor + sizeof(T) > bytes.size()) raise(ErrorCode::invalidArgument, "truncated data object handle");
  uint64_t value = 0;
  for (size_t i = 0; i < sizeof(T); i++) value |= static_cast<uint64_t>(bytes[cursor + i]) << (8 * i);
  cursor += sizeof(T);
  return static_cast<T>(value);
}

std::string describe(DataObjectId id) { return "data object " + std::to_string(id); }

} // namespace

std::vector<uint8_t> DataObjectHandle::serialize() const
{
  std::vector<uint8_t> out;
  append<uint64_t>(out, id);
  append<uint64_t>(out, sizeBytes);
  append<uint32_t>(out, static_cast<uint32_t>(slot.size()));
  out.insert(out.end(), slot.begin(), slot.end());
  return out;
}

DataObjectHandle DataObjectHandle::deserialize(std::span<const uint8_t> bytes)
{
  size_t cursor = 0;
  DataObjectHandle handle;
  handle.id = read<uint64_t>(bytes, cursor);
  handle.sizeBytes = read<uint64_t>(bytes, cursor);
  const auto length = read<uint32_t>(bytes, cursor);
  if (cursor + length != bytes.size()) raise(ErrorCode::invalidArgument, "data object handle has trailing or missing bytes");
  handle.slot.assign(bytes.begin() + static_cast<std::ptrdiff_t>(cursor), bytes.end());
  return handle;
}

uint64_t Registry::lookupServiceHash(Tag tag) { return fnv1a64("hicr.dataobject.lookup:" + std::to_string(tag)); }

Registry::Registry(CommunicationManager &communication, InstanceManager &instances, Tag tag)
  : _communication(communication),
    _instances(instances),
    _tag(tag),
    _self(communication.getCurrentInstanceId()),
    _state(std::make_shared<State>())
{
  _state->communication = &communication;
  // A lookup racing with destruction finds the state gone and answers as if the object were unknown
  std::weak_ptr<State> weak = _state;
  _instances.registerService(lookupServiceHash(tag), [weak](InstanceId, std::vector<uint8_t> argument, InstanceManager::Responder respond) {
    const auto state = weak.lock();
    if (state == nullptr || argument.size() != sizeof(uint64_t))
    {
      respond(RpcStatus::failed, {});
      return;
    }
    size_t cursor = 0;
    const auto id = read<uint64_t>(argument, cursor);
    if (auto found = lookup(*state, id))
      respond(RpcStatus::ok, std::move(*found));
    else
      respond(RpcStatus::failed, {});
  });
}

Registry::~Registry()
{
  _instances.unregisterService(lookupServiceHash(_tag));
  std::lock_guard lock(_state->mutex);
  for (auto &[id, object] : _state->objects)
  {
    try
    {
      _communication.destroyPromotedSlot(object.global);
    }
    catch (const Exception &)
    {
      // The slot may already be gone together with its memory manager
    }
    object.slot->unpin();
  }
  _state->objects.clear();
}

std::optional<std::vector<uint8_t>> Registry::lookup(State &state, DataObjectId id)
{
  std::lock_guard lock(state.mutex);
  const auto it = state.objects.find(id);
  if (it == state.objects.end()) return std::nullopt;
  DataObjectHandle handle{id, it->second.global->getSize(), state.communication->serializeGlobalSlot(*it->second.global)};
  return handle.serialize();
}

DataObjectId Registry::publish(const LocalSlotPtr &slot)
{
  if (slot == nullptr || !slot->isValid()) raise(ErrorCode::invalidSlot, "cannot publish an invalid slot");
  const DataObjectId id = (static_cast<uint64_t>(static_cast<uint32_t>(_self)) << 32) | _nextSequence.fetch_add(1, std::memory_order_relaxed);

  auto global = _communication.promoteLocalSlot(slot, _tag, id);
  slot->pin();
  std::lock_guard lock(_state->mutex);
  _state->objects.emplace(id, Published{slot, std::move(global)});
  return id;
}

DataObjectHandle Registry::getHandle(DataObjectId id)
{
  const auto publisher = publisherBits(id);
  if (publisher == static_cast<uint32_t>(_self))
  {
    const auto local = lookup(*_state, id);
    if (!local) raise(ErrorCode::unknownObject, describe(id) + " is not published here");
    return DataObjectHandle::deserialize(*local);
  }

  std::optional<InstanceId> owner;
  for (const auto &instance : _instances.getInstances())
    if (static_cast<uint32_t>(instance.id) == publisher) owner = instance.id;
  if (!owner) raise(ErrorCode::unknownObject, describe(id) + " names no known publisher");

  std::vector<uint8_t> argument;
  append<uint64_t>(argument, id);
  const auto response = _instances.request(*owner, lookupServiceHash(_tag), argument);
  if (response.status != RpcStatus::ok) raise(ErrorCode::unknownObject, describe(id) + " is not published by instance " + std::to_string(*owner));
  return DataObjectHandle::deserialize(response.payload);
}

TransferHandle Registry::get(const DataObjectHandle &handle, const LocalSlotPtr &destination)
{
  if (destination == nullptr || !destination->isValid()) raise(ErrorCode::invalidSlot, "destination slot is invalid");
  if (destination->getSize() < handle.sizeBytes)
    raise(ErrorCode::sizeMismatch, "destination of " + std::to_string(destination->getSize()) + " bytes for an object of " + std::to_string(handle.sizeBytes));

  GlobalSlotPtr source;
  try
  {
    source = _communication.deserializeGlobalSlot(handle.slot);
  }
  catch (const Exception &e)
  {
    if (e.code() == ErrorCode::invalidSlot) raise(ErrorCode::unknownObject, describe(handle.id) + " has been unpublished");
    throw;
  }
  return _communication.memcpy(destination, 0, source, 0, handle.sizeBytes);
}

void Registry::fence()
{
  try
  {
    _communication.fence(_tag);
  }
  catch (const Exception &e)
  {
    if (e.code() == ErrorCode::invalidSlot) raise(ErrorCode::unknownObject, std::string("a requested data object was unpublished: ") + e.what());
    throw;
  }
}

void Registry::unpublish(DataObjectId id)
{
  Published object;
  {
    std::lock_guard lock(_state->mutex);
    const auto it = _state->objects.find(id);
    if (it == _state->objects.end()) raise(ErrorCode::unknownObject, describe(id) + " is not published here");
    object = std::move(it->second);
    _state->objects.erase(it);
  }
  _communication.destroyPromotedSlot(object.global);
  object.slot->unpin();
}

} // namespace hicr::dataobject
