// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstring>
#include <set>
#include <string>
#include <thread>

#include <hicr/core/exceptions.hpp>
#include <hicr/core/hash.hpp>
#include <hicr/frontends/channel/channel.hpp>

namespace hicr::channel
{

namespace
{

enum SlotRole : uint64_t
{
  bufferRole = 0,
  headRole = 1,
  tailRole = 2,
  /// Contributed by locking-mode producers so that missing or mismatched producers are detected
  memberRole = 3,
};

constexpr size_t maxRings = 4096;
constexpr uint64_t checksumMask = (uint64_t{1} << 48) - 1;

Key slotKey(uint64_t checksum, size_t ring, SlotRole role) { return (checksum << 16) | (static_cast<uint64_t>(ring) << 4) | role; }

uint64_t loadIndex(const GlobalSlotPtr &slot)
{
  auto *word = static_cast<uint64_t *>(slot->getLocalCounterpart()->getPointer());
  return std::atomic_ref<uint64_t>(*word).load(std::memory_order_acquire);
}

} // namespace

struct Channel::Storage
{
  MemoryManager *memory = nullptr;
  std::vector<LocalSlotPtr> slots;
  LocalSlotPtr scratch;

  LocalSlotPtr allocate(const MemorySpace &space, size_t size)
  {
    auto slot = memory->allocate(space, size);
    std::memset(slot->getPointer(), 0, size);
    slots.push_back(slot);
    return slot;
  }

  ~Storage()
  {
    for (const auto &slot : slots)
    {
      try
      {
        memory->free(slot);
      }
      catch (const Exception &)
      {
        // Already freed by the owner of the memory manager
      }
    }
  }
};

uint64_t configChecksum(MpscMode mode, size_t producers, const ChannelConfig &config, bool spsc)
{
  std::string text = spsc ? "spsc" : (mode == MpscMode::locking ? "mpsc-locking" : "mpsc-nonlocking");
  text += "|" + std::to_string(producers) + "|" + std::to_string(config.capacityMessages) + "|" + std::to_string(config.messageSizeBytes);
  return fnv1a64(text) & checksumMask;
}

struct ChannelFactory
{
  static Endpoints create(CommunicationManager &communication,
                          MemoryManager &memory,
                          const MemorySpace &space,
                          bool spsc,
                          MpscMode mode,
                          size_t producers,
                          const Participation &participation,
                          const ChannelConfig &config)
  {
    if (config.capacityMessages == 0) raise(ErrorCode::invalidArgument, "channel capacity must be at least 1");
    if (config.messageSizeBytes == 0) raise(ErrorCode::invalidArgument, "channel message size must be at least 1 byte");
    if (producers == 0 || producers > maxRings) raise(ErrorCode::invalidArgument, "producer count must be in [1, " + std::to_string(maxRings) + "]");
    for (const auto p : participation.producers)
      if (p >= producers) raise(ErrorCode::invalidArgument, "producer index " + std::to_string(p) + " out of range");
    if (std::set(participation.producers.begin(), participation.producers.end()).size() != participation.producers.size())
      raise(ErrorCode::invalidArgument, "producer index listed twice");

    const bool locking = !spsc && mode == MpscMode::locking;
    const size_t rings = locking ? 1 : producers;
    const auto checksum = configChecksum(mode, producers, config, spsc);
    const auto key = [&](size_t ring, SlotRole role) { return slotKey(checksum, ring, role); };

    std::vector<Contribution> contributions;
    std::shared_ptr<Channel::Storage> consumerStorage;
    std::map<size_t, std::shared_ptr<Channel::Storage>> producerStorage;

    const auto newStorage = [&] {
      auto storage = std::make_shared<Channel::Storage>();
      storage->memory = &memory;
      storage->scratch = storage->allocate(space, 2 * sizeof(uint64_t));
      return storage;
    };

    if (participation.consumer)
    {
      consumerStorage = newStorage();
      for (size_t r = 0; r < rings; r++)
      {
        contributions.emplace_back(key(r, bufferRole), consumerStorage->allocate(space, config.capacityMessages * config.messageSizeBytes));
        contributions.emplace_back(key(r, headRole), consumerStorage->allocate(space, sizeof(uint64_t)));
      }
      if (locking) contributions.emplace_back(key(0, tailRole), consumerStorage->allocate(space, sizeof(uint64_t)));
    }
    for (const auto p : participation.producers)
    {
      auto storage = newStorage();
      contributions.emplace_back(key(p, locking ? memberRole : tailRole), storage->allocate(space, sizeof(uint64_t)));
      producerStorage[p] = storage;
    }

    const auto table = communication.exchangeGlobalSlots(config.tag, contributions);

    // Everyone must agree on the configuration and every party must be present
    std::map<Key, size_t> expected;
    for (size_t r = 0; r < rings; r++)
    {
      expected[key(r, bufferRole)] = config.capacityMessages * config.messageSizeBytes;
      expected[key(r, headRole)] = sizeof(uint64_t);
    }
    if (locking)
    {
      expected[key(0, tailRole)] = sizeof(uint64_t);
      for (size_t p = 0; p < producers; p++) expected[key(p, memberRole)] = sizeof(uint64_t);
    }
    else
      for (size_t p = 0; p < producers; p++) expected[key(p, tailRole)] = sizeof(uint64_t);

    std::map<Key, GlobalSlotPtr> byKey;
    for (const auto &slot : table)
    {
      if ((slot->getKey() >> 16) != checksum) raise(ErrorCode::configMismatch, "channel participants disagree on the configuration under tag " + std::to_string(config.tag));
      const auto e = expected.find(slot->getKey());
      if (e == expected.end() || e->second != slot->getSize()) raise(ErrorCode::configMismatch, "unexpected channel slot under tag " + std::to_string(config.tag));
      byKey[slot->getKey()] = slot;
    }
    if (byKey.size() != expected.size()) raise(ErrorCode::configMismatch, "channel under tag " + std::to_string(config.tag) + " is missing a producer or its consumer");

    const auto ring = [&](size_t r) {
      return Channel::Ring{byKey.at(key(r, bufferRole)), byKey.at(key(r, headRole)), byKey.at(key(locking ? 0 : r, tailRole)), 0};
    };

    Endpoints endpoints;
    if (participation.consumer)
    {
      std::vector<Channel::Ring> all;
      for (size_t r = 0; r < rings; r++) all.push_back(ring(r));
      endpoints.consumer.emplace(Channel(Role::consumer, config, communication, locking ? MpscMode::locking : MpscMode::nonLocking, 0, std::move(all), consumerStorage));
    }
    for (const auto &[p, storage] : producerStorage)
      endpoints.producers.emplace(p, Channel(Role::producer, config, communication, locking ? MpscMode::locking : MpscMode::nonLocking, p, {ring(locking ? 0 : p)}, storage));
    return endpoints;
  }
};

Endpoints createSPSC(CommunicationManager &communication, MemoryManager &memory, const MemorySpace &space, const Participation &participation, const ChannelConfig &config)
{
  return ChannelFactory::create(communication, memory, space, true, MpscMode::nonLocking, 1, participation, config);
}

Endpoints createMPSC(CommunicationManager &communication,
                     MemoryManager &memory,
                     const MemorySpace &space,
                     MpscMode mode,
                     size_t producers,
                     const Participation &participation,
                     const ChannelConfig &config)
{
  return ChannelFactory::create(communication, memory, space, false, mode, producers, participation, config);
}

Channel::Channel(Role role, ChannelConfig config, CommunicationManager &communication, MpscMode mode, size_t producerIndex, std::vector<Ring> rings, std::shared_ptr<Storage> storage)
  : _role(role),
    _config(config),
    _communication(&communication),
    _mode(mode),
    _producerIndex(producerIndex),
    _rings(std::move(rings)),
    _storage(std::move(storage))
{}

Channel::~Channel() = default;

size_t Channel::producerIndex() const
{
  if (_role != Role::producer) raise(ErrorCode::wrongRole, "only producer endpoints have a producer index");
  return _producerIndex;
}

void Channel::publishIndex(const GlobalSlotPtr &target, uint64_t value)
{
  std::memcpy(_storage->scratch->getPointer(), &value, sizeof(value));
  _communication->memcpy(target, 0, _storage->scratch, 0, sizeof(value));
  _communication->fence(_config.tag);
}

uint64_t Channel::observedHead(const Ring &ring) const { return loadIndex(ring.head); }

uint64_t Channel::observedTail(const Ring &ring) const { return loadIndex(ring.tail); }

PushResult Channel::push(const LocalSlotPtr &message)
{
  if (_role != Role::producer) raise(ErrorCode::wrongRole, "push on a consumer endpoint");
  if (message->getSize() != _config.messageSizeBytes)
    raise(ErrorCode::sizeMismatch, "message of " + std::to_string(message->getSize()) + " bytes on a channel of " + std::to_string(_config.messageSizeBytes) + "-byte messages");
  if (_mode == MpscMode::locking) return pushLocked(message);

  auto &ring = _rings.front();
  if (ring.index - observedTail(ring) >= _config.capacityMessages) return PushResult::full;

  _communication->memcpy(ring.buffer, (ring.index % _config.capacityMessages) * _config.messageSizeBytes, message, 0, _config.messageSizeBytes);
  _communication->fence(_config.tag);
  ring.index++;
  publishIndex(ring.head, ring.index);
  return PushResult::ok;
}

PushResult Channel::pushLocked(const LocalSlotPtr &message)
{
  auto &ring = _rings.front();
  const auto &scratch = _storage->scratch;
  _communication->acquireGlobalLock(ring.head);
  try
  {
    _communication->memcpy(scratch, 0, ring.head, 0, sizeof(uint64_t));
    _communication->memcpy(scratch, sizeof(uint64_t), ring.tail, 0, sizeof(uint64_t));
    _communication->fence(_config.tag);
    uint64_t indices[2];
    std::memcpy(indices, scratch->getPointer(), sizeof(indices));
    const auto [head, tail] = std::pair(indices[0], indices[1]);

    if (head - tail >= _config.capacityMessages)
    {
      _communication->releaseGlobalLock(ring.head);
      return PushResult::full;
    }

    _communication->memcpy(ring.buffer, (head % _config.capacityMessages) * _config.messageSizeBytes, message, 0, _config.messageSizeBytes);
    _communication->fence(_config.tag);
    publishIndex(ring.head, head + 1);
    ring.index = head + 1;
  }
  catch (...)
  {
    _communication->releaseGlobalLock(ring.head);
    throw;
  }
  _communication->releaseGlobalLock(ring.head);
  return PushResult::ok;
}

void Channel::pushBlocking(const LocalSlotPtr &message, Backoff backoff)
{
  for (size_t attempt = 0; push(message) == PushResult::full; attempt++)
    if (attempt >= backoff.immediateRetries) std::this_thread::sleep_for(backoff.sleep);
}

std::optional<size_t> Channel::nonEmptyRing()
{
  for (size_t i = 0; i < _rings.size(); i++)
  {
    const auto r = (_cursor + i) % _rings.size();
    if (observedHead(_rings[r]) > _rings[r].index) return r;
  }
  return std::nullopt;
}

std::optional<MessageView> Channel::peek()
{
  if (_role != Role::consumer) raise(ErrorCode::wrongRole, "peek on a producer endpoint");
  if (!_peeked) _peeked = nonEmptyRing();
  if (!_peeked) return std::nullopt;

  const auto &ring = _rings[*_peeked];
  const auto *base = static_cast<const std::byte *>(ring.buffer->getLocalCounterpart()->getPointer());
  const auto offset = (ring.index % _config.capacityMessages) * _config.messageSizeBytes;
  const auto producer = _mode == MpscMode::locking ? std::nullopt : std::optional(*_peeked);
  return MessageView{producer, std::span(base + offset, _config.messageSizeBytes)};
}

void Channel::pop()
{
  if (_role != Role::consumer) raise(ErrorCode::wrongRole, "pop on a producer endpoint");
  if (!_peeked) _peeked = nonEmptyRing();
  if (!_peeked) raise(ErrorCode::empty, "pop on an empty channel");

  auto &ring = _rings[*_peeked];
  ring.index++;
  publishIndex(ring.tail, ring.index);
  _cursor = (*_peeked + 1) % _rings.size();
  _peeked.reset();
}

size_t Channel::depth()
{
  if (_role == Role::producer && _mode == MpscMode::locking)
  {
    const auto &ring = _rings.front();
    const auto &scratch = _storage->scratch;
    _communication->memcpy(scratch, 0, ring.head, 0, sizeof(uint64_t));
    _communication->memcpy(scratch, sizeof(uint64_t), ring.tail, 0, sizeof(uint64_t));
    _communication->fence(_config.tag);
    uint64_t indices[2];
    std::memcpy(indices, scratch->getPointer(), sizeof(indices));
    return indices[0] - indices[1];
  }

  size_t total = 0;
  for (const auto &ring : _rings) total += _role == Role::producer ? ring.index - observedTail(ring) : observedHead(ring) - ring.index;
  return total;
}

} // namespace hicr::channel
