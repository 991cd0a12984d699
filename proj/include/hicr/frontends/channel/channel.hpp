// SPDX-License-Identifier: Apache-2.0

/**
 * @file channel.hpp
 * @brief Fixed-capacity message channels over exchanged global slots (SPSC and MPSC)
 */

#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <hicr/core/communicationManager.hpp>
#include <hicr/core/memoryManager.hpp>

namespace hicr::channel
{

struct ChannelConfig
{
  size_t capacityMessages = 1;
  size_t messageSizeBytes = 1;
  Tag tag = 0;
};

enum class Role
{
  producer,
  consumer
};

enum class PushResult
{
  ok,
  full
};

enum class MpscMode
{
  /// One shared ring; producers take a global lock around each push
  locking,
  /// One SPSC ring per producer; the consumer polls them round-robin
  nonLocking
};

/// How pushBlocking waits for room: a number of immediate retries, then sleeps between attempts
struct Backoff
{
  size_t immediateRetries = 64;
  std::chrono::microseconds sleep{100};
};

/**
 * The endpoints the calling flow takes part in. Creation is collective over every instance of the deployment, so an
 * instance with no endpoint passes an empty participation (a bystander). On a single-instance deployment one flow
 * creates all endpoints at once and hands them to other flows.
 */
struct Participation
{
  bool consumer = false;
  std::vector<size_t> producers;

  static Participation asConsumer() { return {true, {}}; }
  static Participation asProducer(size_t index = 0) { return {false, {index}}; }
  static Participation bystander() { return {}; }
};

/// A message visible to the consumer; the bytes stay valid until it is popped
struct MessageView
{
  /// The ring's producer; unknown on a locking MPSC channel, whose producers share one ring
  std::optional<size_t> producer;
  std::span<const std::byte> bytes;
};

/**
 * One endpoint of a channel. Each ring is a circular buffer of capacity × messageSize bytes living at the consumer,
 * plus two monotonically increasing indices: head (advanced by the producer, stored next to the ring) and tail
 * (advanced by the consumer, stored where the producer can read it locally). Payload and index updates travel as
 * separate puts, each followed by a fence, so an index never becomes visible before the bytes it covers.
 *
 * An endpoint is used by one flow at a time. Destroying it releases its memory; do so only after the peers stopped
 * using the channel.
 */
class Channel
{
  public:

  Channel(Channel &&) noexcept = default;
  Channel &operator=(Channel &&) noexcept = default;
  ~Channel();

  [[nodiscard]] Role role() const { return _role; }
  [[nodiscard]] const ChannelConfig &config() const { return _config; }
  /// The producer index of a producer endpoint (0 for SPSC)
  [[nodiscard]] size_t producerIndex() const;

  /// Non-blocking. Throws WrongRole on a consumer, SizeMismatch when the message size differs from the config.
  PushResult push(const LocalSlotPtr &message);
  void pushBlocking(const LocalSlotPtr &message, Backoff backoff = {});

  /// The oldest message not yet popped (per ring, FIFO); nullopt when every ring is empty
  std::optional<MessageView> peek();
  /// Consumes the message peek would return; throws Empty when there is none
  void pop();

  /// Messages pushed but not yet popped, as far as this endpoint can tell
  [[nodiscard]] size_t depth();

  private:

  friend struct ChannelFactory;

  struct Ring
  {
    GlobalSlotPtr buffer;
    GlobalSlotPtr head;
    GlobalSlotPtr tail;
    /// Producer: its next head index. Consumer: its next tail index.
    uint64_t index = 0;
  };

  struct Storage;

  Channel(Role role, ChannelConfig config, CommunicationManager &communication, MpscMode mode, size_t producerIndex, std::vector<Ring> rings, std::shared_ptr<Storage> storage);

  void publishIndex(const GlobalSlotPtr &target, uint64_t value);
  [[nodiscard]] uint64_t observedHead(const Ring &ring) const;
  [[nodiscard]] uint64_t observedTail(const Ring &ring) const;
  std::optional<size_t> nonEmptyRing();
  PushResult pushLocked(const LocalSlotPtr &message);

  Role _role;
  ChannelConfig _config;
  CommunicationManager *_communication;
  MpscMode _mode;
  size_t _producerIndex;
  std::vector<Ring> _rings;
  std::shared_ptr<Storage> _storage;
  /// Consumer: ring to start the next round-robin scan from
  size_t _cursor = 0;
  std::optional<size_t> _peeked;
};

struct Endpoints
{
  std::optional<Channel> consumer;
  std::map<size_t, Channel> producers;
};

/**
 * Collective over all instances. The consumer allocates the ring and head index in `space`, each producer its tail
 * index. Throws InvalidArgument for a zero capacity or message size, and ConfigMismatch when participants disagree on
 * the configuration or a party is missing.
 */
Endpoints createSPSC(CommunicationManager &communication, MemoryManager &memory, const MemorySpace &space, const Participation &participation, const ChannelConfig &config);

/// As createSPSC, for `producers` producers indexed 0..producers-1
Endpoints createMPSC(CommunicationManager &communication,
                     MemoryManager &memory,
                     const MemorySpace &space,
                     MpscMode mode,
                     size_t producers,
                     const Participation &participation,
                     const ChannelConfig &config);

/// The checksum embedded in a channel's exchange keys (48 bits)
uint64_t configChecksum(MpscMode mode, size_t producers, const ChannelConfig &config, bool spsc);

} // namespace hicr::channel
