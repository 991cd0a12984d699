// SPDX-License-Identifier: Apache-2.0

/**
 * @file communicationManager.hpp
 * @brief Abstract communication manager: memcpy, fences and global slot exchange
 */

#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include <hicr/core/definitions.hpp>
#include <hicr/core/direction.hpp>
#include <hicr/core/memorySlot.hpp>

namespace hicr
{

/// Either end of a memcpy
using SlotRef = std::variant<LocalSlotPtr, GlobalSlotPtr>;

/**
 * Identifies an initiated transfer. Completion is observed through fence(tag) for transfers that involve a global
 * slot, and through fenceLocal() for local-to-local copies.
 */
struct TransferHandle
{
  uint64_t id;
  MemcpyDirection direction;
  std::optional<Tag> tag;
};

using Contribution = std::pair<Key, LocalSlotPtr>;

/**
 * Mediates all data movement.
 *
 * The public operations carry the model rules every backend inherits: only the three legal directions, byte ranges
 * inside their slots, global slots produced by this same manager, and the exchange result agreeing with the
 * contributions. Backends implement the protected hooks.
 *
 * memcpy returns once the transfer is initiated; the destination is only guaranteed to hold the source bytes (as they
 * were at initiation) after the matching fence. fence(tag) waits for every transfer this instance initiated under
 * the tag, and for every incoming transfer that a peer initiated before that peer's own fence on the tag.
 */
class CommunicationManager
{
  public:

  CommunicationManager() = default;
  virtual ~CommunicationManager() = default;

  CommunicationManager(const CommunicationManager &) = delete;
  CommunicationManager &operator=(const CommunicationManager &) = delete;

  [[nodiscard]] virtual InstanceId getCurrentInstanceId() const = 0;

  TransferHandle memcpy(const SlotRef &destination, size_t destinationOffset, const SlotRef &source, size_t sourceOffset, size_t size);

  void fence(Tag tag);
  void fenceLocal();

  /// Bounds every subsequent fence; nullopt (the default) waits indefinitely
  void setFenceTimeout(std::optional<std::chrono::milliseconds> timeout);
  [[nodiscard]] std::optional<std::chrono::milliseconds> getFenceTimeout() const;

  /**
   * Collective: every instance calls it with the same tag, contributing zero or more (key, slot) pairs. Every
   * participant receives the same table, one global slot per contribution across all instances, ordered by key.
   * Throws DuplicateKey (on every participant) when a key is contributed twice.
   */
  std::vector<GlobalSlotPtr> exchangeGlobalSlots(Tag tag, const std::vector<Contribution> &contributions);

  /// Throws NotFound for an unknown tag or key
  [[nodiscard]] GlobalSlotPtr getGlobalSlot(Tag tag, Key key) const;
  [[nodiscard]] std::vector<GlobalSlotPtr> getGlobalSlots(Tag tag) const;

  /**
   * Non-collective: makes a local slot reachable by peers that later receive its serialized form.
   */
  GlobalSlotPtr promoteLocalSlot(const LocalSlotPtr &slot, Tag tag, Key key);

  /// Withdraws a promoted slot; peers holding its serialized form can no longer reach it
  void destroyPromotedSlot(const GlobalSlotPtr &slot);

  [[nodiscard]] std::vector<uint8_t> serializeGlobalSlot(const GlobalMemorySlot &slot) const;
  GlobalSlotPtr deserializeGlobalSlot(std::span<const uint8_t> bytes);

  /// Mutual exclusion on a global slot across all instances (and flows within one instance)
  void acquireGlobalLock(const GlobalSlotPtr &slot);
  void releaseGlobalLock(const GlobalSlotPtr &slot);

  protected:

  struct ExchangeEntry
  {
    Key key;
    InstanceId owner;
    size_t size;
    std::vector<uint8_t> token;
    /// Set by the backend for entries owned by the current instance
    LocalSlotPtr localCounterpart;
  };

  /// Whether transfers touching this memory space are supported; UnsupportedSpacePair otherwise
  [[nodiscard]] virtual bool supportsMemorySpace(const MemorySpace &space) const;

  virtual void copyLocal(const LocalSlotPtr &destination, size_t destinationOffset, const LocalSlotPtr &source, size_t sourceOffset, size_t size) = 0;
  virtual void put(const GlobalSlotPtr &destination, size_t destinationOffset, const LocalSlotPtr &source, size_t sourceOffset, size_t size) = 0;
  virtual void get(const LocalSlotPtr &destination, size_t destinationOffset, const GlobalSlotPtr &source, size_t sourceOffset, size_t size) = 0;

  virtual void fenceTag(Tag tag, std::optional<std::chrono::milliseconds> timeout) = 0;
  virtual void fenceLocalTransfers() = 0;

  /// Performs the collective and returns the agreed table
  virtual std::vector<ExchangeEntry> exchange(Tag tag, const std::vector<Contribution> &contributions) = 0;

  /// Registers a slot for remote access and returns its token
  virtual std::vector<uint8_t> registerPromoted(const LocalSlotPtr &slot) = 0;
  virtual void deregisterPromoted(const GlobalMemorySlot &slot) = 0;

  /// Maps a token owned by the current instance back to its local slot (null if unknown)
  virtual LocalSlotPtr resolveLocalToken(const std::vector<uint8_t> &token) = 0;

  virtual void lockGlobal(const GlobalMemorySlot &slot) = 0;
  virtual void unlockGlobal(const GlobalMemorySlot &slot) = 0;

  GlobalSlotPtr makeGlobalSlot(Tag tag, Key key, InstanceId owner, size_t size, LocalSlotPtr local, std::vector<uint8_t> token) const;

  private:

  mutable std::mutex _tableMutex;
  std::map<Tag, std::map<Key, GlobalSlotPtr>> _exchangedSlots;
  std::optional<std::chrono::milliseconds> _fenceTimeout;
  std::atomic<uint64_t> _nextTransferId{0};
};

/**
 * Collective synchronization point built from an empty exchange: returns on every instance only after all instances
 * have called it with the same tag.
 */
void barrier(CommunicationManager &communicationManager, Tag tag);

} // namespace hicr
