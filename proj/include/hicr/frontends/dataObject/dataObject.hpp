// SPDX-License-Identifier: Apache-2.0

/**
 * @file dataObject.hpp
 * @brief Publish and retrieve byte blocks by identifier, without pre-exchanged buffers
 */

#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include <hicr/core/communicationManager.hpp>
#include <hicr/core/instanceManager.hpp>

namespace hicr::dataobject
{

/// (publisher instance id low 32 bits << 32) | per-publisher sequence
using DataObjectId = uint64_t;

[[nodiscard]] constexpr uint32_t publisherBits(DataObjectId id) { return static_cast<uint32_t>(id >> 32); }

/**
 * Everything needed to fetch a published object, and nothing more: no payload.
 */
struct DataObjectHandle
{
  DataObjectId id = 0;
  uint64_t sizeBytes = 0;
  /// Serialized global slot, as produced by the communication manager
  std::vector<uint8_t> slot;

  /// Fixed layout: id u64 | size u64 | slot length u32 | slot bytes
  [[nodiscard]] std::vector<uint8_t> serialize() const;
  static DataObjectHandle deserialize(std::span<const uint8_t> bytes);

  bool operator==(const DataObjectHandle &) const = default;
};

/**
 * The data objects of one instance, plus the means to reach those of its peers.
 *
 * Every instance that publishes or retrieves objects under a tag creates one registry for that tag; the registry
 * answers its peers' handle lookups through an instance manager service. Published slots are pinned, so freeing them
 * fails until they are unpublished. Mutating a slot after publishing it is undefined.
 */
class Registry
{
  public:

  Registry(CommunicationManager &communication, InstanceManager &instances, Tag tag);
  ~Registry();

  Registry(const Registry &) = delete;
  Registry &operator=(const Registry &) = delete;

  /// Throws InvalidSlot for an invalid slot
  DataObjectId publish(const LocalSlotPtr &slot);

  /// Throws UnknownObject when the id was never published or has been unpublished
  DataObjectHandle getHandle(DataObjectId id);

  /**
   * Starts copying the object into `destination`; complete after fence(). Throws SizeMismatch when the destination is
   * too small, UnknownObject when the object is gone (here, or at fence time for remote objects).
   */
  TransferHandle get(const DataObjectHandle &handle, const LocalSlotPtr &destination);

  void fence();

  /// Only the publisher can unpublish; throws UnknownObject otherwise
  void unpublish(DataObjectId id);

  [[nodiscard]] Tag getTag() const { return _tag; }

  /// Name hash of the lookup service serving `tag`
  static uint64_t lookupServiceHash(Tag tag);

  private:

  struct Published
  {
    LocalSlotPtr slot;
    GlobalSlotPtr global;
  };

  /// Shared with the lookup service, which may outlive a call into the registry
  struct State
  {
    std::mutex mutex;
    std::map<DataObjectId, Published> objects;
    CommunicationManager *communication;
  };

  static std::optional<std::vector<uint8_t>> lookup(State &state, DataObjectId id);

  CommunicationManager &_communication;
  InstanceManager &_instances;
  const Tag _tag;
  const InstanceId _self;
  std::shared_ptr<State> _state;
  std::atomic<uint32_t> _nextSequence{0};
};

} // namespace hicr::dataobject
