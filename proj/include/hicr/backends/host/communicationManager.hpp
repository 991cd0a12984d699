// SPDX-License-Identifier: Apache-2.0

/**
 * @file communicationManager.hpp
 * @brief Intra-process communication manager: direct copies with mutex-guarded fence counters
 */

#pragma once

#include <condition_variable>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>

#include <hicr/core/communicationManager.hpp>

namespace hicr::backend::host
{

/**
 * Every transfer is performed eagerly by the initiating flow, so a fence only has to observe the counters settle.
 * Overlapping source and destination ranges behave as if copied through an intermediate buffer.
 *
 * All global slots live in the single current instance; exchanges involve only the calling flow.
 */
class CommunicationManager final : public hicr::CommunicationManager
{
  public:

  /// `supportedSpaceKinds` restricts which memory space kinds may take part in transfers (all when empty)
  explicit CommunicationManager(InstanceId currentInstance = 0, std::set<std::string> supportedSpaceKinds = {});

  [[nodiscard]] InstanceId getCurrentInstanceId() const override { return _self; }

  /// Transfers initiated and completed so far under a tag
  [[nodiscard]] std::pair<uint64_t, uint64_t> getCounters(Tag tag) const;

  protected:

  [[nodiscard]] bool supportsMemorySpace(const MemorySpace &space) const override;

  void copyLocal(const LocalSlotPtr &destination, size_t destinationOffset, const LocalSlotPtr &source, size_t sourceOffset, size_t size) override;
  void put(const GlobalSlotPtr &destination, size_t destinationOffset, const LocalSlotPtr &source, size_t sourceOffset, size_t size) override;
  void get(const LocalSlotPtr &destination, size_t destinationOffset, const GlobalSlotPtr &source, size_t sourceOffset, size_t size) override;

  void fenceTag(Tag tag, std::optional<std::chrono::milliseconds> timeout) override;
  void fenceLocalTransfers() override;

  std::vector<ExchangeEntry> exchange(Tag tag, const std::vector<Contribution> &contributions) override;

  std::vector<uint8_t> registerPromoted(const LocalSlotPtr &slot) override;
  void deregisterPromoted(const GlobalMemorySlot &slot) override;
  LocalSlotPtr resolveLocalToken(const std::vector<uint8_t> &token) override;

  void lockGlobal(const GlobalMemorySlot &slot) override;
  void unlockGlobal(const GlobalMemorySlot &slot) override;

  private:

  struct Counters
  {
    uint64_t initiated = 0;
    uint64_t completed = 0;
  };

  void transfer(std::optional<Tag> tag, void *destination, const void *source, size_t size);
  LocalSlotPtr counterpartOf(const GlobalMemorySlot &slot) const;
  std::vector<uint8_t> registerSlot(const LocalSlotPtr &slot);

  const InstanceId _self;
  const std::set<std::string> _supportedSpaceKinds;

  mutable std::mutex _mutex;
  std::condition_variable _settled;
  std::map<Tag, Counters> _tagCounters;
  Counters _localCounters;

  uint64_t _nextToken = 1;
  std::map<uint64_t, LocalSlotPtr> _registry;

  std::mutex _lockMutex;
  std::condition_variable _lockCv;
  std::set<uint64_t> _heldLocks;
};

} // namespace hicr::backend::host
