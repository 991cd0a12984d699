// SPDX-License-Identifier: Apache-2.0

/**
 * @file communicationManager.hpp
 * @brief Communication manager over the TCP runtime: emulated one-sided puts and gets, counter-based fences
 */

#pragma once

#include <memory>

#include <hicr/backends/net/runtime.hpp>
#include <hicr/core/communicationManager.hpp>

namespace hicr::backend::net
{

/**
 * Remote tokens are 16 bytes: the owner's buffer id and the buffer size. The owner's address comes from the peer
 * table. Transfers whose remote end is the current instance are performed directly.
 */
class CommunicationManager final : public hicr::CommunicationManager
{
  public:

  explicit CommunicationManager(std::shared_ptr<Runtime> runtime);

  [[nodiscard]] InstanceId getCurrentInstanceId() const override { return _runtime->selfId(); }
  [[nodiscard]] Runtime &getRuntime() const { return *_runtime; }

  protected:

  void copyLocal(const LocalSlotPtr &destination, size_t destinationOffset, const LocalSlotPtr &source, size_t sourceOffset, size_t size) override;
  void put(const GlobalSlotPtr &destination, size_t destinationOffset, const LocalSlotPtr &source, size_t sourceOffset, size_t size) override;
  void get(const LocalSlotPtr &destination, size_t destinationOffset, const GlobalSlotPtr &source, size_t sourceOffset, size_t size) override;

  void fenceTag(Tag tag, std::optional<std::chrono::milliseconds> timeout) override;
  void fenceLocalTransfers() override {}

  std::vector<ExchangeEntry> exchange(Tag tag, const std::vector<Contribution> &contributions) override;

  std::vector<uint8_t> registerPromoted(const LocalSlotPtr &slot) override;
  void deregisterPromoted(const GlobalMemorySlot &slot) override;
  LocalSlotPtr resolveLocalToken(const std::vector<uint8_t> &token) override;

  void lockGlobal(const GlobalMemorySlot &slot) override;
  void unlockGlobal(const GlobalMemorySlot &slot) override;

  private:

  static std::vector<uint8_t> makeToken(uint64_t bufferId, uint64_t size);
  static RemoteBuffer remoteOf(const GlobalMemorySlot &slot);

  const std::shared_ptr<Runtime> _runtime;
};

} // namespace hicr::backend::net
