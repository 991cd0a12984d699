// SPDX-License-Identifier: Apache-2.0

/**
 * @file threadComputeManager.hpp
 * @brief Compute manager mapping each processing unit to an OS thread pinned to its core
 */

#pragma once

#include <mutex>
#include <optional>
#include <string_view>
#include <vector>

#include <hicr/core/computeManager.hpp>

namespace hicr::backend::host
{

/// One pin request issued by a processing unit's driver thread
struct AffinityRecord
{
  uint64_t processingUnitId;
  /// Core the resource was hinted to; nullopt means the unit ran unpinned
  std::optional<uint32_t> requestedCore;
  /// Whether the operating system accepted the request
  bool applied;
};

/**
 * Records affinity requests. Pinning is best effort: a rejected request is recorded and execution proceeds.
 */
class AffinityLog
{
  public:

  void pin(uint64_t processingUnitId, std::optional<uint32_t> core);
  [[nodiscard]] std::vector<AffinityRecord> getRecords() const;

  private:

  mutable std::mutex _mutex;
  std::vector<AffinityRecord> _records;
};

/**
 * Runs "os-thread" execution units. Each processing unit owns one OS thread bound 1-to-1 to the resource's hinted core;
 * states run to completion and cannot suspend.
 */
class ThreadComputeManager final : public ComputeManager
{
  public:

  static constexpr std::string_view unitKind = "os-thread";

  explicit ThreadComputeManager(bool pinThreads = true)
    : _pinThreads(pinThreads)
  {}

  [[nodiscard]] std::string_view getExecutionUnitKind() const override { return unitKind; }
  [[nodiscard]] bool acceptsResource(const ComputeResource &resource) const override;
  [[nodiscard]] bool supportsSuspension() const override { return false; }

  [[nodiscard]] std::vector<AffinityRecord> getAffinityLog() const { return _affinity.getRecords(); }

  protected:

  ProcessingUnitPtr makeProcessingUnit(const ComputeResource &resource) override;
  ExecutionStatePtr makeExecutionState(ExecutionUnitPtr unit, void *argument) override;
  void startDriver(ProcessingUnit &pu) override;
  void notifyDriver(ProcessingUnit &pu) override;
  void stopDriver(ProcessingUnit &pu) override;

  private:

  const bool _pinThreads;
  AffinityLog _affinity;
};

} // namespace hicr::backend::host
