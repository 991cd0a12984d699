// SPDX-License-Identifier: Apache-2.0

/**
 * @file coroutineComputeManager.hpp
 * @brief Compute manager running execution states as suspendable user-level contexts
 */

#pragma once

#include <cstddef>
#include <string_view>

#include <hicr/backends/host/threadComputeManager.hpp>
#include <hicr/core/computeManager.hpp>

namespace hicr::backend::host
{

/**
 * Runs "coroutine" execution units. Each processing unit is driven by one OS thread that switches into and out of the
 * states' own stacks. A body may yield at any point; the state becomes suspended with its stack intact and continues
 * after the yield point when resumed.
 *
 * A suspended state may be resumed from any flow, including a different processing unit's thread.
 */
class CoroutineComputeManager final : public ComputeManager
{
  public:

  static constexpr std::string_view unitKind = "coroutine";
  static constexpr size_t defaultStackBytes = 256 * 1024;

  explicit CoroutineComputeManager(size_t stackBytes = defaultStackBytes, bool pinThreads = true);

  [[nodiscard]] std::string_view getExecutionUnitKind() const override { return unitKind; }
  [[nodiscard]] bool acceptsResource(const ComputeResource &resource) const override;
  [[nodiscard]] bool supportsSuspension() const override { return true; }

  [[nodiscard]] size_t getStackBytes() const { return _stackBytes; }
  [[nodiscard]] std::vector<AffinityRecord> getAffinityLog() const { return _affinity.getRecords(); }

  protected:

  ProcessingUnitPtr makeProcessingUnit(const ComputeResource &resource) override;
  ExecutionStatePtr makeExecutionState(ExecutionUnitPtr unit, void *argument) override;
  void startDriver(ProcessingUnit &pu) override;
  void notifyDriver(ProcessingUnit &pu) override;
  void stopDriver(ProcessingUnit &pu) override;

  private:

  const size_t _stackBytes;
  const bool _pinThreads;
  AffinityLog _affinity;
};

/// Suspends the execution state running on the calling flow; throws WrongLifecycle outside a running coroutine
void coroutineYield();
void coroutineYield(ExecutionState &currentState);

} // namespace hicr::backend::host
