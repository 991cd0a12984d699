// SPDX-License-Identifier: Apache-2.0

#include <pthread.h>
#include <sched.h>

#include "driverProcessingUnit.hpp"
#include <hicr/backends/host/threadComputeManager.hpp>
#include <hicr/backends/host/topologyManager.hpp>
#include <hicr/core/exceptions.hpp>

namespace hicr::backend::host
{

namespace
{

class ThreadExecutionState final : public ExecutionState
{
  public:

  using ExecutionState::ExecutionState;

  [[nodiscard]] bool supportsSuspension() const override { return false; }

  protected:

  void run() override
  {
    try
    {
      getUnit().getFunction()(getArgument());
      bodyReturned(nullptr);
    }
    catch (...)
    {
      bodyReturned(std::current_exception());
    }
  }

  void switchOut() override { raise(ErrorCode::wrongLifecycle, "os-thread execution states cannot suspend"); }
};

} // namespace

void AffinityLog::pin(uint64_t processingUnitId, std::optional<uint32_t> core)
{
  bool applied = false;
  if (core && *core < CPU_SETSIZE)
  {
    cpu_set_t mask;
    CPU_ZERO(&mask);
    CPU_SET(*core, &mask);
    applied = pthread_setaffinity_np(pthread_self(), sizeof(mask), &mask) == 0;
  }
  std::lock_guard lock(_mutex);
  _records.push_back({processingUnitId, core, applied});
}

std::vector<AffinityRecord> AffinityLog::getRecords() const
{
  std::lock_guard lock(_mutex);
  return _records;
}

bool ThreadComputeManager::acceptsResource(const ComputeResource &resource) const { return resource.kind == TopologyManager::computeResourceKind; }

ProcessingUnitPtr ThreadComputeManager::makeProcessingUnit(const ComputeResource &resource)
{
  return std::make_shared<DriverProcessingUnit>(resource, [this](DriverProcessingUnit &pu) {
    _affinity.pin(pu.getId(), _pinThreads ? pu.getResource().affinityHint : std::nullopt);
  });
}

ExecutionStatePtr ThreadComputeManager::makeExecutionState(ExecutionUnitPtr unit, void *argument)
{
  return std::make_shared<ThreadExecutionState>(std::move(unit), argument);
}

void ThreadComputeManager::startDriver(ProcessingUnit &pu) { static_cast<DriverProcessingUnit &>(pu).start(); }
void ThreadComputeManager::notifyDriver(ProcessingUnit &pu) { static_cast<DriverProcessingUnit &>(pu).wake(); }
void ThreadComputeManager::stopDriver(ProcessingUnit &pu) { static_cast<DriverProcessingUnit &>(pu).stop(); }

} // namespace hicr::backend::host
