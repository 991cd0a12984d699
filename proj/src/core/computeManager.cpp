// SPDX-License-Identifier: Apache-2.0

#include <string>
#include <utility>

#include <hicr/core/computeManager.hpp>
#include <hicr/core/exceptions.hpp>

namespace hicr
{

namespace
{

std::atomic<uint64_t> nextProcessingUnitId{0};

} // namespace

ProcessingUnit::ProcessingUnit(ComputeResource resource)
  : _puId(nextProcessingUnitId.fetch_add(1, std::memory_order_relaxed)),
    _resource(std::move(resource))
{}

ProcessingUnitLifecycle ProcessingUnit::getLifecycle() const
{
  std::lock_guard lock(_mutex);
  return _lifecycle;
}

void ProcessingUnit::transitionLocked(ProcessingUnitLifecycle to) { _lifecycle = checkedTransition(_lifecycle, to); }

ExecutionStatePtr ProcessingUnit::takeDispatchedState()
{
  std::lock_guard lock(_mutex);
  if (!_dispatched) return nullptr;
  _dispatched = false;
  return _heldState;
}

void ProcessingUnit::completeExecution(std::exception_ptr error)
{
  {
    std::lock_guard lock(_mutex);
    _error = std::move(error);
    if (_heldState->isFinished())
    {
      _heldState.reset();
      transitionLocked(ProcessingUnitLifecycle::ready);
    }
    else
      transitionLocked(ProcessingUnitLifecycle::suspended);
  }
  _cv.notify_all();
}

ExecutionUnitPtr ComputeManager::createExecutionUnit(ExecutionUnit::Function function) const
{
  return std::make_shared<const ExecutionUnit>(std::string(getExecutionUnitKind()), std::move(function));
}

ProcessingUnitPtr ComputeManager::createProcessingUnit(const ComputeResource &resource)
{
  if (!acceptsResource(resource))
    raise(ErrorCode::unsupportedResource, "compute resource " + std::to_string(resource.resourceId) + " of kind '" + resource.kind + "' is not supported");
  return makeProcessingUnit(resource);
}

ExecutionStatePtr ComputeManager::createExecutionState(ExecutionUnitPtr unit, void *argument)
{
  if (unit == nullptr) raise(ErrorCode::invalidArgument, "null execution unit");
  if (unit->getKind() != getExecutionUnitKind())
    raise(ErrorCode::unsupportedUnitKind, "unit kind '" + unit->getKind() + "' not accepted by a '" + std::string(getExecutionUnitKind()) + "' compute manager");
  return makeExecutionState(std::move(unit), argument);
}

void ComputeManager::initialize(ProcessingUnit &pu)
{
  {
    std::lock_guard lock(pu._mutex);
    if (pu._lifecycle != ProcessingUnitLifecycle::created) raise(ErrorCode::wrongLifecycle, "processing unit already initialized");
  }
  startDriver(pu);
  {
    std::lock_guard lock(pu._mutex);
    pu.transitionLocked(ProcessingUnitLifecycle::ready);
  }
}

void ComputeManager::execute(ProcessingUnit &pu, ExecutionStatePtr state)
{
  if (state == nullptr) raise(ErrorCode::invalidArgument, "null execution state");
  if (state->getUnit().getKind() != getExecutionUnitKind()) raise(ErrorCode::unsupportedUnitKind, "state was not created for this compute manager's unit kind");

  const auto stateLifecycle = state->getLifecycle();
  if (stateLifecycle != ExecutionLifecycle::initialized && stateLifecycle != ExecutionLifecycle::suspended)
    raise(ErrorCode::wrongLifecycle, "cannot execute a state that is " + std::string(toString(stateLifecycle)));

  {
    std::lock_guard lock(pu._mutex);
    if (pu._lifecycle != ProcessingUnitLifecycle::ready)
      raise(ErrorCode::wrongLifecycle, "processing unit is " + std::string(toString(pu._lifecycle)) + ", not ready");
    pu.transitionLocked(ProcessingUnitLifecycle::executing);
    pu._heldState = std::move(state);
    pu._dispatched = true;
    pu._error = nullptr;
  }
  notifyDriver(pu);
}

void ComputeManager::resume(ProcessingUnit &pu)
{
  {
    std::lock_guard lock(pu._mutex);
    if (pu._lifecycle != ProcessingUnitLifecycle::suspended)
      raise(ErrorCode::wrongLifecycle, "processing unit is " + std::string(toString(pu._lifecycle)) + ", not suspended");
    pu.transitionLocked(ProcessingUnitLifecycle::executing);
    pu._dispatched = true;
  }
  notifyDriver(pu);
}

void ComputeManager::awaitCompletion(ProcessingUnit &pu)
{
  std::exception_ptr error;
  {
    std::unique_lock lock(pu._mutex);
    if (pu._lifecycle == ProcessingUnitLifecycle::created || pu._lifecycle == ProcessingUnitLifecycle::terminated)
      raise(ErrorCode::wrongLifecycle, "processing unit is " + std::string(toString(pu._lifecycle)));
    pu._cv.wait(lock, [&] { return pu._lifecycle != ProcessingUnitLifecycle::executing; });
    error = std::exchange(pu._error, nullptr);
  }
  if (error) std::rethrow_exception(error);
}

void ComputeManager::finalize(ProcessingUnit &pu)
{
  bool started;
  {
    std::unique_lock lock(pu._mutex);
    if (pu._lifecycle == ProcessingUnitLifecycle::terminated) raise(ErrorCode::wrongLifecycle, "processing unit already terminated");
    pu._cv.wait(lock, [&] { return pu._lifecycle != ProcessingUnitLifecycle::executing; });
    started = pu._lifecycle != ProcessingUnitLifecycle::created;
  }
  if (started) stopDriver(pu);
  {
    std::lock_guard lock(pu._mutex);
    pu.transitionLocked(ProcessingUnitLifecycle::terminated);
    pu._heldState.reset();
  }
  pu._cv.notify_all();
}

} // namespace hicr
