// SPDX-License-Identifier: Apache-2.0

#include <string>

#include <hicr/core/exceptions.hpp>
#include <hicr/core/execution.hpp>

namespace hicr
{

namespace
{

std::atomic<uint64_t> nextUnitId{0};
std::atomic<uint64_t> nextStateId{0};

thread_local ExecutionState *currentState = nullptr;

} // namespace

ExecutionUnit::ExecutionUnit(std::string kind, Function function)
  : _unitId(nextUnitId.fetch_add(1, std::memory_order_relaxed)),
    _kind(std::move(kind)),
    _function(std::move(function))
{
  if (!_function) raise(ErrorCode::invalidArgument, "execution unit requires a callable");
}

ExecutionState::ExecutionState(ExecutionUnitPtr unit, void *argument)
  : _stateId(nextStateId.fetch_add(1, std::memory_order_relaxed)),
    _unit(std::move(unit)),
    _argument(argument)
{
  if (_unit == nullptr) raise(ErrorCode::invalidArgument, "execution state requires an execution unit");
}

// Deliberately out of line: coroutine bodies may migrate between threads, so the thread-local must be re-read at
// every call instead of having its address cached across a context switch.
__attribute__((noinline)) ExecutionState *ExecutionState::current() { return currentState; }

void ExecutionState::setTransitionObserver(TransitionObserver observer)
{
  std::lock_guard lock(_observerMutex);
  _observer = std::move(observer);
}

void ExecutionState::setLifecycle(ExecutionLifecycle to)
{
  const auto from = _lifecycle.load(std::memory_order_acquire);
  _lifecycle.store(checkedTransition(from, to), std::memory_order_release);

  TransitionObserver observer;
  {
    std::lock_guard lock(_observerMutex);
    observer = _observer;
  }
  if (observer) observer(*this, from, to);
}

void ExecutionState::resume()
{
  const auto lifecycle = getLifecycle();
  if (lifecycle != ExecutionLifecycle::initialized && lifecycle != ExecutionLifecycle::suspended)
    raise(ErrorCode::wrongLifecycle, "cannot resume execution state " + std::to_string(_stateId) + " while " + std::string(toString(lifecycle)));
  if (_driven.exchange(true, std::memory_order_acq_rel))
    raise(ErrorCode::wrongLifecycle, "execution state " + std::to_string(_stateId) + " is already being driven");

  setLifecycle(ExecutionLifecycle::running);

  ExecutionState *previous = currentState;
  currentState = this;
  run();
  currentState = previous;

  std::exception_ptr error;
  if (_returned)
  {
    error = _error;
    setLifecycle(ExecutionLifecycle::finished);
  }
  else
    setLifecycle(ExecutionLifecycle::suspended);

  _driven.store(false, std::memory_order_release);
  if (error) std::rethrow_exception(error);
}

void ExecutionState::suspend()
{
  if (!supportsSuspension()) raise(ErrorCode::wrongLifecycle, "execution units of kind '" + _unit->getKind() + "' cannot suspend");
  if (current() != this || getLifecycle() != ExecutionLifecycle::running)
    raise(ErrorCode::wrongLifecycle, "suspend must be called from inside the running execution state");
  switchOut();
}

void ExecutionState::bodyReturned(std::exception_ptr error)
{
  _error = std::move(error);
  _returned = true;
}

} // namespace hicr
