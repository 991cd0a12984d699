// SPDX-License-Identifier: Apache-2.0

/**
 * @file execution.hpp
 * @brief Execution units (static function descriptions) and execution states (one run of a unit)
 */

#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <string>

#include <hicr/core/lifecycle.hpp>

namespace hicr
{

/**
 * Static, replicable description of a function. The kind label selects which compute managers can run it.
 */
class ExecutionUnit
{
  public:

  using Function = std::function<void(void *argument)>;

  ExecutionUnit(std::string kind, Function function);

  [[nodiscard]] uint64_t getId() const { return _unitId; }
  [[nodiscard]] const std::string &getKind() const { return _kind; }
  [[nodiscard]] const Function &getFunction() const { return _function; }

  private:

  const uint64_t _unitId;
  const std::string _kind;
  const Function _function;
};

using ExecutionUnitPtr = std::shared_ptr<const ExecutionUnit>;

/**
 * One run of an execution unit, from initialization to its single completion.
 *
 * resume() drives the state on the calling flow of execution until the body either returns (finished) or, for
 * suspendable states, calls suspend() (suspended). Only the driving flow changes the lifecycle, so a state is
 * observable as suspended only after its context has been fully saved.
 */
class ExecutionState
{
  public:

  using TransitionObserver = std::function<void(const ExecutionState &, ExecutionLifecycle from, ExecutionLifecycle to)>;

  ExecutionState(ExecutionUnitPtr unit, void *argument);
  virtual ~ExecutionState() = default;

  ExecutionState(const ExecutionState &) = delete;
  ExecutionState &operator=(const ExecutionState &) = delete;

  [[nodiscard]] uint64_t getId() const { return _stateId; }
  [[nodiscard]] const ExecutionUnit &getUnit() const { return *_unit; }
  [[nodiscard]] void *getArgument() const { return _argument; }
  [[nodiscard]] ExecutionLifecycle getLifecycle() const { return _lifecycle.load(std::memory_order_acquire); }
  [[nodiscard]] bool isFinished() const { return getLifecycle() == ExecutionLifecycle::finished; }

  [[nodiscard]] virtual bool supportsSuspension() const = 0;

  /**
   * Starts (initialized) or continues (suspended) the state on the calling flow.
   *
   * Throws WrongLifecycle if the state is running or finished. An exception escaping the body finishes the state and
   * is rethrown here.
   */
  void resume();

  /**
   * Called from inside the running body: gives control back to the flow that called resume().
   *
   * Throws WrongLifecycle when the state cannot suspend or is not the one currently running on this flow.
   */
  void suspend();

  /// Called on the driving flow after each lifecycle change
  void setTransitionObserver(TransitionObserver observer);

  /// The state whose body is executing on the calling flow, or null
  static ExecutionState *current();

  protected:

  /// Starts or continues the body; returns once it either suspended or returned
  virtual void run() = 0;

  /// Leaves the body (inside suspend()); returns when the state is resumed again
  virtual void switchOut() = 0;

  /// Called by run() implementations once the body has returned or thrown
  void bodyReturned(std::exception_ptr error);

  private:

  void setLifecycle(ExecutionLifecycle to);

  const uint64_t _stateId;
  const ExecutionUnitPtr _unit;
  void *const _argument;
  std::atomic<ExecutionLifecycle> _lifecycle{ExecutionLifecycle::initialized};
  std::atomic<bool> _driven{false};
  bool _returned = false;
  std::exception_ptr _error;
  std::mutex _observerMutex;
  TransitionObserver _observer;
};

using ExecutionStatePtr = std::shared_ptr<ExecutionState>;

} // namespace hicr
