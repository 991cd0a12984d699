// SPDX-License-Identifier: Apache-2.0

/**
 * @file computeManager.hpp
 * @brief Processing units and the abstract compute manager contract
 */

#pragma once

#include <condition_variable>
#include <cstdint>
#include <exception>
#include <memory>
#include <mutex>
#include <string_view>

#include <hicr/core/execution.hpp>
#include <hicr/core/lifecycle.hpp>
#include <hicr/core/topology.hpp>

namespace hicr
{

class ComputeManager;

/**
 * A compute resource that has been set up to drive execution states.
 *
 * The unit holds at most one execution state at a time. When that state finishes the unit returns to ready; when it
 * yields the unit becomes suspended and keeps the state until resumed.
 */
class ProcessingUnit
{
  public:

  explicit ProcessingUnit(ComputeResource resource);
  virtual ~ProcessingUnit() = default;

  ProcessingUnit(const ProcessingUnit &) = delete;
  ProcessingUnit &operator=(const ProcessingUnit &) = delete;

  [[nodiscard]] uint64_t getId() const { return _puId; }
  [[nodiscard]] const ComputeResource &getResource() const { return _resource; }
  [[nodiscard]] ProcessingUnitLifecycle getLifecycle() const;

  protected:

  friend class ComputeManager;

  /// Driver side: the held state and whether it still has to be (re)entered
  ExecutionStatePtr takeDispatchedState();

  /// Driver side: called once the held state's resume() returned
  void completeExecution(std::exception_ptr error);

  /// Moves the lifecycle, throwing IllegalTransition; caller holds _mutex
  void transitionLocked(ProcessingUnitLifecycle to);

  mutable std::mutex _mutex;
  std::condition_variable _cv;

  private:

  const uint64_t _puId;
  const ComputeResource _resource;
  ProcessingUnitLifecycle _lifecycle = ProcessingUnitLifecycle::created;
  ExecutionStatePtr _heldState;
  bool _dispatched = false;
  std::exception_ptr _error;
};

using ProcessingUnitPtr = std::shared_ptr<ProcessingUnit>;

/**
 * Creates processing units and execution states, and drives states on units.
 *
 * The public operations enforce the lifecycle rules shared by every backend (throwing WrongLifecycle on misuse)
 * before delegating to the protected hooks. Execution is asynchronous: execute() returns once the unit has been handed
 * the state; only awaitCompletion() blocks.
 */
class ComputeManager
{
  public:

  virtual ~ComputeManager() = default;

  /// Kind label of the execution units this manager runs, e.g. "os-thread"
  [[nodiscard]] virtual std::string_view getExecutionUnitKind() const = 0;
  [[nodiscard]] virtual bool acceptsResource(const ComputeResource &resource) const = 0;
  /// Whether states created by this manager may suspend
  [[nodiscard]] virtual bool supportsSuspension() const = 0;

  /// Wraps a function into an execution unit of this manager's kind
  ExecutionUnitPtr createExecutionUnit(ExecutionUnit::Function function) const;

  ProcessingUnitPtr createProcessingUnit(const ComputeResource &resource);
  ExecutionStatePtr createExecutionState(ExecutionUnitPtr unit, void *argument = nullptr);

  void initialize(ProcessingUnit &pu);
  void execute(ProcessingUnit &pu, ExecutionStatePtr state);

  /// Continues the state held by a suspended unit
  void resume(ProcessingUnit &pu);

  /// Blocks until the unit is no longer executing; rethrows an exception that escaped the state's body
  void awaitCompletion(ProcessingUnit &pu);

  /// Waits for any running state, then releases the unit's resources
  void finalize(ProcessingUnit &pu);

  protected:

  virtual ProcessingUnitPtr makeProcessingUnit(const ComputeResource &resource) = 0;
  virtual ExecutionStatePtr makeExecutionState(ExecutionUnitPtr unit, void *argument) = 0;

  /// Brings up whatever drives the unit (e.g. an OS thread)
  virtual void startDriver(ProcessingUnit &pu) = 0;
  /// Signals the driver that a state has been dispatched to it
  virtual void notifyDriver(ProcessingUnit &pu) = 0;
  /// Tears the driver down; the unit is not executing when this is called
  virtual void stopDriver(ProcessingUnit &pu) = 0;
};

} // namespace hicr
