// SPDX-License-Identifier: Apache-2.0

/**
 * @file tasking.hpp
 * @brief Stateful tasks, pull-driven workers and an execution trace
 */

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <hicr/core/computeManager.hpp>

namespace hicr::tasking
{

class Task;
using TaskPtr = std::shared_ptr<Task>;

/**
 * A unit of work plus the state of its single run. The execution state is created when a worker first picks the
 * task up, by the runtime's task compute manager.
 *
 * Callbacks run on the worker flow right after the transition they report, so onSuspend fires once the task has
 * fully left its worker and may be resumed by another.
 */
class Task
{
  public:

  using Callback = std::function<void(Task &)>;

  explicit Task(ExecutionUnitPtr unit, void *argument = nullptr);

  [[nodiscard]] uint64_t getId() const { return _id; }
  [[nodiscard]] const ExecutionUnitPtr &getUnit() const { return _unit; }
  [[nodiscard]] void *getArgument() const { return _argument; }
  /// initialized until a worker first runs the task
  [[nodiscard]] ExecutionLifecycle getLifecycle() const;

  void onStart(Callback callback) { _onStart = std::move(callback); }
  void onSuspend(Callback callback) { _onSuspend = std::move(callback); }
  void onResume(Callback callback) { _onResume = std::move(callback); }
  void onFinish(Callback callback) { _onFinish = std::move(callback); }

  /// The exception that escaped the task body, if any
  [[nodiscard]] std::exception_ptr getError() const { return _error; }

  /// Suspends the calling task; only valid from inside a task body on a suspending compute manager
  static void yield();

  private:

  friend class TaskRuntime;

  const uint64_t _id;
  const ExecutionUnitPtr _unit;
  void *const _argument;
  /// Dropped once finished, so that a coroutine stack is not held by a finished task
  ExecutionStatePtr _state;
  std::atomic<bool> _finished{false};
  std::exception_ptr _error;
  Callback _onStart, _onSuspend, _onResume, _onFinish;
};

enum class TraceEventKind
{
  taskStart,
  taskSuspend,
  taskResume,
  taskFinish,
  workerIdle,
  workerBusy,
};

std::string_view toString(TraceEventKind kind);

struct TraceEvent
{
  /// Nanoseconds on a monotonic clock since the runtime was created
  uint64_t timestampNanos;
  uint32_t workerId;
  std::optional<uint64_t> taskId;
  TraceEventKind event;
};

/// One JSON object per line: {"ts":u64,"worker":u32,"task":u64|null,"event":str}
std::string toJsonLine(const TraceEvent &event);

struct RuntimeOptions
{
  /// Consecutive empty pulls before an idle worker starts yielding the CPU between pulls
  size_t idleSpins = 256;
  bool recordTrace = true;
};

/**
 * One worker per compute resource, each looping: pull a task; if none, back off; otherwise run it until it finishes or
 * suspends, firing its callbacks and recording trace events.
 *
 * Scheduling is entirely the pull function's business. It is called concurrently by all workers. A task that
 * suspends goes to the runtime's suspended set; the pull function may hand it out again once it is resumable, and
 * the worker that gets it resumes it.
 *
 * Each task execution segment is bracketed by workerBusy/workerIdle events carrying the same timestamps as the task
 * events, so per-worker busy time equals the summed task segments. Every worker also records a workerIdle event when
 * it starts and when it exits.
 */
class TaskRuntime
{
  public:

  using PullFunction = std::function<TaskPtr(uint32_t workerId)>;

  /// Throws InvalidArgument for no resources, UnsupportedResource when the worker manager rejects one
  TaskRuntime(ComputeManager &workerManager, ComputeManager &taskManager, std::vector<ComputeResource> workerResources, PullFunction pull, RuntimeOptions options = {});
  ~TaskRuntime();

  TaskRuntime(const TaskRuntime &) = delete;
  TaskRuntime &operator=(const TaskRuntime &) = delete;

  /// Throws AlreadyStarted when called twice
  void start();

  /**
   * Asks the workers to exit at their next pull and waits for them. Throws NotStarted before start(), and
   * WrongLifecycle while tasks are suspended unless `force`, in which case those tasks are abandoned.
   */
  void stop(bool force = false);

  [[nodiscard]] size_t workerCount() const { return _resources.size(); }

  /// Tasks currently suspended
  [[nodiscard]] std::vector<TaskPtr> resumable() const;
  [[nodiscard]] bool isSuspended(const TaskPtr &task) const;

  [[nodiscard]] uint64_t finishedCount() const { return _finished.load(std::memory_order_acquire); }

  /// All recorded events, merged across workers in timestamp order
  [[nodiscard]] std::vector<TraceEvent> trace() const;

  /// Writes the trace as JSON lines. Throws AlreadyStarted while running, IoFailure when the file cannot be written.
  void emitTrace(const std::string &path) const;

  private:

  struct Worker;

  void workerLoop(Worker &worker);
  void runTask(Worker &worker, const TaskPtr &task);
  uint64_t now() const;

  ComputeManager &_workerManager;
  ComputeManager &_taskManager;
  const std::vector<ComputeResource> _resources;
  const PullFunction _pull;
  const RuntimeOptions _options;
  const std::chrono::steady_clock::time_point _epoch;

  std::vector<std::unique_ptr<Worker>> _workers;
  std::atomic<bool> _running{false};
  std::atomic<bool> _stopRequested{false};
  bool _started = false;
  std::atomic<uint64_t> _finished{0};

  mutable std::mutex _suspendedMutex;
  std::set<TaskPtr> _suspended;
};

} // namespace hicr::tasking
