// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include <hicr/core/exceptions.hpp>
#include <hicr/frontends/tasking/tasking.hpp>

namespace hicr::tasking
{

namespace
{

std::atomic<uint64_t> nextTaskId{0};

} // namespace

Task::Task(ExecutionUnitPtr unit, void *argument)
  : _id(nextTaskId.fetch_add(1, std::memory_order_relaxed)),
    _unit(std::move(unit)),
    _argument(argument)
{
  if (_unit == nullptr) raise(ErrorCode::invalidArgument, "task needs an execution unit");
}

ExecutionLifecycle Task::getLifecycle() const
{
  if (_finished.load(std::memory_order_acquire)) return ExecutionLifecycle::finished;
  return _state == nullptr ? ExecutionLifecycle::initialized : _state->getLifecycle();
}

void Task::yield()
{
  auto *state = ExecutionState::current();
  if (state == nullptr) raise(ErrorCode::wrongLifecycle, "yield called outside of a task");
  state->suspend();
}

std::string_view toString(TraceEventKind kind)
{
  switch (kind)
  {
  case TraceEventKind::taskStart: return "taskStart";
  case TraceEventKind::taskSuspend: return "taskSuspend";
  case TraceEventKind::taskResume: return "taskResume";
  case TraceEventKind::taskFinish: return "taskFinish";
  case TraceEventKind::workerIdle: return "workerIdle";
  case TraceEventKind::workerBusy: return "workerBusy";
  }
  return "unknown";
}

std::string toJsonLine(const TraceEvent &event)
{
  nlohmann::ordered_json line;
  line["ts"] = event.timestampNanos;
  line["worker"] = event.workerId;
  line["task"] = event.taskId ? nlohmann::ordered_json(*event.taskId) : nlohmann::ordered_json(nullptr);
  line["event"] = std::string(toString(event.event));
  return line.dump();
}

struct TaskRuntime::Worker
{
  uint32_t id;
  ProcessingUnitPtr unit;
  std::vector<TraceEvent> events;
  bool finalized = false;

  void record(const TaskRuntime &runtime, uint64_t timestamp, std::optional<uint64_t> task, TraceEventKind kind)
  {
    if (runtime._options.recordTrace) events.push_back(TraceEvent{timestamp, id, task, kind});
  }
};

TaskRuntime::TaskRuntime(ComputeManager &workerManager, ComputeManager &taskManager, std::vector<ComputeResource> workerResources, PullFunction pull, RuntimeOptions options)
  : _workerManager(workerManager),
    _taskManager(taskManager),
    _resources(std::move(workerResources)),
    _pull(std::move(pull)),
    _options(options),
    _epoch(std::chrono::steady_clock::now())
{
  if (_resources.empty()) raise(ErrorCode::invalidArgument, "a task runtime needs at least one worker resource");
  if (!_pull) raise(ErrorCode::invalidArgument, "a task runtime needs a pull function");
  for (const auto &resource : _resources)
    if (!_workerManager.acceptsResource(resource)) raise(ErrorCode::unsupportedResource, "worker manager rejects compute resource " + std::to_string(resource.resourceId));

  for (size_t i = 0; i < _resources.size(); i++)
  {
    auto worker = std::make_unique<Worker>();
    worker->id = static_cast<uint32_t>(i);
    worker->unit = _workerManager.createProcessingUnit(_resources[i]);
    _workerManager.initialize(*worker->unit);
    _workers.push_back(std::move(worker));
  }
}

TaskRuntime::~TaskRuntime()
{
  if (_running.load())
  {
    try
    {
      stop(true);
    }
    catch (const std::exception &)
    {
      // Nothing sensible to do with a worker failure during destruction
    }
  }
  for (auto &worker : _workers)
  {
    if (worker->finalized) continue;
    try
    {
      _workerManager.finalize(*worker->unit);
    }
    catch (const std::exception &)
    {
    }
  }
}

uint64_t TaskRuntime::now() const
{
  return static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - _epoch).count());
}

void TaskRuntime::start()
{
  if (_started) raise(ErrorCode::alreadyStarted, "task runtime already started");
  _started = true;
  _running.store(true);
  for (auto &worker : _workers)
  {
    Worker *w = worker.get();
    auto loop = _workerManager.createExecutionUnit([this, w](void *) { workerLoop(*w); });
    _workerManager.execute(*w->unit, _workerManager.createExecutionState(loop));
  }
}

void TaskRuntime::stop(bool force)
{
  if (!_running.load()) raise(ErrorCode::notStarted, "task runtime is not running");
  {
    std::lock_guard lock(_suspendedMutex);
    if (!_suspended.empty() && !force)
      raise(ErrorCode::wrongLifecycle, std::to_string(_suspended.size()) + " task(s) are still suspended; stop(true) abandons them");
  }

  _stopRequested.store(true, std::memory_order_release);
  std::exception_ptr failure;
  for (auto &worker : _workers)
  {
    try
    {
      _workerManager.awaitCompletion(*worker->unit);
    }
    catch (...)
    {
      if (!failure) failure = std::current_exception();
    }
    _workerManager.finalize(*worker->unit);
    worker->finalized = true;
  }
  _running.store(false);
  if (failure) std::rethrow_exception(failure);
}

void TaskRuntime::workerLoop(Worker &worker)
{
  worker.record(*this, now(), std::nullopt, TraceEventKind::workerIdle);
  size_t emptyPulls = 0;
  while (!_stopRequested.load(std::memory_order_acquire))
  {
    auto task = _pull(worker.id);
    if (task == nullptr)
    {
      if (++emptyPulls > _options.idleSpins) std::this_thread::yield();
      continue;
    }
    emptyPulls = 0;
    runTask(worker, task);
  }
  worker.record(*this, now(), std::nullopt, TraceEventKind::workerIdle);
}

void TaskRuntime::runTask(Worker &worker, const TaskPtr &task)
{
  if (task->_finished.load(std::memory_order_acquire)) raise(ErrorCode::wrongLifecycle, "pulled task " + std::to_string(task->getId()) + " has already finished");
  const bool resuming = task->_state != nullptr;
  if (resuming)
  {
    std::lock_guard lock(_suspendedMutex);
    if (_suspended.erase(task) == 0) raise(ErrorCode::wrongLifecycle, "pulled task " + std::to_string(task->getId()) + " is neither new nor suspended");
  }
  else
    task->_state = _taskManager.createExecutionState(task->_unit, task->_argument);

  const auto begin = now();
  worker.record(*this, begin, task->getId(), TraceEventKind::workerBusy);
  worker.record(*this, begin, task->getId(), resuming ? TraceEventKind::taskResume : TraceEventKind::taskStart);
  if (resuming)
  {
    if (task->_onResume) task->_onResume(*task);
  }
  else if (task->_onStart)
    task->_onStart(*task);

  try
  {
    task->_state->resume();
  }
  catch (...)
  {
    task->_error = std::current_exception();
  }

  const auto end = now();
  if (task->_state->getLifecycle() == ExecutionLifecycle::finished)
  {
    worker.record(*this, end, task->getId(), TraceEventKind::taskFinish);
    worker.record(*this, end, task->getId(), TraceEventKind::workerIdle);
    task->_state.reset();
    task->_finished.store(true, std::memory_order_release);
    _finished.fetch_add(1, std::memory_order_acq_rel);
    if (task->_onFinish) task->_onFinish(*task);
    return;
  }

  worker.record(*this, end, task->getId(), TraceEventKind::taskSuspend);
  worker.record(*this, end, task->getId(), TraceEventKind::workerIdle);
  {
    std::lock_guard lock(_suspendedMutex);
    _suspended.insert(task);
  }
  if (task->_onSuspend) task->_onSuspend(*task);
}

std::vector<TaskPtr> TaskRuntime::resumable() const
{
  std::lock_guard lock(_suspendedMutex);
  return {_suspended.begin(), _suspended.end()};
}

bool TaskRuntime::isSuspended(const TaskPtr &task) const
{
  std::lock_guard lock(_suspendedMutex);
  return _suspended.contains(task);
}

std::vector<TraceEvent> TaskRuntime::trace() const
{
  std::vector<TraceEvent> merged;
  for (const auto &worker : _workers) merged.insert(merged.end(), worker->events.begin(), worker->events.end());
  std::stable_sort(merged.begin(), merged.end(), [](const TraceEvent &a, const TraceEvent &b) { return a.timestampNanos < b.timestampNanos; });
  return merged;
}

void TaskRuntime::emitTrace(const std::string &path) const
{
  if (_running.load()) raise(ErrorCode::alreadyStarted, "stop the task runtime before emitting its trace");
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::ioFailure, "cannot open trace file '" + path + "'");
  for (const auto &event : trace()) out << toJsonLine(event) << '\n';
  out.flush();
  if (!out) raise(ErrorCode::ioFailure, "cannot write trace file '" + path + "'");
}

} // namespace hicr::tasking
