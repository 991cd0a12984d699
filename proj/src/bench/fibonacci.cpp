// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <thread>

#include <hicr/backends/host/coroutineComputeManager.hpp>
#include <hicr/backends/host/threadComputeManager.hpp>
#include <hicr/backends/host/topologyManager.hpp>
#include <hicr/bench/fibonacci.hpp>

namespace hicr::bench
{

namespace
{

using tasking::Task;
using tasking::TaskPtr;

struct Node
{
  Node(unsigned n, Node *parent)
    : n(n),
      parent(parent)
  {}

  const unsigned n;
  Node *const parent;
  uint64_t result = 0;
  std::atomic<int> pending{0};
  std::unique_ptr<Node> left, right;
  TaskPtr task;
};

/// LIFO keeps the live part of the call tree (and so the number of coroutine stacks) small
class ReadyQueue
{
  public:

  void push(TaskPtr task)
  {
    std::lock_guard lock(_mutex);
    _tasks.push_back(std::move(task));
  }

  TaskPtr pull()
  {
    std::lock_guard lock(_mutex);
    if (_tasks.empty()) return nullptr;
    auto task = std::move(_tasks.back());
    _tasks.pop_back();
    return task;
  }

  private:

  std::mutex _mutex;
  std::vector<TaskPtr> _tasks;
};

class Computation
{
  public:

  Computation(ComputeManager &taskManager, FibVariant variant)
    : _taskManager(taskManager),
      _variant(variant)
  {}

  ReadyQueue queue;

  TaskPtr makeTask(Node &node)
  {
    auto unit = _taskManager.createExecutionUnit([this](void *argument) { body(*static_cast<Node *>(argument)); });
    node.task = std::make_shared<Task>(unit, &node);
    if (_variant == FibVariant::coroutines)
    {
      // A parent counts its own suspension as a third event, so it is only re-queued once it has fully left its worker
      node.task->onSuspend([this, &node](Task &) { arrive(node); });
      node.task->onFinish([this, &node](Task &) {
        if (node.parent != nullptr)
          arrive(*node.parent);
        else
          finish(node.result);
      });
    }
    else if (node.n < 2)
      node.task->onFinish([this, &node](Task &) { complete(node); });
    // An inner node may already be destroyed by the time its own task ends, so it registers no callback
    return node.task;
  }

  void waitUntilDone()
  {
    std::unique_lock lock(_doneMutex);
    _doneCv.wait(lock, [&] { return _done; });
  }

  uint64_t value() const { return _value; }

  private:

  void body(Node &node)
  {
    if (node.n < 2)
    {
      node.result = node.n;
      return;
    }
    node.left = std::make_unique<Node>(node.n - 1, &node);
    node.right = std::make_unique<Node>(node.n - 2, &node);
    node.pending.store(_variant == FibVariant::coroutines ? 3 : 2);
    queue.push(makeTask(*node.left));
    queue.push(makeTask(*node.right));
    if (_variant == FibVariant::threads) return;

    Task::yield();
    node.result = node.left->result + node.right->result;
    node.left.reset();
    node.right.reset();
  }

  void arrive(Node &node)
  {
    if (node.pending.fetch_sub(1) == 1) queue.push(node.task);
  }

  /// Threads variant: a node's value is known; hand it to the parent, which may in turn become complete
  void complete(Node &node)
  {
    Node *parent = node.parent;
    if (parent == nullptr)
    {
      finish(node.result);
      return;
    }
    if (parent->pending.fetch_sub(1) != 1) return;
    parent->result = parent->left->result + parent->right->result;
    parent->left.reset();
    parent->right.reset();
    complete(*parent);
  }

  void finish(uint64_t value)
  {
    std::lock_guard lock(_doneMutex);
    _value = value;
    _done = true;
    _doneCv.notify_all();
  }

  ComputeManager &_taskManager;
  const FibVariant _variant;
  std::mutex _doneMutex;
  std::condition_variable _doneCv;
  bool _done = false;
  uint64_t _value = 0;
};

} // namespace

FibResult runFibonacci(const FibOptions &options)
{
  backend::host::ThreadComputeManager workerManager(options.pinWorkers);
  backend::host::ThreadComputeManager threadTasks(false);
  backend::host::CoroutineComputeManager coroutineTasks(backend::host::CoroutineComputeManager::defaultStackBytes, false);
  ComputeManager &taskManager = options.variant == FibVariant::coroutines ? static_cast<ComputeManager &>(coroutineTasks) : threadTasks;

  const auto cores = std::max(1u, std::thread::hardware_concurrency());
  std::vector<ComputeResource> resources;
  for (size_t w = 0; w < options.workers; w++)
    resources.push_back(ComputeResource{static_cast<uint32_t>(w), std::string(backend::host::TopologyManager::computeResourceKind), static_cast<uint32_t>(w % cores)});

  Computation computation(taskManager, options.variant);
  tasking::RuntimeOptions runtimeOptions;
  runtimeOptions.recordTrace = options.recordTrace;
  tasking::TaskRuntime runtime(workerManager, taskManager, resources, [&](uint32_t) { return computation.queue.pull(); }, runtimeOptions);

  Node root(options.n, nullptr);
  computation.queue.push(computation.makeTask(root));

  const auto begin = std::chrono::steady_clock::now();
  runtime.start();
  computation.waitUntilDone();
  runtime.stop();
  const auto end = std::chrono::steady_clock::now();

  FibResult result;
  result.value = computation.value();
  result.taskCount = runtime.finishedCount();
  result.seconds = std::chrono::duration<double>(end - begin).count();
  if (options.recordTrace) result.trace = runtime.trace();
  return result;
}

} // namespace hicr::bench
