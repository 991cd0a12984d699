// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <map>
#include <mutex>
#include <vector>

#include <sys/mman.h>
#include <ucontext.h>
#include <unistd.h>

#include "driverProcessingUnit.hpp"
#include <hicr/backends/host/coroutineComputeManager.hpp>
#include <hicr/backends/host/topologyManager.hpp>
#include <hicr/core/exceptions.hpp>

namespace hicr::backend::host
{

namespace
{

/**
 * Recycles coroutine stacks. Each stack is mapped with an inaccessible guard page below it so an overflow faults
 * instead of silently corrupting a neighbour.
 */
class StackPool
{
  public:

  static StackPool &instance()
  {
    static StackPool pool;
    return pool;
  }

  void *acquire(size_t bytes)
  {
    {
      std::lock_guard lock(_mutex);
      auto &free = _free[bytes];
      if (!free.empty())
      {
        void *stack = free.back();
        free.pop_back();
        return stack;
      }
    }

    const size_t page = static_cast<size_t>(sysconf(_SC_PAGESIZE));
    void *region = mmap(nullptr, bytes + page, PROT_READ | PROT_WRITE, MAP_PRIVATE | MAP_ANONYMOUS | MAP_NORESERVE, -1, 0);
    if (region == MAP_FAILED) raise(ErrorCode::outOfMemory, "cannot map a coroutine stack");
    mprotect(region, page, PROT_NONE);
    return static_cast<char *>(region) + page;
  }

  void release(void *stack, size_t bytes)
  {
    std::lock_guard lock(_mutex);
    auto &free = _free[bytes];
    if (free.size() < maxPooledPerSize)
    {
      free.push_back(stack);
      return;
    }
    const size_t page = static_cast<size_t>(sysconf(_SC_PAGESIZE));
    munmap(static_cast<char *>(stack) - page, bytes + page);
  }

  private:

  static constexpr size_t maxPooledPerSize = 1024;

  std::mutex _mutex;
  std::map<size_t, std::vector<void *>> _free;
};

class CoroutineExecutionState final : public ExecutionState
{
  public:

  CoroutineExecutionState(ExecutionUnitPtr unit, void *argument, size_t stackBytes)
    : ExecutionState(std::move(unit), argument),
      _stackBytes(stackBytes)
  {}

  ~CoroutineExecutionState() override
  {
    // A state dropped while suspended leaks whatever its body held on the stack; the stack itself is recycled
    if (_stack != nullptr) StackPool::instance().release(_stack, _stackBytes);
  }

  [[nodiscard]] bool supportsSuspension() const override { return true; }

  protected:

  void run() override
  {
    if (_stack == nullptr)
    {
      _stack = StackPool::instance().acquire(_stackBytes);
      getcontext(&_context);
      _context.uc_stack.ss_sp = _stack;
      _context.uc_stack.ss_size = _stackBytes;
      _context.uc_link = nullptr;
      const auto self = reinterpret_cast<uintptr_t>(this);
      makecontext(&_context, reinterpret_cast<void (*)()>(&CoroutineExecutionState::entry), 2, static_cast<unsigned>(self >> 32), static_cast<unsigned>(self & 0xffffffffU));
    }
    swapcontext(&_caller, &_context);
  }

  void switchOut() override { swapcontext(&_context, &_caller); }

  private:

  static void entry(unsigned high, unsigned low)
  {
    auto *self = reinterpret_cast<CoroutineExecutionState *>((static_cast<uintptr_t>(high) << 32) | static_cast<uintptr_t>(low));
    try
    {
      self->getUnit().getFunction()(self->getArgument());
      self->bodyReturned(nullptr);
    }
    catch (...)
    {
      self->bodyReturned(std::current_exception());
    }
    // Never returns: the context is abandoned once the body is done
    setcontext(&self->_caller);
  }

  const size_t _stackBytes;
  void *_stack = nullptr;
  ucontext_t _context{};
  ucontext_t _caller{};
};

} // namespace

CoroutineComputeManager::CoroutineComputeManager(size_t stackBytes, bool pinThreads)
  : _stackBytes(stackBytes),
    _pinThreads(pinThreads)
{
  const size_t page = static_cast<size_t>(sysconf(_SC_PAGESIZE));
  if (stackBytes < 4 * page || stackBytes % page != 0) raise(ErrorCode::invalidArgument, "coroutine stack size must be a multiple of the page size, at least 4 pages");
}

bool CoroutineComputeManager::acceptsResource(const ComputeResource &resource) const { return resource.kind == TopologyManager::computeResourceKind; }

ProcessingUnitPtr CoroutineComputeManager::makeProcessingUnit(const ComputeResource &resource)
{
  return std::make_shared<DriverProcessingUnit>(resource, [this](DriverProcessingUnit &pu) {
    _affinity.pin(pu.getId(), _pinThreads ? pu.getResource().affinityHint : std::nullopt);
  });
}

ExecutionStatePtr CoroutineComputeManager::makeExecutionState(ExecutionUnitPtr unit, void *argument)
{
  return std::make_shared<CoroutineExecutionState>(std::move(unit), argument, _stackBytes);
}

void CoroutineComputeManager::startDriver(ProcessingUnit &pu) { static_cast<DriverProcessingUnit &>(pu).start(); }
void CoroutineComputeManager::notifyDriver(ProcessingUnit &pu) { static_cast<DriverProcessingUnit &>(pu).wake(); }
void CoroutineComputeManager::stopDriver(ProcessingUnit &pu) { static_cast<DriverProcessingUnit &>(pu).stop(); }

void coroutineYield()
{
  auto *state = ExecutionState::current();
  if (state == nullptr) raise(ErrorCode::wrongLifecycle, "yield called outside a running execution state");
  state->suspend();
}

void coroutineYield(ExecutionState &currentState) { currentState.suspend(); }

} // namespace hicr::backend::host
