// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>

#include <hicr/core/computeManager.hpp>

namespace hicr::backend::host
{

/**
 * A processing unit driven by one dedicated OS thread. The thread sleeps until a state is dispatched to the unit,
 * drives it with ExecutionState::resume(), and reports back once the state finished or yielded.
 */
class DriverProcessingUnit final : public ProcessingUnit
{
  public:

  /// `onStart` runs first on the driver thread (used for affinity)
  DriverProcessingUnit(ComputeResource resource, std::function<void(DriverProcessingUnit &)> onStart)
    : ProcessingUnit(std::move(resource)),
      _onStart(std::move(onStart))
  {}

  ~DriverProcessingUnit() override { stop(); }

  void start()
  {
    _thread = std::thread([this] { loop(); });
  }

  void wake()
  {
    {
      std::lock_guard lock(_driverMutex);
      _wakeups++;
    }
    _driverCv.notify_one();
  }

  void stop()
  {
    if (!_thread.joinable()) return;
    {
      std::lock_guard lock(_driverMutex);
      _stopping = true;
    }
    _driverCv.notify_one();
    _thread.join();
  }

  private:

  void loop()
  {
    if (_onStart) _onStart(*this);
    while (true)
    {
      {
        std::unique_lock lock(_driverMutex);
        _driverCv.wait(lock, [&] { return _wakeups > 0 || _stopping; });
        if (_wakeups == 0) return;
        _wakeups--;
      }

      auto state = takeDispatchedState();
      if (state == nullptr) continue;

      std::exception_ptr error;
      try
      {
        state->resume();
      }
      catch (...)
      {
        error = std::current_exception();
      }
      completeExecution(error);
    }
  }

  std::function<void(DriverProcessingUnit &)> _onStart;
  std::thread _thread;
  std::mutex _driverMutex;
  std::condition_variable _driverCv;
  uint64_t _wakeups = 0;
  bool _stopping = false;
};

} // namespace hicr::backend::host
