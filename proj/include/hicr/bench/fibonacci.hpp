// SPDX-License-Identifier: Apache-2.0

/**
 * @file fibonacci.hpp
 * @brief Naive recursive Fibonacci, one task per call, on the tasking frontend
 */

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <hicr/frontends/tasking/tasking.hpp>

namespace hicr::bench
{

enum class FibVariant
{
  /// Tasks on os-thread states; a parent finishes right after spawning and its sum is formed when both children end
  threads,
  /// Tasks on coroutines; a parent suspends until both children finished, then adds their results itself
  coroutines
};

struct FibOptions
{
  unsigned n = 0;
  size_t workers = 1;
  FibVariant variant = FibVariant::coroutines;
  bool pinWorkers = false;
  bool recordTrace = true;
};

struct FibResult
{
  uint64_t value = 0;
  uint64_t taskCount = 0;
  double seconds = 0;
  std::vector<tasking::TraceEvent> trace;
};

/// Computes F(n) with 2·F(n+1)−1 tasks; F(0) and F(1) are leaf tasks
FibResult runFibonacci(const FibOptions &options);

} // namespace hicr::bench
