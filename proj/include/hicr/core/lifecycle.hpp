// SPDX-License-Identifier: Apache-2.0

/**
 * @file lifecycle.hpp
 * @brief Lifecycle state machines of execution states and processing units
 */

#pragma once

#include <string_view>

namespace hicr
{

enum class ExecutionLifecycle
{
  initialized,
  running,
  suspended,
  finished
};

enum class ProcessingUnitLifecycle
{
  created,
  ready,
  executing,
  suspended,
  terminated
};

std::string_view toString(ExecutionLifecycle lifecycle);
std::string_view toString(ProcessingUnitLifecycle lifecycle);

/**
 * initialized→running, running→suspended, suspended→running, running→finished. Nothing leaves finished.
 */
bool isLegalTransition(ExecutionLifecycle from, ExecutionLifecycle to);

/**
 * created→ready, ready→executing, executing→ready, executing→suspended, suspended→executing, and any
 * non-terminated state→terminated. Nothing leaves terminated.
 */
bool isLegalTransition(ProcessingUnitLifecycle from, ProcessingUnitLifecycle to);

/// Returns `to` if legal, throws IllegalTransition otherwise
ExecutionLifecycle checkedTransition(ExecutionLifecycle from, ExecutionLifecycle to);
ProcessingUnitLifecycle checkedTransition(ProcessingUnitLifecycle from, ProcessingUnitLifecycle to);

inline ExecutionLifecycle transitionExecutionState(ExecutionLifecycle from, ExecutionLifecycle to) { return checkedTransition(from, to); }

} // namespace hicr
