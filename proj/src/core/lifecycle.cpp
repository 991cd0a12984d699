// SPDX-License-Identifier: Apache-2.0

#include <string>

#include <hicr/core/exceptions.hpp>
#include <hicr/core/lifecycle.hpp>

namespace hicr
{

std::string_view toString(ExecutionLifecycle lifecycle)
{
  switch (lifecycle)
  {
  case ExecutionLifecycle::initialized: return "initialized";
  case ExecutionLifecycle::running: return "running";
  case ExecutionLifecycle::suspended: return "suspended";
  case ExecutionLifecycle::finished: return "finished";
  }
  return "unknown";
}

std::string_view toString(ProcessingUnitLifecycle lifecycle)
{
  switch (lifecycle)
  {
  case ProcessingUnitLifecycle::created: return "created";
  case ProcessingUnitLifecycle::ready: return "ready";
  case ProcessingUnitLifecycle::executing: return "executing";
  case ProcessingUnitLifecycle::suspended: return "suspended";
  case ProcessingUnitLifecycle::terminated: return "terminated";
  }
  return "unknown";
}

bool isLegalTransition(ExecutionLifecycle from, ExecutionLifecycle to)
{
  using L = ExecutionLifecycle;
  switch (from)
  {
  case L::initialized: return to == L::running;
  case L::running: return to == L::suspended || to == L::finished;
  case L::suspended: return to == L::running;
  case L::finished: return false;
  }
  return false;
}

bool isLegalTransition(ProcessingUnitLifecycle from, ProcessingUnitLifecycle to)
{
  using L = ProcessingUnitLifecycle;
  if (from == L::terminated) return false;
  if (to == L::terminated) return true;
  switch (from)
  {
  case L::created: return to == L::ready;
  case L::ready: return to == L::executing;
  case L::executing: return to == L::ready || to == L::suspended;
  case L::suspended: return to == L::executing;
  case L::terminated: return false;
  }
  return false;
}

ExecutionLifecycle checkedTransition(ExecutionLifecycle from, ExecutionLifecycle to)
{
  if (!isLegalTransition(from, to)) raise(ErrorCode::illegalTransition, "execution state " + std::string(toString(from)) + " -> " + std::string(toString(to)));
  return to;
}

ProcessingUnitLifecycle checkedTransition(ProcessingUnitLifecycle from, ProcessingUnitLifecycle to)
{
  if (!isLegalTransition(from, to)) raise(ErrorCode::illegalTransition, "processing unit " + std::string(toString(from)) + " -> " + std::string(toString(to)));
  return to;
}

} // namespace hicr
