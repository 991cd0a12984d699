// SPDX-License-Identifier: Apache-2.0

/**
 * @file exceptions.hpp
 * @brief Error codes and the exception type raised by every HiCR contract
 */

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hicr
{

/**
 * Every failure a manager, backend or frontend may report.
 *
 * Callers distinguish failures by code, never by message text.
 */
enum class ErrorCode
{
  invalidArgument,
  illegalDirection,
  outOfBounds,
  invalidSlot,
  slotPinned,
  illegalTransition,
  malformedTopology,
  discoveryFailure,
  unknownMemorySpace,
  outOfMemory,
  unsupportedSpacePair,
  timeout,
  duplicateKey,
  collectiveMismatch,
  notFound,
  wrongLifecycle,
  unsupportedResource,
  unsupportedUnitKind,
  templateUnsatisfiable,
  spawnFailure,
  bootstrapTimeout,
  missingEnvironment,
  peerUnreachable,
  configMismatch,
  wrongRole,
  sizeMismatch,
  empty,
  unknownObject,
  duplicateName,
  hashCollision,
  rpcUnknownName,
  rpcTimeout,
  rpcFailed,
  alreadyStarted,
  notStarted,
  ioFailure,
  meshMismatch,
  verificationFailure,
  protocolError,
};

std::string_view toString(ErrorCode code);

/**
 * The single exception type of the library; carries an ErrorCode.
 */
class Exception : public std::runtime_error
{
  public:

  Exception(ErrorCode code, const std::string &message)
    : std::runtime_error(std::string(toString(code)) + ": " + message),
      _code(code)
  {}

  [[nodiscard]] ErrorCode code() const noexcept { return _code; }

  private:

  ErrorCode _code;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string &message) { throw Exception(code, message); }

} // namespace hicr
