// SPDX-License-Identifier: Apache-2.0

#include <hicr/core/exceptions.hpp>

namespace hicr
{

std::string_view toString(ErrorCode code)
{
  switch (code)
  {
  case ErrorCode::invalidArgument: return "InvalidArgument";
  case ErrorCode::illegalDirection: return "IllegalDirection";
  case ErrorCode::outOfBounds: return "OutOfBounds";
  case ErrorCode::invalidSlot: return "InvalidSlot";
  case ErrorCode::slotPinned: return "SlotPinned";
  case ErrorCode::illegalTransition: return "IllegalTransition";
  case ErrorCode::malformedTopology: return "MalformedTopology";
  case ErrorCode::discoveryFailure: return "DiscoveryFailure";
  case ErrorCode::unknownMemorySpace: return "UnknownMemorySpace";
  case ErrorCode::outOfMemory: return "OutOfMemory";
  case ErrorCode::unsupportedSpacePair: return "UnsupportedSpacePair";
  case ErrorCode::timeout: return "Timeout";
  case ErrorCode::duplicateKey: return "DuplicateKey";
  case ErrorCode::collectiveMismatch: return "CollectiveMismatch";
  case ErrorCode::notFound: return "NotFound";
  case ErrorCode::wrongLifecycle: return "WrongLifecycle";
  case ErrorCode::unsupportedResource: return "UnsupportedResource";
  case ErrorCode::unsupportedUnitKind: return "UnsupportedUnitKind";
  case ErrorCode::templateUnsatisfiable: return "TemplateUnsatisfiable";
  case ErrorCode::spawnFailure: return "SpawnFailure";
  case ErrorCode::bootstrapTimeout: return "BootstrapTimeout";
  case ErrorCode::missingEnvironment: return "MissingEnvironment";
  case ErrorCode::peerUnreachable: return "PeerUnreachable";
  case ErrorCode::configMismatch: return "ConfigMismatch";
  case ErrorCode::wrongRole: return "WrongRole";
  case ErrorCode::sizeMismatch: return "SizeMismatch";
  case ErrorCode::empty: return "Empty";
  case ErrorCode::unknownObject: return "UnknownObject";
  case ErrorCode::duplicateName: return "DuplicateName";
  case ErrorCode::hashCollision: return "HashCollision";
  case ErrorCode::rpcUnknownName: return "RpcUnknownName";
  case ErrorCode::rpcTimeout: return "RpcTimeout";
  case ErrorCode::rpcFailed: return "RpcFailed";
  case ErrorCode::alreadyStarted: return "AlreadyStarted";
  case ErrorCode::notStarted: return "NotStarted";
  case ErrorCode::ioFailure: return "IoFailure";
  case ErrorCode::meshMismatch: return "MeshMismatch";
  case ErrorCode::verificationFailure: return "VerificationFailure";
  case ErrorCode::protocolError: return "ProtocolError";
  }
  return "Unknown";
}

} // namespace hicr
