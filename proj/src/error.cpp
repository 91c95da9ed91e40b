#include "corenet/error.hpp"

namespace corenet {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidScheme: return "invalid-scheme";
    case ErrorCode::kIncompleteAddressing: return "incomplete-addressing";
    case ErrorCode::kMalformedFrame: return "malformed-frame";
    case ErrorCode::kSchemeMismatch: return "scheme-mismatch";
    case ErrorCode::kDomain: return "domain-error";
    case ErrorCode::kPrecondition: return "precondition-violation";
    case ErrorCode::kInvalidKind: return "invalid-kind";
    case ErrorCode::kUnrealizableTopology: return "unrealizable-topology";
    case ErrorCode::kInvalidDestination: return "invalid-destination";
    case ErrorCode::kUnknownUe: return "unknown-ue";
    case ErrorCode::kNoRoute: return "no-route";
    case ErrorCode::kCausality: return "causality-error";
    case ErrorCode::kInvalidScenario: return "invalid-scenario";
    case ErrorCode::kInvalidState: return "invalid-state";
    case ErrorCode::kConfig: return "config-error";
    case ErrorCode::kIo: return "io-error";
  }
  return "unknown-error";
}

}  // namespace corenet
