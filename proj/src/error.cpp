#include "geoflow/error.hpp"

namespace geoflow {

const char* to_string(ErrKind k) {
  switch (k) {
    case ErrKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrKind::NonPositiveWeight: return "NonPositiveWeight";
    case ErrKind::ConflictingDuplicateEdge: return "ConflictingDuplicateEdge";
    case ErrKind::SelfLoop: return "SelfLoop";
    case ErrKind::EmptySourceSet: return "EmptySourceSet";
    case ErrKind::EmptyLabeledSet: return "EmptyLabeledSet";
    case ErrKind::DimensionMismatch: return "DimensionMismatch";
    case ErrKind::NoLabeledNodes: return "NoLabeledNodes";
    case ErrKind::EmptyMask: return "EmptyMask";
    case ErrKind::EmptyGroup: return "EmptyGroup";
    case ErrKind::ConfigInvalid: return "ConfigInvalid";
    case ErrKind::DegenerateConfig: return "DegenerateConfig";
    case ErrKind::InsufficientSamples: return "InsufficientSamples";
    case ErrKind::DisconnectedGraph: return "DisconnectedGraph";
    case ErrKind::ParseError: return "ParseError";
    case ErrKind::SchemaMismatch: return "SchemaMismatch";
    case ErrKind::IoFailure: return "IoFailure";
    case ErrKind::NonPositiveDensity: return "NonPositiveDensity";
    case ErrKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrKind::StepShrinkExhausted: return "StepShrinkExhausted";
    case ErrKind::ZeroBeta: return "ZeroBeta";
    case ErrKind::NonConvergence: return "NonConvergence";
  }
  return "UnknownError";
}

int exit_code(ErrKind k) {
  switch (k) {
    case ErrKind::ParseError:
    case ErrKind::SchemaMismatch:
    case ErrKind::IoFailure:
      return 3;
    case ErrKind::NonPositiveDensity:
    case ErrKind::NonFiniteLoss:
    case ErrKind::StepShrinkExhausted:
    case ErrKind::ZeroBeta:
    case ErrKind::NonConvergence:
      return 4;
    default:
      return 2;
  }
}

}  // namespace geoflow
