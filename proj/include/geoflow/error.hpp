#pragma once

#include <stdexcept>
#include <string>

namespace geoflow {

// Error kinds carried by every geoflow::Error. Grouped by the exit code the
// CLI maps them to: config/usage (2), I/O (3), numeric failure (4).
enum class ErrKind {
  // config / usage
  IndexOutOfRange,
  NonPositiveWeight,
  ConflictingDuplicateEdge,
  SelfLoop,
  EmptySourceSet,
  EmptyLabeledSet,
  DimensionMismatch,
  NoLabeledNodes,
  EmptyMask,
  EmptyGroup,
  ConfigInvalid,
  DegenerateConfig,
  InsufficientSamples,
  DisconnectedGraph,
  // I/O
  ParseError,
  SchemaMismatch,
  IoFailure,
  // numeric
  NonPositiveDensity,
  NonFiniteLoss,
  StepShrinkExhausted,
  ZeroBeta,
  NonConvergence,
};

const char* to_string(ErrKind k);

// Exit codes used by the CLI: 0 success, 1 check failure, 2 usage/config,
// 3 I/O, 4 numeric.
int exit_code(ErrKind k);

class Error : public std::runtime_error {
 public:
  Error(ErrKind kind, const std::string& msg)
      : std::runtime_error(std::string(to_string(kind)) + ": " + msg),
        kind_(kind) {}

  ErrKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return geoflow::exit_code(kind_); }

 private:
  ErrKind kind_;
};

[[noreturn]] inline void fail(ErrKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

inline void require(bool cond, ErrKind kind, const std::string& msg) {
  if (!cond) fail(kind, msg);
}

}  // namespace geoflow
