#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace atg {

/// Error categories surfaced by every module. The CLI maps them to exit codes.
enum class Errc {
  // graph
  OutOfRangeSpan,
  SpanTooWide,
  DuplicateEntity,
  DuplicateRelation,
  DanglingRelationIndex,
  SelfRelation,
  InvalidDocument,
  InvalidSchema,
  // linearize
  MalformedSequence,
  UnknownArgumentSpan,
  // vocab
  SymbolOutOfLayout,
  IdOutOfRange,
  // grammar
  FinishedState,
  IllegalTransition,
  EnumerationBudgetExceeded,
  // tensor
  ShapeMismatch,
  NonFiniteDetected,
  NotScalar,
  // model
  TooLong,
  PrefixTooLong,
  InvalidConfig,
  // train
  GoldIllegalUnderMask,
  // decode
  MaxLenExceeded,
  // introspect
  TraceMissing,
  ZeroVector,
  // io
  ParseError,
  SchemaMismatch,
  ValidationError,
  IoError,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace atg
