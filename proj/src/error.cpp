#include "atg/error.hpp"

namespace atg {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::OutOfRangeSpan: return "OutOfRangeSpan";
    case Errc::SpanTooWide: return "SpanTooWide";
    case Errc::DuplicateEntity: return "DuplicateEntity";
    case Errc::DuplicateRelation: return "DuplicateRelation";
    case Errc::DanglingRelationIndex: return "DanglingRelationIndex";
    case Errc::SelfRelation: return "SelfRelation";
    case Errc::InvalidDocument: return "InvalidDocument";
    case Errc::InvalidSchema: return "InvalidSchema";
    case Errc::MalformedSequence: return "MalformedSequence";
    case Errc::UnknownArgumentSpan: return "UnknownArgumentSpan";
    case Errc::SymbolOutOfLayout: return "SymbolOutOfLayout";
    case Errc::IdOutOfRange: return "IdOutOfRange";
    case Errc::FinishedState: return "FinishedState";
    case Errc::IllegalTransition: return "IllegalTransition";
    case Errc::EnumerationBudgetExceeded: return "EnumerationBudgetExceeded";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonFiniteDetected: return "NonFiniteDetected";
    case Errc::NotScalar: return "NotScalar";
    case Errc::TooLong: return "TooLong";
    case Errc::PrefixTooLong: return "PrefixTooLong";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::GoldIllegalUnderMask: return "GoldIllegalUnderMask";
    case Errc::MaxLenExceeded: return "MaxLenExceeded";
    case Errc::TraceMissing: return "TraceMissing";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::ParseError: return "ParseError";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::ValidationError: return "ValidationError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace atg
