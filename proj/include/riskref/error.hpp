#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace riskref {

enum class Errc {
  EmptyStack,
  ShapeMismatch,
  WrongClassCount,
  InvalidProbabilityRow,
  InvalidLabel,
  EmptyMatrix,
  DegenerateAgreement,
  SingleClass,
  EmptyInput,
  Misaligned,
  InvalidLevel,
  TooFewLevels,
  InvalidB,
  NonFinite,
  NonPositiveScale,
  InvalidAlpha,
  Diverged,
  ParseError,
  DuplicateId,
  MissingCell,
  InconsistentLabel,
  InvalidSpec,
  InvalidConfig,
  IoError,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::EmptyStack: return "EmptyStack";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::WrongClassCount: return "WrongClassCount";
    case Errc::InvalidProbabilityRow: return "InvalidProbabilityRow";
    case Errc::InvalidLabel: return "InvalidLabel";
    case Errc::EmptyMatrix: return "EmptyMatrix";
    case Errc::DegenerateAgreement: return "DegenerateAgreement";
    case Errc::SingleClass: return "SingleClass";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::Misaligned: return "Misaligned";
    case Errc::InvalidLevel: return "InvalidLevel";
    case Errc::TooFewLevels: return "TooFewLevels";
    case Errc::InvalidB: return "InvalidB";
    case Errc::NonFinite: return "NonFinite";
    case Errc::NonPositiveScale: return "NonPositiveScale";
    case Errc::InvalidAlpha: return "InvalidAlpha";
    case Errc::Diverged: return "Diverged";
    case Errc::ParseError: return "ParseError";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::MissingCell: return "MissingCell";
    case Errc::InconsistentLabel: return "InconsistentLabel";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure in the library surfaces as this exception; `code()` is the
/// machine-readable part, `what()` carries context for humans.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace riskref
