#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace zsq {

enum class ErrorKind {
  InvalidArgument,
  CirculantNotPSD,
  DegeneratePair,
  UnknownModelName,
  NonFinite,
  MissingFineGrid,
  EmptyBox,
  NonFiniteStatistic,
  DegeneratePath,
  ZeroVariation,
  Validation,
  Parse,
  Io,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::CirculantNotPSD: return "CirculantNotPSD";
    case ErrorKind::DegeneratePair: return "DegeneratePair";
    case ErrorKind::UnknownModelName: return "UnknownModelName";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::MissingFineGrid: return "MissingFineGrid";
    case ErrorKind::EmptyBox: return "EmptyBox";
    case ErrorKind::NonFiniteStatistic: return "NonFiniteStatistic";
    case ErrorKind::DegeneratePath: return "DegeneratePath";
    case ErrorKind::ZeroVariation: return "ZeroVariation";
    case ErrorKind::Validation: return "Validation";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// Library error carrying a stable, named kind. The message is prefixed with
/// the kind name so that logs and CLI output are self-describing.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace zsq
