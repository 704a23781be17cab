#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mancon {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  RankDeficient,
  ZeroColumn,
  InfeasiblePoint,
  OutsideTube,
  Disconnected,
  NotSymmetric,
  NotStochastic,
  InsufficientData,
  InsufficientScales,
  SamplingExhausted,
  UnknownInequality,
  NonPositiveDelta,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::ZeroColumn: return "ZeroColumn";
    case ErrorCode::InfeasiblePoint: return "InfeasiblePoint";
    case ErrorCode::OutsideTube: return "OutsideTube";
    case ErrorCode::Disconnected: return "Disconnected";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NotStochastic: return "NotStochastic";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::InsufficientScales: return "InsufficientScales";
    case ErrorCode::SamplingExhausted: return "SamplingExhausted";
    case ErrorCode::UnknownInequality: return "UnknownInequality";
    case ErrorCode::NonPositiveDelta: return "NonPositiveDelta";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable code; every failure in the library
/// surfaces as one of these.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mancon
