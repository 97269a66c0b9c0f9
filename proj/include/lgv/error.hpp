#pragma once

#include <stdexcept>
#include <string>

namespace lgv {

// Numeric values are part of the C ABI (see lgvlab.h); append only.
enum class ErrorCode : int {
  Ok = 0,
  InvalidArgument = 1,
  NonConfining = 2,
  SingularSigma = 3,
  MissingHessian = 4,
  BlowUp = 5,
  NoiseStreamMismatch = 6,
  EnvelopeRejectionStall = 7,
  GridTooCoarse = 8,
  LinearSolveFailure = 9,
  NonConvergence = 10,
  WindowTooShort = 11,
  SEOverflow = 12,
  NotStationary = 13,
  NonGradientPerturbation = 14,
  NonDecayingTail = 15,
  InsufficientSamples = 16,
  ConfigInvalid = 17,
  IoFailure = 18,
  Internal = 99,
};

const char* error_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorCode::InvalidArgument, what);
}

}  // namespace lgv
