#include "lgv/error.hpp"

namespace lgv {

const char* error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Ok: return "Ok";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonConfining: return "NonConfining";
    case ErrorCode::SingularSigma: return "SingularSigma";
    case ErrorCode::MissingHessian: return "MissingHessian";
    case ErrorCode::BlowUp: return "BlowUp";
    case ErrorCode::NoiseStreamMismatch: return "NoiseStreamMismatch";
    case ErrorCode::EnvelopeRejectionStall: return "EnvelopeRejectionStall";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::LinearSolveFailure: return "LinearSolveFailure";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::WindowTooShort: return "WindowTooShort";
    case ErrorCode::SEOverflow: return "SEOverflow";
    case ErrorCode::NotStationary: return "NotStationary";
    case ErrorCode::NonGradientPerturbation: return "NonGradientPerturbation";
    case ErrorCode::NonDecayingTail: return "NonDecayingTail";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

}  // namespace lgv
