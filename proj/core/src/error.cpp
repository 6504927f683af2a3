#include "hjreg/error.hpp"

namespace hjreg {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::kInvalidArgument: return "InvalidArgument";
        case ErrorKind::kNonConvergence: return "NonConvergence";
        case ErrorKind::kNoConvergence: return "NoConvergence";
        case ErrorKind::kInvalidHorizon: return "InvalidHorizon";
        case ErrorKind::kOutOfWindow: return "OutOfWindow";
        case ErrorKind::kConeViolation: return "ConeViolation";
        case ErrorKind::kSearchBallClipped: return "SearchBallClipped";
        case ErrorKind::kNonContraction: return "NonContraction";
        case ErrorKind::kBoxExhausted: return "BoxExhausted";
        case ErrorKind::kSingularStart: return "SingularStart";
        case ErrorKind::kInsufficientSamples: return "InsufficientSamples";
        case ErrorKind::kNotSemiconcave: return "NotSemiconcave";
        case ErrorKind::kNonUniqueMaximizer: return "NonUniqueMaximizer";
        case ErrorKind::kNotSingular: return "NotSingular";
        case ErrorKind::kConfigError: return "ConfigError";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

}  // namespace hjreg
