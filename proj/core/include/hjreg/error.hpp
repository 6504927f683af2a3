#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hjreg {

enum class ErrorKind {
    kInvalidArgument,
    kNonConvergence,       // Legendre Newton, polytope minimization
    kNoConvergence,        // action minimization
    kInvalidHorizon,
    kOutOfWindow,
    kConeViolation,
    kSearchBallClipped,
    kNonContraction,
    kBoxExhausted,
    kSingularStart,
    kInsufficientSamples,
    kNotSemiconcave,
    kNonUniqueMaximizer,
    kNotSingular,
    kConfigError,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what);
    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace hjreg
