#pragma once

#include <stdexcept>
#include <string>

namespace scorebreak {

/// Classifies every recoverable failure the library reports. The CLI maps
/// all of these to exit code 1; anything else is an internal error (exit 2).
enum class ErrorKind {
    ConfigInvalid,
    TimerUnavailable,
    EmptyPlan,
    ShiftTooLarge,
    NonPositiveDelta,
    MissingConfig,
    EmptyTrials,
    SchemaError,
    DuplicateSystem,
    NonPositiveScore,
    MissingTarget,
    NonFiniteInput,
    InvalidSpec,
    IoError,
};

inline const char* error_kind_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::ConfigInvalid: return "ConfigInvalid";
        case ErrorKind::TimerUnavailable: return "TimerUnavailable";
        case ErrorKind::EmptyPlan: return "EmptyPlan";
        case ErrorKind::ShiftTooLarge: return "ShiftTooLarge";
        case ErrorKind::NonPositiveDelta: return "NonPositiveDelta";
        case ErrorKind::MissingConfig: return "MissingConfig";
        case ErrorKind::EmptyTrials: return "EmptyTrials";
        case ErrorKind::SchemaError: return "SchemaError";
        case ErrorKind::DuplicateSystem: return "DuplicateSystem";
        case ErrorKind::NonPositiveScore: return "NonPositiveScore";
        case ErrorKind::MissingTarget: return "MissingTarget";
        case ErrorKind::NonFiniteInput: return "NonFiniteInput";
        case ErrorKind::InvalidSpec: return "InvalidSpec";
        case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& detail)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + detail),
          kind_(kind),
          detail_(detail) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& detail() const noexcept { return detail_; }

    /// Same kind with a location prefix, keeping the message single-prefixed.
    static Error wrap(const Error& inner, const std::string& context) {
        return Error(inner.kind(), context + ": " + inner.detail());
    }

  private:
    ErrorKind kind_;
    std::string detail_;
};

}  // namespace scorebreak
