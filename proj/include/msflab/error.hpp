#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace msflab {

enum class ErrorCode {
    InvalidParameter,
    Resonance,
    Chatter,
    NonInvertible,
    Numerical,
    InvalidWindow,
    GrazingSingularity,
    Propagation,
    InvalidGraph,
    Incomplete,
    Config,
    EmptyPlot,
};

[[nodiscard]] constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidParameter: return "invalid-parameter";
        case ErrorCode::Resonance: return "resonance";
        case ErrorCode::Chatter: return "chatter";
        case ErrorCode::NonInvertible: return "non-invertible";
        case ErrorCode::Numerical: return "numerical";
        case ErrorCode::InvalidWindow: return "invalid-window";
        case ErrorCode::GrazingSingularity: return "grazing-singularity";
        case ErrorCode::Propagation: return "propagation";
        case ErrorCode::InvalidGraph: return "invalid-graph";
        case ErrorCode::Incomplete: return "incomplete";
        case ErrorCode::Config: return "config";
        case ErrorCode::EmptyPlot: return "empty-plot";
    }
    return "unknown";
}

/// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace msflab
