#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace twoloc {

enum class ErrorCode {
    // model
    NonStochasticRow,
    NegativeRate,
    PimFlagMismatch,
    UnsupportedMutationModel,
    InvalidConfig,
    // asymptotics
    SingularPade,
    // gaussian
    SizeLimit,
    RejectionCap,
    // oracle
    StateCap,
    SolverDivergence,
    ZeroExact,
    // moran
    InsufficientEnsemble,
    // coalescent
    AlphaOverflow,
    // plumbing
    InvalidArgument,
    Io,
};

/// Error families map one-to-one onto CLI exit codes.
enum class ErrorFamily { Usage = 2, Model = 3, Numeric = 4, Capacity = 5, Validity = 6, Io = 7 };

std::string_view error_name(ErrorCode code);
ErrorFamily error_family(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }
    std::string_view name() const { return error_name(code_); }
    ErrorFamily family() const { return error_family(code_); }

private:
    ErrorCode code_;
};

}  // namespace twoloc
