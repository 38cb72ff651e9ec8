#include "twoloc/error.hpp"

namespace twoloc {

std::string_view error_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::NonStochasticRow: return "NonStochasticRow";
        case ErrorCode::NegativeRate: return "NegativeRate";
        case ErrorCode::PimFlagMismatch: return "PimFlagMismatch";
        case ErrorCode::UnsupportedMutationModel: return "UnsupportedMutationModel";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::SingularPade: return "SingularPade";
        case ErrorCode::SizeLimit: return "SizeLimit";
        case ErrorCode::RejectionCap: return "RejectionCap";
        case ErrorCode::StateCap: return "StateCap";
        case ErrorCode::SolverDivergence: return "SolverDivergence";
        case ErrorCode::ZeroExact: return "ZeroExact";
        case ErrorCode::InsufficientEnsemble: return "InsufficientEnsemble";
        case ErrorCode::AlphaOverflow: return "AlphaOverflow";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

ErrorFamily error_family(ErrorCode code) {
    switch (code) {
        case ErrorCode::NonStochasticRow:
        case ErrorCode::NegativeRate:
        case ErrorCode::PimFlagMismatch:
        case ErrorCode::UnsupportedMutationModel:
        case ErrorCode::InvalidConfig:
            return ErrorFamily::Model;
        case ErrorCode::SingularPade:
        case ErrorCode::SolverDivergence:
        case ErrorCode::ZeroExact:
            return ErrorFamily::Numeric;
        case ErrorCode::SizeLimit:
        case ErrorCode::RejectionCap:
        case ErrorCode::StateCap:
            return ErrorFamily::Capacity;
        case ErrorCode::InsufficientEnsemble:
        case ErrorCode::AlphaOverflow:
            return ErrorFamily::Validity;
        case ErrorCode::InvalidArgument:
            return ErrorFamily::Usage;
        case ErrorCode::Io:
            return ErrorFamily::Io;
    }
    return ErrorFamily::Usage;
}

}  // namespace twoloc
