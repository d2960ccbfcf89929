#include "strictbounds/error.hpp"

namespace strictbounds {

const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::CholeskyFailure: return "CholeskyFailure";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::InfeasibleConstraints: return "InfeasibleConstraints";
    case ErrorKind::UnboundedFunctional: return "UnboundedFunctional";
    case ErrorKind::SolverStall: return "SolverStall";
    case ErrorKind::CertificateUnavailable: return "CertificateUnavailable";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::AssemblyNotPSD: return "AssemblyNotPSD";
    case ErrorKind::BudgetMismatch: return "BudgetMismatch";
    case ErrorKind::EmptyConfidenceSet: return "EmptyConfidenceSet";
    case ErrorKind::FailureBudgetExceeded: return "FailureBudgetExceeded";
    case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

} // namespace strictbounds
