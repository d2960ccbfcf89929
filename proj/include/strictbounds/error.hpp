#pragma once

#include <stdexcept>
#include <string>

namespace strictbounds {

enum class ErrorKind {
    InvalidInput,
    CholeskyFailure,
    SingularSystem,
    InfeasibleConstraints,
    UnboundedFunctional,
    SolverStall,
    CertificateUnavailable,
    RankDeficient,
    AssemblyNotPSD,
    BudgetMismatch,
    EmptyConfidenceSet,
    FailureBudgetExceeded, // too many failed replicates in a study
    Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);
    ErrorKind kind() const noexcept { return kind_; }
    // The message without the kind prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorKind kind_;
    std::string detail_;
};

} // namespace strictbounds
