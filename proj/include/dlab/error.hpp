#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dlab {

enum class ErrorKind {
    InvalidInput,
    DegenerateBasis,
    NotPositiveDefinite,
    SingularMatrix,
    DefectiveLog,
    ParseError,
    ShapeError,
    NotInCatalog,
    DomainError,
    StiffnessFailure,
    Blowup,
    NotPeriodic,
    ResonantForcing,
    CertificateRequired,
    GapViolation,
    IndexUndetermined,
    HorizonTooShort,
    UnboundedCoefficients,
    NotReducibleHere,
    GapNotCertified,
    ProjectorMismatch,
    NoConvergence,
    NumericalInconsistency,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// True for errors caused by the caller's input (bad text, bad arguments)
/// rather than by a numerical failure.
bool is_usage_error(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Syntax errors carry the 1-based source position.
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line, int column)
        : Error(ErrorKind::ParseError,
                "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
          line_(line), column_(column) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

/// Integration failures remember the last time at which the state was finite.
class IntegrationError : public Error {
public:
    IntegrationError(ErrorKind kind, const std::string& what, double last_valid_time)
        : Error(kind, what + " (last valid t = " + std::to_string(last_valid_time) + ")"),
          last_valid_time_(last_valid_time) {}

    double last_valid_time() const noexcept { return last_valid_time_; }

private:
    double last_valid_time_;
};

}  // namespace dlab
