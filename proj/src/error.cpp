#include "dlab/error.hpp"

namespace dlab {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidInput: return "InvalidInput";
        case ErrorKind::DegenerateBasis: return "DegenerateBasis";
        case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorKind::SingularMatrix: return "SingularMatrix";
        case ErrorKind::DefectiveLog: return "DefectiveLog";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::ShapeError: return "ShapeError";
        case ErrorKind::NotInCatalog: return "NotInCatalog";
        case ErrorKind::DomainError: return "DomainError";
        case ErrorKind::StiffnessFailure: return "StiffnessFailure";
        case ErrorKind::Blowup: return "Blowup";
        case ErrorKind::NotPeriodic: return "NotPeriodic";
        case ErrorKind::ResonantForcing: return "ResonantForcing";
        case ErrorKind::CertificateRequired: return "CertificateRequired";
        case ErrorKind::GapViolation: return "GapViolation";
        case ErrorKind::IndexUndetermined: return "IndexUndetermined";
        case ErrorKind::HorizonTooShort: return "HorizonTooShort";
        case ErrorKind::UnboundedCoefficients: return "UnboundedCoefficients";
        case ErrorKind::NotReducibleHere: return "NotReducibleHere";
        case ErrorKind::GapNotCertified: return "GapNotCertified";
        case ErrorKind::ProjectorMismatch: return "ProjectorMismatch";
        case ErrorKind::NoConvergence: return "NoConvergence";
        case ErrorKind::NumericalInconsistency: return "NumericalInconsistency";
    }
    return "Unknown";
}

bool is_usage_error(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidInput:
        case ErrorKind::ParseError:
        case ErrorKind::ShapeError:
        case ErrorKind::NotInCatalog:
        case ErrorKind::DomainError:
        case ErrorKind::HorizonTooShort:
        case ErrorKind::ProjectorMismatch:
            return true;
        default:
            return false;
    }
}

}  // namespace dlab
