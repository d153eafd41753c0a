#pragma once

// Time-varying linear systems x' = A(t)x and their bounded quasilinear
// perturbations y' = A(t)y + f(t,y), plus the text configuration format and
// the built-in catalog.

#include "dlab/expr.hpp"
#include "dlab/linalg.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dlab {

enum class Domain { FullLine, HalfLinePlus, HalfLineMinus };

std::string_view to_string(Domain d);
Domain parse_domain(std::string_view text);

class LinearSystem {
public:
    using CoeffFn = std::function<Mat(double)>;

    LinearSystem(std::string name, int dim, CoeffFn coeff, Domain domain = Domain::FullLine,
                 std::optional<double> period = std::nullopt);

    const std::string& name() const { return name_; }
    int dim() const { return dim_; }
    Domain domain() const { return domain_; }
    const std::optional<double>& period() const { return period_; }
    bool contains(double t) const;

    /// A(t); throws DomainError outside the declared domain.
    Mat coeff(double t) const;
    /// A(t) without the domain check, for integrator inner loops.
    Mat coeff_unchecked(double t) const { return coeff_(t); }

    /// Entry expressions when the system came from configuration text.
    const std::vector<ExprPtr>& entries() const { return entries_; }
    void set_entries(std::vector<ExprPtr> entries) { entries_ = std::move(entries); }

    /// A(t) - lambda I.
    LinearSystem shifted(double lambda) const;
    /// The system s -> -A(-s), whose forward flow is the backward flow of this one.
    LinearSystem time_reversed() const;
    /// Same coefficients under a new name / domain.
    LinearSystem with_domain(Domain d) const;
    LinearSystem with_period(std::optional<double> period) const;

private:
    std::string name_;
    int dim_;
    CoeffFn coeff_;
    Domain domain_;
    std::optional<double> period_;
    std::vector<ExprPtr> entries_;
};

/// A(t), throwing DomainError outside the system's domain.
inline Mat eval_coeff(const LinearSystem& sys, double t) { return sys.coeff(t); }

/// Sampled check of A(t + w) = A(t); returns the worst relative defect.
double periodicity_defect(const LinearSystem& sys, double period, int samples = 64);

class QuasilinearSystem {
public:
    using PerturbFn = std::function<Vec(double, const Vec&)>;

    QuasilinearSystem(LinearSystem linear, PerturbFn f, double mu, double gamma);

    const LinearSystem& linear() const { return linear_; }
    int dim() const { return linear_.dim(); }
    double mu() const { return mu_; }
    double gamma() const { return gamma_; }
    Vec f(double t, const Vec& y) const { return f_(t, y); }
    const PerturbFn& perturbation() const { return f_; }

    /// Central finite-difference Jacobian of f with respect to y.
    Mat f_jacobian(double t, const Vec& y) const;

    QuasilinearSystem with_constants(double mu, double gamma) const;

    const std::vector<ExprPtr>& f_entries() const { return f_entries_; }
    void set_f_entries(std::vector<ExprPtr> e) { f_entries_ = std::move(e); }

private:
    LinearSystem linear_;
    PerturbFn f_;
    double mu_;
    double gamma_;
    std::vector<ExprPtr> f_entries_;
};

/// Sampled validation of the declared bound |f| <= mu and Lipschitz
/// constant gamma. Failure is reported, not thrown: global verification is
/// out of reach for arbitrary expressions.
struct AssumptionCheck {
    double max_norm = 0.0;
    double max_quotient = 0.0;
    bool bound_ok = true;
    bool lipschitz_ok = true;
    bool ok() const { return bound_ok && lipschitz_ok; }
};

AssumptionCheck check_assumptions(const QuasilinearSystem& q, std::uint64_t seed = 0, int samples = 2000,
                                  double lipschitz_slack = 0.05);

using AnySystem = std::variant<LinearSystem, QuasilinearSystem>;

const LinearSystem& linear_part(const AnySystem& s);
const QuasilinearSystem* quasilinear_part(const AnySystem& s);

/// Parses the line-oriented configuration format:
///
///   # comment
///   [system]
///   name   = markus_yamabe
///   dim    = 2
///   domain = full-line            # or half-line-plus / half-line-minus
///   period = 2*pi                 # optional
///   A      = a11, a12; a21, a22   # rows separated by ';'
///   [perturbation]                # optional
///   f      = 0.1*sin(y1)          # one expression per component
///   mu     = 0.1
///   gamma  = 0.1
///
/// A line ending in '\' continues on the next line.
AnySystem parse_system(std::string_view config_text);

struct CatalogEntry {
    std::string name;
    std::string description;
    std::string config;
};

const std::vector<CatalogEntry>& catalog();

/// Named system from the catalog. `periodic_scalar` accepts an optional
/// parameter as `periodic_scalar(c)` (default c = 0.3). Throws NotInCatalog.
AnySystem builtin(std::string_view name);

/// Linear system with constant coefficient matrix.
LinearSystem constant_system(std::string name, const Mat& a, std::optional<double> period = std::nullopt);

}  // namespace dlab
