#pragma once

// Topological equivalence between x' = A(t)x and y' = A(t)y + f(t,y):
// the maps H (linear -> nonlinear) and G (its inverse), evaluated by
// quadrature against the dichotomy kernel, plus conjugacy and Jacobian
// diagnostics.

#include "dlab/dichotomy.hpp"
#include "dlab/system.hpp"

#include <iosfwd>
#include <string_view>
#include <vector>

namespace dlab {

enum class LinearizationMode { FullLine, HalfLinePlus };
std::string_view to_string(LinearizationMode m);
LinearizationMode parse_linearization_mode(std::string_view text);

struct LinearizationOptions {
    double integration_tol = 1e-10;
    /// Largest quadrature panel; panels shrink where f(s, path(s)) turns fast.
    double panel = 0.5;
    /// Radians of variation of f allowed per panel.
    double phase_per_panel = 1.0;
    std::size_t max_panels = 2'000'000;
    int max_iterations = 100;
    double cond_cap = 1e12;
    /// How far from 0 the conditioning of X(t,0) is searched.
    double cond_search = 50.0;
};

struct LinearizationContext {
    QuasilinearSystem quasi;
    DichotomyCertificate cert;
    LinearizationMode mode = LinearizationMode::HalfLinePlus;
    double eps = 1e-6;
    double k = 1.0;
    double alpha = 0.0;
    double mu = 0.0;
    double gamma = 0.0;
    /// sup ||A|| used in the continuity constant.
    double m_bound = 0.0;
    /// q = 2 K gamma / alpha.
    double gap_factor = 0.0;
    /// Full-line half-width L = ln(2 mu K / (alpha eps)) / alpha (0 if negative).
    double window = 0.0;
    /// 2 mu K / alpha.
    double displacement_bound = 0.0;
    /// Continuity constant for the full-line window.
    double theta = 1.0;
    /// Times in [-cond_minus, cond_plus] keep cond(X(t,0)) below the cap.
    double cond_plus = 0.0;
    double cond_minus = 0.0;
    bool cond_limited = false;
    LinearizationOptions opts;
};

/// Throws CertificateRequired for an unverified certificate, GapViolation
/// when q >= 1 and ProjectorMismatch in half-line mode unless P = I.
LinearizationContext make_context(const QuasilinearSystem& quasi, const DichotomyCertificate& cert, double eps,
                                  LinearizationMode mode, const LinearizationOptions& opts = {});

/// Theta = 1 + 2D with D = K gamma e^{(M+gamma)L} (1 - e^{-alpha L}) / alpha.
double continuity_constant(const LinearizationContext& ctx, double window);

struct MapEvaluation {
    double t = 0.0;
    Vec input;
    Vec output;
    int iterations = 0;
    double residual = 0.0;
    /// Sup-norm changes of the Picard iterates (H only).
    std::vector<double> changes;
    double window_lo = 0.0;
    double window_hi = 0.0;
    /// Window clipped by the conditioning cap or the domain.
    bool window_capped = false;
    std::size_t nodes = 0;
};

MapEvaluation eval_g(const LinearizationContext& ctx, double t, const Vec& eta);
/// Picard iteration for the bounded correction z; NoConvergence past the
/// iteration cap.
MapEvaluation eval_h(const LinearizationContext& ctx, double t, const Vec& xi);

/// max(|G(t,H(t,p)) - p|, |H(t,G(t,p)) - p|).
double inverse_residual(const LinearizationContext& ctx, double t, const Vec& p);

/// max over `samples` + 1 times in [tau, tau + horizon] of
/// |y(t, tau, H(tau, xi)) - H(t, x(t, tau, xi))|.
double conjugacy_residual(const LinearizationContext& ctx, double tau, const Vec& xi, double horizon,
                          int samples = 10);

struct JacobianResult {
    Mat jacobian;
    double determinant = 0.0;
    /// det from the trace integrals: exp(int_0^t tr A - int_0^t tr(A + Df)).
    double liouville_determinant = 0.0;
};

/// dG/deta = X(t,0) dy(0,t,eta)/deta from the variational equation along the
/// backward nonlinear path. Half-line mode only.
JacobianResult g_jacobian(const LinearizationContext& ctx, double t, const Vec& eta);

/// `t,p1..pn,out1..outn,iterations,residual`
void write_map_csv(std::ostream& out, const std::vector<MapEvaluation>& evals);

}  // namespace dlab
