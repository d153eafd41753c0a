#pragma once

// Finite-horizon dichotomy spectrum: discrete QR triangularization, windowed
// Bohl exponents of the diagonal, and the shifted-system cross-check.

#include "dlab/linalg.hpp"
#include "dlab/system.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dlab {

struct TriangularReduction {
    std::vector<double> grid;
    std::vector<Mat> q;
    /// b_ii(t_k) = q_i^T A q_i per node, one row per node.
    Mat b_diag;
    /// Integral of b_ii from grid[0] to grid[k] (sum of log r_ii).
    Mat b_cumulative;
    /// max over nodes of ||B(t_k)||_2 with B = Q^T A Q - Q^T Q'.
    double offdiag_bound = 0.0;
    double orthogonality_defect = 0.0;
};

/// One step of a flow: X(t1, t0).
using StepFlow = std::function<Mat(double t1, double t0)>;

TriangularReduction perron_triangularize(const LinearSystem& sys, const std::vector<double>& grid,
                                         double tol = 1e-10);
/// Same sweep from an arbitrary flow; b_diag and offdiag_bound are left empty.
TriangularReduction perron_triangularize(int dim, const StepFlow& flow, const std::vector<double>& grid);

struct BohlOptions {
    /// Window averages trending by more than this per unit time mark the
    /// corresponding side unbounded.
    double trend_threshold = 0.25;
    double magnitude_cap = 1e6;
};

struct BohlPair {
    double beta_minus = 0.0;
    double beta_plus = 0.0;
    bool unbounded_below = false;
    bool unbounded_above = false;
    double window = 0.0;
    double start = 0.0;
    double horizon = 0.0;
};

/// Window averages (1/L) int_s^{s+L} a for s in [T/2, T-L] from cumulative
/// integrals on a grid (linear interpolation between nodes).
BohlPair bohl_from_cumulative(const std::vector<double>& grid, const std::vector<double>& cumulative, double window,
                              const BohlOptions& opts = {});
/// From samples of a(t) on a grid (trapezoidal cumulative integral).
BohlPair scalar_bohl(const std::vector<double>& grid, const std::vector<double>& samples, double window,
                     const BohlOptions& opts = {});
/// From a function on [0, T] (Gauss-Legendre per cell).
BohlPair scalar_bohl(const std::function<double(double)>& a, double horizon, double window,
                     const BohlOptions& opts = {});

struct SpectralInterval {
    double lo = 0.0;
    double hi = 0.0;
    bool unbounded_left = false;
    bool unbounded_right = false;
};

struct ResolventGap {
    double lo = 0.0;  // -inf for the leftmost gap
    double hi = 0.0;  // +inf for the rightmost gap
    int rank = 0;
};

struct SpectrumReport {
    std::vector<SpectralInterval> intervals;
    std::vector<ResolventGap> gaps;
    std::vector<BohlPair> diagonal;
    double horizon = 0.0;
    double window = 0.0;
    double merge_eps = 0.0;
    std::string method = "qr-bohl";
    bool unbounded = false;
    /// Union of a forward and a backward half-line spectrum.
    bool full_line = false;
    std::vector<std::string> warnings;

    /// Rank of the dichotomy projector for a lambda in a gap; nullopt inside
    /// an interval.
    std::optional<int> rank_at(double lambda) const;
};

struct SpectrumOptions {
    /// Grid spacing cap for the QR sweep (shrunk so that L is a multiple).
    double step = 0.1;
    BohlOptions bohl;
    double tol = 1e-10;
};

/// Spectrum of x' = A(t)x on [0, T] with Bohl window L. Throws
/// HorizonTooShort when T < 2L and, for n >= 2, UnboundedCoefficients when
/// the sampled ||A|| grows across the horizon (scalar systems report the
/// unbounded side instead).
SpectrumReport halfline_spectrum(const LinearSystem& sys, double horizon, double window,
                                 const SpectrumOptions& opts = {});
/// Same from a flow; the coefficient growth check is skipped.
SpectrumReport halfline_spectrum(int dim, const StepFlow& flow, double horizon, double window,
                                 const SpectrumOptions& opts = {});

/// Forward spectrum on [0, T] united with the backward one (time-reversed
/// system on [0, T]). Neither an over- nor an under-approximation of the
/// full-line spectrum is guaranteed at finite horizon.
SpectrumReport fullline_spectrum(const LinearSystem& sys, double horizon, double window,
                                 const SpectrumOptions& opts = {});

enum class ShiftVerdict { InResolvent, InSpectrum, Inconclusive };
std::string_view to_string(ShiftVerdict v);

struct ShiftResult {
    double lambda = 0.0;
    ShiftVerdict verdict = ShiftVerdict::Inconclusive;
    std::optional<int> rank;
    double alpha = 0.0;
    double k = 0.0;
};

/// Half-line dichotomy test of A(t) - lambda I on [0, T].
ShiftResult shifted_dichotomy_test(const LinearSystem& sys, double lambda, double horizon, double tol = 1e-10);

struct RankSweep {
    std::vector<ShiftResult> points;
    /// A decrease of rank along increasing lambda.
    bool monotone = true;
    std::vector<std::string> inconsistencies;
};

RankSweep rank_step_function(const LinearSystem& sys, const std::vector<double>& lambdas, double horizon,
                             double tol = 1e-10);

}  // namespace dlab
