#pragma once

// Periodic systems: monodromy, multipliers, X(t,0) = Q(t) e^{Dt}, and the
// periodic response to periodic forcing.

#include "dlab/linalg.hpp"
#include "dlab/propagate.hpp"
#include "dlab/system.hpp"

#include <functional>
#include <vector>

namespace dlab {

struct FloquetData {
    double omega = 0.0;
    Mat monodromy;
    std::vector<cplx> multipliers;
    /// (1/omega) log B, always complex.
    CMat d;
    bool d_is_real = false;
    bool negative_axis_branch = false;
    double unit_circle_margin = 0.0;
    /// ||exp(omega D) - B||_2
    double log_residual = 0.0;
    double tol = 0.0;
};

/// Throws NotPeriodic when the system carries no period.
FloquetData monodromy(const LinearSystem& sys, double tol = 1e-10);

struct FloquetFactor {
    Mat q;
    CMat d;
};

/// Q(t) = X(t,0) exp(-Dt). Q is real whenever D is.
FloquetFactor floquet_factor(const LinearSystem& sys, const FloquetData& data, double t, double tol = 1e-10);
FloquetFactor floquet_factor(const LinearSystem& sys, double t, double tol = 1e-10);

struct Hyperbolicity {
    bool hyperbolic = false;
    double margin = 0.0;
};
Hyperbolicity periodic_hyperbolic(const FloquetData& data, double tol = 1e-8);
Hyperbolicity periodic_hyperbolic(const LinearSystem& sys, double tol = 1e-8);

struct PeriodicSolution {
    Vec x0;
    Trajectory trajectory;  // one period, from x0
    double closure_defect = 0.0;
};

/// Unique periodic solution of x' = A(t)x + g(t). Throws ResonantForcing
/// when I - X(omega, 0) is singular and NotPeriodic when g does not share
/// the period (checked by sampling).
PeriodicSolution periodic_solution(const LinearSystem& sys, const std::function<Vec(double)>& g,
                                   double tol = 1e-10);

}  // namespace dlab
