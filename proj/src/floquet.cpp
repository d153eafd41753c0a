#include "dlab/floquet.hpp"

#include "dlab/error.hpp"

#include <algorithm>
#include <cmath>

namespace dlab {

namespace {

double require_period(const LinearSystem& sys) {
    if (!sys.period()) throw Error(ErrorKind::NotPeriodic, "system " + sys.name() + " has no declared period");
    return *sys.period();
}

}  // namespace

FloquetData monodromy(const LinearSystem& sys, double tol) {
    const double omega = require_period(sys);
    FloquetData out;
    out.omega = omega;
    out.tol = tol;
    out.monodromy = transition_matrix(sys, omega, 0.0, tol).x;
    Eigen::EigenSolver<Mat> es(out.monodromy, false);
    const CVec ev = es.eigenvalues();
    out.multipliers.assign(ev.data(), ev.data() + ev.size());
    std::sort(out.multipliers.begin(), out.multipliers.end(), [](cplx a, cplx b) {
        if (std::abs(a) != std::abs(b)) return std::abs(a) < std::abs(b);
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    out.unit_circle_margin = INFINITY;
    for (cplx rho : out.multipliers) {
        out.unit_circle_margin = std::min(out.unit_circle_margin, std::fabs(std::abs(rho) - 1.0));
    }
    LogOptions lo;
    lo.residual_tol = std::max(1e-8, 10 * tol);
    const LogResult lr = principal_log(out.monodromy, lo);
    out.d = lr.log / omega;
    out.negative_axis_branch = lr.negative_axis_branch;
    out.d_is_real = out.d.imag().cwiseAbs().maxCoeff() < 1e-10;
    out.log_residual = lr.residual;
    return out;
}

FloquetFactor floquet_factor(const LinearSystem& sys, const FloquetData& data, double t, double tol) {
    FloquetFactor out;
    out.d = data.d;
    const Mat x = transition_matrix(sys, t, 0.0, tol).x;
    const CMat q = x.cast<cplx>() * expm(CMat(-t * data.d));
    out.q = q.real();
    return out;
}

FloquetFactor floquet_factor(const LinearSystem& sys, double t, double tol) {
    return floquet_factor(sys, monodromy(sys, tol), t, tol);
}

Hyperbolicity periodic_hyperbolic(const FloquetData& data, double tol) {
    return {data.unit_circle_margin > tol, data.unit_circle_margin};
}

Hyperbolicity periodic_hyperbolic(const LinearSystem& sys, double tol) {
    return periodic_hyperbolic(monodromy(sys), tol);
}

PeriodicSolution periodic_solution(const LinearSystem& sys, const std::function<Vec(double)>& g, double tol) {
    const double omega = require_period(sys);
    const int n = sys.dim();
    for (int k = 0; k < 32; ++k) {
        const double t = omega * k / 32.0;
        const Vec a = g(t), b = g(t + omega);
        if ((a - b).norm() > 1e-8 * std::max(1.0, a.norm())) {
            throw Error(ErrorKind::NotPeriodic, "forcing does not share the period of " + sys.name());
        }
    }
    // one run of [X | z] with X' = AX, z' = Az + g, X(0) = I, z(0) = 0:
    // z(omega) = int_0^omega X(omega, s) g(s) ds
    Rhs f = [&sys, &g, n](double t, const Vec& y, Vec& dy) {
        const Mat a = sys.coeff_unchecked(t);
        Eigen::Map<const Mat> xz(y.data(), n, n + 1);
        Eigen::Map<Mat> d(dy.data(), n, n + 1);
        d.noalias() = a * xz;
        d.col(n) += g(t);
    };
    Vec y0 = Vec::Zero(n * (n + 1));
    Eigen::Map<Mat>(y0.data(), n, n + 1).leftCols(n).setIdentity();
    const Trajectory aug = integrate_ivp(f, 0.0, y0, omega, IntegratorOptions::with_tol(tol));
    const Mat xz = aug.final_matrix(n);
    const Mat b = xz.leftCols(n);
    const Vec z = xz.col(n);
    const Mat lhs = Mat::Identity(n, n) - b;
    Eigen::JacobiSVD<Mat> svd(lhs);
    const double smin = svd.singularValues()(n - 1);
    if (smin <= 1e-8 * std::max(1.0, svd.singularValues()(0))) {
        throw Error(ErrorKind::ResonantForcing, "I - X(omega,0) is singular: a multiplier equals 1");
    }
    PeriodicSolution out;
    out.x0 = lhs.fullPivLu().solve(z);
    out.trajectory = integrate_forced(sys, g, 0.0, out.x0, omega, tol);
    out.closure_defect = (out.trajectory.final_state() - out.x0).norm();
    return out;
}

}  // namespace dlab
