#pragma once

// Adaptive integration of vector and matrix linear ODEs, transition
// matrices X(t,s), and the classical identities (Liouville, adjoint,
// Sylvester representation, bounded growth) as computable checks.

#include "dlab/linalg.hpp"
#include "dlab/system.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <utility>
#include <vector>

namespace dlab {

/// dx = f(t, x). Implementations write into `dx`, which is pre-sized.
using Rhs = std::function<void(double t, const Vec& x, Vec& dx)>;

struct IntegratorOptions {
    double rtol = 1e-10;
    double atol = 1e-10;
    double initial_step = 0.0;  // 0 selects automatically
    double max_step = 0.0;      // 0 means unbounded
    std::size_t max_steps = 5'000'000;
    double overflow_norm = 1e290;
    /// Scale errors by the state's max-norm instead of per component, so a
    /// solution that passes through zero in one coordinate keeps its
    /// relative accuracy without step collapse.
    bool norm_scaled = false;

    static IntegratorOptions with_tol(double tol) {
        IntegratorOptions o;
        o.rtol = tol;
        o.atol = tol;
        return o;
    }
};

/// Accepted steps of a Dormand-Prince 5(4) run with its 4th order
/// continuous extension. Times run from t0 to t1 and are strictly
/// decreasing for backward runs.
class Trajectory {
public:
    const std::vector<double>& times() const { return times_; }
    const std::vector<Vec>& states() const { return states_; }
    double t0() const { return times_.front(); }
    double t1() const { return times_.back(); }
    bool backward() const { return backward_; }
    Eigen::Index state_dim() const { return states_.front().size(); }
    std::size_t steps() const { return times_.size() - 1; }
    std::size_t rejected_steps() const { return rejected_; }
    /// Sum of the absolute local error estimates over accepted steps.
    double error_estimate() const { return error_sum_; }

    /// Dense output; t must lie between t0 and t1.
    Vec at(double t) const;
    const Vec& final_state() const { return states_.back(); }

    /// For matrix runs: reshape a column-major state into rows x (dim/rows).
    Mat matrix_at(double t, Eigen::Index rows) const;
    Mat final_matrix(Eigen::Index rows) const;

private:
    friend Trajectory integrate_ivp(const Rhs&, double, const Vec&, double, const IntegratorOptions&);

    std::vector<double> times_;
    std::vector<Vec> states_;
    // per step: coefficient vectors of the continuous extension
    std::vector<std::array<Vec, 5>> dense_;
    bool backward_ = false;
    std::size_t rejected_ = 0;
    double error_sum_ = 0.0;
};

/// Integrates x' = f(t,x) from t0 to t1 (t1 < t0 allowed; the vector field
/// is negated and integrated forward in reversed time). Throws
/// IntegrationError with kind StiffnessFailure or Blowup.
Trajectory integrate_ivp(const Rhs& f, double t0, const Vec& x0, double t1, const IntegratorOptions& opts = {});

Trajectory integrate_ivp(const LinearSystem& sys, double t0, const Vec& x0, double t1, double tol);

/// X' = A(t)X with X(t0) = X0 (n x m), integrated column-wise as one state.
Trajectory integrate_matrix_ivp(const LinearSystem& sys, double t0, const Mat& x0, double t1, double tol);

/// x' = A(t)x + g(t).
Trajectory integrate_forced(const LinearSystem& sys, const std::function<Vec(double)>& g, double t0, const Vec& x0,
                            double t1, double tol);

/// y' = A(t)y + f(t,y).
Trajectory integrate_quasilinear(const QuasilinearSystem& q, double t0, const Vec& y0, double t1, double tol);

/// CSV with header `t,x1..xn` (vector runs) or `t,X_11..X_nn` (matrix runs,
/// row-major), 17 significant digits.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, Eigen::Index matrix_rows = 0);

// ---------------------------------------------------------------------------

struct TransitionSample {
    double t = 0.0;
    double s = 0.0;
    Mat x;
    double tol = 0.0;
    double err_est = 0.0;
};

/// X(t,s): the matrix IVP from s to t started at I.
TransitionSample transition_matrix(const LinearSystem& sys, double t, double s, double tol = 1e-10);

/// Y(t) = X(t, anchor) C and Y(t)^{-1} = C^{-1} X(anchor, t) over [a, b] for
/// a frame C (identity by default). Every column is its own forward and
/// backward run with norm-relative error control, so columns of very
/// different size keep their own relative accuracy. The inverse comes from
/// the adjoint system Z' = -A^T Z, Z(anchor) = C^{-T}, never by inversion.
class TransitionCache {
public:
    TransitionCache(const LinearSystem& sys, double anchor, double a, double b, double tol = 1e-10,
                    bool with_inverse = true, const Mat& frame = Mat());

    double anchor() const { return anchor_; }
    double lower() const { return a_; }
    double upper() const { return b_; }
    int dim() const { return n_; }

    const Mat& frame() const { return frame_; }

    /// X(t, anchor) C
    Mat forward(double t) const;
    /// C^{-1} X(anchor, t)
    Mat inverse(double t) const;
    /// X(t, s) = Y(t) Y(s)^{-1}
    Mat transition(double t, double s) const { return forward(t) * inverse(s); }

private:
    Mat eval(const std::vector<Trajectory>& up, const std::vector<Trajectory>& down, double t) const;

    int n_;
    double anchor_;
    double a_;
    double b_;
    Mat frame_;
    Mat frame_inv_;
    // one trajectory per column: [anchor -> b] and [anchor -> a]
    std::vector<Trajectory> fwd_up_, fwd_down_;
    std::vector<Trajectory> adj_up_, adj_down_;
};

struct LiouvilleCheck {
    double det_numeric = 0.0;
    double det_formula = 0.0;
    double rel_err = 0.0;
};

/// det X(t1,t0) against exp of the quadrature of tr A over [t0, t1].
LiouvilleCheck liouville_check(const LinearSystem& sys, double t0, double t1, double tol = 1e-10);

/// Integrates x' = A x and y' = -A^T y together from grid.front() (both
/// started at I) and returns max over the grid of ||Y^T X - I||_2.
double adjoint_check(const LinearSystem& sys, const std::vector<double>& grid, double tol = 1e-10);

/// Q' = A(t)Q - Q B(t) + F(t) from Q(s) = q_s to time t.
Mat sylvester_flow(const LinearSystem& a_sys, const LinearSystem& b_sys, const std::function<Mat(double)>& forcing,
                   const Mat& q_s, double s, double t, double tol = 1e-10);

/// Q(t) = X(t,s)Q(s)Y(s,t) + int_s^t X(t,r)F(r)Y(r,t) dr with X, Y the
/// transition matrices of A and B. Independent route for sylvester_flow.
Mat sylvester_representation(const LinearSystem& a_sys, const LinearSystem& b_sys,
                             const std::function<Mat(double)>& forcing, const Mat& q_s, double s, double t,
                             double tol = 1e-10);

enum class GrowthMode { Growth, Decay, Both };

struct BoundedGrowthFit {
    double k = 1.0;
    double alpha = 0.0;
    std::pair<double, double> worst_pair{0.0, 0.0};
    /// Short-range growth rates increase across the interval: the system
    /// does not look like it has bounded growth.
    bool unbounded_suspected = false;
    double early_rate = 0.0;
    double late_rate = 0.0;
};

/// Fits ||X(t,s)|| <= K e^{alpha |t-s|} on all ordered grid pairs
/// (t >= s for Growth, t <= s for Decay, both for Both).
BoundedGrowthFit bounded_growth_fit(const LinearSystem& sys, const std::vector<double>& grid, GrowthMode mode,
                                    double tol = 1e-10);

// ---------------------------------------------------------------------------
// quadrature

/// Adaptive Simpson with Richardson correction.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol, int max_depth = 50);

/// m-point Gauss-Legendre nodes and weights on [-1, 1].
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
const GaussRule& gauss_legendre(int m);

/// Uniform grid with `count` points including both ends.
std::vector<double> linspace(double a, double b, int count);

}  // namespace dlab
