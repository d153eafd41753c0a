#pragma once

// Finite-window detection and certification of exponential dichotomies:
// subspace splitting, (K, alpha) certificates, the Green operator and the
// tests built on it (bounded solutions, Lipschitz fixed points,
// noncriticality, index, full-line criterion).

#include "dlab/linalg.hpp"
#include "dlab/propagate.hpp"
#include "dlab/system.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

namespace dlab {

// ---------------------------------------------------------------------------
// splitting

enum class SplitDirection { Forward, Backward, Both };

struct SplitOptions {
    double slope_threshold = 0.05;
    double tol = 1e-10;
    /// Defaults from the system's domain: full-line -> Both,
    /// half-line-plus -> Forward, half-line-minus -> Backward.
    std::optional<SplitDirection> direction;
};

struct SubspaceSplit {
    /// Orthonormal columns; estimate of the forward-decaying space at t = 0.
    Mat stable_basis;
    /// Orthonormal columns; estimate of the backward-decaying space at t = 0.
    Mat unstable_basis;
    double horizon = 0.0;
    std::vector<double> stable_rates;
    std::vector<double> unstable_rates;
    /// Directions whose log-slope magnitude is below the threshold, from
    /// either direction of time.
    std::vector<double> inconclusive_rates;
    int forward_inconclusive = 0;
    int backward_inconclusive = 0;
    bool forward_done = false;
    bool backward_done = false;
    /// Condition number of [stable | unstable] (inf if they overlap or do
    /// not span R^n).
    double condition = 0.0;

    bool inconclusive() const { return forward_inconclusive + backward_inconclusive > 0; }
};

SubspaceSplit estimate_splitting(const LinearSystem& sys, double horizon, const SplitOptions& opts = {});

// ---------------------------------------------------------------------------
// certificates

enum class CertFlag { Verified, Violated, Inconclusive };
std::string_view to_string(CertFlag f);

struct CertifyOptions {
    double k_cap = 1e6;
    /// Accepted worst relative violation on the refined grid.
    double tol = 0.05;
    double integration_tol = 1e-10;
    /// Candidate alphas; empty means k/400 for k = 1 .. 400 M with M the
    /// sampled sup of ||A(t)||_2 on the interval.
    std::vector<double> alpha_candidates;
    /// A fitted K may grow by at most this factor between half and full
    /// window length (window consistency of the exponential rate).
    double window_consistency = 1.01;
};

struct DichotomyCertificate {
    ProjectionMatrix projector;  // at t = 0 (or at the window's anchor)
    /// Frame C = [image basis | kernel basis] with P = C diag(I_r, 0) C^{-1}.
    Mat frame;
    double k = 1.0;
    double alpha = 0.0;
    double a = 0.0;
    double b = 0.0;
    double anchor = 0.0;
    Domain domain = Domain::FullLine;
    std::vector<double> grid;
    double residual = 0.0;
    CertFlag flag = CertFlag::Violated;
    double sup_norm_a = 0.0;
    /// Declared perturbation constants passed sampling (set by callers that
    /// certify the linear part of a quasilinear system).
    bool assumptions_ok = true;

    bool verified() const { return flag == CertFlag::Verified; }
    int rank() const { return projector.rank; }
};

/// Image and kernel frame of an idempotent matrix.
Mat projection_frame(const ProjectionMatrix& p);

/// Invariant bases V(t_k) = X(t_k, t*) Im P and W(t_k) = X(t_k, t*) ker P on
/// a grid through the anchor t*. Each family is carried in the direction of
/// time in which it attracts and re-orthonormalized at every node: W forward
/// and V backward from the anchor. On the far side the roles swap, so there
/// the family is recomputed by a sweep from a look-ahead estimate at the end
/// of the grid (dominant singular directions of X over `horizon` more time,
/// when the domain allows). If that sweep lands farther than `consistency`
/// from the given subspace at the anchor, the given P is not the splitting
/// one and plain propagation is used instead.
struct SplitFrames {
    std::vector<double> nodes;
    std::size_t anchor_index = 0;
    std::vector<Mat> v;  // n x r, orthonormal
    std::vector<Mat> w;  // n x (n-r), orthonormal
    std::vector<Mat> d;  // X(t_{k+1}, t_k) V_k = V_{k+1} d_k
    std::vector<Mat> e;  // X(t_{k+1}, t_k) W_k = W_{k+1} e_k
    std::vector<Mat> step;  // X(t_{k+1}, t_k)
    bool image_swept = false;
    bool kernel_swept = false;
    /// sin of the largest principal angle between sweep and given subspace.
    double image_mismatch = 0.0;
    double kernel_mismatch = 0.0;

    int dim() const { return static_cast<int>(v.front().rows()); }
    int rank() const { return static_cast<int>(v.front().cols()); }
    Mat frame(std::size_t k) const;
};

SplitFrames split_frames(const LinearSystem& sys, const Mat& image, const Mat& kernel, std::vector<double> nodes,
                         double anchor, double tol = 1e-10, double horizon = 20.0, double consistency = 1e-6);

/// Certifies ||X(t)PX^{-1}(s)|| <= K e^{-alpha(t-s)} (t >= s) and
/// ||X(t)(I-P)X^{-1}(s)|| <= K e^{-alpha(s-t)} (t <= s) on the grid pairs.
/// P sits at the anchor 0 when 0 lies in [a, b], otherwise at the nearest
/// end. An empty grid selects a uniform one with spacing 0.1 (at most 161
/// nodes).
DichotomyCertificate certify(const LinearSystem& sys, const ProjectionMatrix& p, double a, double b,
                             std::vector<double> grid = {}, const CertifyOptions& opts = {});

/// Same test for sampled fundamental matrices: y[i] = Y(grid[i]) and
/// y_inv[i] = Y(grid[i])^{-1} with the canonical projection diag(I_r, 0).
/// The refined-grid check is skipped (there is no flow to refine), so the
/// residual is the in-sample violation of the chosen constants.
DichotomyCertificate certify_sampled(const std::vector<double>& grid, const std::vector<Mat>& y,
                                     const std::vector<Mat>& y_inv, int r, double sup_norm_a,
                                     const CertifyOptions& opts = {});

/// sup of ||A(t)||_2 sampled on [a, b] (at least 400 samples).
double sampled_sup_norm(const LinearSystem& sys, double a, double b, int samples = 400);

// ---------------------------------------------------------------------------
// Green operator

/// Gauss-Legendre discretization of (Gv)(t) = int_a^b G(t,s) v(s) ds with
/// the dichotomy kernel G(t,s) = X(t,s)P(s) for t >= s and
/// -X(t,s)(I-P(s)) for t < s.
///
/// The window is cut into chunks of length about `chunk`. The image of P is
/// swept backward from `v_right` (a basis at b) and its kernel forward from
/// `w_left` (a basis at a); both sweeps run in their attracting direction and
/// are re-orthonormalized at every chunk boundary. Inside a chunk the kernel
/// factors through local fundamental matrices; across chunks the stable part
/// accumulates by a forward recursion through contracting maps and the
/// unstable part by a backward one. Values at the nodes use exact in-panel
/// product integration, so the kernel jump on the diagonal costs nothing.
class GreenOperator {
public:
    GreenOperator(const LinearSystem& sys, int rank, std::vector<double> breaks, const Mat& v_right,
                  const Mat& w_left, double tol = 1e-10, int order = 8, double chunk = 2.0);

    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& weights() const { return weights_; }
    double lower() const { return breaks_.front(); }
    double upper() const { return breaks_.back(); }
    int dim() const { return n_; }
    int rank() const { return r_; }

    /// v holds v(s_k) in column k; returns (Gv)(s_k) in column k.
    Mat apply(const Mat& v) const;
    /// (Gv)(t) for any t in [a, b].
    Vec apply_at(const Mat& v, double t) const;

    /// Orthonormal bases of Im P(t) and ker P(t) at a chunk boundary or node.
    Mat image_basis_at_node(std::size_t k) const;

private:
    struct Chunk {
        std::size_t first_panel = 0;
        std::size_t panels = 0;
        double lo = 0.0;
        double hi = 0.0;
        Mat frame;       // [V_k | W_k] at lo
        Mat d;           // r x r: V-coordinates carried from lo to hi
        Mat e_inv;       // u x u: W-coordinates carried back from hi to lo
        std::size_t cache = 0;
    };

    struct Sweeps {
        std::vector<Vec> sigma;  // stable coordinates at each chunk start
        std::vector<Vec> omega;  // unstable coordinates at each chunk end
    };
    Sweeps sweep(const Mat& ps, const Mat& pu) const;
    std::size_t chunk_of_panel(std::size_t p) const;

    int n_;
    int r_;
    int m_;
    std::vector<double> breaks_;
    std::vector<double> nodes_;
    std::vector<double> weights_;
    std::vector<Chunk> chunks_;
    std::vector<TransitionCache> caches_;
    std::vector<Mat> y_;      // local Y at each node
    std::vector<Mat> y_inv_;  // local Y^{-1} at each node
    std::vector<std::size_t> panel_chunk_;
    Mat partial_;  // m x m: int_{-1}^{x_i} l_j
};

struct EndFrames {
    Mat v_right;
    Mat w_left;
};

/// Bases of Im P(b) and ker P(a) for a window [a, b]. Subspaces that are
/// intrinsic (decaying directions with room in the domain to look `horizon`
/// ahead or behind) come from dominant singular directions; otherwise the
/// certificate frame is propagated from its anchor in the attracting
/// direction.
EndFrames end_frames(const LinearSystem& sys, const DichotomyCertificate& cert, double a, double b,
                     double horizon, double tol = 1e-10);

/// Uniform panel breaks with length at most `max_panel`.
std::vector<double> uniform_breaks(double a, double b, double max_panel);

struct GreenResult {
    Vec value;
    double truncation_bound = 0.0;
    double g_sup = 0.0;
};

/// x*(t) = int_{t-L}^{t+L} G(t,s) g(s) ds with the certificate's projector.
/// Throws CertificateRequired unless cert is verified.
GreenResult green_apply(const LinearSystem& sys, const DichotomyCertificate& cert,
                        const std::function<Vec(double)>& g, double t, double window, double tol = 1e-10);

/// True iff max sampled |x*| <= (2K/alpha) ||g||_inf (1 + tol).
bool sup_bound_check(const DichotomyCertificate& cert, const std::vector<Vec>& samples, double g_sup,
                     double tol = 1e-6);

struct FixedPointResult {
    std::vector<double> nodes;
    std::vector<Vec> values;
    int iterations = 0;
    int iteration_bound = 0;
    double contraction = 0.0;
    double last_change = 0.0;
    /// sup over nodes of |w - G h(., w)| after the final iterate.
    double residual = 0.0;
    std::vector<double> changes;
};

/// Picard iteration for w = int G(t,s) h(s, w(s)) ds on the window [a, b].
/// Throws GapViolation when 2 K gamma >= alpha and NoConvergence when
/// max_iter is exhausted.
FixedPointResult lipschitz_fixed_point(const LinearSystem& sys, const DichotomyCertificate& cert,
                                       const std::function<Vec(double, const Vec&)>& h, double gamma, double a,
                                       double b, double tol = 1e-10, int max_iter = 200);

// ---------------------------------------------------------------------------
// tests

struct NoncriticalityResult {
    bool noncritical = false;
    double margin = 0.0;
    double worst_t = 0.0;
};

/// |x(t)| <= theta sup_{|u-t|<=T} |x(u)| for `probes` seeded random unit
/// initial conditions at 0 and every grid t.
NoncriticalityResult noncriticality_test(const LinearSystem& sys, double window, double theta,
                                         const std::vector<double>& grid, int probes = 16, std::uint64_t seed = 0,
                                         double tol = 1e-10);

/// dim V (forward) + dim W (backward) - n. Throws IndexUndetermined on an
/// inconclusive direction.
int dichotomy_index(const LinearSystem& sys, double horizon, double tol = 1e-10);

struct FullLineReport {
    bool passes = false;
    DichotomyCertificate forward_cert;   // on [0, T]
    DichotomyCertificate backward_cert;  // on [-T, 0]
    double angle = 0.0;
    int index = 0;
    bool index_determined = true;
    SubspaceSplit split;
};

FullLineReport full_line_criterion(const LinearSystem& sys, double horizon, double tol = 1e-10,
                                   double angle_threshold = 0.01);

struct ProjectorGrowth {
    double max_norm = 0.0;
    double slope = 0.0;
    bool bounded = true;
};

/// Growth of t -> ||X(t,0) P X(0,t)||_2 over the grid: bounded iff the
/// least-squares slope of its logarithm is below `slope_threshold`.
ProjectorGrowth projector_growth(const LinearSystem& sys, const ProjectionMatrix& p, const std::vector<double>& grid,
                                 double slope_threshold = 0.05, double tol = 1e-10);

}  // namespace dlab
