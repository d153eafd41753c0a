#include "dlab/propagate.hpp"

#include "dlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace dlab {

TransitionSample transition_matrix(const LinearSystem& sys, double t, double s, double tol) {
    TransitionSample out;
    out.t = t;
    out.s = s;
    out.tol = tol;
    const int n = sys.dim();
    if (t == s) {
        if (!sys.contains(t)) throw Error(ErrorKind::DomainError, "time outside the domain of " + sys.name());
        out.x = Mat::Identity(n, n);
        return out;
    }
    const Trajectory tr = integrate_matrix_ivp(sys, s, Mat::Identity(n, n), t, tol);
    out.x = tr.final_matrix(n);
    out.err_est = tr.error_estimate();
    return out;
}


TransitionCache::TransitionCache(const LinearSystem& sys, double anchor, double a, double b, double tol,
                                 bool with_inverse, const Mat& frame)
    : n_(sys.dim()), anchor_(anchor), a_(a), b_(b) {
    if (!(a <= anchor && anchor <= b)) throw Error(ErrorKind::InvalidInput, "anchor must lie in [a, b]");
    if (!sys.contains(a) || !sys.contains(b)) {
        throw Error(ErrorKind::DomainError, "interval leaves the domain of " + sys.name());
    }
    frame_ = frame.size() == 0 ? Mat(Mat::Identity(n_, n_)) : frame;
    if (frame_.rows() != n_ || frame_.cols() != n_) throw Error(ErrorKind::InvalidInput, "frame must be n x n");
    Eigen::FullPivLU<Mat> lu(frame_);
    if (!lu.isInvertible()) throw Error(ErrorKind::SingularMatrix, "frame is singular");
    frame_inv_ = lu.inverse();

    IntegratorOptions opts = IntegratorOptions::with_tol(tol);
    opts.norm_scaled = true;
    opts.atol = 1e-300;
    auto run = [&](const Rhs& f, const Vec& y0, std::vector<Trajectory>& up, std::vector<Trajectory>& down) {
        up.push_back(integrate_ivp(f, anchor, y0, b, opts));
        down.push_back(integrate_ivp(f, anchor, y0, a, opts));
    };
    Rhs fx = [&sys](double t, const Vec& x, Vec& dx) { dx.noalias() = sys.coeff_unchecked(t) * x; };
    for (int j = 0; j < n_; ++j) run(fx, frame_.col(j), fwd_up_, fwd_down_);
    if (with_inverse) {
        Rhs fz = [&sys](double t, const Vec& z, Vec& dz) { dz.noalias() = -sys.coeff_unchecked(t).transpose() * z; };
        const Mat z0 = frame_inv_.transpose();
        for (int j = 0; j < n_; ++j) run(fz, z0.col(j), adj_up_, adj_down_);
    }
}

Mat TransitionCache::eval(const std::vector<Trajectory>& up, const std::vector<Trajectory>& down, double t) const {
    const auto& pieces = t >= anchor_ ? up : down;
    Mat m(n_, n_);
    for (int j = 0; j < n_; ++j) m.col(j) = pieces[static_cast<std::size_t>(j)].at(t);
    return m;
}

Mat TransitionCache::forward(double t) const { return eval(fwd_up_, fwd_down_, t); }

Mat TransitionCache::inverse(double t) const {
    if (adj_up_.empty()) return forward(t).inverse();
    return eval(adj_up_, adj_down_, t).transpose();
}

LiouvilleCheck liouville_check(const LinearSystem& sys, double t0, double t1, double tol) {
    LiouvilleCheck out;
    out.det_numeric = transition_matrix(sys, t1, t0, tol).x.determinant();
    const double integral = adaptive_simpson([&sys](double t) { return sys.coeff(t).trace(); }, t0, t1, tol);
    out.det_formula = std::exp(integral);
    out.rel_err = std::fabs(out.det_numeric - out.det_formula) / std::fabs(out.det_formula);
    return out;
}

double adjoint_check(const LinearSystem& sys, const std::vector<double>& grid, double tol) {
    if (grid.empty()) return 0.0;
    const int n = sys.dim();
    const double t0 = grid.front();
    // stacked state [X; Y] with X' = AX, Y' = -A^T Y
    Rhs f = [&sys, n](double t, const Vec& z, Vec& dz) {
        const Mat a = sys.coeff_unchecked(t);
        Eigen::Map<const Mat> x(z.data(), n, n);
        Eigen::Map<const Mat> y(z.data() + n * n, n, n);
        Eigen::Map<Mat> dx(dz.data(), n, n);
        Eigen::Map<Mat> dy(dz.data() + n * n, n, n);
        dx.noalias() = a * x;
        dy.noalias() = -a.transpose() * y;
    };
    Vec z0(2 * n * n);
    Eigen::Map<Mat>(z0.data(), n, n).setIdentity();
    Eigen::Map<Mat>(z0.data() + n * n, n, n).setIdentity();
    double lo = t0, hi = t0;
    for (double t : grid) {
        if (!sys.contains(t)) throw Error(ErrorKind::DomainError, "grid leaves the domain of " + sys.name());
        lo = std::min(lo, t);
        hi = std::max(hi, t);
    }
    const auto opts = IntegratorOptions::with_tol(tol);
    std::vector<Trajectory> runs;
    runs.push_back(integrate_ivp(f, t0, z0, hi, opts));
    runs.push_back(integrate_ivp(f, t0, z0, lo, opts));
    double worst = 0.0;
    for (double t : grid) {
        const Vec z = (t >= t0 ? runs[0] : runs[1]).at(t);
        Eigen::Map<const Mat> x(z.data(), n, n);
        Eigen::Map<const Mat> y(z.data() + n * n, n, n);
        const Mat d = y.transpose() * x - Mat::Identity(n, n);
        worst = std::max(worst, operator_norm_2(d));
    }
    return worst;
}

Mat sylvester_flow(const LinearSystem& a_sys, const LinearSystem& b_sys, const std::function<Mat(double)>& forcing,
                   const Mat& q_s, double s, double t, double tol) {
    const Eigen::Index rows = q_s.rows(), cols = q_s.cols();
    if (rows != a_sys.dim() || cols != b_sys.dim()) throw Error(ErrorKind::InvalidInput, "Sylvester shape mismatch");
    Rhs f = [&, rows, cols](double r, const Vec& z, Vec& dz) {
        Eigen::Map<const Mat> q(z.data(), rows, cols);
        Eigen::Map<Mat> dq(dz.data(), rows, cols);
        dq.noalias() = a_sys.coeff_unchecked(r) * q;
        dq.noalias() -= q * b_sys.coeff_unchecked(r);
        if (forcing) dq += forcing(r);
    };
    const Vec z0 = Eigen::Map<const Vec>(q_s.data(), q_s.size());
    const Trajectory tr = integrate_ivp(f, s, z0, t, IntegratorOptions::with_tol(tol));
    return tr.final_matrix(rows);
}

Mat sylvester_representation(const LinearSystem& a_sys, const LinearSystem& b_sys,
                             const std::function<Mat(double)>& forcing, const Mat& q_s, double s, double t,
                             double tol) {
    if (t == s) return q_s;
    const double lo = std::min(s, t), hi = std::max(s, t);
    // anchored at t: forward(r) = X(r,t), inverse(r) = X(t,r)
    const TransitionCache xa(a_sys, t, lo, hi, tol);
    const TransitionCache yb(b_sys, t, lo, hi, tol, false);
    Mat q = xa.inverse(s) * q_s * yb.forward(s);
    if (forcing) {
        const GaussRule& g = gauss_legendre(8);
        const int panels = std::max(16, static_cast<int>(std::ceil(8.0 * (hi - lo))));
        const double h = (t - s) / panels;
        for (int p = 0; p < panels; ++p) {
            const double mid = s + (p + 0.5) * h;
            for (std::size_t k = 0; k < g.nodes.size(); ++k) {
                const double r = mid + 0.5 * h * g.nodes[k];
                q += 0.5 * h * g.weights[k] * (xa.inverse(r) * forcing(r) * yb.forward(r));
            }
        }
    }
    return q;
}

BoundedGrowthFit bounded_growth_fit(const LinearSystem& sys, const std::vector<double>& grid, GrowthMode mode,
                                    double tol) {
    if (grid.size() < 2) throw Error(ErrorKind::InvalidInput, "bounded_growth_fit needs at least 2 grid points");
    std::vector<double> g = grid;
    std::sort(g.begin(), g.end());
    const std::size_t m = g.size();
    // chained steps: X(g_i, g_j) as a product of short transitions, which
    // keeps every factor moderate in size
    std::vector<Mat> step(m - 1), step_inv(m - 1);
    for (std::size_t k = 0; k + 1 < m; ++k) {
        step[k] = transition_matrix(sys, g[k + 1], g[k], tol).x;
        step_inv[k] = step[k].fullPivLu().inverse();
    }
    struct Pair {
        double d, y, t, s;
    };
    std::vector<Pair> pairs;
    auto add = [&](std::size_t i, std::size_t j, const Mat& x) {  // x = X(g[i], g[j])
        const double nrm = operator_norm_2(x);
        pairs.push_back({std::fabs(g[i] - g[j]), std::log(std::max(nrm, 1e-300)), g[i], g[j]});
    };
    for (std::size_t j = 0; j < m; ++j) {
        Mat fwd = Mat::Identity(sys.dim(), sys.dim());
        Mat bwd = fwd;
        for (std::size_t i = j + 1; i < m; ++i) {
            fwd = step[i - 1] * fwd;
            bwd = bwd * step_inv[i - 1];
            if (mode != GrowthMode::Decay) add(i, j, fwd);
            if (mode != GrowthMode::Growth) add(j, i, bwd);
        }
    }
    double spacing = 0.0;
    for (std::size_t i = 1; i < m; ++i) spacing = std::max(spacing, g[i] - g[i - 1]);
    const double span = g.back() - g.front();
    auto envelope = [&](double d) {
        double e = -INFINITY;
        for (const auto& p : pairs) {
            if (std::fabs(p.d - d) <= 0.5 * spacing + 1e-12) e = std::max(e, p.y);
        }
        return e;
    };
    double max_rate = 0.0;
    for (const auto& p : pairs) max_rate = std::max(max_rate, p.y / p.d);
    const double slope = (envelope(span) - envelope(0.5 * span)) / (0.5 * span);

    BoundedGrowthFit fit;
    fit.alpha = std::max(0.0, std::min(std::isfinite(slope) ? slope : max_rate, max_rate));
    fit.k = 1.0;
    for (const auto& p : pairs) {
        const double kk = std::exp(p.y - fit.alpha * p.d);
        if (kk > fit.k) {
            fit.k = kk;
            fit.worst_pair = {p.t, p.s};
        }
    }

    // short-range rates from consecutive nodes, first half against second half
    double early = -INFINITY, late = -INFINITY;
    const double mid = 0.5 * (g.front() + g.back());
    for (std::size_t i = 1; i < m; ++i) {
        const double d = g[i] - g[i - 1];
        double rate = -INFINITY;
        if (mode != GrowthMode::Decay) rate = std::max(rate, std::log(operator_norm_2(step[i - 1])) / d);
        if (mode != GrowthMode::Growth) rate = std::max(rate, std::log(operator_norm_2(step_inv[i - 1])) / d);
        if (g[i] <= mid) {
            early = std::max(early, rate);
        } else {
            late = std::max(late, rate);
        }
    }
    if (!std::isfinite(early)) early = late;
    fit.early_rate = early;
    fit.late_rate = late;
    fit.unbounded_suspected = late > 1.5 * std::max(early, 0.0) + 0.5;
    return fit;
}

namespace {

double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                   double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double diff = left + right - whole;
    if (depth <= 0 || std::fabs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
    return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol, int max_depth) {
    if (a == b) return 0.0;
    // a few coarse panels first so that narrow features are not missed
    const int panels = 8;
    const double h = (b - a) / panels;
    double sum = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * h, hi = (p + 1 == panels) ? b : a + (p + 1) * h;
        const double fa = f(lo), fb = f(hi), fm = f(0.5 * (lo + hi));
        const double whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
        sum += simpson_rec(f, lo, hi, fa, fm, fb, whole, tol / panels, max_depth);
    }
    return sum;
}

const GaussRule& gauss_legendre(int m) {
    if (m < 1 || m > 256) throw Error(ErrorKind::InvalidInput, "Gauss-Legendre order out of range");
    static std::mutex mu;
    static std::map<int, GaussRule> rules;
    std::lock_guard<std::mutex> lock(mu);
    auto it = rules.find(m);
    if (it != rules.end()) return it->second;
    GaussRule rule;
    rule.nodes.resize(m);
    rule.weights.resize(m);
    for (int i = 0; i < (m + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (m + 0.5));
        double dp = 0.0;
        for (int it2 = 0; it2 < 100; ++it2) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= m; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (m == 1) p0 = 1.0;
            dp = m * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::fabs(dx) < 1e-16) break;
        }
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= m; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = m * (x * p1 - p0) / (x * x - 1.0);
        rule.nodes[i] = -x;
        rule.nodes[m - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.weights[i] = w;
        rule.weights[m - 1 - i] = w;
    }
    if (m == 1) {
        rule.nodes[0] = 0.0;
        rule.weights[0] = 2.0;
    }
    return rules.emplace(m, std::move(rule)).first->second;
}

std::vector<double> linspace(double a, double b, int count) {
    if (count < 1) throw Error(ErrorKind::InvalidInput, "linspace needs at least one point");
    std::vector<double> out(count);
    if (count == 1) {
        out[0] = a;
        return out;
    }
    for (int i = 0; i < count; ++i) out[i] = a + (b - a) * i / (count - 1);
    out.back() = b;
    return out;
}

}  // namespace dlab
