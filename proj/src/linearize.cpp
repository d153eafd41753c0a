#include "dlab/linearize.hpp"

#include "dlab/error.hpp"
#include "dlab/propagate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <ostream>

namespace dlab {

std::string_view to_string(LinearizationMode m) {
    return m == LinearizationMode::FullLine ? "full-line" : "half-line-plus";
}

LinearizationMode parse_linearization_mode(std::string_view text) {
    if (text == "full-line" || text == "full") return LinearizationMode::FullLine;
    if (text == "half-line-plus" || text == "half-line" || text == "half") return LinearizationMode::HalfLinePlus;
    throw Error(ErrorKind::ParseError, "unknown linearization mode '" + std::string(text) + "'");
}

namespace {

// cond(X(t,0)) for t = 0, +-step, ... until the cap, the search bound or
// the domain edge
double cond_reach(const LinearSystem& sys, double sign, const LinearizationOptions& o, bool& limited) {
    const double step = 0.5;
    Mat x = Mat::Identity(sys.dim(), sys.dim());
    double t = 0.0;
    while (t < o.cond_search - 1e-12) {
        const double next = std::min(o.cond_search, t + step);
        if (!sys.contains(sign * next)) return t;
        try {
            x = transition_matrix(sys, sign * next, sign * t, o.integration_tol).x * x;
        } catch (const IntegrationError&) {
            limited = true;
            return t;
        }
        if (condition_number_2(x) >= o.cond_cap) {
            limited = true;
            return t;
        }
        t = next;
    }
    return t;
}

struct Window {
    double a = 0.0;
    double b = 0.0;
    bool capped = false;
};

Window window_for(const LinearizationContext& ctx, double t) {
    const LinearSystem& sys = ctx.quasi.linear();
    Window w;
    if (ctx.mode == LinearizationMode::HalfLinePlus) {
        if (t < 0) throw Error(ErrorKind::DomainError, "half-line maps need t >= 0");
        if (t > ctx.cond_plus + 1e-12) {
            throw Error(ErrorKind::DomainError, "t lies beyond the horizon where cond(X(t,0)) stays below the cap");
        }
        w.a = 0.0;
        w.b = t;
        return w;
    }
    w.a = t - ctx.window;
    w.b = t + ctx.window;
    if (w.a < -ctx.cond_minus) {
        w.a = -ctx.cond_minus;
        w.capped = true;
    }
    if (w.b > ctx.cond_plus) {
        w.b = ctx.cond_plus;
        w.capped = true;
    }
    while (!sys.contains(w.a) && w.a < t) {
        w.a = std::min(t, w.a + 0.5);
        w.capped = true;
    }
    while (!sys.contains(w.b) && w.b > t) {
        w.b = std::max(t, w.b - 0.5);
        w.capped = true;
    }
    if (t < w.a || t > w.b) throw Error(ErrorKind::DomainError, "evaluation time outside the usable window");
    return w;
}

// a path s -> p(s) on [a, b] through (t, p(t)), as two runs from t
struct Path {
    std::unique_ptr<Trajectory> down;
    std::unique_ptr<Trajectory> up;
    double t = 0.0;
    Vec at_t;

    Vec operator()(double s) const {
        if (s < t && down) return down->at(s);
        if (s > t && up) return up->at(s);
        return at_t;
    }
};

Path linear_path(const LinearizationContext& ctx, const Window& w, double t, const Vec& xi) {
    Path p;
    p.t = t;
    p.at_t = xi;
    const double tol = ctx.opts.integration_tol;
    if (w.a < t) p.down = std::make_unique<Trajectory>(integrate_ivp(ctx.quasi.linear(), t, xi, w.a, tol));
    if (w.b > t) p.up = std::make_unique<Trajectory>(integrate_ivp(ctx.quasi.linear(), t, xi, w.b, tol));
    return p;
}

Path nonlinear_path(const LinearizationContext& ctx, const Window& w, double t, const Vec& eta) {
    Path p;
    p.t = t;
    p.at_t = eta;
    const double tol = ctx.opts.integration_tol;
    if (w.a < t) p.down = std::make_unique<Trajectory>(integrate_quasilinear(ctx.quasi, t, eta, w.a, tol));
    if (w.b > t) p.up = std::make_unique<Trajectory>(integrate_quasilinear(ctx.quasi, t, eta, w.b, tol));
    return p;
}

// panel breaks through t: at most opts.panel long, and short enough that
// f(s, path(s)) changes by about phase_per_panel relative to mu
std::vector<double> adaptive_breaks(const LinearizationContext& ctx, const Window& w, double t, const Path& path) {
    const LinearSystem& sys = ctx.quasi.linear();
    const double rate_scale = ctx.mu > 0 ? ctx.gamma / ctx.mu : 0.0;
    auto panel_at = [&](double s) {
        const Vec p = path(s);
        const double speed = (sys.coeff(s) * p + ctx.quasi.f(s, p)).norm();
        const double rho = rate_scale * speed;
        return rho > 0 ? std::min(ctx.opts.panel, ctx.opts.phase_per_panel / rho) : ctx.opts.panel;
    };
    std::vector<double> lower{t};
    while (lower.back() > w.a) {
        const double s = lower.back();
        double next = s - panel_at(s);
        if (next < w.a + 1e-9 * std::max(1.0, std::fabs(w.a))) next = w.a;
        lower.push_back(next);
        if (lower.size() > ctx.opts.max_panels) {
            throw Error(ErrorKind::NoConvergence, "quadrature of the window needs too many panels");
        }
    }
    std::vector<double> breaks(lower.rbegin(), lower.rend());
    while (breaks.back() < w.b) {
        const double s = breaks.back();
        double next = s + panel_at(s);
        if (next > w.b - 1e-9 * std::max(1.0, std::fabs(w.b))) next = w.b;
        breaks.push_back(next);
        if (breaks.size() > ctx.opts.max_panels) {
            throw Error(ErrorKind::NoConvergence, "quadrature of the window needs too many panels");
        }
    }
    return breaks;
}

GreenOperator green_for(const LinearizationContext& ctx, const Window& w, std::vector<double> breaks) {
    const LinearSystem& sys = ctx.quasi.linear();
    const EndFrames ends =
        end_frames(sys, ctx.cert, w.a, w.b, std::max(10.0, w.b - w.a), ctx.opts.integration_tol);
    return GreenOperator(sys, ctx.cert.rank(), std::move(breaks), ends.v_right, ends.w_left,
                         ctx.opts.integration_tol);
}

double truncation(const LinearizationContext& ctx, const Window& w) {
    if (ctx.mode == LinearizationMode::HalfLinePlus) return 0.0;
    // tail of int K e^{-alpha|t-s|} mu ds beyond the window
    return ctx.mu * ctx.k * std::exp(-ctx.alpha * ctx.window) / ctx.alpha * (w.capped ? 2.0 : 1.0);
}

}  // namespace

LinearizationContext make_context(const QuasilinearSystem& quasi, const DichotomyCertificate& cert, double eps,
                                  LinearizationMode mode, const LinearizationOptions& opts) {
    if (!(eps > 0)) throw Error(ErrorKind::InvalidInput, "eps must be positive");
    if (!cert.verified()) throw Error(ErrorKind::CertificateRequired, "linearization needs a verified certificate");
    if (cert.projector.dim() != quasi.dim()) throw Error(ErrorKind::InvalidInput, "certificate dimension mismatch");
    if (!(cert.alpha > 0)) throw Error(ErrorKind::InvalidInput, "certificate exponent must be positive");
    LinearizationContext ctx{quasi, cert};
    ctx.mode = mode;
    ctx.eps = eps;
    ctx.opts = opts;
    ctx.k = cert.k;
    ctx.alpha = cert.alpha;
    ctx.mu = quasi.mu();
    ctx.gamma = quasi.gamma();
    ctx.m_bound = cert.sup_norm_a;
    ctx.gap_factor = 2.0 * ctx.k * ctx.gamma / ctx.alpha;
    if (ctx.gap_factor >= 1.0) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "2K gamma / alpha = %.6g is not below 1", ctx.gap_factor);
        throw Error(ErrorKind::GapViolation, buf);
    }
    if (mode == LinearizationMode::HalfLinePlus && cert.rank() != quasi.dim()) {
        throw Error(ErrorKind::ProjectorMismatch, "half-line maps need the projector P = I");
    }
    ctx.displacement_bound = 2.0 * ctx.mu * ctx.k / ctx.alpha;
    if (ctx.mu > 0) ctx.window = std::max(0.0, std::log(ctx.displacement_bound / eps) / ctx.alpha);
    ctx.theta = continuity_constant(ctx, ctx.window);
    const LinearSystem& sys = quasi.linear();
    ctx.cond_plus = cond_reach(sys, 1.0, opts, ctx.cond_limited);
    ctx.cond_minus = mode == LinearizationMode::FullLine ? cond_reach(sys, -1.0, opts, ctx.cond_limited) : 0.0;
    return ctx;
}

double continuity_constant(const LinearizationContext& ctx, double window) {
    const double d = ctx.k * ctx.gamma * std::exp((ctx.m_bound + ctx.gamma) * window) *
                     (1.0 - std::exp(-ctx.alpha * window)) / ctx.alpha;
    return 1.0 + 2.0 * d;
}

MapEvaluation eval_g(const LinearizationContext& ctx, double t, const Vec& eta) {
    if (eta.size() != ctx.quasi.dim()) throw Error(ErrorKind::ShapeError, "point dimension mismatch");
    const Window w = window_for(ctx, t);
    MapEvaluation ev;
    ev.t = t;
    ev.input = eta;
    ev.output = eta;
    ev.iterations = 1;
    ev.window_lo = w.a;
    ev.window_hi = w.b;
    ev.window_capped = w.capped;
    if (w.b - w.a < 1e-12) return ev;
    const Path y = nonlinear_path(ctx, w, t, eta);
    const GreenOperator green = green_for(ctx, w, adaptive_breaks(ctx, w, t, y));
    const auto& nodes = green.nodes();
    Mat v(ctx.quasi.dim(), static_cast<Eigen::Index>(nodes.size()));
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        v.col(static_cast<Eigen::Index>(k)) = ctx.quasi.f(nodes[k], y(nodes[k]));
    }
    ev.output = eta - green.apply_at(v, t);
    ev.residual = truncation(ctx, w);
    ev.nodes = nodes.size();
    return ev;
}

MapEvaluation eval_h(const LinearizationContext& ctx, double t, const Vec& xi) {
    if (xi.size() != ctx.quasi.dim()) throw Error(ErrorKind::ShapeError, "point dimension mismatch");
    const Window w = window_for(ctx, t);
    MapEvaluation ev;
    ev.t = t;
    ev.input = xi;
    ev.output = xi;
    ev.window_lo = w.a;
    ev.window_hi = w.b;
    ev.window_capped = w.capped;
    if (w.b - w.a < 1e-12) {
        ev.iterations = 1;
        return ev;
    }
    const Path x = linear_path(ctx, w, t, xi);
    const GreenOperator green = green_for(ctx, w, adaptive_breaks(ctx, w, t, x));
    const auto& nodes = green.nodes();
    const int n = ctx.quasi.dim();
    const auto m = static_cast<Eigen::Index>(nodes.size());
    Mat xs(n, m);
    for (Eigen::Index k = 0; k < m; ++k) xs.col(k) = x(nodes[static_cast<std::size_t>(k)]);
    auto forcing = [&](const Mat& z) {
        Mat v(n, m);
        for (Eigen::Index k = 0; k < m; ++k) {
            v.col(k) = ctx.quasi.f(nodes[static_cast<std::size_t>(k)], Vec(xs.col(k) + z.col(k)));
        }
        return v;
    };
    const double q = ctx.gap_factor;
    const double stop = ctx.eps * (1.0 - q);
    Mat z = Mat::Zero(n, m);
    Mat v = forcing(z);
    for (int it = 1;; ++it) {
        const Mat next = green.apply(v);
        const double change = m > 0 ? (next - z).cwiseAbs().colwise().maxCoeff().maxCoeff() : 0.0;
        ev.changes.push_back(change);
        z = next;
        v = forcing(z);
        if (change <= stop) {
            ev.iterations = it;
            ev.residual = q / (1.0 - q) * change + truncation(ctx, w);
            break;
        }
        if (it >= ctx.opts.max_iterations) {
            throw Error(ErrorKind::NoConvergence, "Picard iteration for H did not converge");
        }
    }
    ev.output = xi + green.apply_at(v, t);
    ev.nodes = nodes.size();
    return ev;
}

double inverse_residual(const LinearizationContext& ctx, double t, const Vec& p) {
    const Vec gh = eval_g(ctx, t, eval_h(ctx, t, p).output).output;
    const Vec hg = eval_h(ctx, t, eval_g(ctx, t, p).output).output;
    return std::max((gh - p).norm(), (hg - p).norm());
}

double conjugacy_residual(const LinearizationContext& ctx, double tau, const Vec& xi, double horizon, int samples) {
    if (samples < 1 || !(horizon > 0)) throw Error(ErrorKind::InvalidInput, "conjugacy needs a positive horizon");
    const double tol = ctx.opts.integration_tol;
    const Vec h0 = eval_h(ctx, tau, xi).output;
    const Trajectory y = integrate_quasilinear(ctx.quasi, tau, h0, tau + horizon, tol);
    const Trajectory x = integrate_ivp(ctx.quasi.linear(), tau, xi, tau + horizon, tol);
    double worst = 0.0;
    for (int k = 1; k <= samples; ++k) {
        const double t = tau + horizon * k / samples;
        worst = std::max(worst, (y.at(t) - eval_h(ctx, t, x.at(t)).output).norm());
    }
    return worst;
}

JacobianResult g_jacobian(const LinearizationContext& ctx, double t, const Vec& eta) {
    if (ctx.mode != LinearizationMode::HalfLinePlus) {
        throw Error(ErrorKind::InvalidInput, "the Jacobian of G is available in half-line mode only");
    }
    if (t < 0) throw Error(ErrorKind::DomainError, "half-line maps need t >= 0");
    const int n = ctx.quasi.dim();
    const LinearSystem& sys = ctx.quasi.linear();
    JacobianResult out;
    out.jacobian = Mat::Identity(n, n);
    out.determinant = 1.0;
    out.liouville_determinant = 1.0;
    if (t < 1e-12) return out;
    // state: y, Phi (column-major), int tr A, int tr(A + Df)
    const Eigen::Index dim = n + n * n + 2;
    Rhs rhs = [&](double s, const Vec& u, Vec& du) {
        const Vec y = u.head(n);
        const Mat a = sys.coeff(s);
        const Mat df = ctx.quasi.f_jacobian(s, y);
        const Mat phi = Eigen::Map<const Mat>(u.data() + n, n, n);
        du.resize(dim);
        du.head(n) = a * y + ctx.quasi.f(s, y);
        Eigen::Map<Mat>(du.data() + n, n, n) = (a + df) * phi;
        du(dim - 2) = a.trace();
        du(dim - 1) = (a + df).trace();
    };
    Vec u0 = Vec::Zero(dim);
    u0.head(n) = eta;
    Eigen::Map<Mat>(u0.data() + n, n, n) = Mat::Identity(n, n);
    const Trajectory run = integrate_ivp(rhs, t, u0, 0.0, IntegratorOptions::with_tol(ctx.opts.integration_tol));
    const Vec& u1 = run.final_state();
    const Mat phi0 = Eigen::Map<const Mat>(u1.data() + n, n, n);
    const Mat x_t0 = transition_matrix(sys, t, 0.0, ctx.opts.integration_tol).x;
    out.jacobian = x_t0 * phi0;
    out.determinant = out.jacobian.determinant();
    // the run goes from t to 0, so the accumulated integrals are -int_0^t
    out.liouville_determinant = std::exp(-u1(dim - 2) + u1(dim - 1));
    if (!(out.determinant > 0)) {
        throw Error(ErrorKind::NumericalInconsistency, "det dG/deta is not positive");
    }
    return out;
}

void write_map_csv(std::ostream& out, const std::vector<MapEvaluation>& evals) {
    const Eigen::Index n = evals.empty() ? 0 : evals.front().input.size();
    out << "t";
    for (Eigen::Index i = 1; i <= n; ++i) out << ",p" << i;
    for (Eigen::Index i = 1; i <= n; ++i) out << ",out" << i;
    out << ",iterations,residual\n";
    char buf[32];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    };
    for (const MapEvaluation& e : evals) {
        out << num(e.t);
        for (Eigen::Index i = 0; i < n; ++i) out << ',' << num(e.input(i));
        for (Eigen::Index i = 0; i < n; ++i) out << ',' << num(e.output(i));
        out << ',' << e.iterations << ',' << num(e.residual) << '\n';
    }
}

}  // namespace dlab
