#include "dlab/dichotomy.hpp"

#include "dlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace dlab {

std::string_view to_string(CertFlag f) {
    switch (f) {
        case CertFlag::Verified: return "verified";
        case CertFlag::Violated: return "violated";
        case CertFlag::Inconclusive: return "inconclusive";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// splitting

namespace {

struct DirectionFit {
    int decaying = 0;
    int inconclusive = 0;
    std::vector<double> decay_rates;
    std::vector<double> inconclusive_rates;
    Mat basis;  // decaying directions at 0
};

// Discrete QR sweep from 0 to T over short steps: the log growth of each
// diagonal entry of R between |T|/2 and |T| classifies a direction, and
// these rates stay accurate whatever the spread between them (a single SVD
// of X(T,0) loses everything below tol * ||X||). The decaying directions at
// 0 are the ones that dominate backward, found by an orthonormal sweep from
// T back to 0 started from the decaying columns of the forward Q(T).
DirectionFit fit_direction(const LinearSystem& sys, double horizon, const SplitOptions& opts) {
    const int n = sys.dim();
    const int steps = std::max(8, 2 * static_cast<int>(std::ceil(2.0 * std::fabs(horizon))));
    const std::vector<double> nodes = linspace(0.0, horizon, steps + 1);
    std::vector<Mat> step(steps);
    for (int k = 0; k < steps; ++k) step[k] = transition_matrix(sys, nodes[k + 1], nodes[k], opts.tol).x;

    Mat q = Mat::Identity(n, n);
    Vec cum = Vec::Zero(n), cum_half = Vec::Zero(n);
    for (int k = 0; k < steps; ++k) {
        const QrFactors f = gram_schmidt_qr(Mat(step[k] * q), 0.0);
        q = f.q;
        for (int i = 0; i < n; ++i) cum(i) += std::log(f.r(i, i));
        if (k + 1 == steps / 2) cum_half = cum;
    }
    const double span = std::fabs(nodes[steps] - nodes[steps / 2]);
    DirectionFit out;
    std::vector<int> decaying_cols;
    for (int i = 0; i < n; ++i) {
        const double slope = (cum(i) - cum_half(i)) / span;
        if (slope < -opts.slope_threshold) {
            decaying_cols.push_back(i);
            ++out.decaying;
            out.decay_rates.push_back(slope);
        } else if (slope <= opts.slope_threshold) {
            ++out.inconclusive;
            out.inconclusive_rates.push_back(slope);
        }
    }
    std::sort(out.decay_rates.begin(), out.decay_rates.end());
    if (out.decaying == 0) {
        out.basis = Mat(n, 0);
    } else if (out.decaying == n) {
        out.basis = Mat::Identity(n, n);
    } else {
        Mat v(n, out.decaying);
        for (int j = 0; j < out.decaying; ++j) v.col(j) = q.col(decaying_cols[j]);
        for (int k = steps; k-- > 0;) v = orthonormalize(Mat(step[k].fullPivLu().solve(v)));
        out.basis = v;
    }
    return out;
}

}  // namespace

SubspaceSplit estimate_splitting(const LinearSystem& sys, double horizon, const SplitOptions& opts) {
    if (!(horizon > 0.0)) throw Error(ErrorKind::InvalidInput, "horizon must be positive");
    SplitDirection dir = SplitDirection::Both;
    if (opts.direction) {
        dir = *opts.direction;
    } else if (sys.domain() == Domain::HalfLinePlus) {
        dir = SplitDirection::Forward;
    } else if (sys.domain() == Domain::HalfLineMinus) {
        dir = SplitDirection::Backward;
    }
    const int n = sys.dim();
    SubspaceSplit out;
    out.horizon = horizon;
    if (dir != SplitDirection::Backward) {
        DirectionFit f = fit_direction(sys, horizon, opts);
        out.stable_basis = f.basis;
        out.stable_rates = f.decay_rates;
        out.forward_inconclusive = f.inconclusive;
        out.inconclusive_rates = f.inconclusive_rates;
        out.forward_done = true;
    }
    if (dir != SplitDirection::Forward) {
        DirectionFit b = fit_direction(sys, -horizon, opts);
        out.unstable_basis = b.basis;
        out.unstable_rates = b.decay_rates;
        for (double& r : out.unstable_rates) r = -r;  // forward growth rates
        out.backward_inconclusive = b.inconclusive;
        out.inconclusive_rates.insert(out.inconclusive_rates.end(), b.inconclusive_rates.begin(),
                                      b.inconclusive_rates.end());
        out.backward_done = true;
    }
    if (!out.backward_done) out.unstable_basis = orthonormal_complement(out.stable_basis, n);
    if (!out.forward_done) out.stable_basis = orthonormal_complement(out.unstable_basis, n);

    if (out.stable_basis.cols() + out.unstable_basis.cols() == n) {
        Mat c(n, n);
        c << out.stable_basis, out.unstable_basis;
        out.condition = condition_number_2(c);
    } else {
        out.condition = INFINITY;
    }
    return out;
}

// ---------------------------------------------------------------------------
// certificates

Mat projection_frame(const ProjectionMatrix& p) {
    const int n = p.dim();
    const int r = p.rank;
    Mat c(n, n);
    if (r > 0) {
        Eigen::JacobiSVD<Mat> s(p.base, Eigen::ComputeFullU);
        c.leftCols(r) = orthonormalize(s.matrixU().leftCols(r));
    }
    if (r < n) {
        Eigen::JacobiSVD<Mat> s(p.complement(), Eigen::ComputeFullU);
        c.rightCols(n - r) = orthonormalize(s.matrixU().leftCols(n - r));
    }
    return c;
}

double sampled_sup_norm(const LinearSystem& sys, double a, double b, int samples) {
    double m = 0.0;
    for (double t : linspace(a, b, std::max(samples, 2))) m = std::max(m, operator_norm_2(sys.coeff(t)));
    return m;
}

namespace {

Mat dominant_left(const Mat& m, int k) {
    if (k == 0) return Mat(m.rows(), 0);
    Eigen::JacobiSVD<Mat> s(m, Eigen::ComputeFullU);
    return orthonormalize(s.matrixU().leftCols(k));
}

// sin of the largest principal angle between equal-dimensional subspaces
double subspace_gap(const Mat& a, const Mat& b) {
    if (a.cols() == 0) return 0.0;
    return operator_norm_2(Mat(b - a * (a.transpose() * b)));
}

Mat orth_or_empty(const Mat& m) { return m.cols() == 0 ? m : orthonormalize(m); }

}  // namespace

Mat SplitFrames::frame(std::size_t k) const {
    Mat c(dim(), dim());
    c << v[k], w[k];
    return c;
}

SplitFrames split_frames(const LinearSystem& sys, const Mat& image, const Mat& kernel, std::vector<double> nodes,
                         double anchor, double tol, double horizon, double consistency) {
    const int n = sys.dim();
    if (image.cols() + kernel.cols() != n || image.rows() != n || kernel.rows() != n) {
        throw Error(ErrorKind::ShapeError, "image and kernel bases must split R^n");
    }
    std::sort(nodes.begin(), nodes.end());
    if (nodes.empty() || anchor < nodes.front() - 1e-12 || anchor > nodes.back() + 1e-12) {
        throw Error(ErrorKind::InvalidInput, "anchor outside the frame grid");
    }
    auto hit = std::lower_bound(nodes.begin(), nodes.end(), anchor - 1e-12);
    if (hit == nodes.end() || std::fabs(*hit - anchor) > 1e-12) hit = nodes.insert(hit, anchor);
    nodes.erase(std::unique(nodes.begin(), nodes.end(), [](double x, double y) { return std::fabs(x - y) <= 1e-12; }),
                nodes.end());
    SplitFrames f;
    f.nodes = nodes;
    const std::size_t m = nodes.size();
    const std::size_t ia = static_cast<std::size_t>(
        std::min_element(nodes.begin(), nodes.end(),
                         [&](double x, double y) { return std::fabs(x - anchor) < std::fabs(y - anchor); }) -
        nodes.begin());
    f.anchor_index = ia;
    const int r = static_cast<int>(image.cols());

    std::vector<Mat> step(m - 1), step_inv(m - 1);
    for (std::size_t k = 0; k + 1 < m; ++k) {
        step[k] = transition_matrix(sys, nodes[k + 1], nodes[k], tol).x;
        step_inv[k] = step[k].fullPivLu().inverse();
    }
    f.v.assign(m, Mat());
    f.w.assign(m, Mat());
    f.v[ia] = orth_or_empty(image);
    f.w[ia] = orth_or_empty(kernel);
    // attracting directions from the anchor
    for (std::size_t k = ia; k-- > 0;) f.v[k] = orth_or_empty(Mat(step_inv[k] * f.v[k + 1]));
    for (std::size_t k = ia; k + 1 < m; ++k) f.w[k + 1] = orth_or_empty(Mat(step[k] * f.w[k]));

    // dominant directions of X(t, t + span); empty if the flow cannot be followed
    auto look_ahead = [&](double t, double span, int k) -> Mat {
        if (k == 0 || k == n || !sys.contains(t + span)) return Mat();
        try {
            return dominant_left(transition_matrix(sys, t, t + span, tol).x, k);
        } catch (const IntegrationError&) {
            return Mat();
        }
    };

    // V right of the anchor
    if (ia + 1 < m) {
        std::vector<Mat> sw(m);
        sw[m - 1] = look_ahead(nodes.back(), horizon, r);
        if (sw[m - 1].size() > 0) {
            for (std::size_t k = m - 1; k-- > ia;) sw[k] = orthonormalize(Mat(step_inv[k] * sw[k + 1]));
            f.image_mismatch = subspace_gap(f.v[ia], sw[ia]);
            f.image_swept = f.image_mismatch <= consistency;
        }
        for (std::size_t k = ia; k + 1 < m; ++k) {
            f.v[k + 1] = f.image_swept ? sw[k + 1] : orth_or_empty(Mat(step[k] * f.v[k]));
        }
    }
    // W left of the anchor
    if (ia > 0) {
        std::vector<Mat> sw(m);
        sw[0] = look_ahead(nodes.front(), -horizon, n - r);
        if (sw[0].size() > 0) {
            for (std::size_t k = 0; k < ia; ++k) sw[k + 1] = orthonormalize(Mat(step[k] * sw[k]));
            f.kernel_mismatch = subspace_gap(f.w[ia], sw[ia]);
            f.kernel_swept = f.kernel_mismatch <= consistency;
        }
        for (std::size_t k = ia; k-- > 0;) {
            f.w[k] = f.kernel_swept ? sw[k] : orth_or_empty(Mat(step_inv[k] * f.w[k + 1]));
        }
    }

    const int u = n - r;
    for (std::size_t k = 0; k + 1 < m; ++k) {
        const Mat coords = f.frame(k + 1).fullPivLu().solve(Mat(step[k] * f.frame(k)));
        f.d.push_back(coords.topLeftCorner(r, r));
        f.e.push_back(coords.bottomRightCorner(u, u));
    }
    f.step = std::move(step);
    return f;
}

namespace {

// (distance, log norm) for every ordered pair, merged per distinct distance
struct PairEnvelope {
    std::vector<double> d;
    std::vector<double> y;
};

PairEnvelope merge_pairs(std::vector<std::pair<double, double>> raw) {
    std::sort(raw.begin(), raw.end());
    PairEnvelope env;
    for (const auto& [d, v] : raw) {
        if (!env.d.empty() && d - env.d.back() <= 1e-9 * std::max(1.0, d)) {
            env.y.back() = std::max(env.y.back(), v);
        } else {
            env.d.push_back(d);
            env.y.push_back(v);
        }
    }
    return env;
}

PairEnvelope collect_pairs(const std::vector<double>& grid, const std::vector<Mat>& y, const std::vector<Mat>& y_inv,
                           int r) {
    const std::size_t m = grid.size();
    const int n = static_cast<int>(y.front().rows());
    std::vector<std::pair<double, double>> raw;
    raw.reserve(m * (m + 1));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double d = grid[i] - grid[j];
            if (d >= 0 && r > 0) {
                const double nrm = operator_norm_2(Mat(y[i].leftCols(r) * y_inv[j].topRows(r)));
                raw.emplace_back(d, std::log(std::max(nrm, 1e-300)));
            }
            if (d <= 0 && r < n) {
                const double nrm = operator_norm_2(Mat(y[i].rightCols(n - r) * y_inv[j].bottomRows(n - r)));
                raw.emplace_back(-d, std::log(std::max(nrm, 1e-300)));
            }
        }
    }
    return merge_pairs(std::move(raw));
}

// Same pairs through the frames: ||X(t_i,t_j)P(t_j)|| = ||d_{i-1}..d_j T_j||
// with T_j the image rows of C_j^{-1}, and the kernel part backward.
PairEnvelope collect_pairs(const SplitFrames& f, const std::vector<std::size_t>& keep) {
    const std::size_t m = f.nodes.size();
    const int n = f.dim(), r = f.rank(), u = n - r;
    std::vector<char> kept(m, 0);
    for (std::size_t k : keep) kept[k] = 1;
    std::vector<Mat> top(m), bottom(m);
    for (std::size_t k = 0; k < m; ++k) {
        if (!kept[k]) continue;
        const Mat inv = f.frame(k).fullPivLu().inverse();
        top[k] = inv.topRows(r);
        bottom[k] = inv.bottomRows(u);
    }
    std::vector<Mat> e_inv(m > 0 ? m - 1 : 0);
    for (std::size_t k = 0; k + 1 < m; ++k) e_inv[k] = u > 0 ? Mat(f.e[k].inverse()) : Mat(0, 0);
    std::vector<std::pair<double, double>> raw;
    for (std::size_t j = 0; j < m; ++j) {
        if (!kept[j]) continue;
        if (r > 0) {
            Mat acc = top[j];
            for (std::size_t i = j; i < m; ++i) {
                if (i > j) acc = f.d[i - 1] * acc;
                if (kept[i]) {
                    raw.emplace_back(f.nodes[i] - f.nodes[j], std::log(std::max(operator_norm_2(acc), 1e-300)));
                }
            }
        }
        if (u > 0) {
            Mat acc = bottom[j];
            for (std::size_t i = j + 1; i-- > 0;) {
                if (i < j) acc = e_inv[i] * acc;
                if (kept[i]) {
                    raw.emplace_back(f.nodes[j] - f.nodes[i], std::log(std::max(operator_norm_2(acc), 1e-300)));
                }
            }
        }
    }
    return merge_pairs(std::move(raw));
}

double k_of(const PairEnvelope& env, double alpha, double max_d) {
    double k = 0.0;  // log K
    for (std::size_t i = 0; i < env.d.size() && env.d[i] <= max_d; ++i) k = std::max(k, env.y[i] + alpha * env.d[i]);
    return std::exp(k);
}

struct AlphaChoice {
    bool found = false;
    double alpha = 0.0;
    double k = 1.0;
    double consistency_gap = 0.0;
};

AlphaChoice choose_alpha(const PairEnvelope& env, double sup_a, const CertifyOptions& opts) {
    std::vector<double> cands = opts.alpha_candidates;
    if (cands.empty()) {
        const int top = static_cast<int>(std::floor(400.0 * sup_a + 1e-9));
        for (int k = 1; k <= top; ++k) cands.push_back(k / 400.0);
    }
    std::sort(cands.begin(), cands.end());
    const double d_max = env.d.empty() ? 0.0 : env.d.back();
    AlphaChoice out;
    out.k = k_of(env, 0.0, d_max);
    bool first = true;
    for (double alpha : cands) {
        if (!(alpha > 0.0)) continue;
        const double k_full = k_of(env, alpha, d_max);
        const double k_half = k_of(env, alpha, 0.5 * d_max + 1e-9);
        if (first) {
            out.consistency_gap = std::max(0.0, k_full / (opts.window_consistency * k_half) - 1.0);
            first = false;
        }
        if (k_full <= opts.k_cap && k_full <= opts.window_consistency * k_half) {
            out.found = true;
            out.alpha = alpha;
            out.k = k_full;
        }
    }
    return out;
}

double envelope_residual(const PairEnvelope& env, double k, double alpha) {
    double worst = 0.0;
    for (std::size_t i = 0; i < env.d.size(); ++i) {
        worst = std::max(worst, std::exp(env.y[i] + alpha * env.d[i]) / k - 1.0);
    }
    return worst;
}

std::vector<double> default_grid(double a, double b) {
    const int count = std::clamp(static_cast<int>(std::ceil((b - a) / 0.1)) + 1, 2, 161);
    return linspace(a, b, count);
}

}  // namespace

DichotomyCertificate certify(const LinearSystem& sys, const ProjectionMatrix& p, double a, double b,
                             std::vector<double> grid, const CertifyOptions& opts) {
    if (!(a < b)) throw Error(ErrorKind::InvalidInput, "certify needs a < b");
    if (p.idempotency_residual > 1e-6) throw Error(ErrorKind::InvalidInput, "projector is not idempotent");
    if (p.dim() != sys.dim()) throw Error(ErrorKind::InvalidInput, "projector dimension mismatch");
    if (grid.empty()) grid = default_grid(a, b);
    std::sort(grid.begin(), grid.end());
    if (grid.front() < a - 1e-12 || grid.back() > b + 1e-12) {
        throw Error(ErrorKind::InvalidInput, "grid leaves the certification interval");
    }

    DichotomyCertificate cert;
    cert.projector = p;
    cert.frame = projection_frame(p);
    cert.a = a;
    cert.b = b;
    cert.anchor = std::clamp(0.0, a, b);
    cert.domain = sys.domain();
    cert.grid = grid;
    cert.sup_norm_a = sampled_sup_norm(sys, a, b);

    std::vector<double> fine;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        fine.push_back(grid[i]);
        if (i + 1 < grid.size()) fine.push_back(0.5 * (grid[i] + grid[i + 1]));
    }
    const int r = p.rank, n = p.dim();
    const SplitFrames frames = split_frames(sys, cert.frame.leftCols(r), cert.frame.rightCols(n - r), fine,
                                            cert.anchor, opts.integration_tol, std::max(5.0, 0.5 * (b - a)));
    std::vector<std::size_t> coarse_idx, fine_idx;
    for (std::size_t k = 0; k < frames.nodes.size(); ++k) {
        const double t = frames.nodes[k];
        if (std::binary_search(fine.begin(), fine.end(), t)) fine_idx.push_back(k);
        if (std::binary_search(grid.begin(), grid.end(), t)) coarse_idx.push_back(k);
    }
    const PairEnvelope env = collect_pairs(frames, coarse_idx);
    const AlphaChoice choice = choose_alpha(env, cert.sup_norm_a, opts);
    if (!choice.found) {
        cert.flag = CertFlag::Violated;
        cert.alpha = 0.0;
        cert.k = choice.k;
        cert.residual = choice.consistency_gap;
        return cert;
    }
    cert.alpha = choice.alpha;
    cert.k = choice.k;
    cert.residual = envelope_residual(collect_pairs(frames, fine_idx), cert.k, cert.alpha);
    if (cert.residual <= opts.tol) {
        cert.flag = CertFlag::Verified;
    } else if (cert.residual <= 10 * opts.tol) {
        cert.flag = CertFlag::Inconclusive;
    } else {
        cert.flag = CertFlag::Violated;
    }
    return cert;
}

DichotomyCertificate certify_sampled(const std::vector<double>& grid, const std::vector<Mat>& y,
                                     const std::vector<Mat>& y_inv, int r, double sup_norm_a,
                                     const CertifyOptions& opts) {
    if (grid.size() < 2 || y.size() != grid.size() || y_inv.size() != grid.size()) {
        throw Error(ErrorKind::InvalidInput, "certify_sampled needs matching samples on at least 2 nodes");
    }
    const int n = static_cast<int>(y.front().rows());
    DichotomyCertificate cert;
    cert.projector = canonical_projection(r, n);
    cert.frame = Mat::Identity(n, n);
    cert.a = grid.front();
    cert.b = grid.back();
    cert.anchor = std::clamp(0.0, cert.a, cert.b);
    cert.grid = grid;
    cert.sup_norm_a = sup_norm_a;
    const PairEnvelope env = collect_pairs(grid, y, y_inv, r);
    const AlphaChoice choice = choose_alpha(env, sup_norm_a, opts);
    cert.k = choice.k;
    if (!choice.found) {
        cert.flag = CertFlag::Violated;
        cert.residual = choice.consistency_gap;
        return cert;
    }
    cert.alpha = choice.alpha;
    cert.residual = envelope_residual(env, cert.k, cert.alpha);
    cert.flag = cert.residual <= opts.tol ? CertFlag::Verified : CertFlag::Violated;
    return cert;
}

// ---------------------------------------------------------------------------
// Green operator

namespace {

double lagrange(const std::vector<double>& x, std::size_t j, double u) {
    double v = 1.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (k != j) v *= (u - x[k]) / (x[j] - x[k]);
    }
    return v;
}

// int_{-1}^{u} l_j for all j, exact for the degree m-1 basis
std::vector<double> partial_weights(const std::vector<double>& x, double u) {
    const GaussRule& g = gauss_legendre(static_cast<int>(x.size()));
    std::vector<double> w(x.size(), 0.0);
    const double half = 0.5 * (u + 1.0);
    for (std::size_t q = 0; q < g.nodes.size(); ++q) {
        const double s = -1.0 + half * (g.nodes[q] + 1.0);
        for (std::size_t j = 0; j < x.size(); ++j) w[j] += half * g.weights[q] * lagrange(x, j, s);
    }
    return w;
}

}  // namespace

EndFrames end_frames(const LinearSystem& sys, const DichotomyCertificate& cert, double a, double b, double horizon,
                     double tol) {
    const int n = sys.dim();
    const int r = cert.rank();
    EndFrames out;
    if (r == n) {
        out.v_right = Mat::Identity(n, n);
        out.w_left = Mat(n, 0);
        return out;
    }
    if (r == 0) {
        out.v_right = Mat(n, 0);
        out.w_left = Mat::Identity(n, n);
        return out;
    }
    if (sys.contains(b + horizon)) {
        out.v_right = dominant_left(transition_matrix(sys, b, b + horizon, tol).x, r);
    } else {
        out.v_right = orthonormalize(Mat(transition_matrix(sys, b, cert.anchor, tol).x * cert.frame.leftCols(r)));
    }
    if (sys.contains(a - horizon)) {
        out.w_left = dominant_left(transition_matrix(sys, a, a - horizon, tol).x, n - r);
    } else {
        out.w_left =
            orthonormalize(Mat(transition_matrix(sys, a, cert.anchor, tol).x * cert.frame.rightCols(n - r)));
    }
    return out;
}

std::vector<double> uniform_breaks(double a, double b, double max_panel) {
    const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / max_panel - 1e-9)));
    return linspace(a, b, panels + 1);
}

GreenOperator::GreenOperator(const LinearSystem& sys, int rank, std::vector<double> breaks, const Mat& v_right,
                             const Mat& w_left, double tol, int order, double chunk)
    : n_(sys.dim()), r_(rank), m_(order), breaks_(std::move(breaks)) {
    if (rank < 0 || rank > n_) throw Error(ErrorKind::InvalidInput, "rank out of range");
    if (breaks_.size() < 2) throw Error(ErrorKind::InvalidInput, "Green operator needs at least one panel");
    if (v_right.cols() != r_ || w_left.cols() != n_ - r_) {
        throw Error(ErrorKind::InvalidInput, "end frames do not match the rank");
    }
    const int u = n_ - r_;
    const std::size_t panels = breaks_.size() - 1;

    // chunk boundaries on panel breaks
    std::vector<std::size_t> starts{0};
    for (std::size_t p = 1; p < panels; ++p) {
        if (breaks_[p] - breaks_[starts.back()] >= chunk - 1e-12) starts.push_back(p);
    }
    const std::size_t nchunks = starts.size();
    std::vector<double> bounds;
    for (std::size_t c = 0; c < nchunks; ++c) bounds.push_back(breaks_[starts[c]]);
    bounds.push_back(breaks_.back());

    // W forward, V backward, each re-orthonormalized per boundary
    std::vector<Mat> w_basis(nchunks + 1), v_basis(nchunks + 1);
    w_basis[0] = w_left;
    for (std::size_t c = 0; c < nchunks; ++c) {
        w_basis[c + 1] = u > 0 ? orthonormalize(Mat(transition_matrix(sys, bounds[c + 1], bounds[c], tol).x *
                                                    w_basis[c]))
                               : Mat(n_, 0);
    }
    v_basis[nchunks] = v_right;
    for (std::size_t c = nchunks; c-- > 0;) {
        v_basis[c] = r_ > 0 ? orthonormalize(Mat(transition_matrix(sys, bounds[c], bounds[c + 1], tol).x *
                                                 v_basis[c + 1]))
                            : Mat(n_, 0);
    }

    for (std::size_t c = 0; c < nchunks; ++c) {
        Chunk ch;
        ch.first_panel = starts[c];
        ch.panels = (c + 1 < nchunks ? starts[c + 1] : panels) - starts[c];
        ch.lo = bounds[c];
        ch.hi = bounds[c + 1];
        ch.frame.resize(n_, n_);
        ch.frame << v_basis[c], w_basis[c];
        caches_.emplace_back(sys, ch.lo, ch.lo, ch.hi, tol, true, ch.frame);
        ch.cache = caches_.size() - 1;
        // carry maps: Y(hi) in the frame at hi
        Mat next(n_, n_);
        next << v_basis[c + 1], w_basis[c + 1];
        const Mat coords = next.fullPivLu().solve(caches_.back().forward(ch.hi));
        ch.d = coords.topLeftCorner(r_, r_);
        ch.e_inv = u > 0 ? Mat(coords.bottomRightCorner(u, u).inverse()) : Mat(0, 0);
        chunks_.push_back(std::move(ch));
        for (std::size_t p = 0; p < chunks_.back().panels; ++p) panel_chunk_.push_back(c);
    }

    const GaussRule& g = gauss_legendre(m_);
    for (std::size_t p = 0; p < panels; ++p) {
        const double lo = breaks_[p], hi = breaks_[p + 1];
        const TransitionCache& cache = caches_[chunks_[panel_chunk_[p]].cache];
        for (int i = 0; i < m_; ++i) {
            const double s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * g.nodes[i];
            nodes_.push_back(s);
            weights_.push_back(0.5 * (hi - lo) * g.weights[i]);
            y_.push_back(cache.forward(s));
            y_inv_.push_back(cache.inverse(s));
        }
    }
    partial_.resize(m_, m_);
    for (int i = 0; i < m_; ++i) {
        const auto w = partial_weights(g.nodes, g.nodes[i]);
        for (int j = 0; j < m_; ++j) partial_(i, j) = w[j];
    }
}

std::size_t GreenOperator::chunk_of_panel(std::size_t p) const { return panel_chunk_[p]; }

Mat GreenOperator::image_basis_at_node(std::size_t k) const {
    return orthonormalize(Mat(y_[k].leftCols(r_)));
}

GreenOperator::Sweeps GreenOperator::sweep(const Mat& ps, const Mat& pu) const {
    const int u = n_ - r_;
    const std::size_t nchunks = chunks_.size();
    Sweeps sw;
    sw.sigma.assign(nchunks, Vec::Zero(r_));
    sw.omega.assign(nchunks, Vec::Zero(u));
    auto chunk_integral = [&](const Chunk& ch, const Mat& p) {
        Vec acc = Vec::Zero(p.rows());
        const std::size_t first = ch.first_panel * m_, last = (ch.first_panel + ch.panels) * m_;
        for (std::size_t k = first; k < last; ++k) acc += weights_[k] * p.col(k);
        return acc;
    };
    if (r_ > 0) {
        for (std::size_t c = 0; c + 1 < nchunks; ++c) {
            sw.sigma[c + 1] = chunks_[c].d * (sw.sigma[c] + chunk_integral(chunks_[c], ps));
        }
    }
    if (u > 0) {
        for (std::size_t c = nchunks - 1; c-- > 0;) {
            // omega[c]: coordinates at the end of chunk c in chunk c's frame
            const Chunk& nx = chunks_[c + 1];
            sw.omega[c] = chunks_[c].e_inv * (sw.omega[c + 1] + chunk_integral(nx, pu));
        }
    }
    return sw;
}

Mat GreenOperator::apply(const Mat& v) const {
    const std::size_t total = nodes_.size();
    if (static_cast<std::size_t>(v.cols()) != total || v.rows() != n_) {
        throw Error(ErrorKind::InvalidInput, "Green operator input has the wrong shape");
    }
    const GaussRule& g = gauss_legendre(m_);
    const int u = n_ - r_;
    Mat ps(r_, total), pu(u, total);
    for (std::size_t k = 0; k < total; ++k) {
        if (r_ > 0) ps.col(k) = y_inv_[k].topRows(r_) * v.col(k);
        if (u > 0) pu.col(k) = y_inv_[k].bottomRows(u) * v.col(k);
    }
    const Sweeps sw = sweep(ps, pu);
    Mat out = Mat::Zero(n_, total);
    for (std::size_t c = 0; c < chunks_.size(); ++c) {
        const Chunk& ch = chunks_[c];
        if (r_ > 0) {
            Vec acc = sw.sigma[c];
            for (std::size_t p = ch.first_panel; p < ch.first_panel + ch.panels; ++p) {
                const double half = 0.5 * (breaks_[p + 1] - breaks_[p]);
                const std::size_t base = p * m_;
                for (int i = 0; i < m_; ++i) {
                    Vec part = acc;
                    for (int j = 0; j < m_; ++j) part += half * partial_(i, j) * ps.col(base + j);
                    out.col(base + i) += y_[base + i].leftCols(r_) * part;
                }
                for (int j = 0; j < m_; ++j) acc += half * g.weights[j] * ps.col(base + j);
            }
        }
        if (u > 0) {
            Vec acc = sw.omega[c];
            for (std::size_t p = ch.first_panel + ch.panels; p-- > ch.first_panel;) {
                const double half = 0.5 * (breaks_[p + 1] - breaks_[p]);
                const std::size_t base = p * m_;
                for (int i = 0; i < m_; ++i) {
                    Vec part = acc;
                    for (int j = 0; j < m_; ++j) part += half * (g.weights[j] - partial_(i, j)) * pu.col(base + j);
                    out.col(base + i) -= y_[base + i].rightCols(u) * part;
                }
                for (int j = 0; j < m_; ++j) acc += half * g.weights[j] * pu.col(base + j);
            }
        }
    }
    return out;
}

Vec GreenOperator::apply_at(const Mat& v, double t) const {
    if (t < breaks_.front() - 1e-12 || t > breaks_.back() + 1e-12) {
        throw Error(ErrorKind::DomainError, "Green operator evaluated outside its window");
    }
    const std::size_t total = nodes_.size();
    const GaussRule& g = gauss_legendre(m_);
    const int u = n_ - r_;
    Mat ps(r_, total), pu(u, total);
    for (std::size_t k = 0; k < total; ++k) {
        if (r_ > 0) ps.col(k) = y_inv_[k].topRows(r_) * v.col(k);
        if (u > 0) pu.col(k) = y_inv_[k].bottomRows(u) * v.col(k);
    }
    const Sweeps sw = sweep(ps, pu);
    const std::size_t panels = breaks_.size() - 1;
    auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
    std::size_t pt = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - breaks_.begin()) - 1));
    pt = std::min(pt, panels - 1);
    const std::size_t c = panel_chunk_[pt];
    const Chunk& ch = chunks_[c];
    const double lo = breaks_[pt], hi = breaks_[pt + 1];
    const double half = 0.5 * (hi - lo);
    const double x = std::clamp((2.0 * t - lo - hi) / (hi - lo), -1.0, 1.0);
    const auto w = partial_weights(g.nodes, x);
    const Mat y = caches_[ch.cache].forward(t);
    Vec out = Vec::Zero(n_);
    if (r_ > 0) {
        Vec acc = sw.sigma[c];
        for (std::size_t k = ch.first_panel * m_; k < pt * m_; ++k) acc += weights_[k] * ps.col(k);
        for (int j = 0; j < m_; ++j) acc += half * w[j] * ps.col(pt * m_ + j);
        out += y.leftCols(r_) * acc;
    }
    if (u > 0) {
        Vec acc = sw.omega[c];
        for (std::size_t k = (pt + 1) * m_; k < (ch.first_panel + ch.panels) * m_; ++k) acc += weights_[k] * pu.col(k);
        for (int j = 0; j < m_; ++j) acc += half * (g.weights[j] - w[j]) * pu.col(pt * m_ + j);
        out -= y.rightCols(u) * acc;
    }
    return out;
}

GreenResult green_apply(const LinearSystem& sys, const DichotomyCertificate& cert,
                        const std::function<Vec(double)>& g, double t, double window, double tol) {
    if (!cert.verified()) throw Error(ErrorKind::CertificateRequired, "green_apply needs a verified certificate");
    if (!(window > 0.0)) throw Error(ErrorKind::InvalidInput, "window must be positive");
    const EndFrames ends = end_frames(sys, cert, t - window, t + window, std::max(window, 10.0), tol);
    const GreenOperator op(sys, cert.rank(), uniform_breaks(t - window, t + window, 0.25), ends.v_right,
                           ends.w_left, tol);
    Mat v(sys.dim(), static_cast<Eigen::Index>(op.nodes().size()));
    GreenResult out;
    for (std::size_t k = 0; k < op.nodes().size(); ++k) {
        v.col(k) = g(op.nodes()[k]);
        out.g_sup = std::max(out.g_sup, v.col(k).norm());
    }
    out.value = op.apply_at(v, t);
    out.truncation_bound = 2.0 * cert.k * out.g_sup * std::exp(-cert.alpha * window) / cert.alpha;
    return out;
}

bool sup_bound_check(const DichotomyCertificate& cert, const std::vector<Vec>& samples, double g_sup, double tol) {
    double worst = 0.0;
    for (const Vec& s : samples) worst = std::max(worst, s.norm());
    if (!(cert.alpha > 0.0)) return false;
    return worst <= (2.0 * cert.k / cert.alpha) * g_sup * (1.0 + tol);
}

FixedPointResult lipschitz_fixed_point(const LinearSystem& sys, const DichotomyCertificate& cert,
                                       const std::function<Vec(double, const Vec&)>& h, double gamma, double a,
                                       double b, double tol, int max_iter) {
    if (!cert.verified()) throw Error(ErrorKind::CertificateRequired, "fixed point needs a verified certificate");
    FixedPointResult out;
    out.contraction = 2.0 * cert.k * gamma / cert.alpha;
    if (out.contraction >= 1.0) {
        throw Error(ErrorKind::GapViolation, "2 K gamma / alpha = " + std::to_string(out.contraction) + " >= 1");
    }
    const double itol = std::min(1e-10, tol);
    const EndFrames ends = end_frames(sys, cert, a, b, std::max(0.5 * (b - a), 10.0), itol);
    const GreenOperator op(sys, cert.rank(), uniform_breaks(a, b, 0.25), ends.v_right, ends.w_left, itol);
    const std::size_t total = op.nodes().size();
    const int n = sys.dim();
    Mat w = Mat::Zero(n, static_cast<Eigen::Index>(total));
    auto image = [&](const Mat& cur) {
        Mat v(n, static_cast<Eigen::Index>(total));
        for (std::size_t k = 0; k < total; ++k) v.col(k) = h(op.nodes()[k], cur.col(k));
        return op.apply(v);
    };
    auto sup = [](const Mat& m) {
        double s = 0.0;
        for (Eigen::Index k = 0; k < m.cols(); ++k) s = std::max(s, m.col(k).norm());
        return s;
    };
    double c0 = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
        Mat next = image(w);
        const double change = sup(Mat(next - w));
        w = std::move(next);
        out.changes.push_back(change);
        out.iterations = it;
        out.last_change = change;
        if (it == 1) c0 = change;
        if (change <= tol) break;
        if (it == max_iter) throw Error(ErrorKind::NoConvergence, "Picard iteration did not converge");
    }
    out.iteration_bound = c0 <= tol ? 1
                                    : static_cast<int>(std::ceil(std::log(tol * (1.0 - out.contraction) / c0) /
                                                                 std::log(out.contraction))) +
                                          1;
    out.residual = sup(Mat(w - image(w)));
    out.nodes = op.nodes();
    for (std::size_t k = 0; k < total; ++k) out.values.push_back(w.col(k));
    return out;
}

// ---------------------------------------------------------------------------
// tests

NoncriticalityResult noncriticality_test(const LinearSystem& sys, double window, double theta,
                                         const std::vector<double>& grid, int probes, std::uint64_t seed,
                                         double tol) {
    if (grid.empty()) throw Error(ErrorKind::InvalidInput, "noncriticality needs a grid");
    if (!(window > 0.0) || !(theta > 0.0 && theta < 1.0)) {
        throw Error(ErrorKind::InvalidInput, "need window > 0 and theta in (0,1)");
    }
    const auto [gmin, gmax] = std::minmax_element(grid.begin(), grid.end());
    const double lo = *gmin - window, hi = *gmax + window;
    if (!sys.contains(lo) || !sys.contains(hi)) {
        throw Error(ErrorKind::DomainError, "noncriticality windows leave the domain");
    }
    const TransitionCache cache(sys, std::clamp(0.0, lo, hi), lo, hi, tol, false);
    const double ds = std::min(0.05, window / 20.0);
    const int count = static_cast<int>(std::ceil((hi - lo) / ds)) + 1;
    const std::vector<double> fine = linspace(lo, hi, count);
    std::vector<Mat> xs;
    xs.reserve(fine.size());
    for (double u : fine) xs.push_back(cache.forward(u));

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    NoncriticalityResult out;
    const int n = sys.dim();
    for (int p = 0; p < probes; ++p) {
        Vec xi(n);
        for (int i = 0; i < n; ++i) xi(i) = nd(rng);
        xi.normalize();
        std::vector<double> mag(fine.size());
        for (std::size_t k = 0; k < fine.size(); ++k) mag[k] = (xs[k] * xi).norm();
        for (double t : grid) {
            const double here = (cache.forward(t) * xi).norm();
            double sup = here;
            for (std::size_t k = 0; k < fine.size(); ++k) {
                if (std::fabs(fine[k] - t) <= window + 1e-12) sup = std::max(sup, mag[k]);
            }
            const double ratio = sup > 0 ? here / sup : 1.0;
            if (ratio > out.margin) {
                out.margin = ratio;
                out.worst_t = t;
            }
        }
    }
    out.noncritical = out.margin <= theta;
    return out;
}

int dichotomy_index(const LinearSystem& sys, double horizon, double tol) {
    SplitOptions o;
    o.tol = tol;
    o.direction = SplitDirection::Both;
    const SubspaceSplit s = estimate_splitting(sys, horizon, o);
    if (s.inconclusive()) {
        throw Error(ErrorKind::IndexUndetermined, "splitting has " + std::to_string(s.inconclusive_rates.size()) +
                                                      " inconclusive direction(s)");
    }
    return static_cast<int>(s.stable_basis.cols() + s.unstable_basis.cols()) - sys.dim();
}

FullLineReport full_line_criterion(const LinearSystem& sys, double horizon, double tol, double angle_threshold) {
    FullLineReport rep;
    SplitOptions o;
    o.tol = tol;
    o.direction = SplitDirection::Both;
    rep.split = estimate_splitting(sys, horizon, o);
    const int n = sys.dim();
    rep.index_determined = !rep.split.inconclusive();
    rep.index = static_cast<int>(rep.split.stable_basis.cols() + rep.split.unstable_basis.cols()) - n;
    rep.angle = smallest_principal_angle(rep.split.stable_basis, rep.split.unstable_basis);

    const std::vector<double> fwd_grid = linspace(0.0, horizon, static_cast<int>(std::ceil(horizon * 4)) + 1);
    const std::vector<double> bwd_grid = linspace(-horizon, 0.0, static_cast<int>(std::ceil(horizon * 4)) + 1);
    CertifyOptions co;
    co.integration_tol = tol;
    rep.forward_cert = certify(sys, orthogonal_projection(rep.split.stable_basis, n), 0.0, horizon, fwd_grid, co);
    const Mat w_perp = orthonormal_complement(rep.split.unstable_basis, n);
    rep.backward_cert = certify(sys, orthogonal_projection(w_perp, n), -horizon, 0.0, bwd_grid, co);
    rep.passes = rep.index_determined && rep.forward_cert.verified() && rep.backward_cert.verified() &&
                 rep.angle > angle_threshold && rep.index == 0;
    return rep;
}

ProjectorGrowth projector_growth(const LinearSystem& sys, const ProjectionMatrix& p, const std::vector<double>& grid,
                                 double slope_threshold, double tol) {
    if (grid.size() < 2) throw Error(ErrorKind::InvalidInput, "projector_growth needs at least 2 nodes");
    const auto [gmin, gmax] = std::minmax_element(grid.begin(), grid.end());
    const double anchor = std::clamp(0.0, *gmin, *gmax);
    const Mat frame = projection_frame(p);
    const TransitionCache cache(sys, anchor, *gmin, *gmax, tol, true, frame);
    const int r = p.rank;
    ProjectorGrowth out;
    std::vector<double> ys;
    for (double t : grid) {
        double nrm = 0.0;
        if (r > 0) nrm = operator_norm_2(Mat(cache.forward(t).leftCols(r) * cache.inverse(t).topRows(r)));
        out.max_norm = std::max(out.max_norm, nrm);
        ys.push_back(std::log(std::max(nrm, 1e-300)));
    }
    const double tm = std::accumulate(grid.begin(), grid.end(), 0.0) / grid.size();
    const double ym = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        sxy += (grid[i] - tm) * (ys[i] - ym);
        sxx += (grid[i] - tm) * (grid[i] - tm);
    }
    out.slope = sxx > 0 ? sxy / sxx : 0.0;
    out.bounded = out.slope < slope_threshold;
    return out;
}

}  // namespace dlab
