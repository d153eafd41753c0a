#include "dlab/spectrum.hpp"

#include "dlab/dichotomy.hpp"
#include "dlab/error.hpp"
#include "dlab/propagate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// nodes k h on [0, T] with L a multiple of h
std::vector<double> aligned_grid(double horizon, double window, double step) {
    const double h = window / std::ceil(window / step - 1e-12);
    const int count = static_cast<int>(std::floor(horizon / h + 1e-9));
    std::vector<double> g(count + 1);
    for (int k = 0; k <= count; ++k) g[k] = k * h;
    return g;
}

TriangularReduction sweep(int n, const StepFlow& flow, const std::vector<double>& grid) {
    if (grid.size() < 2) throw Error(ErrorKind::InvalidInput, "triangularization needs at least two nodes");
    TriangularReduction out;
    out.grid = grid;
    out.q.push_back(Mat::Identity(n, n));
    out.b_cumulative = Mat::Zero(static_cast<Eigen::Index>(grid.size()), n);
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        if (!(grid[k + 1] > grid[k])) throw Error(ErrorKind::InvalidInput, "grid must be increasing");
        const QrFactors f = gram_schmidt_qr(Mat(flow(grid[k + 1], grid[k]) * out.q.back()));
        out.q.push_back(f.q);
        for (int i = 0; i < n; ++i) {
            out.b_cumulative(k + 1, i) = out.b_cumulative(k, i) + std::log(f.r(i, i));
        }
    }
    for (const Mat& q : out.q) {
        out.orthogonality_defect =
            std::max(out.orthogonality_defect, operator_norm_2(Mat(q.transpose() * q - Mat::Identity(n, n))));
    }
    return out;
}

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() < 2) return 0.0;
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxx > 0 ? sxy / sxx : 0.0;
}

double interp(const std::vector<double>& x, const std::vector<double>& y, double t) {
    auto it = std::upper_bound(x.begin(), x.end(), t);
    if (it == x.begin()) return y.front();
    if (it == x.end()) return y.back();
    const std::size_t k = static_cast<std::size_t>(it - x.begin());
    const double w = (t - x[k - 1]) / (x[k] - x[k - 1]);
    return (1 - w) * y[k - 1] + w * y[k];
}

// sup ||A|| on the second half of [0, T] against the first
bool coefficients_grow(const LinearSystem& sys, double horizon) {
    const double early = sampled_sup_norm(sys, 0.0, 0.5 * horizon, 200);
    const double late = sampled_sup_norm(sys, 0.5 * horizon, horizon, 200);
    return late > 1.5 * early + 0.5;
}

SpectrumReport assemble(const std::vector<BohlPair>& diag, double horizon, double window) {
    SpectrumReport rep;
    rep.horizon = horizon;
    rep.window = window;
    rep.merge_eps = 2.0 / window;
    rep.diagonal = diag;
    std::vector<SpectralInterval> cand;
    for (const BohlPair& b : diag) {
        SpectralInterval iv;
        iv.lo = b.unbounded_below ? -kInf : b.beta_minus;
        iv.hi = b.unbounded_above ? kInf : b.beta_plus;
        iv.unbounded_left = b.unbounded_below;
        iv.unbounded_right = b.unbounded_above;
        rep.unbounded = rep.unbounded || b.unbounded_below || b.unbounded_above;
        cand.push_back(iv);
    }
    std::sort(cand.begin(), cand.end(), [](const SpectralInterval& a, const SpectralInterval& b) {
        return a.lo < b.lo || (a.lo == b.lo && a.hi < b.hi);
    });
    for (const SpectralInterval& iv : cand) {
        if (!rep.intervals.empty() && iv.lo - rep.intervals.back().hi < rep.merge_eps) {
            SpectralInterval& cur = rep.intervals.back();
            cur.hi = std::max(cur.hi, iv.hi);
            cur.unbounded_right = cur.unbounded_right || iv.unbounded_right;
        } else {
            rep.intervals.push_back(iv);
        }
    }
    auto rank_left_of = [&](double lo) {
        int r = 0;
        for (const BohlPair& b : diag) {
            if (!b.unbounded_above && b.beta_plus <= lo + 1e-12) ++r;
        }
        return r;
    };
    double left = -kInf;
    for (const SpectralInterval& iv : rep.intervals) {
        if (!iv.unbounded_left) rep.gaps.push_back({left, iv.lo, std::isinf(left) ? 0 : rank_left_of(left)});
        left = iv.hi;
    }
    if (!std::isinf(left) || rep.intervals.empty()) {
        rep.gaps.push_back({left, kInf, rep.intervals.empty() ? 0 : rank_left_of(left)});
    }
    return rep;
}

}  // namespace

TriangularReduction perron_triangularize(int dim, const StepFlow& flow, const std::vector<double>& grid) {
    return sweep(dim, flow, grid);
}

TriangularReduction perron_triangularize(const LinearSystem& sys, const std::vector<double>& grid, double tol) {
    const int n = sys.dim();
    TriangularReduction out =
        sweep(n, [&](double t1, double t0) { return transition_matrix(sys, t1, t0, tol).x; }, grid);
    out.b_diag.resize(static_cast<Eigen::Index>(grid.size()), n);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const Mat c = out.q[k].transpose() * sys.coeff(grid[k]) * out.q[k];
        // B = C - S with S = Q^T Q' antisymmetric and B upper triangular
        Mat b = Mat::Zero(n, n);
        for (int i = 0; i < n; ++i) {
            b(i, i) = c(i, i);
            for (int j = i + 1; j < n; ++j) b(i, j) = c(i, j) + c(j, i);
        }
        out.b_diag.row(static_cast<Eigen::Index>(k)) = c.diagonal().transpose();
        out.offdiag_bound = std::max(out.offdiag_bound, operator_norm_2(b));
    }
    return out;
}

BohlPair bohl_from_cumulative(const std::vector<double>& grid, const std::vector<double>& cumulative, double window,
                              const BohlOptions& opts) {
    if (!(window > 0.0)) throw Error(ErrorKind::InvalidInput, "Bohl window must be positive");
    if (grid.size() != cumulative.size() || grid.size() < 2) {
        throw Error(ErrorKind::InvalidInput, "Bohl exponents need matching samples");
    }
    const double horizon = grid.back() - grid.front();
    if (horizon < 2.0 * window - 1e-9) {
        throw Error(ErrorKind::HorizonTooShort, "horizon must be at least twice the window");
    }
    const double s0 = grid.front() + 0.5 * horizon;
    std::vector<double> starts, avgs;
    for (double s : grid) {
        if (s < s0 - 1e-9 || s + window > grid.back() + 1e-9) continue;
        starts.push_back(s);
        avgs.push_back((interp(grid, cumulative, s + window) - interp(grid, cumulative, s)) / window);
    }
    if (starts.empty()) {
        starts.push_back(s0);
        avgs.push_back((interp(grid, cumulative, s0 + window) - interp(grid, cumulative, s0)) / window);
    }
    BohlPair out;
    out.window = window;
    out.start = s0;
    out.horizon = horizon;
    out.beta_minus = *std::min_element(avgs.begin(), avgs.end());
    out.beta_plus = *std::max_element(avgs.begin(), avgs.end());
    const double slope = least_squares_slope(starts, avgs);
    out.unbounded_above = slope > opts.trend_threshold || out.beta_plus > opts.magnitude_cap;
    out.unbounded_below = slope < -opts.trend_threshold || out.beta_minus < -opts.magnitude_cap;
    return out;
}

BohlPair scalar_bohl(const std::vector<double>& grid, const std::vector<double>& samples, double window,
                     const BohlOptions& opts) {
    if (grid.size() != samples.size()) throw Error(ErrorKind::InvalidInput, "grid and samples differ in length");
    std::vector<double> cum(grid.size(), 0.0);
    for (std::size_t k = 1; k < grid.size(); ++k) {
        cum[k] = cum[k - 1] + 0.5 * (grid[k] - grid[k - 1]) * (samples[k] + samples[k - 1]);
    }
    return bohl_from_cumulative(grid, cum, window, opts);
}

BohlPair scalar_bohl(const std::function<double(double)>& a, double horizon, double window,
                     const BohlOptions& opts) {
    if (!(window > 0.0)) throw Error(ErrorKind::InvalidInput, "Bohl window must be positive");
    if (horizon < 2.0 * window) throw Error(ErrorKind::HorizonTooShort, "horizon must be at least twice the window");
    const std::vector<double> grid = aligned_grid(horizon, window, 0.1);
    const GaussRule& g = gauss_legendre(4);
    std::vector<double> cum(grid.size(), 0.0);
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const double lo = grid[k - 1], hi = grid[k];
        double s = 0.0;
        for (std::size_t q = 0; q < g.nodes.size(); ++q) {
            s += g.weights[q] * a(0.5 * (lo + hi) + 0.5 * (hi - lo) * g.nodes[q]);
        }
        cum[k] = cum[k - 1] + 0.5 * (hi - lo) * s;
    }
    return bohl_from_cumulative(grid, cum, window, opts);
}

std::optional<int> SpectrumReport::rank_at(double lambda) const {
    for (const ResolventGap& g : gaps) {
        if (lambda > g.lo && lambda < g.hi) return g.rank;
    }
    return std::nullopt;
}

namespace {

SpectrumReport spectrum_from(const TriangularReduction& tri, double horizon, double window,
                             const SpectrumOptions& opts) {
    const int n = static_cast<int>(tri.b_cumulative.cols());
    std::vector<BohlPair> diag;
    for (int i = 0; i < n; ++i) {
        std::vector<double> cum(tri.grid.size());
        for (std::size_t k = 0; k < tri.grid.size(); ++k) cum[k] = tri.b_cumulative(static_cast<Eigen::Index>(k), i);
        diag.push_back(bohl_from_cumulative(tri.grid, cum, window, opts.bohl));
    }
    return assemble(diag, horizon, window);
}

void check_horizon(double horizon, double window) {
    if (!(window > 0.0)) throw Error(ErrorKind::InvalidInput, "window L must be positive");
    if (!(horizon >= 2.0 * window)) throw Error(ErrorKind::HorizonTooShort, "horizon T must be at least 2L");
}

}  // namespace

SpectrumReport halfline_spectrum(const LinearSystem& sys, double horizon, double window,
                                 const SpectrumOptions& opts) {
    check_horizon(horizon, window);
    if (!sys.contains(0.0) || !sys.contains(horizon)) {
        throw Error(ErrorKind::DomainError, "[0, T] must lie in the system's domain");
    }
    std::vector<std::string> warnings;
    if (coefficients_grow(sys, horizon)) {
        if (sys.dim() >= 2) {
            throw Error(ErrorKind::UnboundedCoefficients,
                        "sampled ||A(t)|| grows across the horizon; the triangular reduction is not justified");
        }
        warnings.push_back("coefficients grow across the horizon");
    }
    const TriangularReduction tri = perron_triangularize(sys, aligned_grid(horizon, window, opts.step), opts.tol);
    SpectrumReport rep = spectrum_from(tri, horizon, window, opts);
    rep.warnings = warnings;
    if (rep.unbounded) rep.warnings.push_back("spectrum is unbounded");
    return rep;
}

SpectrumReport halfline_spectrum(int dim, const StepFlow& flow, double horizon, double window,
                                 const SpectrumOptions& opts) {
    check_horizon(horizon, window);
    const TriangularReduction tri = perron_triangularize(dim, flow, aligned_grid(horizon, window, opts.step));
    SpectrumReport rep = spectrum_from(tri, horizon, window, opts);
    if (rep.unbounded) rep.warnings.push_back("spectrum is unbounded");
    return rep;
}

SpectrumReport fullline_spectrum(const LinearSystem& sys, double horizon, double window,
                                 const SpectrumOptions& opts) {
    const SpectrumReport fwd = halfline_spectrum(sys, horizon, window, opts);
    const SpectrumReport bwd = halfline_spectrum(sys.time_reversed(), horizon, window, opts);
    std::vector<BohlPair> diag = fwd.diagonal;
    // the reversed system's rates are negated
    for (BohlPair b : bwd.diagonal) {
        std::swap(b.beta_minus, b.beta_plus);
        b.beta_minus = -b.beta_minus;
        b.beta_plus = -b.beta_plus;
        std::swap(b.unbounded_below, b.unbounded_above);
        diag.push_back(b);
    }
    SpectrumReport rep = assemble(diag, horizon, window);
    // ranks follow the forward diagonal only
    for (ResolventGap& g : rep.gaps) {
        int r = 0;
        if (!std::isinf(g.lo)) {
            for (const BohlPair& b : fwd.diagonal) {
                if (!b.unbounded_above && b.beta_plus <= g.lo + 1e-12) ++r;
            }
        }
        g.rank = r;
    }
    rep.diagonal = fwd.diagonal;
    rep.full_line = true;
    rep.warnings = fwd.warnings;
    rep.warnings.insert(rep.warnings.end(), bwd.warnings.begin(), bwd.warnings.end());
    return rep;
}

std::string_view to_string(ShiftVerdict v) {
    switch (v) {
        case ShiftVerdict::InResolvent: return "in-resolvent";
        case ShiftVerdict::InSpectrum: return "in-spectrum";
        case ShiftVerdict::Inconclusive: return "inconclusive";
    }
    return "?";
}

ShiftResult shifted_dichotomy_test(const LinearSystem& sys, double lambda, double horizon, double tol) {
    const int n = sys.dim();
    const LinearSystem shifted = sys.shifted(lambda).with_domain(Domain::HalfLinePlus);
    SplitOptions so;
    so.tol = tol;
    so.direction = SplitDirection::Forward;
    const SubspaceSplit split = estimate_splitting(shifted, horizon, so);
    ShiftResult out;
    out.lambda = lambda;
    if (split.forward_inconclusive > 0) {
        out.verdict = ShiftVerdict::InSpectrum;
        return out;
    }
    const int r = static_cast<int>(split.stable_basis.cols());
    ProjectionMatrix p = r == 0 ? canonical_projection(0, n)
                         : r == n ? canonical_projection(n, n)
                                  : orthogonal_projection(split.stable_basis, n);
    CertifyOptions co;
    co.integration_tol = tol;
    const DichotomyCertificate cert = certify(shifted, p, 0.0, horizon, {}, co);
    out.alpha = cert.alpha;
    out.k = cert.k;
    if (cert.verified()) {
        out.verdict = ShiftVerdict::InResolvent;
        out.rank = r;
    }
    return out;
}

RankSweep rank_step_function(const LinearSystem& sys, const std::vector<double>& lambdas, double horizon,
                             double tol) {
    RankSweep out;
    std::optional<int> last;
    double last_lambda = 0.0;
    for (double lambda : lambdas) {
        ShiftResult r = shifted_dichotomy_test(sys, lambda, horizon, tol);
        if (r.rank) {
            if (last && *r.rank < *last) {
                out.monotone = false;
                char buf[160];
                std::snprintf(buf, sizeof buf, "rank drops from %d at lambda = %.6g to %d at lambda = %.6g", *last,
                              last_lambda, *r.rank, lambda);
                out.inconsistencies.emplace_back(buf);
            }
            last = r.rank;
            last_lambda = lambda;
        }
        out.points.push_back(r);
    }
    return out;
}

}  // namespace dlab
