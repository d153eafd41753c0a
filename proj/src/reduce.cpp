#include "dlab/reduce.hpp"

#include "dlab/error.hpp"
#include "dlab/propagate.hpp"

#include <algorithm>
#include <cmath>

namespace dlab {

int ReductionResult::block_offset(int i) const {
    int off = 0;
    for (int k = 0; k < i; ++k) off += block_sizes[static_cast<std::size_t>(k)];
    return off;
}

namespace {

std::size_t nearest_node(const std::vector<double>& grid, double t) {
    return static_cast<std::size_t>(
        std::min_element(grid.begin(), grid.end(),
                         [t](double x, double y) { return std::fabs(x - t) < std::fabs(y - t); }) -
        grid.begin());
}

void check_grid(const std::vector<double>& grid) {
    if (grid.size() < 3) throw Error(ErrorKind::InvalidInput, "reduction grid needs at least 3 nodes");
    for (std::size_t k = 1; k < grid.size(); ++k) {
        if (!(grid[k] > grid[k - 1])) throw Error(ErrorKind::InvalidInput, "reduction grid must be increasing");
    }
}

// bases[i][k]: orthonormal n x m_i basis of block i at node k
// transport[i][k]: X(t_{k+1}, t_k) bases[i][k] = bases[i][k+1] transport[i][k]
ReductionResult reduce_blocks(const LinearSystem& sys, const std::vector<double>& grid, std::size_t ia,
                              const std::vector<std::vector<Mat>>& bases,
                              const std::vector<std::vector<Mat>>& transport) {
    const int n = sys.dim();
    const std::size_t m = grid.size();
    const std::size_t nb = bases.size();
    ReductionResult res;
    res.grid = grid;
    res.anchor_index = ia;
    for (const auto& b : bases) res.block_sizes.push_back(static_cast<int>(b.front().cols()));

    // per block: coordinates G with Y_i(t_k) = basis_k G_k, R_i = (G^T G)^{1/2}
    std::vector<std::vector<Mat>> r_blk(nb, std::vector<Mat>(m)), s_blk(nb, std::vector<Mat>(m));
    for (std::size_t i = 0; i < nb; ++i) {
        const int mi = res.block_sizes[i];
        if (mi == 0) continue;
        std::vector<Mat> g(m);
        g[ia] = Mat::Identity(mi, mi);
        for (std::size_t k = ia; k + 1 < m; ++k) g[k + 1] = transport[i][k] * g[k];
        for (std::size_t k = ia; k-- > 0;) g[k] = transport[i][k].fullPivLu().solve(g[k + 1]);
        for (std::size_t k = 0; k < m; ++k) {
            r_blk[i][k] = spd_sqrt(Mat(g[k].transpose() * g[k]));
            s_blk[i][k] = bases[i][k] * g[k] * r_blk[i][k].inverse();
        }
    }
    res.s.resize(m);
    res.s_inv.resize(m);
    res.r.resize(m);
    res.b.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
        res.s[k].resize(n, n);
        res.r[k] = Mat::Zero(n, n);
        res.b[k] = Mat::Zero(n, n);
        int off = 0;
        for (std::size_t i = 0; i < nb; ++i) {
            const int mi = res.block_sizes[i];
            if (mi == 0) continue;
            res.s[k].middleCols(off, mi) = s_blk[i][k];
            res.r[k].block(off, off, mi, mi) = r_blk[i][k];
            // B_i = R_i' R_i^{-1}, central differences inside, one-sided at the ends
            const std::size_t lo = k == 0 ? 0 : k - 1, hi = k + 1 == m ? k : k + 1;
            const Mat rdot = (r_blk[i][hi] - r_blk[i][lo]) / (grid[hi] - grid[lo]);
            res.b[k].block(off, off, mi, mi) = rdot * r_blk[i][k].inverse();
            off += mi;
        }
        res.s_inv[k] = res.s[k].fullPivLu().inverse();
        res.s_norm_bound = std::max(res.s_norm_bound, operator_norm_2(res.s[k]));
        res.s_inv_norm_bound = std::max(res.s_inv_norm_bound, operator_norm_2(res.s_inv[k]));
    }
    // residual with forward-difference S'; off-block check with central S'
    for (std::size_t k = 1; k + 1 < m; ++k) {
        const Mat a = sys.coeff(grid[k]);
        const Mat sdot = (res.s[k + 1] - res.s[k]) / (grid[k + 1] - grid[k]);
        res.similarity_residual =
            std::max(res.similarity_residual, operator_norm_2(Mat(sdot - a * res.s[k] + res.s[k] * res.b[k])));
        const Mat sdot_c = (res.s[k + 1] - res.s[k - 1]) / (grid[k + 1] - grid[k - 1]);
        const Mat b_check = res.s_inv[k] * (a * res.s[k] - sdot_c);
        int off = 0;
        for (std::size_t i = 0; i < nb; ++i) {
            const int mi = res.block_sizes[i];
            for (int row = 0; row < n; ++row) {
                if (row >= off && row < off + mi) continue;
                for (int col = off; col < off + mi; ++col) {
                    res.offblock_max = std::max(res.offblock_max, std::fabs(b_check(row, col)));
                }
            }
            off += mi;
        }
    }
    res.basis.resize(n, n);
    int off = 0;
    for (std::size_t i = 0; i < nb; ++i) {
        const int mi = res.block_sizes[i];
        if (mi > 0) res.basis.middleCols(off, mi) = bases[i][ia];
        off += mi;
    }
    return res;
}

double log_trend(const std::vector<double>& t, const std::vector<double>& y) {
    double mt = 0, my = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        mt += t[i];
        my += y[i];
    }
    mt /= static_cast<double>(t.size());
    my /= static_cast<double>(t.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        sxy += (t[i] - mt) * (y[i] - my);
        sxx += (t[i] - mt) * (t[i] - mt);
    }
    return sxx > 0 ? sxy / sxx : 0.0;
}

// orthonormal basis of span(a) ∩ span(b) of the given dimension
Mat intersect(const Mat& a, const Mat& b, int dim) {
    const int n = static_cast<int>(a.rows());
    if (a.cols() == n) return b;
    if (b.cols() == n) return a;
    if (dim == 0) return Mat(n, 0);
    Mat m(n, a.cols() + b.cols());
    m << a, -b;
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullV);
    const Mat null = svd.matrixV().rightCols(dim);
    return orthonormalize(Mat(a * null.topRows(a.cols())));
}

}  // namespace

ReductionResult coppel_similarity(const LinearSystem& sys, const ProjectionMatrix& p, const std::vector<double>& grid,
                                  double tol, double growth_threshold) {
    check_grid(grid);
    const int n = sys.dim();
    if (p.dim() != n) throw Error(ErrorKind::InvalidInput, "projector dimension mismatch");
    const int r = p.rank;
    const std::size_t ia = nearest_node(grid, std::clamp(0.0, grid.front(), grid.back()));
    const Mat c0 = projection_frame(p);
    const SplitFrames f = split_frames(sys, c0.leftCols(r), c0.rightCols(n - r), grid, grid[ia], tol,
                                       std::max(5.0, 0.5 * (grid.back() - grid.front())));

    std::vector<double> log_norm;
    double s_inv_pred = 0.0, proj_defect_dummy = 0.0;
    std::vector<Mat> proj(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const Mat c = f.frame(k);
        proj[k] = c * canonical_projection(r, n).base * c.inverse();
        const double pn = operator_norm_2(proj[k]);
        const double qn = operator_norm_2(Mat(Mat::Identity(n, n) - proj[k]));
        log_norm.push_back(std::log(pn));
        s_inv_pred = std::max(s_inv_pred, std::sqrt(pn * pn + qn * qn));
    }
    (void)proj_defect_dummy;
    if (log_trend(grid, log_norm) > growth_threshold) {
        throw Error(ErrorKind::NotReducibleHere, "||X(t)PX^{-1}(t)|| grows along the grid");
    }

    ReductionResult res;
    if (r == 0 || r == n) {
        res = reduce_blocks(sys, grid, ia, {r == n ? f.v : f.w}, {r == n ? f.d : f.e});
    } else {
        res = reduce_blocks(sys, grid, ia, {f.v, f.w}, {f.d, f.e});
    }
    res.rank = r;
    res.s_inv_predicted = s_inv_pred;
    const Mat pc = canonical_projection(r, n).base;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        res.commutation_defect = std::max(res.commutation_defect, operator_norm_2(Mat(res.r[k] * pc - pc * res.r[k])));
        res.projector_defect =
            std::max(res.projector_defect, operator_norm_2(Mat(res.s[k] * pc * res.s_inv[k] - proj[k])));
    }
    return res;
}

std::pair<std::optional<DichotomyCertificate>, std::optional<DichotomyCertificate>> subsystem_dichotomies(
    const ReductionResult& res, std::optional<double> alpha, const CertifyOptions& opts) {
    if (res.rank < 0 || res.blocks() > 2) {
        throw Error(ErrorKind::InvalidInput, "subsystem certificates need a two-block Coppel reduction");
    }
    CertifyOptions co = opts;
    if (alpha) co.alpha_candidates = {*alpha};
    const int n = static_cast<int>(res.r.front().rows());
    auto block_cert = [&](int off, int size, bool contracting) {
        std::vector<Mat> y, y_inv;
        double sup = 0.0;
        for (std::size_t k = 0; k < res.grid.size(); ++k) {
            y.push_back(res.r[k].block(off, off, size, size));
            y_inv.push_back(y.back().inverse());
            sup = std::max(sup, operator_norm_2(Mat(res.b[k].block(off, off, size, size))));
        }
        return certify_sampled(res.grid, y, y_inv, contracting ? size : 0, sup, co);
    };
    std::pair<std::optional<DichotomyCertificate>, std::optional<DichotomyCertificate>> out;
    const int r = res.rank;
    if (r > 0) out.first = block_cert(0, r, true);
    if (r < n) out.second = block_cert(r, n - r, false);
    return out;
}

ReductionResult spectral_block_diagonalize(const LinearSystem& sys, const SpectrumReport& spectrum,
                                           const std::vector<double>& grid, double tol) {
    check_grid(grid);
    const int n = sys.dim();
    if (spectrum.unbounded) throw Error(ErrorKind::InvalidInput, "spectral reduction needs a bounded spectrum");
    const std::size_t ia = nearest_node(grid, std::clamp(0.0, grid.front(), grid.back()));
    const double span = grid.back() - grid[ia];

    std::vector<const ResolventGap*> inner;
    for (const ResolventGap& g : spectrum.gaps) {
        if (!std::isinf(g.lo) && !std::isinf(g.hi)) inner.push_back(&g);
    }
    if (inner.empty()) {
        // identity reduction: S = I, B = A, R = X(t, anchor)
        const SplitFrames f = split_frames(sys, Mat::Identity(n, n), Mat(n, 0), grid, grid[ia], tol);
        std::vector<Mat> id(grid.size(), Mat::Identity(n, n));
        ReductionResult res = reduce_blocks(sys, grid, ia, {id}, {f.step});
        return res;
    }

    std::vector<SplitFrames> frames;
    std::vector<int> ranks;
    for (const ResolventGap* g : inner) {
        const double lambda = 0.5 * (g->lo + g->hi);
        const LinearSystem shifted = sys.shifted(lambda).with_domain(Domain::HalfLinePlus);
        SplitOptions so;
        so.tol = tol;
        so.direction = SplitDirection::Forward;
        const SubspaceSplit split = estimate_splitting(shifted, span, so);
        const int r = static_cast<int>(split.stable_basis.cols());
        char buf[96];
        std::snprintf(buf, sizeof buf, "lambda = %.6g", lambda);
        if (split.forward_inconclusive > 0 || r != g->rank) {
            throw Error(ErrorKind::GapNotCertified, std::string(buf) + ": splitting does not match the gap rank");
        }
        const ProjectionMatrix p = orthogonal_projection(split.stable_basis, n);
        CertifyOptions co;
        co.integration_tol = tol;
        if (!certify(shifted, p, grid[ia], grid.back(), {}, co).verified()) {
            throw Error(ErrorKind::GapNotCertified, std::string(buf) + ": shifted system does not certify");
        }
        frames.push_back(split_frames(sys, split.stable_basis, orthonormal_complement(split.stable_basis, n), grid,
                                      grid[ia], tol, std::max(5.0, 0.5 * span)));
        ranks.push_back(r);
    }
    const std::size_t nb = inner.size() + 1;
    const std::size_t m = grid.size();
    std::vector<std::vector<Mat>> bases(nb, std::vector<Mat>(m)), transport(nb, std::vector<Mat>(m - 1));
    const std::vector<Mat>& step = frames.front().step;
    for (std::size_t i = 0; i < nb; ++i) {
        const int dim = (i + 1 < nb ? ranks[i] : n) - (i > 0 ? ranks[i - 1] : 0);
        for (std::size_t k = 0; k < m; ++k) {
            const Mat v = i + 1 < nb ? frames[i].v[k] : Mat(Mat::Identity(n, n));
            const Mat w = i > 0 ? frames[i - 1].w[k] : Mat(Mat::Identity(n, n));
            bases[i][k] = intersect(v, w, dim);
        }
        for (std::size_t k = 0; k + 1 < m; ++k) {
            transport[i][k] = bases[i][k + 1].transpose() * step[k] * bases[i][k];
        }
    }
    return reduce_blocks(sys, grid, ia, bases, transport);
}

SpectrumReport block_spectrum(const ReductionResult& res, int block, double window) {
    if (block < 0 || block >= res.blocks()) throw Error(ErrorKind::InvalidInput, "no such block");
    if (std::fabs(res.grid.front()) > 1e-9) throw Error(ErrorKind::InvalidInput, "reduction grid must start at 0");
    const int off = res.block_offset(block);
    const int size = res.block_sizes[static_cast<std::size_t>(block)];
    auto node = [&](double t) {
        const std::size_t k = nearest_node(res.grid, t);
        if (std::fabs(res.grid[k] - t) > 1e-7) {
            throw Error(ErrorKind::InvalidInput, "spectrum grid node missing from the reduction grid");
        }
        return k;
    };
    StepFlow flow = [&](double t1, double t0) {
        const Mat r1 = res.r[node(t1)].block(off, off, size, size);
        const Mat r0 = res.r[node(t0)].block(off, off, size, size);
        return Mat(r1 * r0.inverse());
    };
    return halfline_spectrum(size, flow, res.grid.back(), window);
}

}  // namespace dlab
