#include "dlab/linalg.hpp"

#include "dlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace dlab {

namespace {

template <typename M>
void require_finite(const M& m, const char* what) {
    if (!m.allFinite()) {
        throw Error(ErrorKind::InvalidInput, std::string(what) + ": non-finite matrix entry");
    }
}

template <typename M>
double norm2_impl(const M& m) {
    require_finite(m, "operator_norm_2");
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<M> svd(m);
    return svd.singularValues()(0);
}

template <typename M>
M expm_impl(const M& a) {
    using Scalar = typename M::Scalar;
    const auto n = a.rows();
    const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm1 > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));
    const M scaled = a / std::ldexp(1.0, squarings);

    M result = M::Identity(n, n);
    M term = M::Identity(n, n);
    for (int k = 1; k <= 30; ++k) {
        term = (term * scaled) / Scalar(static_cast<double>(k));
        result += term;
        if (term.cwiseAbs().maxCoeff() <= 1e-18 * result.cwiseAbs().maxCoeff()) break;
    }
    for (int i = 0; i < squarings; ++i) result = result * result;
    return result;
}

}  // namespace

double operator_norm_2(const Mat& m) { return norm2_impl(m); }
double operator_norm_2(const CMat& m) { return norm2_impl(m); }

double condition_number_2(const Mat& m) {
    require_finite(m, "condition_number_2");
    Eigen::JacobiSVD<Mat> svd(m);
    const auto& s = svd.singularValues();
    const double smin = s(s.size() - 1);
    if (smin <= 0.0) return std::numeric_limits<double>::infinity();
    return s(0) / smin;
}

QrFactors gram_schmidt_qr(const Mat& m, double rank_threshold) {
    require_finite(m, "gram_schmidt_qr");
    const auto rows = m.rows();
    const auto cols = m.cols();
    if (cols > rows) throw Error(ErrorKind::InvalidInput, "gram_schmidt_qr: more columns than rows");

    Mat q = m;
    Mat r = Mat::Zero(cols, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        const double original = m.col(j).norm();
        // two passes of modified Gram-Schmidt keep Q orthogonal to working precision
        for (int pass = 0; pass < 2; ++pass) {
            for (Eigen::Index i = 0; i < j; ++i) {
                const double c = q.col(i).dot(q.col(j));
                r(i, j) += c;
                q.col(j) -= c * q.col(i);
            }
        }
        const double rjj = q.col(j).norm();
        if (!(rjj > rank_threshold * std::max(original, 1e-300)) || original == 0.0) {
            throw Error(ErrorKind::DegenerateBasis,
                        "gram_schmidt_qr: column " + std::to_string(j) + " is dependent on earlier columns");
        }
        r(j, j) = rjj;
        q.col(j) /= rjj;
    }
    return {q, r};
}

Mat spd_sqrt(const Mat& u, double floor) {
    require_finite(u, "spd_sqrt");
    if (u.rows() != u.cols()) throw Error(ErrorKind::NotPositiveDefinite, "spd_sqrt: matrix is not square");
    const double scale = std::max(1.0, u.cwiseAbs().maxCoeff());
    if ((u - u.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw Error(ErrorKind::NotPositiveDefinite, "spd_sqrt: matrix is not symmetric");
    }
    const Mat sym = 0.5 * (u + u.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> eig(sym);
    const Vec& lambda = eig.eigenvalues();
    const double lmax = lambda.maxCoeff();
    if (!(lambda.minCoeff() > floor * std::max(lmax, 0.0)) || lmax <= 0.0) {
        throw Error(ErrorKind::NotPositiveDefinite, "spd_sqrt: smallest eigenvalue below floor");
    }
    const Mat& v = eig.eigenvectors();
    Mat root = v * lambda.cwiseSqrt().asDiagonal() * v.transpose();
    return 0.5 * (root + root.transpose());
}

Mat expm(const Mat& a) {
    require_finite(a, "expm");
    return expm_impl(a);
}

CMat expm(const CMat& a) {
    require_finite(a, "expm");
    return expm_impl(a);
}

namespace {

struct EigenLog {
    CMat log;
    bool negative_axis = false;
    bool ok = false;
};

EigenLog eigen_log(const Mat& m, const LogOptions& opts) {
    EigenLog out;
    Eigen::ComplexEigenSolver<CMat> ces(m.cast<cplx>());
    if (ces.info() != Eigen::Success) return out;
    const CMat& v = ces.eigenvectors();
    Eigen::JacobiSVD<CMat> vsvd(v);
    const auto& sv = vsvd.singularValues();
    if (!(sv(sv.size() - 1) > 1e-8 * sv(0))) return out;

    CVec logs(m.rows());
    for (Eigen::Index i = 0; i < logs.size(); ++i) {
        cplx lambda = ces.eigenvalues()(i);
        if (lambda.real() < 0.0 && std::abs(lambda.imag()) <= opts.axis_tol * std::abs(lambda)) {
            lambda = cplx(lambda.real(), 0.0);  // argument exactly +pi
            out.negative_axis = true;
        }
        logs(i) = std::log(lambda);
    }
    out.log = v * logs.asDiagonal() * v.inverse();
    out.ok = out.log.allFinite();
    return out;
}

}  // namespace

LogResult principal_log(const Mat& m, const LogOptions& opts) {
    require_finite(m, "principal_log");
    if (m.rows() != m.cols()) throw Error(ErrorKind::InvalidInput, "principal_log: matrix is not square");
    Eigen::JacobiSVD<Mat> svd(m);
    const auto& s = svd.singularValues();
    if (!(s(s.size() - 1) > opts.singular_floor * std::max(1.0, s(0)))) {
        throw Error(ErrorKind::SingularMatrix, "principal_log: matrix is singular");
    }
    const double scale = std::max(1.0, s(0));

    auto accept = [&](const EigenLog& el, const Mat& target, LogResult& out) {
        if (!el.ok) return false;
        const double res = operator_norm_2(CMat(expm(el.log) - target.cast<cplx>()));
        if (res > opts.residual_tol * scale) return false;
        out.log = el.log;
        out.negative_axis_branch = el.negative_axis;
        out.residual = res;
        return true;
    };

    LogResult result;
    if (accept(eigen_log(m, opts), m, result)) return result;

    // Defective input: diagonalize a nearby matrix instead of building Jordan forms.
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int attempt = 0; attempt < 4; ++attempt) {
        Mat e(m.rows(), m.cols());
        for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = normal(rng);
        const double size = opts.perturbation_scale * scale;
        const Mat perturbed = m + (size / operator_norm_2(e)) * e;
        LogResult trial;
        EigenLog el = eigen_log(perturbed, opts);
        if (!el.ok) continue;
        const double res = operator_norm_2(CMat(expm(el.log) - m.cast<cplx>()));
        // the perturbation itself is amplified by the eigenvector conditioning
        if (res > std::max(opts.residual_tol, 1e-4) * scale) continue;
        trial.log = el.log;
        trial.negative_axis_branch = el.negative_axis;
        trial.perturbation = size;
        trial.residual = res;
        return trial;
    }
    throw Error(ErrorKind::DefectiveLog, "principal_log: matrix is defective beyond perturbation tolerance");
}

ProjectionMatrix canonical_projection(int r, int n) {
    if (n <= 0 || r < 0 || r > n) {
        throw Error(ErrorKind::InvalidInput,
                    "canonical_projection: need 0 <= r <= n, got r=" + std::to_string(r) + ", n=" + std::to_string(n));
    }
    ProjectionMatrix p;
    p.base = Mat::Zero(n, n);
    for (int i = 0; i < r; ++i) p.base(i, i) = 1.0;
    p.rank = r;
    p.idempotency_residual = 0.0;
    return p;
}

ProjectionMatrix make_projection(const Mat& p, double tol) {
    require_finite(p, "make_projection");
    if (p.rows() != p.cols()) throw Error(ErrorKind::InvalidInput, "make_projection: matrix is not square");
    ProjectionMatrix out;
    out.base = p;
    out.idempotency_residual = p.rows() == 0 ? 0.0 : operator_norm_2(Mat(p * p - p));
    if (out.idempotency_residual > tol * std::max(1.0, operator_norm_2(p))) {
        throw Error(ErrorKind::InvalidInput, "make_projection: P^2 != P (residual " +
                                                 std::to_string(out.idempotency_residual) + ")");
    }
    Eigen::ComplexEigenSolver<CMat> ces(p.cast<cplx>(), false);
    int rank = 0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        if (std::abs(ces.eigenvalues()(i) - cplx(1.0, 0.0)) < 0.5) ++rank;
    }
    out.rank = rank;
    return out;
}

ProjectionMatrix projection_from_subspaces(const Mat& image, const Mat& kernel) {
    const auto n = image.rows();
    if (kernel.rows() != n || image.cols() + kernel.cols() != n) {
        throw Error(ErrorKind::InvalidInput, "projection_from_subspaces: bases do not split R^n");
    }
    Mat basis(n, n);
    basis << image, kernel;
    if (condition_number_2(basis) > 1e12) {
        throw Error(ErrorKind::DegenerateBasis, "projection_from_subspaces: subspaces are not complementary");
    }
    const Mat pr = canonical_projection(static_cast<int>(image.cols()), static_cast<int>(n)).base;
    return make_projection(basis * pr * basis.inverse(), 1e-6);
}

Mat orthonormalize(const Mat& m) {
    if (m.cols() == 0) return Mat(m.rows(), 0);
    return gram_schmidt_qr(m, 1e-10).q;
}

ProjectionMatrix orthogonal_projection(const Mat& basis, int n) {
    ProjectionMatrix out;
    if (basis.cols() == 0) {
        out.base = Mat::Zero(n, n);
    } else {
        const Mat q = orthonormalize(basis);
        out.base = q * q.transpose();
    }
    out.rank = static_cast<int>(basis.cols());
    out.idempotency_residual = operator_norm_2(Mat(out.base * out.base - out.base));
    return out;
}

Mat orthonormal_complement(const Mat& basis, int n) {
    if (basis.cols() == 0) return Mat::Identity(n, n);
    const Mat q = orthonormalize(basis);
    const Mat proj = Mat::Identity(n, n) - q * q.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (proj + proj.transpose()));
    const auto k = n - q.cols();
    // eigenvalues ascend; the complement sits at eigenvalue 1
    return eig.eigenvectors().rightCols(k);
}

double smallest_principal_angle(const Mat& a, const Mat& b) {
    if (a.cols() == 0 || b.cols() == 0) return std::numbers::pi / 2;
    const Mat qa = orthonormalize(a);
    const Mat qb = orthonormalize(b);
    Eigen::JacobiSVD<Mat> svd(qa.transpose() * qb);
    const double c = std::clamp(svd.singularValues()(0), 0.0, 1.0);
    return std::acos(c);
}

}  // namespace dlab
