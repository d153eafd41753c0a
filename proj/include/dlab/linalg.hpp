#pragma once

// Dense matrix utilities shared by every analysis module: operator norms,
// Gram-Schmidt QR, SPD square roots, principal logarithms, exponentials and
// projections. All functions are pure.

#include <Eigen/Dense>

#include <complex>
#include <cstdint>

namespace dlab {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using cplx = std::complex<double>;

/// Largest singular value. Throws InvalidInput on non-finite entries.
double operator_norm_2(const Mat& m);
double operator_norm_2(const CMat& m);

/// Ratio of extreme singular values; +inf for singular input.
double condition_number_2(const Mat& m);

struct QrFactors {
    Mat q;
    Mat r;
};

/// Modified Gram-Schmidt with one re-orthogonalization pass. Accepts m x k
/// input with k <= m; r is k x k upper triangular with r_ii > 0.
/// Throws DegenerateBasis when a column loses more than all but
/// `rank_threshold` of its norm to the previous columns.
QrFactors gram_schmidt_qr(const Mat& m, double rank_threshold = 1e-12);

/// Unique symmetric positive definite root of a symmetric positive definite
/// matrix. `floor` bounds the smallest eigenvalue relative to the largest.
Mat spd_sqrt(const Mat& u, double floor = 1e-14);

struct LogResult {
    CMat log;
    /// Some eigenvalue sat on the closed negative real axis; the branch with
    /// argument pi was used, so the logarithm is genuinely complex.
    bool negative_axis_branch = false;
    /// Size of the random perturbation applied to a defective input (0 if none).
    double perturbation = 0.0;
    /// ||exp(log) - M||_2
    double residual = 0.0;
};

struct LogOptions {
    double singular_floor = 1e-14;
    double axis_tol = 1e-10;
    double perturbation_scale = 1e-10;
    double residual_tol = 1e-8;
    std::uint64_t seed = 0;
};

/// Principal matrix logarithm via eigendecomposition. Throws SingularMatrix
/// for (numerically) singular input and DefectiveLog if even the perturbed
/// matrix cannot be diagonalized accurately.
LogResult principal_log(const Mat& m, const LogOptions& opts = {});

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
Mat expm(const Mat& a);
CMat expm(const CMat& a);

struct ProjectionMatrix {
    Mat base;
    int rank = 0;
    double idempotency_residual = 0.0;

    int dim() const { return static_cast<int>(base.rows()); }
    Mat complement() const { return Mat::Identity(base.rows(), base.cols()) - base; }
};

/// diag(I_r, 0) in dimension n.
ProjectionMatrix canonical_projection(int r, int n);

/// Validates idempotency of `p` to `tol` and counts eigenvalues near 1.
ProjectionMatrix make_projection(const Mat& p, double tol = 1e-8);

/// Oblique projection with range span(image) and kernel span(kernel); the
/// two column sets must together form a basis of R^n.
ProjectionMatrix projection_from_subspaces(const Mat& image, const Mat& kernel);

/// Orthogonal projection onto span(basis); basis may have zero columns.
ProjectionMatrix orthogonal_projection(const Mat& basis, int n);

/// Orthonormal basis (columns) of the orthogonal complement of span(basis).
Mat orthonormal_complement(const Mat& basis, int n);

/// Orthonormal basis of span(m) (columns); m must have full column rank.
Mat orthonormalize(const Mat& m);

/// Smallest principal angle between two subspaces given by column bases.
/// Returns pi/2 if either subspace is trivial.
double smallest_principal_angle(const Mat& a, const Mat& b);

}  // namespace dlab
