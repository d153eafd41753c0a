#pragma once

// Block diagonalization: the Coppel similarity S = Y R^{-1} for a dichotomy
// projector and the spectral-gap reduction into one block per interval.

#include "dlab/dichotomy.hpp"
#include "dlab/linalg.hpp"
#include "dlab/spectrum.hpp"
#include "dlab/system.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace dlab {

/// x = S(t) y turns x' = A(t)x into y' = B(t)y with B block diagonal.
/// The fundamental matrix of y' = By is R(t) (S = Y R^{-1} with Y the
/// frame-adapted fundamental matrix), so R is stored as well.
struct ReductionResult {
    std::vector<double> grid;
    std::size_t anchor_index = 0;
    std::vector<int> block_sizes;
    std::vector<Mat> s;
    std::vector<Mat> s_inv;
    std::vector<Mat> r;
    std::vector<Mat> b;
    double s_norm_bound = 0.0;
    double s_inv_norm_bound = 0.0;
    /// max over nodes of sqrt(||P(t)||^2 + ||I - P(t)||^2), for two blocks.
    double s_inv_predicted = 0.0;
    /// max ||S'(t_k) - A S + S B|| over interior nodes, S' by forward differences.
    double similarity_residual = 0.0;
    /// max ||R P - P R|| (two blocks).
    double commutation_defect = 0.0;
    /// max ||S P S^{-1} - P(t)|| (two blocks).
    double projector_defect = 0.0;
    /// largest off-block entry of any B sample.
    double offblock_max = 0.0;
    /// Bases at the anchor: the y-coordinates refer to these columns.
    Mat basis;
    /// Rank of the projector of a Coppel reduction (-1 for spectral ones).
    int rank = -1;

    int blocks() const { return static_cast<int>(block_sizes.size()); }
    int block_offset(int i) const;
};

/// Coppel reduction for a projector P at the grid node nearest to 0 (the
/// canonical form is reached through orthonormal bases of Im P and ker P).
/// Throws NotReducibleHere when log ||X(t)PX^{-1}(t)|| trends upward faster
/// than `growth_threshold` over the grid.
ReductionResult coppel_similarity(const LinearSystem& sys, const ProjectionMatrix& p, const std::vector<double>& grid,
                                  double tol = 1e-10, double growth_threshold = 0.05);

/// Certificates for the two diagonal blocks: the first with P = I
/// (contraction), the second with P = 0 (expansion). A block of size zero
/// yields no certificate. `alpha` pins the exponent (for instance to the
/// parent's).
std::pair<std::optional<DichotomyCertificate>, std::optional<DichotomyCertificate>> subsystem_dichotomies(
    const ReductionResult& res, std::optional<double> alpha = std::nullopt, const CertifyOptions& opts = {});

/// One block per bounded spectral interval, ordered from the left. Gap
/// shifts sit at gap midpoints; each must certify on the grid, else
/// GapNotCertified. A single interval gives the identity reduction.
ReductionResult spectral_block_diagonalize(const LinearSystem& sys, const SpectrumReport& spectrum,
                                           const std::vector<double>& grid, double tol = 1e-10);

/// Spectrum of block i recomputed from its fundamental matrix R_i. The
/// reduction grid must start at 0 and contain the nodes k*h of the spectrum
/// grid (uniform spacing 0.1 with L a multiple works).
SpectrumReport block_spectrum(const ReductionResult& res, int block, double window);

}  // namespace dlab
