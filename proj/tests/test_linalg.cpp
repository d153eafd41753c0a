#include <doctest.h>

#include "dlab/error.hpp"
#include "dlab/linalg.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace dlab;

namespace {

Mat rotation(double th) {
    Mat r(2, 2);
    r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    return r;
}

Mat random_orthogonal(std::mt19937& rng, int n) {
    std::normal_distribution<double> nd;
    Mat m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = nd(rng);
    return gram_schmidt_qr(m).q;
}

}  // namespace

TEST_CASE("operator norm examples") {
    CHECK(operator_norm_2(Mat(Mat::Identity(3, 3))) == doctest::Approx(1.0));
    Mat d = Mat::Zero(2, 2);
    d(0, 0) = 2;
    d(1, 1) = -3;
    CHECK(operator_norm_2(d) == doctest::Approx(3.0));
    Mat j(2, 2);
    j << 1, 1, 0, 1;
    // largest root of l^2 - 3l + 1
    CHECK(operator_norm_2(j) == doctest::Approx(std::sqrt((3.0 + std::sqrt(5.0)) / 2.0)).epsilon(1e-12));
    Mat bad = Mat::Identity(2, 2);
    bad(0, 1) = NAN;
    CHECK_THROWS_AS(operator_norm_2(bad), Error);
}

TEST_CASE("gram schmidt examples") {
    auto f = gram_schmidt_qr(Mat::Identity(3, 3));
    CHECK((f.q - Mat::Identity(3, 3)).norm() < 1e-14);
    auto g = gram_schmidt_qr(rotation(0.3));
    CHECK((g.q - rotation(0.3)).norm() < 1e-14);
    CHECK((g.r - Mat::Identity(2, 2)).norm() < 1e-14);
    Mat j(2, 2);
    j << 1, 1, 0, 1;
    auto h = gram_schmidt_qr(j);
    CHECK((h.r - j).norm() < 1e-14);
    Mat sing(2, 2);
    sing << 1, 2, 2, 4;
    try {
        gram_schmidt_qr(sing);
        FAIL("expected DegenerateBasis");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateBasis);
    }
}

TEST_CASE("spd sqrt examples") {
    CHECK((spd_sqrt(Mat::Identity(2, 2)) - Mat::Identity(2, 2)).norm() < 1e-14);
    Mat d = Mat::Zero(2, 2);
    d(0, 0) = 4;
    d(1, 1) = 9;
    Mat r = spd_sqrt(d);
    CHECK(r(0, 0) == doctest::Approx(2.0));
    CHECK(r(1, 1) == doctest::Approx(3.0));
    Mat u(2, 2);
    u << 2, 1, 1, 2;
    Mat s = spd_sqrt(u);
    Vec v1(2), v2(2);
    v1 << 1, -1;
    v2 << 1, 1;
    CHECK((s * v1 - 1.0 * v1).norm() < 1e-12);
    CHECK((s * v2 - std::sqrt(3.0) * v2).norm() < 1e-12);
    Mat indef(2, 2);
    indef << 1, 0, 0, -1;
    try {
        spd_sqrt(indef);
        FAIL("expected NotPositiveDefinite");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NotPositiveDefinite);
    }
}

TEST_CASE("principal log examples") {
    CHECK(principal_log(Mat::Identity(2, 2)).log.norm() < 1e-14);
    Mat d = Mat::Zero(2, 2);
    d(0, 0) = std::exp(2.0);
    d(1, 1) = std::exp(-1.0);
    auto l = principal_log(d);
    CHECK(std::abs(l.log(0, 0) - cplx(2.0)) < 1e-12);
    CHECK(std::abs(l.log(1, 1) - cplx(-1.0)) < 1e-12);
    auto r = principal_log(rotation(std::numbers::pi / 3));
    Mat expect(2, 2);
    expect << 0, -std::numbers::pi / 3, std::numbers::pi / 3, 0;
    CHECK((r.log - expect.cast<cplx>()).norm() < 1e-12);
    CHECK(!r.negative_axis_branch);

    // negative real axis: the result is complex and flagged
    Mat neg = -Mat::Identity(2, 2);
    auto n = principal_log(neg);
    CHECK(n.negative_axis_branch);
    CHECK((expm(n.log) - neg.cast<cplx>()).norm() < 1e-10);

    // defective input goes through the perturbation route
    Mat jb(2, 2);
    jb << 2, 1, 0, 2;
    auto dj = principal_log(jb);
    CHECK(dj.residual < 1e-4);

    Mat sing = Mat::Zero(2, 2);
    sing(0, 0) = 1;
    try {
        principal_log(sing);
        FAIL("expected SingularMatrix");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::SingularMatrix);
    }
}

TEST_CASE("canonical projection examples") {
    auto p0 = canonical_projection(0, 2);
    CHECK(p0.rank == 0);
    CHECK(p0.base.norm() == 0.0);
    auto p2 = canonical_projection(2, 2);
    CHECK(p2.rank == 2);
    CHECK((p2.base - Mat::Identity(2, 2)).norm() == 0.0);
    auto p1 = canonical_projection(1, 3);
    CHECK(p1.rank == 1);
    CHECK(p1.base(0, 0) == 1.0);
    CHECK(p1.base.sum() == 1.0);
    CHECK_THROWS_AS(canonical_projection(3, 2), Error);
}

TEST_CASE("oblique projection from subspaces") {
    Mat im(2, 1), ker(2, 1);
    im << 1, 0;
    ker << 1, 1;
    auto p = projection_from_subspaces(im, ker);
    CHECK(p.rank == 1);
    CHECK((p.base * p.base - p.base).norm() < 1e-14);
    CHECK((p.base * ker).norm() < 1e-14);
    CHECK((p.base * im - im).norm() < 1e-14);
}

TEST_CASE("property: random orthogonal matrices have unit norm") {
    std::mt19937 rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + trial % 6;
        CHECK(std::fabs(operator_norm_2(random_orthogonal(rng, n)) - 1.0) < 1e-10);
    }
}

TEST_CASE("property: spd sqrt reproduces U and commutes with commuting projections") {
    std::mt19937 rng(2);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(0.1, 10.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + trial % 4;
        // U block diagonal in an orthonormal frame, so U commutes with the
        // matching projection
        const int r = 1 + trial % (n - 1);
        Mat q = random_orthogonal(rng, n);
        Mat g1(r, r), g2(n - r, n - r);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j) g1(i, j) = nd(rng);
        for (int i = 0; i < n - r; ++i)
            for (int j = 0; j < n - r; ++j) g2(i, j) = nd(rng);
        Mat core = Mat::Zero(n, n);
        core.topLeftCorner(r, r) = g1 * g1.transpose() + ud(rng) * Mat::Identity(r, r);
        core.bottomRightCorner(n - r, n - r) = g2 * g2.transpose() + ud(rng) * Mat::Identity(n - r, n - r);
        Mat u = q * core * q.transpose();
        u = 0.5 * (u + u.transpose());
        Mat p = q * canonical_projection(r, n).base * q.transpose();
        REQUIRE(operator_norm_2(Mat(u * p - p * u)) < 1e-10);
        Mat s = spd_sqrt(u);
        CHECK(operator_norm_2(Mat(s * s - u)) <= 1e-8 * operator_norm_2(u));
        CHECK(operator_norm_2(Mat(s * p - p * s)) < 1e-9);
    }
}

TEST_CASE("property: exp(log M) = M off the negative axis") {
    std::mt19937 rng(3);
    std::normal_distribution<double> nd;
    int tested = 0;
    for (int trial = 0; trial < 300 && tested < 150; ++trial) {
        const int n = 1 + trial % 5;
        Mat a(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) a(i, j) = 0.5 * nd(rng);
        Mat m = expm(a);  // never has eigenvalues on the closed negative axis
        auto l = principal_log(m);
        if (l.negative_axis_branch) continue;
        ++tested;
        CHECK(operator_norm_2(CMat(expm(l.log) - m.cast<cplx>())) <= 1e-8 * std::max(1.0, operator_norm_2(m)));
    }
    CHECK(tested > 100);
}
