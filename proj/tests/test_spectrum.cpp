#include <doctest.h>

#include "dlab/dichotomy.hpp"
#include "dlab/error.hpp"
#include "dlab/propagate.hpp"
#include "dlab/spectrum.hpp"

#include <cmath>
#include <numbers>

using namespace dlab;

namespace {

LinearSystem lin(const char* name) { return linear_part(builtin(name)); }

LinearSystem scalar_fn(std::function<double(double)> a) {
    return LinearSystem("scalar", 1, [a](double t) { return Mat::Constant(1, 1, a(t)); });
}

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error thrown");
    return ErrorKind::InvalidInput;
}

Mat rotation(double th) {
    Mat r(2, 2);
    r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    return r;
}

bool near_point(const SpectralInterval& iv, double x, double tol) {
    return std::fabs(iv.lo - x) <= tol && std::fabs(iv.hi - x) <= tol;
}

}  // namespace

TEST_SUITE("spectrum") {

TEST_CASE("perron_triangularize examples") {
    Mat a(2, 2);
    a << 1, 1, 0, -1;
    auto tri = perron_triangularize(constant_system("ut", a), linspace(0, 5, 51));
    for (std::size_t k = 0; k < tri.grid.size(); ++k) {
        CHECK(tri.b_diag(k, 0) == doctest::Approx(1).epsilon(1e-8));
        CHECK(tri.b_diag(k, 1) == doctest::Approx(-1).epsilon(1e-8));
        CHECK((tri.q[k] - Mat::Identity(2, 2)).norm() < 1e-8);
    }

    // orthogonal flow: r_ii = 1
    auto anti = perron_triangularize(lin("antisym_exp"), linspace(0, 3, 61));
    CHECK(anti.b_cumulative.cwiseAbs().maxCoeff() < 1e-8);
    CHECK(anti.orthogonality_defect < 1e-10);

    // markus_yamabe: QR of the closed-form X(t) has log r_11 = t/2, log r_22 = -t
    auto my = perron_triangularize(lin("markus_yamabe"), linspace(0, 40, 401));
    CHECK(my.b_cumulative(400, 0) / 40 == doctest::Approx(0.5).epsilon(1e-3));
    CHECK(my.b_cumulative(400, 1) / 40 == doctest::Approx(-1.0).epsilon(1e-3));
    CHECK(my.offdiag_bound <= 3 * sampled_sup_norm(lin("markus_yamabe"), 0, 40) * (1 + 1e-8));
}

TEST_CASE("scalar_bohl examples") {
    auto c = scalar_bohl([](double) { return 0.7; }, 40, 8);
    CHECK(c.beta_minus == doctest::Approx(0.7));
    CHECK(c.beta_plus == doctest::Approx(0.7));

    const double l = 2 * std::numbers::pi * 2;
    auto p = scalar_bohl([](double t) { return 0.3 + std::cos(t); }, 60, l);
    CHECK(p.beta_minus == doctest::Approx(0.3).epsilon(1e-8));
    CHECK(p.beta_plus == doctest::Approx(0.3).epsilon(1e-8));

    auto t = scalar_bohl([](double s) { return s; }, 40, 8);
    CHECK(t.unbounded_above);
    CHECK_FALSE(t.unbounded_below);

    CHECK(kind_of([] { scalar_bohl([](double) { return 0.0; }, 10, 8); }) == ErrorKind::HorizonTooShort);

    // sampled version agrees with the function version
    auto g = linspace(0, 40, 4001);
    std::vector<double> v;
    for (double s : g) v.push_back(std::sin(s) / (1 + s));
    auto bs = scalar_bohl(g, v, 8);
    auto bf = scalar_bohl([](double s) { return std::sin(s) / (1 + s); }, 40, 8);
    CHECK(bs.beta_plus == doctest::Approx(bf.beta_plus).epsilon(1e-4));
}

TEST_CASE("halfline_spectrum examples") {
    auto ad = halfline_spectrum(lin("auto_diag_113"), 40, 8);
    REQUIRE(ad.intervals.size() == 2);
    CHECK(near_point(ad.intervals[0], -1, 0.05));
    CHECK(near_point(ad.intervals[1], 1, 0.05));
    REQUIRE(ad.gaps.size() == 3);
    CHECK(ad.gaps[0].rank == 0);
    CHECK(ad.gaps[1].rank == 1);
    CHECK(ad.gaps[2].rank == 3);
    for (const auto& g : ad.gaps) CHECK(g.rank != 2);

    auto ar = halfline_spectrum(lin("scalar_arctan"), 40, 8);
    REQUIRE(ar.intervals.size() == 1);
    CHECK(ar.intervals[0].lo >= -0.05);
    CHECK(ar.intervals[0].hi <= 0.05);

    auto my = halfline_spectrum(lin("markus_yamabe"), 40, 8);
    REQUIRE(my.intervals.size() == 2);
    CHECK(near_point(my.intervals[0], -1, 0.05));
    CHECK(near_point(my.intervals[1], 0.5, 0.05));

    auto lt = halfline_spectrum(lin("scalar_linear_t"), 40, 8);
    CHECK(lt.unbounded);
    CHECK_FALSE(lt.warnings.empty());

    CHECK(kind_of([] { halfline_spectrum(lin("auto_diag_113"), 10, 8); }) == ErrorKind::HorizonTooShort);
    CHECK(kind_of([] { halfline_spectrum(lin("auto_diag_113"), 40, 0); }) == ErrorKind::InvalidInput);
    CHECK(kind_of([] { halfline_spectrum(lin("coppel_counterexample"), 40, 8); }) ==
          ErrorKind::UnboundedCoefficients);
}

TEST_CASE("fullline_spectrum unites both half-lines") {
    auto tanh = lin("palmer_tanh");
    auto rep = fullline_spectrum(tanh, 40, 8);
    // forward rate -1, backward rate +1
    REQUIRE(rep.intervals.size() == 2);
    CHECK(near_point(rep.intervals[0], -1, 0.05));
    CHECK(near_point(rep.intervals[1], 1, 0.05));
    CHECK(rep.full_line);
}

TEST_CASE("shifted_dichotomy_test examples") {
    auto ad = lin("auto_diag_113");
    auto r0 = shifted_dichotomy_test(ad, 0.0, 40);
    CHECK(r0.verdict == ShiftVerdict::InResolvent);
    CHECK(r0.rank == 1);
    auto r2 = shifted_dichotomy_test(ad, 2.0, 40);
    CHECK(r2.verdict == ShiftVerdict::InResolvent);
    CHECK(r2.rank == 3);
    auto r1 = shifted_dichotomy_test(ad, 1.0, 40);
    CHECK(r1.verdict == ShiftVerdict::InSpectrum);
    CHECK_FALSE(r1.rank.has_value());
}

TEST_CASE("rank_step_function examples") {
    auto ad = rank_step_function(lin("auto_diag_113"), {-2, 0, 2}, 40);
    REQUIRE(ad.points.size() == 3);
    CHECK(ad.points[0].rank == 0);
    CHECK(ad.points[1].rank == 1);
    CHECK(ad.points[2].rank == 3);
    CHECK(ad.monotone);

    auto ar = rank_step_function(lin("scalar_arctan"), {-1, 1}, 40);
    CHECK(ar.points[0].rank == 0);
    CHECK(ar.points[1].rank == 1);

    CHECK(rank_step_function(ad.points.empty() ? lin("scalar_arctan") : lin("auto_diag_113"), {}, 40)
              .points.empty());
}

TEST_CASE("property: spectrum inside the growth bound") {
    for (const char* name : {"auto_diag_113", "markus_yamabe", "scalar_arctan", "periodic_scalar"}) {
        CAPTURE(name);
        auto sys = lin(name);
        // windows that are a multiple of the period for periodic_scalar
        const double l = sys.period() ? 4 * std::numbers::pi : 8.0;
        auto rep = halfline_spectrum(sys, 40, l);
        auto fit = bounded_growth_fit(sys, linspace(0, 40, 81), GrowthMode::Both);
        for (const auto& iv : rep.intervals) {
            CHECK(iv.lo >= -fit.alpha - 0.1);
            CHECK(iv.hi <= fit.alpha + 0.1);
        }
    }
}

TEST_CASE("property: shift equivariance") {
    for (const char* name : {"auto_diag_113", "markus_yamabe", "scalar_arctan"}) {
        CAPTURE(name);
        auto sys = lin(name);
        auto base = halfline_spectrum(sys, 40, 8);
        for (double c : {-0.7, 0.4}) {
            auto sh = halfline_spectrum(sys.shifted(-c), 40, 8);
            REQUIRE(sh.intervals.size() == base.intervals.size());
            for (std::size_t i = 0; i < sh.intervals.size(); ++i) {
                CHECK(std::fabs(sh.intervals[i].lo - base.intervals[i].lo - c) <= 0.1);
                CHECK(std::fabs(sh.intervals[i].hi - base.intervals[i].hi - c) <= 0.1);
            }
        }
    }
}

TEST_CASE("property: kinematic similarity by the antisym_exp rotation") {
    // y = Q(t)^T x with Q the orthogonal antisym_exp flow; its transition
    // matrix is Q(t)^T X(t,s) Q(s), composed exactly
    auto my = lin("markus_yamabe");
    StepFlow flow = [&](double t1, double t0) {
        return Mat(rotation(-(std::exp(t1) - 1)).transpose() * transition_matrix(my, t1, t0).x *
                   rotation(-(std::exp(t0) - 1)));
    };
    auto base = halfline_spectrum(my, 40, 8);
    auto conj = halfline_spectrum(2, flow, 40, 8);
    REQUIRE(conj.intervals.size() == base.intervals.size());
    for (std::size_t i = 0; i < conj.intervals.size(); ++i) {
        CHECK(std::fabs(conj.intervals[i].lo - base.intervals[i].lo) <= 0.1);
        CHECK(std::fabs(conj.intervals[i].hi - base.intervals[i].hi) <= 0.1);
    }
}

TEST_CASE("property: gaps agree with the shifted test") {
    for (const char* name : {"auto_diag_113", "markus_yamabe", "scalar_arctan"}) {
        CAPTURE(name);
        auto sys = lin(name);
        auto rep = halfline_spectrum(sys, 40, 8);
        for (const auto& g : rep.gaps) {
            const double lambda = std::isinf(g.lo) ? g.hi - 1 : std::isinf(g.hi) ? g.lo + 1 : 0.5 * (g.lo + g.hi);
            CAPTURE(lambda);
            auto r = shifted_dichotomy_test(sys, lambda, 40);
            CHECK(r.verdict == ShiftVerdict::InResolvent);
            CHECK(r.rank == g.rank);
        }
    }
}

TEST_CASE("property: report invariants") {
    for (const char* name : {"auto_diag_113", "markus_yamabe", "scalar_arctan", "periodic_scalar"}) {
        CAPTURE(name);
        auto sys = lin(name);
        auto rep = halfline_spectrum(sys, 40, 8);
        CHECK(rep.intervals.size() <= static_cast<std::size_t>(sys.dim()));
        for (std::size_t i = 0; i + 1 < rep.intervals.size(); ++i) {
            CHECK(rep.intervals[i].hi < rep.intervals[i + 1].lo);
        }
        for (std::size_t i = 0; i + 1 < rep.gaps.size(); ++i) CHECK(rep.gaps[i].rank <= rep.gaps[i + 1].rank);
        CHECK(rep.gaps.front().rank == 0);
        CHECK(rep.gaps.back().rank == sys.dim());
    }
}

}  // TEST_SUITE

TEST_SUITE("spectrum") {

TEST_CASE("property: rank monotone across resolvent grids") {
    for (const char* name : {"auto_diag_113", "markus_yamabe", "scalar_arctan"}) {
        CAPTURE(name);
        auto sys = lin(name);
        std::vector<double> lambdas;
        for (double l = -2.0; l <= 2.0 + 1e-9; l += 0.25) lambdas.push_back(l);
        auto sweep = rank_step_function(sys, lambdas, 40);
        CHECK(sweep.monotone);
        int last = -1;
        for (const auto& p : sweep.points) {
            if (!p.rank) continue;
            CHECK(*p.rank >= last);
            last = *p.rank;
        }
        CHECK(last == sys.dim());
    }
}

}  // TEST_SUITE
