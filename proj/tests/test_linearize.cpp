#include <doctest.h>

#include "dlab/error.hpp"
#include "dlab/linearize.hpp"
#include "dlab/propagate.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace dlab;

namespace {

QuasilinearSystem palmer() { return *quasilinear_part(builtin("palmer_demo")); }

LinearSystem minus_one() { return constant_system("decay", Mat::Constant(1, 1, -1.0)); }

QuasilinearSystem constant_forcing(double c) {
    return QuasilinearSystem(minus_one(), [c](double, const Vec&) { return Vec::Constant(1, c); }, std::fabs(c), 0.0);
}

DichotomyCertificate contraction_cert(const LinearSystem& sys) {
    auto cert = certify(sys, canonical_projection(1, 1), 0, 10);
    REQUIRE(cert.verified());
    return cert;
}

Vec v1(double x) { return Vec::Constant(1, x); }

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error thrown");
    return ErrorKind::InvalidInput;
}

}  // namespace

TEST_SUITE("linearize") {

TEST_CASE("make_context constants") {
    auto q = palmer();
    auto cert = contraction_cert(q.linear());
    CHECK(cert.k == doctest::Approx(1.0).epsilon(0.05));
    CHECK(cert.alpha == doctest::Approx(1.0).epsilon(0.05));
    auto ctx = make_context(q, cert, 1e-6, LinearizationMode::FullLine);
    CHECK(ctx.gap_factor == doctest::Approx(2 * cert.k * 0.1 / cert.alpha));
    CHECK(ctx.gap_factor < 0.25);
    const double l = std::log(2 * 0.1 * cert.k / (cert.alpha * 1e-6)) / cert.alpha;
    CHECK(ctx.window == doctest::Approx(l));
    CHECK(ctx.window == doctest::Approx(12.2).epsilon(0.02));
    CHECK_FALSE(ctx.cond_limited);

    CHECK(kind_of([&] { make_context(q.with_constants(0.1, 0.6), cert, 1e-6, LinearizationMode::HalfLinePlus); }) ==
          ErrorKind::GapViolation);

    auto my = linear_part(builtin("markus_yamabe"));
    Mat p(2, 2);
    p << 0, 0, 0, 1;
    auto mycert = certify(my, make_projection(p), -6, 6);
    QuasilinearSystem myq(my, [](double, const Vec& y) { return Vec(0.01 * y.array().sin()); }, 0.01, 0.01);
    CHECK(kind_of([&] { make_context(myq, mycert, 1e-6, LinearizationMode::HalfLinePlus); }) ==
          ErrorKind::ProjectorMismatch);

    DichotomyCertificate bad = cert;
    bad.flag = CertFlag::Violated;
    CHECK(kind_of([&] { make_context(q, bad, 1e-6, LinearizationMode::FullLine); }) ==
          ErrorKind::CertificateRequired);
}

TEST_CASE("zero perturbation gives identity maps") {
    QuasilinearSystem zero(minus_one(), [](double, const Vec& y) { return Vec(Vec::Zero(y.size())); }, 0.0, 0.0);
    auto cert = contraction_cert(zero.linear());
    for (auto mode : {LinearizationMode::HalfLinePlus, LinearizationMode::FullLine}) {
        auto ctx = make_context(zero, cert, 1e-8, mode);
        auto h = eval_h(ctx, 3.0, v1(0.4));
        CHECK(h.iterations == 1);
        CHECK(h.output(0) == doctest::Approx(0.4));
        CHECK(eval_g(ctx, 3.0, v1(0.4)).output(0) == doctest::Approx(0.4));
        CHECK(inverse_residual(ctx, 1.0, v1(-0.2)) < 1e-14);
    }
    auto ctx = make_context(zero, cert, 1e-8, LinearizationMode::HalfLinePlus);
    auto jac = g_jacobian(ctx, 2.0, v1(0.3));
    CHECK(jac.jacobian(0, 0) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(conjugacy_residual(ctx, 0.0, v1(1.0), 3.0) < 1e-8);
}

TEST_CASE("constant forcing on the half-line") {
    const double c = 0.3;
    auto q = constant_forcing(c);
    auto ctx = make_context(q, contraction_cert(q.linear()), 1e-8, LinearizationMode::HalfLinePlus);
    for (double t : {0.0, 0.5, 2.0, 7.0}) {
        CAPTURE(t);
        CHECK(eval_h(ctx, t, v1(0.2)).output(0) == doctest::Approx(0.2 + c * (1 - std::exp(-t))).epsilon(1e-10));
        CHECK(eval_g(ctx, t, v1(0.2)).output(0) == doctest::Approx(0.2 - c * (1 - std::exp(-t))).epsilon(1e-10));
        CHECK(inverse_residual(ctx, t, v1(-0.6)) <= 2e-8);
    }
    CHECK(conjugacy_residual(ctx, 1.0, v1(0.7), 4.0) <= 1e-7);
    auto jac = g_jacobian(ctx, 3.0, v1(0.1));
    CHECK(jac.jacobian(0, 0) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(jac.determinant == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("palmer_demo against the flow oracles") {
    auto q = palmer();
    auto ctx = make_context(q, contraction_cert(q.linear()), 1e-6, LinearizationMode::HalfLinePlus);
    // G(t, eta) = X(t,0) y(0, t, eta) and H(t, xi) = y(t, 0, X(0,t) xi)
    const double t = 2.0;
    auto g = eval_g(ctx, t, v1(0.7));
    const double y0 = integrate_quasilinear(q, t, v1(0.7), 0.0, 1e-12).final_state()(0);
    CHECK(g.output(0) == doctest::Approx(std::exp(-t) * y0).epsilon(1e-9));
    CHECK(std::fabs(g.output(0) - 0.7) <= ctx.displacement_bound + ctx.eps);

    auto h = eval_h(ctx, t, v1(0.5));
    const double yt = integrate_quasilinear(q, 0.0, v1(0.5 * std::exp(t)), t, 1e-12).final_state()(0);
    CHECK(h.output(0) == doctest::Approx(yt).epsilon(1e-6));
    const double bound = std::ceil(std::log(ctx.eps * 0.8) / std::log(ctx.gap_factor)) + 1;
    CHECK(h.iterations <= bound);

    auto jac = g_jacobian(ctx, 1.0, v1(0.3));
    CHECK(jac.determinant > 0);
    CHECK(jac.liouville_determinant == doctest::Approx(jac.determinant).epsilon(1e-6));
    const double d = 1e-4;
    const double fd = (eval_g(ctx, 1.0, v1(0.3 + d)).output(0) - eval_g(ctx, 1.0, v1(0.3 - d)).output(0)) / (2 * d);
    CHECK(std::fabs(fd - jac.jacobian(0, 0)) <= 1e-4);

    CHECK(kind_of([&] { eval_g(ctx, -1.0, v1(0.1)); }) == ErrorKind::DomainError);
}

TEST_CASE("palmer_demo on a full-line window") {
    auto q = palmer();
    auto ctx = make_context(q, contraction_cert(q.linear()), 1e-4, LinearizationMode::FullLine);
    for (double t : {0.0, 1.5}) {
        auto h = eval_h(ctx, t, v1(0.8));
        CHECK_FALSE(h.window_capped);
        CHECK(h.window_hi - h.window_lo == doctest::Approx(2 * ctx.window));
        CHECK(std::fabs(h.output(0) - 0.8) <= ctx.displacement_bound + ctx.eps);
        CHECK(inverse_residual(ctx, t, v1(0.8)) <= 10 * ctx.eps);
    }
    CHECK(conjugacy_residual(ctx, 0.0, v1(1.0), 2.0, 4) <= 50 * ctx.eps);
    CHECK(kind_of([&] { g_jacobian(ctx, 1.0, v1(0.1)); }) == ErrorKind::InvalidInput);
}

TEST_CASE("property: palmer_demo probes") {
    auto q = palmer();
    auto ctx = make_context(q, contraction_cert(q.linear()), 1e-6, LinearizationMode::HalfLinePlus);
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> ut(0, 10), up(-2, 2);
    std::vector<MapEvaluation> evals;
    for (int i = 0; i < 12; ++i) {
        const double t = ut(rng);
        const Vec p = v1(up(rng));
        CAPTURE(t);
        auto h = eval_h(ctx, t, p);
        auto g = eval_g(ctx, t, p);
        CHECK((h.output - p).norm() <= ctx.displacement_bound + ctx.eps);
        CHECK((g.output - p).norm() <= ctx.displacement_bound + ctx.eps);
        CHECK(h.iterations <= 10);
        for (std::size_t j = 2; j < h.changes.size(); ++j) {
            if (h.changes[j - 1] > 1e-13) CHECK(h.changes[j] <= (ctx.gap_factor + 0.05) * h.changes[j - 1]);
        }
        CHECK(inverse_residual(ctx, t, p) <= 1e-5);
        // continuity on the half-line window [0, t]
        const double delta = 1e-3;
        const double dg = (eval_g(ctx, t, Vec(p.array() + delta)).output - g.output).norm();
        CHECK(dg <= continuity_constant(ctx, t) * delta + ctx.eps);
        evals.push_back(h);
    }
    CHECK(conjugacy_residual(ctx, 3.0, v1(1.2), 5.0) <= 5e-5);

    std::ostringstream csv;
    write_map_csv(csv, evals);
    CHECK(csv.str().rfind("t,p1,out1,iterations,residual\n", 0) == 0);
}

}  // TEST_SUITE
