#include <doctest.h>

#include "dlab/error.hpp"
#include "dlab/propagate.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace dlab;

namespace {

Mat my_closed_form(double t) {
    Mat x(2, 2);
    x << std::exp(t / 2) * std::cos(t), std::exp(-t) * std::sin(t), -std::exp(t / 2) * std::sin(t),
        std::exp(-t) * std::cos(t);
    return x;
}

Mat rotation(double th) {
    Mat r(2, 2);
    r << std::cos(th), std::sin(th), -std::sin(th), std::cos(th);
    return r;
}

LinearSystem scalar(double a) { return constant_system("scalar", Mat::Constant(1, 1, a)); }

}  // namespace

TEST_CASE("integrate_ivp examples") {
    Vec v(2);
    v << 1.5, -2.0;
    auto zero = constant_system("zero", Mat::Zero(2, 2));
    auto tr = integrate_ivp(zero, 0.0, v, 7.0, 1e-10);
    for (const auto& s : tr.states()) CHECK((s - v).norm() == 0.0);

    Vec one = Vec::Ones(1);
    auto e = integrate_ivp(scalar(1.0), 0.0, one, 1.0, 1e-10);
    CHECK(std::fabs(e.final_state()(0) - std::exp(1.0)) < 1e-8);

    auto my = linear_part(builtin("markus_yamabe"));
    Vec x0(2);
    x0 << 1, 0;
    auto m = integrate_ivp(my, 0.0, x0, 2.0, 1e-10);
    Vec expect(2);
    expect << std::exp(1.0) * std::cos(2.0), -std::exp(1.0) * std::sin(2.0);
    CHECK((m.final_state() - expect).norm() < 1e-8);
}

TEST_CASE("dense output and backward runs") {
    auto my = linear_part(builtin("markus_yamabe"));
    Vec x0(2);
    x0 << 1, 0;
    auto fwd = integrate_ivp(my, 0.0, x0, 5.0, 1e-11);
    for (double t = 0.0; t <= 5.0; t += 0.137) {
        CHECK((fwd.at(t) - my_closed_form(t).col(0)).norm() < 1e-7 * std::exp(t / 2));
    }
    Vec xb = my_closed_form(-3.0).col(1);
    auto back = integrate_ivp(my, 0.0, Vec(my_closed_form(0.0).col(1)), -3.0, 1e-11);
    CHECK(back.backward());
    for (std::size_t k = 1; k < back.times().size(); ++k) CHECK(back.times()[k] < back.times()[k - 1]);
    CHECK((back.final_state() - xb).norm() < 1e-7 * xb.norm());
    for (double t = 0.0; t >= -3.0; t -= 0.21) {
        CHECK((back.at(t) - my_closed_form(t).col(1)).norm() < 1e-7 * std::exp(-t));
    }
    CHECK_THROWS_AS(back.at(1.0), Error);
}

TEST_CASE("integration failures") {
    auto lin_t = linear_part(builtin("scalar_linear_t"));
    try {
        integrate_ivp(lin_t, 0.0, Vec::Ones(1), 1e9, 1e-8);
        FAIL("expected Blowup");
    } catch (const IntegrationError& e) {
        CHECK(e.kind() == ErrorKind::Blowup);
        CHECK(e.last_valid_time() > 30.0);
        CHECK(e.last_valid_time() < 1e9);
    }
    Rhs stiff = [](double, const Vec& x, Vec& dx) { dx = -1e9 * x; };
    IntegratorOptions o;
    o.max_steps = 2000;
    try {
        integrate_ivp(stiff, 0.0, Vec::Ones(1), 100.0, o);
        FAIL("expected StiffnessFailure");
    } catch (const IntegrationError& e) {
        CHECK(e.kind() == ErrorKind::StiffnessFailure);
    }
}

TEST_CASE("transition_matrix examples") {
    auto my = linear_part(builtin("markus_yamabe"));
    CHECK((transition_matrix(my, 1.3, 1.3).x - Mat::Identity(2, 2)).norm() == 0.0);
    auto x = transition_matrix(my, std::numbers::pi / 2, 0.0, 1e-11).x;
    Mat expect(2, 2);
    expect << 0, std::exp(-std::numbers::pi / 2), -std::exp(std::numbers::pi / 4), 0;
    CHECK((x - expect).norm() < 1e-8);

    auto anti = linear_part(builtin("antisym_exp"));
    for (double t : {0.5, 1.0, 2.0}) {
        auto xa = transition_matrix(anti, t, 0.0, 1e-11).x;
        CHECK((xa - rotation(std::exp(t) - 1.0)).norm() < 1e-7);
    }
}

TEST_CASE("liouville and adjoint checks") {
    auto my = linear_part(builtin("markus_yamabe"));
    auto l = liouville_check(my, 0.0, 2.0);
    CHECK(l.det_formula == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
    CHECK(l.rel_err < 1e-6);
    auto anti = linear_part(builtin("antisym_exp"));
    auto la = liouville_check(anti, -1.0, 2.0);
    CHECK(la.det_formula == doctest::Approx(1.0));
    CHECK(la.rel_err < 1e-6);
    auto lz = liouville_check(constant_system("z", Mat::Zero(3, 3)), 0.0, 4.0);
    CHECK(lz.det_numeric == 1.0);
    CHECK(lz.det_formula == 1.0);

    CHECK(adjoint_check(anti, linspace(0.0, 2.5, 40)) < 1e-8);
    CHECK(adjoint_check(scalar(1.0), linspace(0.0, 5.0, 20), 1e-12) < 1e-10);
    CHECK(adjoint_check(my, linspace(0.0, 3.0, 30)) < 1e-6);
}

TEST_CASE("sylvester flow examples") {
    auto z = constant_system("z", Mat::Zero(2, 2));
    CHECK((sylvester_flow(z, z, nullptr, Mat::Identity(2, 2), 0.0, 3.0) - Mat::Identity(2, 2)).norm() == 0.0);
    auto my = linear_part(builtin("markus_yamabe"));
    CHECK((sylvester_flow(my, my, nullptr, Mat::Identity(2, 2), 0.0, 2.0) - Mat::Identity(2, 2)).norm() < 1e-8);
    Mat q = sylvester_flow(scalar(1.0), scalar(-1.0), nullptr, Mat::Ones(1, 1), 0.0, 1.0);
    CHECK(q(0, 0) == doctest::Approx(std::exp(2.0)).epsilon(1e-9));

    // forced case against the representation formula
    auto forcing = [](double t) {
        Mat f(2, 2);
        f << std::cos(t), 1.0, 0.0, std::sin(2 * t);
        return f;
    };
    auto anti = linear_part(builtin("antisym_exp"));
    Mat q0(2, 2);
    q0 << 1, 2, 3, 4;
    Mat direct = sylvester_flow(my, anti, forcing, q0, 0.0, 1.5);
    Mat repr = sylvester_representation(my, anti, forcing, q0, 0.0, 1.5);
    CHECK((direct - repr).norm() < 1e-7 * direct.norm());
}

TEST_CASE("bounded growth fit examples") {
    auto fz = bounded_growth_fit(constant_system("z", Mat::Zero(2, 2)), linspace(0, 5, 11), GrowthMode::Both);
    CHECK(fz.k == 1.0);
    CHECK(fz.alpha == 0.0);
    CHECK(!fz.unbounded_suspected);

    auto my = linear_part(builtin("markus_yamabe"));
    double m = 0.0;
    for (double t : linspace(0, 2 * std::numbers::pi, 200)) m = std::max(m, operator_norm_2(my.coeff(t)));
    auto fm = bounded_growth_fit(my, linspace(0, 10, 41), GrowthMode::Both);
    CHECK(fm.alpha <= m + 0.05);
    CHECK(!fm.unbounded_suspected);

    auto two_t = linear_part(parse_system("dim = 1\nA = 2*t\n"));
    auto f2 = bounded_growth_fit(two_t, linspace(0, 5, 26), GrowthMode::Both);
    CHECK(f2.unbounded_suspected);
}

TEST_CASE("csv export") {
    auto tr = integrate_matrix_ivp(constant_system("z", Mat::Zero(2, 2)), 0.0, Mat::Identity(2, 2), 1.0, 1e-10);
    std::ostringstream os;
    write_trajectory_csv(os, tr, 2);
    CHECK(os.str().rfind("t,X_11,X_12,X_21,X_22\n", 0) == 0);
    auto vt = integrate_ivp(scalar(1.0), 0.0, Vec::Ones(1), 0.5, 1e-10);
    std::ostringstream vs;
    write_trajectory_csv(vs, vt);
    CHECK(vs.str().rfind("t,x1\n0,1\n", 0) == 0);
}

TEST_CASE("quadrature helpers") {
    CHECK(adaptive_simpson([](double x) { return std::exp(x); }, 0, 1, 1e-12) ==
          doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-12));
    for (int m : {1, 2, 5, 8, 16}) {
        const auto& g = gauss_legendre(m);
        double s = 0.0, s2 = 0.0;
        for (int i = 0; i < m; ++i) {
            s += g.weights[i];
            s2 += g.weights[i] * std::pow(g.nodes[i], 2 * m - 2);
        }
        CHECK(s == doctest::Approx(2.0).epsilon(1e-14));
        CHECK(s2 == doctest::Approx(2.0 / (2 * m - 1)).epsilon(1e-12));
    }
}

// ---------------------------------------------------------------------------
// properties

TEST_CASE("property: cocycle and inverse identities") {
    std::mt19937 rng(6);
    std::uniform_real_distribution<double> ud(-2.0, 2.0);
    const double tol = 1e-10;
    const char* names[] = {"markus_yamabe", "antisym_exp", "scalar_arctan", "auto_diag_113", "palmer_tanh"};
    int count = 0;
    for (const char* name : names) {
        auto sys = linear_part(builtin(name));
        for (int k = 0; k < 10; ++k, ++count) {
            const double t = ud(rng), r = ud(rng), s = ud(rng);
            Mat xtr = transition_matrix(sys, t, r, tol).x;
            Mat xrs = transition_matrix(sys, r, s, tol).x;
            Mat xts = transition_matrix(sys, t, s, tol).x;
            Mat xst = transition_matrix(sys, s, t, tol).x;
            const double scale = std::max(1.0, operator_norm_2(xts));
            CHECK(operator_norm_2(Mat(xtr * xrs - xts)) <= 10 * tol * scale * std::max(1.0, operator_norm_2(xtr)) *
                                                               std::max(1.0, operator_norm_2(xrs)));
            CHECK(operator_norm_2(Mat(xts * xst - Mat::Identity(sys.dim(), sys.dim()))) <=
                  10 * tol * scale * std::max(1.0, operator_norm_2(xst)));
        }
    }
    CHECK(count == 50);
}

TEST_CASE("property: norm sandwich from the integral of ||A||") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> ud(-3.0, 3.0);
    for (const char* name : {"markus_yamabe", "antisym_exp", "scalar_arctan", "palmer_tanh"}) {
        auto sys = linear_part(builtin(name));
        for (int k = 0; k < 10; ++k) {
            const double t = ud(rng), t0 = ud(rng);
            const double integral =
                std::fabs(adaptive_simpson([&](double s) { return operator_norm_2(sys.coeff(s)); }, t0, t, 1e-10));
            const double nx = operator_norm_2(transition_matrix(sys, t, t0).x);
            CHECK(nx <= std::exp(integral) * (1 + 1e-8));
            CHECK(nx >= std::exp(-integral) * (1 - 1e-8));
            const double inv = 1.0 / operator_norm_2(transition_matrix(sys, t0, t).x);
            CHECK(inv <= std::exp(integral) * (1 + 1e-8));
            CHECK(inv >= std::exp(-integral) * (1 - 1e-8));
        }
    }
}

TEST_CASE("property: antisymmetric systems have orthogonal flows") {
    auto anti = linear_part(builtin("antisym_exp"));
    const double tol = 1e-10;
    std::mt19937 rng(8);
    std::uniform_real_distribution<double> ud(-3.0, 2.5);
    for (int k = 0; k < 30; ++k) {
        Mat x = transition_matrix(anti, ud(rng), 0.0, tol).x;
        CHECK(operator_norm_2(Mat(x.transpose() * x - Mat::Identity(2, 2))) <= 10 * tol);
    }
}

TEST_CASE("property: adjoint constancy") {
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> ud(-3.0, 3.0);
    for (const auto& entry : catalog()) {
        auto sys = linear_part(builtin(entry.name));
        CAPTURE(entry.name);
        const double span = entry.name == "scalar_linear_t" ? 1.0 : 3.0;
        for (int k = 0; k < 3; ++k) {
            const double a = ud(rng) * span / 3.0;
            CHECK(adjoint_check(sys, linspace(a, a + span, 16)) <= 1e-6);
        }
    }
}
