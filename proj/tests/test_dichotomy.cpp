#include <doctest.h>

#include "dlab/dichotomy.hpp"
#include "dlab/error.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace dlab;

namespace {

LinearSystem lin(const char* name) { return linear_part(builtin(name)); }

LinearSystem scalar(double a) { return constant_system("scalar", Mat::Constant(1, 1, a)); }

Mat diag(std::initializer_list<double> d) {
    Vec v(static_cast<Eigen::Index>(d.size()));
    int i = 0;
    for (double x : d) v(i++) = x;
    return v.asDiagonal();
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

}  // namespace

TEST_CASE("estimate_splitting examples") {
    auto d = estimate_splitting(lin("auto_diag_113"), 10.0);
    REQUIRE(d.stable_basis.cols() == 1);
    REQUIRE(d.unstable_basis.cols() == 2);
    CHECK(std::fabs(std::fabs(d.stable_basis(2, 0)) - 1.0) < 1e-8);
    CHECK(d.unstable_basis.row(2).norm() < 1e-8);
    CHECK(!d.inconclusive());

    auto my = estimate_splitting(lin("markus_yamabe"), 10.0);
    REQUIRE(my.stable_basis.cols() == 1);
    REQUIRE(my.unstable_basis.cols() == 1);
    CHECK(std::fabs(std::fabs(my.stable_basis(1, 0)) - 1.0) < 1e-6);
    CHECK(std::fabs(std::fabs(my.unstable_basis(0, 0)) - 1.0) < 1e-6);
    CHECK(my.stable_rates[0] == doctest::Approx(-1.0).epsilon(0.05));
    CHECK(my.unstable_rates[0] == doctest::Approx(0.5).epsilon(0.05));

    auto z = estimate_splitting(constant_system("zero", Mat::Zero(2, 2)), 10.0);
    CHECK(z.forward_inconclusive == 2);
    CHECK(z.backward_inconclusive == 2);
    CHECK(z.stable_basis.cols() == 0);
}

TEST_CASE("certify examples") {
    auto my = certify(lin("markus_yamabe"), canonical_projection(0, 2).complement().size() ? make_projection(diag({0, 1}))
                                                                                          : canonical_projection(0, 2),
                      -6.0, 6.0);
    CHECK(my.verified());
    CHECK(my.alpha == doctest::Approx(0.5).epsilon(0.05));
    CHECK(my.k == doctest::Approx(1.0).epsilon(0.05));
    CHECK(my.k >= 1.0);

    auto ad = certify(lin("auto_diag_113"), make_projection(diag({0, 0, 1})), -5.0, 5.0);
    CHECK(ad.verified());
    CHECK(ad.alpha == doctest::Approx(1.0).epsilon(0.05));

    auto at = certify(lin("scalar_arctan"), canonical_projection(1, 1), 0.0, 20.0);
    CHECK(at.flag == CertFlag::Violated);

    // wrong projector for a hyperbolic system
    auto wrong = certify(lin("auto_diag_113"), make_projection(diag({1, 0, 0})), -5.0, 5.0);
    CHECK(!wrong.verified());
}

TEST_CASE("green_apply examples") {
    auto sys = scalar(-1.0);
    auto cert = certify(sys, canonical_projection(1, 1), -5.0, 5.0);
    REQUIRE(cert.verified());
    auto zero = green_apply(sys, cert, [](double) { return Vec::Zero(1); }, 0.0, 10.0);
    CHECK(zero.value.norm() == 0.0);
    for (double t : {-3.0, 0.0, 7.0}) {
        auto one = green_apply(sys, cert, [](double) { return Vec::Ones(1); }, t, 10.0);
        CHECK(one.value(0) == doctest::Approx(1.0 - std::exp(-10.0)).epsilon(1e-9));
        CHECK(one.truncation_bound == doctest::Approx(2.0 * std::exp(-10.0) / cert.alpha));
    }

    auto unverified = cert;
    unverified.flag = CertFlag::Violated;
    CHECK(kind_of([&] { green_apply(sys, unverified, [](double) { return Vec::Ones(1); }, 0.0, 5.0); }) ==
          ErrorKind::CertificateRequired);
}

TEST_CASE("green_apply on markus_yamabe against shooting") {
    auto my = lin("markus_yamabe");
    auto cert = certify(my, make_projection(diag({0, 1})), -6.0, 6.0);
    REQUIRE(cert.verified());
    auto g = [](double t) {
        Vec v(2);
        v << 0.0, std::cos(t);
        return v;
    };
    const double window = 30.0;
    auto x0 = green_apply(my, cert, g, 0.0, window, 1e-12);
    REQUIRE(x0.value.allFinite());
    CHECK(x0.truncation_bound < 1e-5);
    // the bounded solution through x*(-5) must arrive at x*(0)
    auto xm = green_apply(my, cert, g, -5.0, window, 1e-12);
    auto tr = integrate_forced(my, g, -5.0, xm.value, 0.0, 1e-12);
    CHECK((tr.final_state() - x0.value).norm() < 1e-5);
    // and sup bound
    std::vector<Vec> samples;
    for (double t : linspace(-3, 3, 13)) samples.push_back(green_apply(my, cert, g, t, window).value);
    CHECK(sup_bound_check(cert, samples, 1.0));
    CHECK(sup_bound_check(cert, {Vec::Zero(2)}, 0.0));
}

TEST_CASE("sup bound on the scalar decay") {
    auto sys = scalar(-1.0);
    auto cert = certify(sys, canonical_projection(1, 1), -5.0, 5.0);
    auto v = green_apply(sys, cert, [](double) { return Vec::Ones(1); }, 0.0, 30.0).value;
    CHECK(v(0) == doctest::Approx(1.0));
    CHECK(sup_bound_check(cert, {v}, 1.0));
}

TEST_CASE("lipschitz fixed point examples") {
    auto sys = scalar(-1.0);
    auto cert = certify(sys, canonical_projection(1, 1), -5.0, 5.0);
    REQUIRE(cert.verified());
    auto z = lipschitz_fixed_point(sys, cert, [](double, const Vec&) { return Vec::Zero(1); }, 0.0, -10, 10);
    CHECK(z.iterations == 1);
    for (const auto& v : z.values) CHECK(v.norm() == 0.0);

    auto s = lipschitz_fixed_point(
        sys, cert, [](double, const Vec& w) { return Vec(0.1 * w.array().sin()); }, 0.1, -10, 10);
    for (const auto& v : s.values) CHECK(v.norm() == 0.0);

    auto f = lipschitz_fixed_point(
        sys, cert, [](double t, const Vec& w) { return Vec::Constant(1, 0.1 * std::cos(t) + 0.1 * std::tanh(w(0))); },
        0.1, -20, 20, 1e-10);
    CHECK(f.residual <= 1e-9);
    CHECK(f.iterations <= f.iteration_bound);
    for (std::size_t k = 1; k + 1 < f.changes.size(); ++k) CHECK(f.changes[k + 1] <= (f.contraction + 0.05) * f.changes[k]);
    // the bounded solution satisfies the ODE away from the window ends
    std::size_t mid = f.nodes.size() / 2;
    auto rhs = [](double t, const Vec& x, Vec& dx) { dx(0) = -x(0) + 0.1 * std::cos(t) + 0.1 * std::tanh(x(0)); };
    auto tr = integrate_ivp(rhs, f.nodes[mid], f.values[mid], f.nodes[mid + 40], IntegratorOptions::with_tol(1e-12));
    CHECK(std::fabs(tr.final_state()(0) - f.values[mid + 40](0)) < 1e-8);

    CHECK(kind_of([&] {
              lipschitz_fixed_point(sys, cert, [](double, const Vec& w) { return w; }, 0.6, -1, 1);
          }) == ErrorKind::GapViolation);
}

TEST_CASE("noncriticality examples") {
    auto ad = noncriticality_test(lin("auto_diag_113"), 4.0, 0.9, linspace(-5, 5, 11));
    CHECK(ad.noncritical);
    CHECK(ad.margin <= std::sqrt(2.0) * std::exp(-4.0) + 1e-6);
    auto z = noncriticality_test(constant_system("zero", Mat::Zero(2, 2)), 4.0, 0.9, linspace(-5, 5, 11));
    CHECK(!z.noncritical);
    CHECK(z.margin == doctest::Approx(1.0));
    // K = 1, alpha = 1/2: T = 4 gives Psi(T) well above 2/theta
    auto my = noncriticality_test(lin("markus_yamabe"), 4.0, 0.9, linspace(-5, 5, 11));
    CHECK(my.noncritical);
}

TEST_CASE("index and full-line examples") {
    CHECK(dichotomy_index(lin("auto_diag_113"), 10.0) == 0);
    CHECK(dichotomy_index(lin("palmer_tanh"), 10.0) == 1);
    CHECK(dichotomy_index(constant_system("minus", Mat(-Mat::Identity(2, 2))), 10.0) == 0);
    CHECK(kind_of([] { dichotomy_index(constant_system("zero", Mat::Zero(2, 2)), 10.0); }) ==
          ErrorKind::IndexUndetermined);

    auto ad = full_line_criterion(lin("auto_diag_113"), 10.0);
    CHECK(ad.passes);
    auto pt = full_line_criterion(lin("palmer_tanh"), 10.0);
    CHECK(!pt.passes);
    CHECK(pt.index == 1);
    auto my = full_line_criterion(lin("markus_yamabe"), 10.0);
    CHECK(my.passes);
    CHECK(my.forward_cert.verified());
    CHECK(my.backward_cert.verified());
}

TEST_CASE("coppel counterexample: projector growth is unbounded") {
    auto c = lin("coppel_counterexample");
    auto pg = projector_growth(c, make_projection(diag({1, 0})), linspace(0, 8, 33));
    CHECK(!pg.bounded);
    auto my = projector_growth(lin("markus_yamabe"), make_projection(diag({0, 1})), linspace(-6, 6, 49));
    CHECK(my.bounded);
}

// ---------------------------------------------------------------------------
// properties

TEST_CASE("property: projector invariance and rank constancy") {
    auto my = lin("markus_yamabe");
    auto p = make_projection(diag({0, 1}));
    const double tol = 1e-10;
    TransitionCache cache(my, 0.0, -4.0, 4.0, tol);
    std::mt19937 rng(10);
    std::uniform_real_distribution<double> ud(-4.0, 4.0);
    auto pt = [&](double t) { return Mat(cache.forward(t) * p.base * cache.inverse(t)); };
    for (int k = 0; k < 30; ++k) {
        const double t = ud(rng), s = ud(rng);
        Mat x = cache.transition(t, s);
        const double scale = std::max(1.0, operator_norm_2(x)) * std::max(1.0, operator_norm_2(pt(s)));
        CHECK(operator_norm_2(Mat(pt(t) * x - x * pt(s))) <= 10 * tol * scale * 10);
        CHECK(make_projection(pt(t), 1e-6).rank == 1);
    }
}

TEST_CASE("property: alpha never exceeds sup ||A||") {
    struct Case {
        LinearSystem sys;
        Mat p;
    };
    std::vector<Case> cases{{lin("markus_yamabe"), diag({0, 1})},
                            {lin("auto_diag_113"), diag({0, 0, 1})},
                            {scalar(-0.3), Mat::Ones(1, 1)},
                            {lin("palmer_tanh").with_domain(Domain::FullLine), Mat::Ones(1, 1)}};
    for (auto& c : cases) {
        const double a = c.sys.name() == "palmer_tanh" ? 0.0 : -4.0;
        auto cert = certify(c.sys, make_projection(c.p), a, 4.0);
        if (!cert.verified()) continue;
        CHECK(cert.alpha <= sampled_sup_norm(c.sys, a, 4.0) * (1 + 1e-6));
    }
}

TEST_CASE("property: splitting growth bounds") {
    auto my = lin("markus_yamabe");
    auto p = make_projection(diag({0, 1}));
    auto cert = certify(my, p, -6.0, 6.0);
    REQUIRE(cert.verified());
    std::mt19937 rng(11);
    std::normal_distribution<double> nd;
    const double slack = 1.0 + cert.residual + 1e-9;
    for (int k = 0; k < 20; ++k) {
        Vec xi(2);
        xi << nd(rng), nd(rng);
        const Vec ps = p.base * xi, pu = p.complement() * xi;
        for (double t : linspace(0, 6, 13)) {
            Mat x = transition_matrix(my, t, 0.0).x;
            CHECK((x * ps).norm() <= cert.k * std::exp(-cert.alpha * t) * ps.norm() * slack);
            CHECK((x * pu).norm() * slack >= std::exp(cert.alpha * t) * pu.norm() / cert.k);
        }
    }
}

TEST_CASE("property: kinematic similarity keeps the certificate") {
    // B = Q^{-1} A Q - Q^{-1} Q' with Q the orthogonal antisym_exp flow
    auto my = lin("markus_yamabe");
    auto anti = lin("antisym_exp");
    auto q = [](double t) {
        Mat r(2, 2);
        const double th = std::exp(t);
        r << std::cos(th), std::sin(th), -std::sin(th), std::cos(th);
        return r;
    };
    auto conj = LinearSystem("my_conj", 2, [my, anti, q](double t) {
        Mat qt = q(t);
        Mat qdot = anti.coeff_unchecked(t) * qt;
        return Mat(qt.transpose() * (my.coeff_unchecked(t) * qt - qdot));
    });
    auto base = certify(my, make_projection(diag({0, 1})), -3.0, 3.0);
    // projector transported by Q(0)
    Mat q0 = q(0.0);
    auto pc = make_projection(Mat(q0.transpose() * diag({0, 1}) * q0));
    CertifyOptions co;
    co.alpha_candidates = {base.alpha};
    auto c = certify(conj, pc, -3.0, 3.0, linspace(-3, 3, 121), co);
    CHECK(c.verified());
    CHECK(c.alpha == base.alpha);
    CHECK(c.k <= base.k * (1 + 0.05));
}

TEST_CASE("property: certified systems are noncritical") {
    // a verified certificate must come with a noncritical verdict
    int certified = 0;
    for (const auto& entry : catalog()) {
        auto sys = linear_part(builtin(entry.name));
        CAPTURE(entry.name);
        if (entry.name == "scalar_linear_t" || entry.name == "coppel_counterexample") continue;
        SubspaceSplit split;
        try {
            split = estimate_splitting(sys, 8.0);
        } catch (const Error&) {
            continue;
        }
        if (split.forward_inconclusive + split.backward_inconclusive > 0) continue;
        auto cert = certify(sys, orthogonal_projection(split.stable_basis, sys.dim()), -20, 20);
        if (!cert.verified()) continue;
        // window long enough that K e^{-alpha T} is well below theta, and
        // short enough that the probes stay inside the certified interval
        const double window = std::ceil(std::log(4 * cert.k / 0.9) / cert.alpha);
        CAPTURE(window);
        if (window > 18) continue;
        ++certified;
        auto nc = noncriticality_test(sys, window, 0.9, linspace(-2, 2, 9));
        CHECK(nc.noncritical);
    }
    CHECK(certified >= 2);
}
