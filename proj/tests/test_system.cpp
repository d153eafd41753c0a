#include <doctest.h>

#include "dlab/error.hpp"
#include "dlab/system.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace dlab;

namespace {

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

TEST_CASE("parse_system examples") {
    auto s = parse_system("name = arctan\ndim = 1\nA = 1/(1+t^2)\n");
    const auto& lin = linear_part(s);
    CHECK(lin.dim() == 1);
    CHECK(lin.coeff(0.0)(0, 0) == 1.0);
    CHECK(lin.coeff(2.0)(0, 0) == doctest::Approx(0.2));

    CHECK(kind_of([] { parse_system("dim = 2\nA = 1, 2, 3; 4, 5, 6\n"); }) == ErrorKind::ShapeError);

    auto a = linear_part(parse_system("dim = 2\nA = 0, exp(t); -exp(t), 0\n"));
    Mat expect(2, 2);
    expect << 0, 1, -1, 0;
    CHECK((a.coeff(0.0) - expect).norm() == 0.0);
}

TEST_CASE("parse errors carry positions") {
    try {
        parse_system("dim = 1\nA = 1 + foo(t)\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
        CHECK(e.column() > 4);
    }
    CHECK(kind_of([] { parse_system("dim = 1\nA = 1 +\n"); }) == ErrorKind::ParseError);
    CHECK(kind_of([] { parse_system("dim = 1\nA = 2 t\n"); }) == ErrorKind::ParseError);
    CHECK(kind_of([] { parse_system("dim = 1\nbogus = 3\nA = 1\n"); }) == ErrorKind::ParseError);
    CHECK(kind_of([] { parse_system("dim = 1\nA = y1\n"); }) == ErrorKind::ParseError);
}

TEST_CASE("comments, continuation and perturbation section") {
    auto s = parse_system(
        "# a demo\n[system]\nname = demo   # trailing\ndim = 2\nA = -1, 0; \\\n  0, -2\n"
        "[perturbation]\nf = 0.1*sin(y1), 0.1*cos(y2)\nmu = 0.2\ngamma = 0.1\n");
    const auto* q = quasilinear_part(s);
    REQUIRE(q != nullptr);
    CHECK(q->mu() == 0.2);
    Vec y(2);
    y << 0.0, 0.0;
    CHECK(q->f(0.0, y)(1) == doctest::Approx(0.1));
    CHECK(kind_of([] {
              parse_system("dim = 2\nA = 1, 0; 0, 1\n[perturbation]\nf = y1\nmu = 1\ngamma = 1\n");
          }) == ErrorKind::ShapeError);
}

TEST_CASE("builtin catalog examples") {
    auto my = linear_part(builtin("markus_yamabe"));
    Mat a0(2, 2);
    a0 << 0.5, 1, -1, -1;
    CHECK((my.coeff(0.0) - a0).norm() < 1e-15);
    Mat ah(2, 2);
    ah << -1, 1, -1, 0.5;
    CHECK((my.coeff(std::numbers::pi / 2) - ah).norm() < 1e-15);

    auto d = linear_part(builtin("auto_diag_113"));
    Mat dd = Mat::Zero(3, 3);
    dd.diagonal() << 1, 1, -1;
    CHECK((d.coeff(0.0) - dd).norm() == 0.0);
    CHECK((d.coeff(17.5) - dd).norm() == 0.0);

    CHECK(linear_part(builtin("scalar_arctan")).coeff(0.0)(0, 0) == 1.0);
    CHECK(kind_of([] { builtin("nope"); }) == ErrorKind::NotInCatalog);
    CHECK(catalog().size() >= 8);
    for (const auto& e : catalog()) CHECK_NOTHROW(builtin(e.name));

    auto p = linear_part(builtin("periodic_scalar(0.5)"));
    CHECK(p.coeff(0.0)(0, 0) == doctest::Approx(1.5));
    REQUIRE(p.period().has_value());
    CHECK(*p.period() == doctest::Approx(2 * std::numbers::pi));
}

TEST_CASE("domain errors") {
    auto s = linear_part(parse_system("dim = 1\ndomain = half-line-plus\nA = 1\n"));
    CHECK(kind_of([&] { s.coeff(-1.0); }) == ErrorKind::DomainError);
    CHECK_NOTHROW(s.coeff(0.0));
}

TEST_CASE("declared period is validated") {
    CHECK(kind_of([] { parse_system("dim = 1\nperiod = 1\nA = cos(t)\n"); }) == ErrorKind::InvalidInput);
}

TEST_CASE("property: periodic_scalar is 2 pi periodic") {
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> ud(-50.0, 50.0);
    auto p = linear_part(builtin("periodic_scalar"));
    for (int i = 0; i < 100; ++i) {
        const double t = ud(rng);
        CHECK(std::fabs(p.coeff(t + 2 * std::numbers::pi)(0, 0) - p.coeff(t)(0, 0)) <= 1e-12);
    }
}

TEST_CASE("property: expression round trip") {
    std::mt19937 rng(5);
    const char* atoms[] = {"t", "y1", "y2", "2.5", "pi", "1e-3"};
    const char* funcs[] = {"sin", "cos", "exp", "log", "tanh", "atan", "sqrt", "abs"};
    const char* ops[] = {"+", "-", "*", "/", "^"};
    std::function<std::string(int)> gen = [&](int depth) -> std::string {
        const int choice = depth <= 0 ? 0 : static_cast<int>(rng() % 4);
        if (choice == 0) return atoms[rng() % 6];
        if (choice == 1) return std::string(funcs[rng() % 8]) + "(" + gen(depth - 1) + ")";
        if (choice == 2) return "-" + gen(depth - 1);
        return "(" + gen(depth - 1) + ")" + ops[rng() % 5] + gen(depth - 1);
    };
    for (int i = 0; i < 300; ++i) {
        const std::string text = gen(4);
        ExprPtr a = parse_expression(text, 2);
        ExprPtr b = parse_expression(a->to_string(), 2);
        CHECK_MESSAGE(*a == *b, text);
    }
}

TEST_CASE("property: palmer_demo assumptions hold on samples") {
    const AnySystem sys = builtin("palmer_demo");
    const auto* q = quasilinear_part(sys);
    REQUIRE(q != nullptr);
    auto check = check_assumptions(*q, 0);
    CHECK(check.bound_ok);
    CHECK(check.lipschitz_ok);
    CHECK(check.max_norm <= 0.1);
    CHECK(check.max_quotient <= 0.1 * 1.05);
    auto bad = check_assumptions(q->with_constants(0.05, 0.01), 0);
    CHECK(!bad.ok());
}
