#include <catch2/catch_amalgamated.hpp>

#include "plap/expr.hpp"

using plap::Expr;

TEST_CASE("arithmetic precedence and associativity") {
    std::vector<double> x{0.0};
    CHECK(Expr::parse("2+3*4", 1).eval(x, 0) == 14.0);
    CHECK(Expr::parse("2*3^2", 1).eval(x, 0) == 18.0);
    CHECK(Expr::parse("2^3^2", 1).eval(x, 0) == 512.0);  // right associative
    CHECK(Expr::parse("10-4-3", 1).eval(x, 0) == 3.0);   // left to right
    CHECK(Expr::parse("8/4/2", 1).eval(x, 0) == 1.0);
    CHECK(Expr::parse("-2^2", 1).eval(x, 0) == -4.0);    // -(2^2)
    CHECK(Expr::parse("(2+3)*4", 1).eval(x, 0) == 20.0);
    CHECK(Expr::parse("1e2 + 2.5e-1", 1).eval(x, 0) == Catch::Approx(100.25));
}

TEST_CASE("variables, constants and functions") {
    Expr e = Expr::parse("2 + cos(2*pi*x1)", 1);
    CHECK(e.eval(std::vector<double>{0.0}, 0) == Catch::Approx(3.0));
    CHECK(e.eval(std::vector<double>{0.25}, 0) == Catch::Approx(2.0).margin(1e-15));
    CHECK_FALSE(e.depends_on_t());

    Expr f = Expr::parse("abs(t)*t", 1);
    CHECK(f.depends_on_t());
    CHECK(f.eval(std::vector<double>{0.0}, -2.0) == -4.0);

    // x aliases x1
    CHECK(Expr::parse("x", 1).eval(std::vector<double>{7.0}, 0) == 7.0);
    CHECK(Expr::parse("exp(x1)*sin(x2)", 2).eval(std::vector<double>{0.0, 1.57079632679}, 0) ==
          Catch::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("bit-exact re-evaluation") {
    Expr e = Expr::parse("0.1 + 0.2 + 0.3 * sin(x1) - t/7", 1);
    std::vector<double> x{0.37};
    double a = e.eval(x, 0.91);
    double b = e.eval(x, 0.91);
    CHECK(a == b);
}

TEST_CASE("parse errors carry positions") {
    CHECK_THROWS_AS(Expr::parse("2 +", 1), std::invalid_argument);
    CHECK_THROWS_AS(Expr::parse("foo(1)", 1), std::invalid_argument);
    CHECK_THROWS_AS(Expr::parse("(1+2", 1), std::invalid_argument);
    CHECK_THROWS_AS(Expr::parse("1 2", 1), std::invalid_argument);
    CHECK_THROWS_AS(Expr::parse("x2", 1), std::invalid_argument);  // out of range
    CHECK_THROWS_AS(Expr::parse("y", 1), std::invalid_argument);
}
