#include <catch2/catch_amalgamated.hpp>

#include "support/shooting_oracle.hpp"

TEST_CASE("pi_p reduces to pi at p = 2") {
    CHECK(shooting::pi_p(2.0) == Catch::Approx(3.14159265358979).epsilon(1e-12));
}

TEST_CASE("half period matches the closed form") {
    // T/2 = pi_p ((p-1)/mu)^{1/p}
    for (double p : {1.5, 2.0, 3.0}) {
        for (double mu : {1.0, 10.0, 250.0}) {
            double expect = shooting::pi_p(p) * std::pow((p - 1.0) / mu, 1.0 / p);
            double got = shooting::half_period(mu, p);
            CHECK(got == Catch::Approx(expect).epsilon(1e-8));
        }
    }
}

TEST_CASE("shooting eigenvalue agrees with the closed form") {
    // p = 2: lambda_2 = 1 + 4 pi^2 on the unit circle
    double l2 = shooting::periodic_eigenvalue(2.0, 1);
    CHECK(l2 == Catch::Approx(1.0 + 4.0 * 9.86960440108936).epsilon(1e-9));

    for (double p : {1.5, 3.0}) {
        double got = shooting::periodic_eigenvalue(p, 1);
        double expect = shooting::closed_form_lambda(p, 1);
        CHECK(got == Catch::Approx(expect).epsilon(1e-8));
    }

    // second harmonic
    double got = shooting::periodic_eigenvalue(3.0, 2);
    CHECK(got == Catch::Approx(shooting::closed_form_lambda(3.0, 2)).epsilon(1e-8));
}
