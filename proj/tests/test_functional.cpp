#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "plap/functional.hpp"

using namespace plap;

namespace {

ProblemSpec constant_solution_spec(int n = 64, double p = 2.0, double lambda = 0.0) {
    return ProblemSpec::make(GridSpec::periodic_1d(n, 1.0), p, lambda,
                             CoefficientSpec::constant(1.0), CoefficientSpec::constant(1.0),
                             NonlinearitySpec::pure_power(4.0));
}

Field random_field(const ProblemSpec& s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    Field u(static_cast<std::size_t>(s.dofs()));
    for (auto& v : u.values) v = dist(rng);
    return u;
}

// Independent quadrature oracle: explicit wrap indexing, no shared code with
// eval_energy's edge loop.
EnergyBreakdown naive_periodic_energy(const Field& u, const ProblemSpec& s) {
    int n = static_cast<int>(s.dofs());
    double h = s.grid.spacing[0];
    double p = s.p;
    double hsum = 0.0, isum = 0.0, jsum = 0.0;
    for (int i = 0; i < n; ++i) {
        double du = (u[static_cast<std::size_t>((i + 1) % n)] - u[static_cast<std::size_t>(i)]) / h;
        hsum += (std::pow(std::abs(du), p) +
                 s.b[static_cast<std::size_t>(i)] * std::pow(std::abs(u[static_cast<std::size_t>(i)]), p)) * h;
        isum += s.V[static_cast<std::size_t>(i)] * std::pow(std::abs(u[static_cast<std::size_t>(i)]), p) * h;
        jsum += s.f.coeff * std::pow(std::abs(u[static_cast<std::size_t>(i)]), s.f.q) / s.f.q * h;
    }
    EnergyBreakdown e;
    e.H = hsum / p;
    e.I = isum / p;
    e.J = jsum;
    e.Phi = e.H - s.lambda * e.I - e.J;
    e.norm_W = std::pow(p * e.H, 1.0 / p);
    return e;
}

} // namespace

TEST_CASE("constant field anchor: all integrals are the integrand") {
    auto s = constant_solution_spec(64);
    Field one(64, 1.0);
    auto e = eval_energy(one, s);
    CHECK(e.H == Catch::Approx(0.5).epsilon(1e-14));
    CHECK(e.I == Catch::Approx(0.5).epsilon(1e-14));
    CHECK(e.J == Catch::Approx(0.25).epsilon(1e-14));
    CHECK(e.Phi == Catch::Approx(0.25).epsilon(1e-14));
    CHECK(e.norm_W == Catch::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("zero field has zero energy") {
    auto s = constant_solution_spec();
    Field zero(64, 0.0);
    auto e = eval_energy(zero, s);
    CHECK(e.H == 0.0);
    CHECK(e.I == 0.0);
    CHECK(e.J == 0.0);
    CHECK(e.Phi == 0.0);
}

TEST_CASE("energy matches an independent quadrature implementation") {
    for (double p : {1.5, 2.0, 2.5, 3.0}) {
        auto s = ProblemSpec::make(GridSpec::periodic_1d(32, 1.0), p, 3.0,
                                   CoefficientSpec::expression("2+cos(2*pi*x1)"),
                                   CoefficientSpec::expression("cos(2*pi*x1)"),
                                   NonlinearitySpec::scaled_power(4.5, 0.7));
        Field u = random_field(s, 21);
        auto a = eval_energy(u, s);
        auto b = naive_periodic_energy(u, s);
        CHECK(a.H == Catch::Approx(b.H).epsilon(1e-12));
        CHECK(a.I == Catch::Approx(b.I).epsilon(1e-12));
        CHECK(a.J == Catch::Approx(b.J).epsilon(1e-12));
        CHECK(a.Phi == Catch::Approx(b.Phi).epsilon(1e-12));
    }
}

TEST_CASE("Phi decomposition holds to rounding") {
    auto s = constant_solution_spec();
    Field u = random_field(s, 5);
    auto e = eval_energy(u, s);
    CHECK(e.Phi == Catch::Approx(e.H - s.lambda * e.I - e.J).epsilon(1e-12));
    CHECK(e.H >= 0.0);
    CHECK(e.norm_W >= 0.0);
}

TEST_CASE("the constant solves the constant-coefficient problem exactly") {
    auto s = constant_solution_spec();
    Field one(64, 1.0);
    auto g = grad_energy(one, s);
    for (auto v : g.grad_phi.values) CHECK(std::abs(v) < 1e-14);
    CHECK(cerami_residual(one, s) < 1e-13);
}

TEST_CASE("zero is critical for the homogeneous energies") {
    auto s = constant_solution_spec();
    Field zero(64, 0.0);
    auto g = grad_energy(zero, s);
    for (auto v : g.grad_h.values) CHECK(v == 0.0);
    for (auto v : g.grad_i.values) CHECK(v == 0.0);
    CHECK(cerami_residual(zero, s) == 0.0);
}

TEST_CASE("gradient agrees with central differences") {
    for (double p : {2.0, 2.5, 3.0}) {
        auto s = ProblemSpec::make(GridSpec::periodic_1d(48, 1.0), p, 2.0,
                                   CoefficientSpec::expression("1+0.5*sin(2*pi*x1)"),
                                   CoefficientSpec::expression("cos(2*pi*x1)"),
                                   NonlinearitySpec::pure_power(4.0));
        Field u = random_field(s, 31);
        Field v = random_field(s, 32);
        auto g = grad_energy(u, s);
        double analytic = inner(g.grad_phi, v, s);

        double eps = 1e-5;
        Field up = u, um = u;
        axpy(eps, v, up);
        axpy(-eps, v, um);
        double numeric = (eval_energy(up, s).Phi - eval_energy(um, s).Phi) / (2.0 * eps);
        CHECK(analytic == Catch::Approx(numeric).epsilon(1e-6));
    }
}

TEST_CASE("homogeneity and Euler identities") {
    for (double p : {1.5, 2.0, 3.0}) {
        auto s = ProblemSpec::make(GridSpec::periodic_1d(40, 1.0), p, 0.0,
                                   CoefficientSpec::constant(2.0),
                                   CoefficientSpec::expression("cos(2*pi*x1)"),
                                   NonlinearitySpec::pure_power(4.0));
        Field u = random_field(s, 77);
        auto e = eval_energy(u, s);
        for (double t : {0.5, -1.7, 3.0}) {
            auto et = eval_energy(t * u, s);
            double tp = std::pow(std::abs(t), p);
            CHECK(et.H == Catch::Approx(tp * e.H).epsilon(1e-12));
            CHECK(et.I == Catch::Approx(tp * e.I).epsilon(1e-12));
        }
        auto g = grad_energy(u, s);
        CHECK(inner(g.grad_h, u, s) == Catch::Approx(p * e.H).epsilon(1e-12));
        CHECK(inner(g.grad_i, u, s) == Catch::Approx(p * e.I).epsilon(1e-12));
    }
}

TEST_CASE("cerami residual agrees with its direct recomputation") {
    auto s = constant_solution_spec();
    Field u = random_field(s, 91);
    auto e = eval_energy(u, s);
    auto g = grad_energy(u, s);
    double expect = (1.0 + e.norm_W) * dual_norm(g.grad_phi, s);
    CHECK(cerami_residual(u, s) == Catch::Approx(expect));
    CHECK(cerami_residual(u, s) > 0.0);
}

TEST_CASE("monotonicity gap vanishes in the trivial cases") {
    auto s = constant_solution_spec(32, 2.5);
    Field u = random_field(s, 3);
    CHECK(std::abs(monotonicity_gap(u, u, s)) < 1e-12);

    // v = 0 reduces to the Euler identity <H'(u),u> = p H(u) = ||u||^p
    Field zero(32, 0.0);
    auto e = eval_energy(u, s);
    double scale = 1.0 + std::pow(e.norm_W, s.p);
    CHECK(std::abs(monotonicity_gap(u, zero, s)) < 1e-12 * scale);
}

TEST_CASE("monotonicity inequality holds on random pairs") {
    for (double p : {1.5, 2.0, 3.0}) {
        auto s = ProblemSpec::make(GridSpec::periodic_1d(48, 1.0), p, 1.0,
                                   CoefficientSpec::expression("1.5+sin(2*pi*x1)"),
                                   CoefficientSpec::constant(1.0),
                                   NonlinearitySpec::pure_power(4.0));
        auto rng = make_rng(555);
        std::uniform_real_distribution<double> amp(0.1, 4.0);
        for (int k = 0; k < 200; ++k) {
            Field u = amp(rng) * random_field(s, 1000 + static_cast<std::uint64_t>(k));
            Field v = amp(rng) * random_field(s, 5000 + static_cast<std::uint64_t>(k));
            double nu = eval_energy(u, s).norm_W;
            double nv = eval_energy(v, s).norm_W;
            double floor = -1e-10 * (1.0 + std::pow(nu, p) + std::pow(nv, p));
            CHECK(monotonicity_gap(u, v, s) >= floor);
        }
    }
}

TEST_CASE("cone membership semantics") {
    auto s = constant_solution_spec();
    Field zero(64, 0.0);
    auto m0 = cone_membership(zero, 2.0, 3.0, s);
    CHECK(m0.in_c_minus);
    CHECK(m0.in_c_plus);

    // constant field has H = I here, so H <= 2I and H < 3I
    Field c(64, 1.3);
    auto mc = cone_membership(c, 2.0, 3.0, s);
    CHECK(mc.in_c_minus);
    CHECK_FALSE(mc.in_c_plus);
    CHECK(mc.neither() == false);

    // equality case sits inside the closed cone
    auto meq = cone_membership(c, 1.0, 3.0, s);
    CHECK(meq.in_c_minus);

    CHECK_THROWS_AS(cone_membership(c, 3.0, 1.0, s), std::invalid_argument);
}

TEST_CASE("flip identity: (lambda, V) and (-lambda, -V) evaluate bitwise equal") {
    GridSpec g = GridSpec::periodic_1d(32, 1.0);
    auto f = NonlinearitySpec::pure_power(4.0);
    auto pos = ProblemSpec::make(g, 2.0, 7.0, CoefficientSpec::constant(1.0),
                                 CoefficientSpec::expression("cos(2*pi*x1)"), f);
    auto neg = ProblemSpec::make(g, 2.0, -7.0, CoefficientSpec::constant(1.0),
                                 CoefficientSpec::expression("-cos(2*pi*x1)"), f);
    for (int k = 0; k < 20; ++k) {
        Field u = random_field(pos, 300 + static_cast<std::uint64_t>(k));
        auto ep = eval_energy(u, pos);
        auto en = eval_energy(u, neg);
        CHECK(ep.Phi == en.Phi);  // bitwise
        CHECK(ep.H == en.H);
    }
}

TEST_CASE("non-finite entries are rejected with the offending node") {
    auto s = constant_solution_spec(16);
    Field u(16, 1.0);
    u[5] = std::numeric_limits<double>::quiet_NaN();
    try {
        eval_energy(u, s);
        FAIL("expected an exception");
    } catch (const std::runtime_error& err) {
        CHECK(std::string(err.what()).find("node 5") != std::string::npos);
    }
    Field wrong(15, 1.0);
    CHECK_THROWS_AS(eval_energy(wrong, s), std::invalid_argument);
}
