#include <catch2/catch_amalgamated.hpp>

#include "plap/minimax.hpp"

using namespace plap;

namespace {

ProblemSpec make_spec(int n, double p, double lambda, double f_coeff = 1.0) {
    return ProblemSpec::make(GridSpec::periodic_1d(n, 1.0), p, lambda,
                             CoefficientSpec::constant(1.0), CoefficientSpec::constant(1.0),
                             NonlinearitySpec::scaled_power(4.0, f_coeff));
}

double field_stddev(const Field& u) {
    double mean = 0.0;
    for (double v : u.values) mean += v;
    mean /= static_cast<double>(u.size());
    double var = 0.0;
    for (double v : u.values) var += (v - mean) * (v - mean);
    return std::sqrt(var / static_cast<double>(u.size()));
}

} // namespace

TEST_CASE("geometry for the coercive case m = 0") {
    auto s = make_spec(64, 2.0, 0.0);
    SpectrumEstimate sp = linear_spectrum_oracle(s, 4);
    LinkingGeometry g = estimate_geometry(s, sp);
    CHECK(g.m == 0);
    CHECK(g.alpha > 0.0);
    CHECK(g.r_plus > 0.0);
    CHECK(g.r_minus > g.r_plus);
    // Phi(r_minus e) <= 0: the doubling terminated
    Field endpoint = g.r_minus * g.e;
    CHECK(eval_energy(endpoint, s).Phi <= 0.0);
    // e is the ground eigenfunction here (constant, normalized in W)
    CHECK(field_stddev(g.e) < 1e-6);
}

TEST_CASE("geometry brackets lambda between eigenvalues for m = 1") {
    auto s = make_spec(64, 2.0, 20.0);
    SpectrumEstimate sp = linear_spectrum_oracle(s, 6);
    LinkingGeometry g = estimate_geometry(s, sp);
    CHECK(g.m == 1);
    CHECK(g.lambda_m == Catch::Approx(1.0).margin(1e-10));
    CHECK(g.lambda_m1 == Catch::Approx(1.0 + 4.0 * 9.8696).epsilon(1e-2));
    CHECK(g.alpha > 0.0);
    CHECK(g.r_minus > g.r_plus);
    CHECK(g.cone_basis.size() == 1);
    CHECK(g.cone_certification == "exact-p2");
    // e must sit outside C-
    CHECK_FALSE(cone_membership(g.e, g.lambda_m, g.lambda_m1, s).in_c_minus);
}

TEST_CASE("resonant lambda is rejected by geometry estimation") {
    auto s = make_spec(64, 2.0, 1.0);  // lambda = lambda_1 exactly
    SpectrumEstimate sp = linear_spectrum_oracle(s, 4);
    CHECK_THROWS_WITH(estimate_geometry(s, sp), Catch::Matchers::ContainsSubstring("resonant"));
}

TEST_CASE("mountain pass finds the constant solution at the anchor") {
    auto s = make_spec(64, 2.0, 0.0);
    SpectrumEstimate sp = linear_spectrum_oracle(s, 4);
    LinkingGeometry g = estimate_geometry(s, sp);
    CriticalPointResult r = mountain_pass(s, g, 1e-8);
    INFO(r.message);
    CHECK(r.converged);
    CHECK(r.cerami < 1e-8);
    CHECK(r.value > 0.0);
    CHECK(r.value <= 0.25 + 1e-6);
    CHECK(r.classification == "nontrivial-candidate");
    CHECK(r.value >= g.alpha - 1e-6);
}

TEST_CASE("mountain pass scales with the nonlinearity: f = 2 t^3") {
    // constant solution c = 1/sqrt(2), Phi = 1/8
    auto s = make_spec(64, 2.0, 0.0, 2.0);
    SpectrumEstimate sp = linear_spectrum_oracle(s, 4);
    LinkingGeometry g = estimate_geometry(s, sp);
    CriticalPointResult r = mountain_pass(s, g, 1e-8);
    INFO(r.message);
    CHECK(r.converged);
    CHECK(r.value <= 0.125 + 1e-6);
    CHECK(r.value > 0.0);
}

TEST_CASE("mountain pass at p = 3 returns a nontrivial candidate") {
    auto s = make_spec(64, 3.0, 0.0);
    SpectrumOptions sopts;
    sopts.count = 1;
    SpectrumEstimate sp = estimate_spectrum(s, sopts);
    LinkingGeometry g = estimate_geometry(s, sp);
    CriticalPointResult r = mountain_pass(s, g, 1e-6);
    INFO(r.message);
    CHECK(r.converged);
    CHECK(r.cerami < 1e-6);
    CHECK(r.classification == "nontrivial-candidate");
    SolutionReport rep = verify_solution(r.u, s, 1e-6, &g);
    CHECK(rep.level_consistent);
}

TEST_CASE("linking run between lambda_1 and lambda_2 finds a nonconstant solution") {
    auto s = make_spec(64, 2.0, 20.0);
    SpectrumEstimate sp = linear_spectrum_oracle(s, 6);
    LinkingGeometry g = estimate_geometry(s, sp);
    SolveOptions opts;
    opts.samples = 120;
    CriticalPointResult r = linking_minimax(s, g, 1e-6, opts);
    INFO(r.message);
    CHECK(r.converged);
    CHECK(r.cerami < 1e-6);
    CHECK(r.value >= g.alpha - 1e-9);
    CHECK(r.value > 0.0);
    CHECK(r.classification == "nontrivial-candidate");
    // no real constant solves c(1 - lambda) = c^3 for lambda > 1
    CHECK(field_stddev(r.u) > 1e-3);
    CHECK(r.boundary_violations == 0);

    // minimax estimate monotonicity: the recorded per-iteration max never
    // rises during the descent (the appended polish row is not an iteration)
    for (std::size_t i = 1; i + 1 < r.trace.size(); ++i)
        CHECK(r.trace[i].phi <= r.trace[i - 1].phi + 1e-9);
}

TEST_CASE("mountain pass and degenerate linking agree just below lambda_1") {
    auto s = make_spec(48, 2.0, 0.5);
    SpectrumEstimate sp = linear_spectrum_oracle(s, 4);
    LinkingGeometry g = estimate_geometry(s, sp);
    REQUIRE(g.m == 0);
    CriticalPointResult mp = mountain_pass(s, g, 1e-8);
    SolveOptions lopts;
    lopts.samples = 80;
    CriticalPointResult lk = linking_minimax(s, g, 1e-8, lopts);
    INFO("mp=" << mp.value << " lk=" << lk.value);
    CHECK(mp.converged);
    CHECK(lk.converged);
    CHECK(std::abs(mp.value - lk.value) <= 0.05 * std::max(mp.value, lk.value));
}

TEST_CASE("descend_cerami traces stay bounded while the residual falls") {
    auto s = make_spec(48, 2.0, 0.0);

    // from a critical point the trace is constant
    Field one(48, 1.0);
    auto trace_cp = descend_cerami(one, s, 10);
    for (const auto& row : trace_cp) {
        CHECK(row.phi == Catch::Approx(0.25).margin(1e-12));
        CHECK(row.cerami < 1e-12);
    }

    // coercive case: Phi is non-increasing along the trace
    auto rng = make_rng(5);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Field u0(48);
    for (auto& v : u0.values) v = dist(rng);
    auto trace = descend_cerami(u0, s, 50);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i].phi <= trace[i - 1].phi + 1e-12);

    // sphere-scale multiple of e in the coercive case: the norm stays bounded
    // while the Cerami residual decreases along the trace
    SpectrumEstimate sp = linear_spectrum_oracle(s, 4);
    LinkingGeometry g = estimate_geometry(s, sp);
    Field big = (0.5 * g.r_plus) * g.e;
    auto trace_big = descend_cerami(big, s, 300);
    double max_norm = 0.0;
    for (const auto& row : trace_big) max_norm = std::max(max_norm, row.norm);
    CHECK(max_norm < 10.0 * (1.0 + trace_big.front().norm));
    CHECK(trace_big.back().cerami < trace_big.front().cerami);
    for (std::size_t i = 1; i < trace_big.size(); ++i)
        CHECK(trace_big[i].phi <= trace_big[i - 1].phi + 1e-12);
}

TEST_CASE("verify_solution reports the constant anchor and the trivial zero") {
    auto s = make_spec(64, 2.0, 0.0);
    Field one(64, 1.0);
    SolutionReport rep = verify_solution(one, s, 1e-8);
    CHECK(rep.strong_residual_max < 1e-12);
    CHECK(rep.cerami < 1e-12);
    CHECK(rep.nontrivial);
    CHECK(rep.phi == Catch::Approx(0.25).margin(1e-13));

    Field zero(64, 0.0);
    SolutionReport rep0 = verify_solution(zero, s, 1e-8);
    CHECK_FALSE(rep0.nontrivial);
    CHECK(rep0.phi == 0.0);
}

TEST_CASE("cone sign: Phi <= 0 on the C- model when lambda >= lambda_m") {
    auto s = make_spec(64, 2.0, 1.0);  // lambda = lambda_1 (equality case)
    SpectrumEstimate sp = linear_spectrum_oracle(s, 2);
    const Field& e1 = sp.values[0].pair->u;
    auto rng = make_rng(9);
    std::uniform_real_distribution<double> amp(-5.0, 5.0);
    for (int k = 0; k < 50; ++k) {
        Field u = amp(rng) * e1;
        CHECK(eval_energy(u, s).Phi <= 1e-10);
    }
}

TEST_CASE("scaling consistency: the critical value moves continuously in the coefficient") {
    SpectrumEstimate sp = linear_spectrum_oracle(make_spec(48, 2.0, 0.0), 2);
    auto solve_for = [&](double c) {
        auto s = make_spec(48, 2.0, 0.0, c);
        LinkingGeometry g = estimate_geometry(s, sp);
        CriticalPointResult r = mountain_pass(s, g, 1e-8);
        REQUIRE(r.converged);
        return r.value;
    };
    double d1 = solve_for(1.0);
    CHECK(d1 == Catch::Approx(0.25).margin(1e-6));
    double gap_wide_low = std::abs(solve_for(0.9) - d1);
    double gap_near_low = std::abs(solve_for(0.99) - d1);
    double gap_near_high = std::abs(solve_for(1.01) - d1);
    double gap_wide_high = std::abs(solve_for(1.1) - d1);
    CHECK(gap_near_low < gap_wide_low);
    CHECK(gap_near_high < gap_wide_high);
    CHECK(gap_near_low < 0.01);
    CHECK(gap_near_high < 0.01);
}
