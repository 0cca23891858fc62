#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "plap/grid.hpp"

using namespace plap;

namespace {

Field random_field(const Grid& g, std::uint64_t seed) {
    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Field u(static_cast<std::size_t>(g.num_dofs));
    for (auto& v : u.values) v = dist(rng);
    return u;
}

} // namespace

TEST_CASE("periodic 1d construction") {
    Grid g = build_grid(GridSpec::periodic_1d(8, 1.0));
    CHECK(g.num_dofs == 8);
    CHECK(g.spacing[0] == Catch::Approx(0.125));
    CHECK(g.node_weight == Catch::Approx(0.125));
    // weights sum to the domain measure
    double total = g.node_weight * static_cast<double>(g.num_dofs);
    CHECK(total == Catch::Approx(g.measure).epsilon(1e-12));
    CHECK(g.edges.size() == 8);  // wrap included
}

TEST_CASE("box 2d construction flags the boundary ring") {
    Grid g = build_grid(GridSpec::box_nd(2, 16, 4.0));
    CHECK(g.lattice_size == 256);
    CHECK(g.num_dofs == 14 * 14);  // interior only
    CHECK(g.measure == Catch::Approx(16.0));
    double total = g.node_weight * static_cast<double>(g.lattice_size);
    CHECK(total == Catch::Approx(g.measure).epsilon(1e-12));
}

TEST_CASE("construction preconditions") {
    CHECK_THROWS_AS(build_grid(GridSpec::periodic_1d(3, 1.0)), std::invalid_argument);
    CHECK_THROWS_AS(build_grid(GridSpec::periodic_1d(8, 0.0)), std::invalid_argument);
    CHECK_THROWS_AS(build_grid(GridSpec::periodic_1d(8, -2.0)), std::invalid_argument);
}

TEST_CASE("grid construction is pure") {
    Grid a = build_grid(GridSpec::box_nd(2, 8, 3.0));
    Grid b = build_grid(GridSpec::box_nd(2, 8, 3.0));
    REQUIRE(a.num_dofs == b.num_dofs);
    CHECK(a.dof_xyz == b.dof_xyz);
    CHECK(a.spacing == b.spacing);
    REQUIRE(a.edges.size() == b.edges.size());
    for (std::size_t e = 0; e < a.edges.size(); ++e) {
        CHECK(a.edges[e].tail_dof == b.edges[e].tail_dof);
        CHECK(a.edges[e].head_dof == b.edges[e].head_dof);
    }
}

TEST_CASE("forward difference on constants and ramps") {
    Grid g = build_grid(GridSpec::periodic_1d(8, 1.0));

    Field c(8, 3.7);
    Flux fc = forward_difference(c, g);
    for (std::size_t e = 0; e < fc.size(); ++e) CHECK(fc[e] == 0.0);

    Field ramp(8);
    for (int i = 0; i < 8; ++i) ramp[static_cast<std::size_t>(i)] = static_cast<double>(i) * g.spacing[0];
    Flux fr = forward_difference(ramp, g);
    int wrap_edges = 0;
    for (std::size_t e = 0; e < fr.size(); ++e) {
        const auto& ed = g.edges[e];
        if (ed.head_dof < ed.tail_dof) {
            CHECK(fr[e] == Catch::Approx(-7.0));
            ++wrap_edges;
        } else {
            CHECK(fr[e] == Catch::Approx(1.0));
        }
    }
    CHECK(wrap_edges == 1);
}

TEST_CASE("forward difference matches an independently coded loop") {
    Grid g = build_grid(GridSpec::periodic_1d(32, 2.0));
    Field u = random_field(g, 7);
    Flux f = forward_difference(u, g);

    // second naive implementation: explicit wrap indexing
    int n = 32;
    double h = 2.0 / 32.0;
    REQUIRE(f.size() == 32);
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        long i = g.edges[e].tail_dof;
        long j = (i + 1) % n;
        double expect = (u[static_cast<std::size_t>(j)] - u[static_cast<std::size_t>(i)]) / h;
        CHECK(f[e] == Catch::Approx(expect).margin(1e-15));
    }
}

TEST_CASE("forward difference rejects mismatched fields") {
    Grid g = build_grid(GridSpec::periodic_1d(8, 1.0));
    Field u(7, 1.0);
    CHECK_THROWS_AS(forward_difference(u, g), std::invalid_argument);
}

TEST_CASE("summation by parts: flux pairing equals negative divergence pairing") {
    auto check_sbp = [](const Grid& g, std::uint64_t seed) {
        Field u = random_field(g, seed);
        Field v = random_field(g, seed + 1);
        Flux fu = forward_difference(u, g);
        Flux fv = forward_difference(v, g);

        double lhs = 0.0;
        for (std::size_t e = 0; e < fu.size(); ++e) lhs += fu[e] * fv[e];
        lhs *= g.node_weight;

        Field div_u = divergence(fu, g);
        double rhs = 0.0;
        for (long j = 0; j < g.num_dofs; ++j)
            rhs += div_u[static_cast<std::size_t>(j)] * v[static_cast<std::size_t>(j)];
        rhs *= -g.node_weight;

        double scale = std::abs(lhs) + std::abs(rhs) + 1.0;
        CHECK(std::abs(lhs - rhs) / scale < 1e-12);
    };

    check_sbp(build_grid(GridSpec::periodic_1d(64, 1.0)), 11);
    check_sbp(build_grid(GridSpec::periodic_1d(33, 0.7)), 12);
    check_sbp(build_grid(GridSpec::box_nd(2, 12, 4.0)), 13);
    check_sbp(build_grid(GridSpec::box_nd(3, 6, 2.0)), 14);
}
