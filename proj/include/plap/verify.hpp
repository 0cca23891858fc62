#pragma once

#include <random>
#include <string>
#include <vector>

#include "plap/eigensolve.hpp"
#include "plap/functional.hpp"
#include "plap/io.hpp"

namespace plap {

struct SuiteResult {
    std::string name;
    bool pass = false;
    json detail;
};

struct VerificationReport {
    std::vector<SuiteResult> suites;
    bool all_pass() const {
        for (const auto& s : suites)
            if (!s.pass) return false;
        return true;
    }
};

namespace vdetail {

inline Field random_field(const ProblemSpec& s, std::uint64_t seed, std::uint64_t stream) {
    auto rng = make_rng(seed, stream);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Field u(static_cast<std::size_t>(s.dofs()));
    for (auto& v : u.values) v = dist(rng);
    return u;
}

/// Nodewise bounded away from zero with alternating sign: keeps |u| and the
/// fluxes away from the nonsmooth point of |t|^{p-2}t for p < 2.
inline Field zigzag_field(const ProblemSpec& s, std::uint64_t seed, std::uint64_t stream) {
    auto rng = make_rng(seed, stream);
    std::uniform_real_distribution<double> dist(0.0, 0.3);
    Field u(static_cast<std::size_t>(s.dofs()));
    for (std::size_t i = 0; i < u.size(); ++i)
        u[i] = (i % 2 == 0 ? 1.0 : -1.0) * (1.0 + dist(rng));
    return u;
}

} // namespace vdetail

/// The verification suites behind the CLI verify command: gradient checks,
/// the monotonicity gap sweep, homogeneity and Euler identities, the
/// f-condition report, the p-independent lambda_1 anchors, the flip
/// identity, and summation by parts.
inline VerificationReport run_verification_suites(const ProblemSpec& s, std::uint64_t seed) {
    VerificationReport rep;

    {  // gradient consistency against central differences
        SuiteResult r;
        r.name = "gradient-central-difference";
        double worst = 0.0;
        int count = 20;
        for (int k = 0; k < count; ++k) {
            Field u = s.p >= 2.0 ? vdetail::random_field(s, seed, 100 + static_cast<std::uint64_t>(k))
                                 : vdetail::zigzag_field(s, seed, 100 + static_cast<std::uint64_t>(k));
            Field v = vdetail::random_field(s, seed, 200 + static_cast<std::uint64_t>(k));
            EnergyGradients g = grad_energy(u, s);
            double analytic = inner(g.grad_phi, v, s);
            double eps = 1e-5;
            Field up = u, um = u;
            axpy(eps, v, up);
            axpy(-eps, v, um);
            double numeric = (eval_energy(up, s).Phi - eval_energy(um, s).Phi) / (2.0 * eps);
            double rel = std::abs(analytic - numeric) / (std::abs(numeric) + 1e-30);
            worst = std::max(worst, rel);
        }
        r.pass = worst < 1e-6;
        r.detail = json{{"fields", count}, {"worst_relative_error", worst},
                        {"epsilon", 1e-5}};
        rep.suites.push_back(std::move(r));
    }

    {  // homogeneity and Euler identities
        SuiteResult r;
        r.name = "homogeneity-euler";
        double worst = 0.0;
        for (int k = 0; k < 20; ++k) {
            Field u = vdetail::random_field(s, seed, 300 + static_cast<std::uint64_t>(k));
            EnergyBreakdown e = eval_energy(u, s);
            for (double t : {0.5, -1.7, 3.0}) {
                EnergyBreakdown et = eval_energy(t * u, s);
                double tp = std::pow(std::abs(t), s.p);
                worst = std::max(worst, std::abs(et.H - tp * e.H) / (1.0 + tp * e.H));
                worst = std::max(worst, std::abs(et.I - tp * e.I) / (1.0 + std::abs(tp * e.I)));
            }
            EnergyGradients g = grad_energy(u, s);
            worst = std::max(worst, std::abs(inner(g.grad_h, u, s) - s.p * e.H) / (1.0 + s.p * e.H));
            worst = std::max(worst,
                             std::abs(inner(g.grad_i, u, s) - s.p * e.I) / (1.0 + std::abs(s.p * e.I)));
        }
        r.pass = worst < 1e-12;
        r.detail = json{{"worst_scaled_error", worst}};
        rep.suites.push_back(std::move(r));
    }

    {  // monotonicity inequality sweep
        SuiteResult r;
        r.name = "lemma-monotonicity-gap";
        double worst = std::numeric_limits<double>::infinity();
        int pairs = 200;
        bool ok = true;
        auto rng = make_rng(seed, 400);
        std::uniform_real_distribution<double> amp(0.1, 4.0);
        for (int k = 0; k < pairs; ++k) {
            Field u = amp(rng) * vdetail::random_field(s, seed, 500 + static_cast<std::uint64_t>(k));
            Field v = amp(rng) * vdetail::random_field(s, seed, 700 + static_cast<std::uint64_t>(k));
            double nu = eval_energy(u, s).norm_W;
            double nv = eval_energy(v, s).norm_W;
            double scale = 1.0 + std::pow(nu, s.p) + std::pow(nv, s.p);
            double gap = monotonicity_gap(u, v, s) / scale;
            worst = std::min(worst, gap);
            if (gap < -1e-10) ok = false;
        }
        r.pass = ok;
        r.detail = json{{"pairs", pairs}, {"worst_scaled_gap", worst}, {"floor", -1e-10}};
        rep.suites.push_back(std::move(r));
    }

    {  // nonlinearity contract
        SuiteResult r;
        r.name = "f-conditions";
        SamplingPlan plan;
        plan.x_points = {std::vector<double>(static_cast<std::size_t>(s.grid.dims), 0.0)};
        FConditionReport f = check_f_conditions(s.f, s.p, plan);
        r.pass = f.all_pass();
        r.detail = freport_to_json(f);
        rep.suites.push_back(std::move(r));
    }

    {  // lambda_1 = 1 anchors, p-independent on the unit circle
        SuiteResult r;
        r.name = "lambda1-anchors";
        json anchors = json::array();
        bool ok = true;
        int n = s.grid.kind == GridKind::Periodic1d
                    ? std::min(s.grid.nodes_per_axis[0], 128)
                    : 128;
        for (double p : {1.5, 2.0, 3.0}) {
            auto anchor = ProblemSpec::make(GridSpec::periodic_1d(n, 1.0), p, 0.0,
                                            CoefficientSpec::constant(1.0),
                                            CoefficientSpec::constant(1.0),
                                            NonlinearitySpec::pure_power(4.0));
            RayleighOptions opts;
            opts.seed = seed;
            opts.multistart = 4;
            Field init = random_positive_i_field(anchor, seed, 0);
            EigenPair pair = minimize_rayleigh(anchor, init, default_eigen_tol(p), opts);
            double err = std::abs(pair.lambda - 1.0);
            if (!(err < 1e-6)) ok = false;
            anchors.push_back(json{{"p", p}, {"lambda1", pair.lambda}, {"error", err},
                                   {"converged", pair.converged}});
        }
        r.pass = ok;
        r.detail = json{{"n", n}, {"anchors", anchors}};
        rep.suites.push_back(std::move(r));
    }

    {  // (lambda, V) -> (-lambda, -V) flip identity, bitwise
        SuiteResult r;
        r.name = "flip-identity";
        ProblemSpec flipped =
            ProblemSpec::make(GridSpec{s.grid.kind, s.grid.dims, s.grid.nodes_per_axis, s.grid.extents},
                              s.p, -s.lambda_original, s.b_spec,
                              CoefficientSpec::expression("-(" + s.v_spec.text + ")"), s.f);
        bool ok = true;
        for (int k = 0; k < 100; ++k) {
            Field u = vdetail::random_field(s, seed, 900 + static_cast<std::uint64_t>(k));
            if (eval_energy(u, s).Phi != eval_energy(u, flipped).Phi) ok = false;
        }
        r.pass = ok;
        r.detail = json{{"fields", 100}, {"comparison", "bitwise"}};
        rep.suites.push_back(std::move(r));
    }

    {  // summation by parts on this grid
        SuiteResult r;
        r.name = "summation-by-parts";
        Field u = vdetail::random_field(s, seed, 1100);
        Field v = vdetail::random_field(s, seed, 1101);
        Flux fu = forward_difference(u, s.grid);
        Flux fv = forward_difference(v, s.grid);
        double lhs = 0.0;
        for (std::size_t e = 0; e < fu.size(); ++e) lhs += fu[e] * fv[e];
        lhs *= s.grid.node_weight;
        Field div_u = divergence(fu, s.grid);
        double rhs = -inner(div_u, v, s);
        double err = std::abs(lhs - rhs) / (std::abs(lhs) + std::abs(rhs) + 1.0);
        r.pass = err < 1e-12;
        r.detail = json{{"relative_error", err}};
        rep.suites.push_back(std::move(r));
    }

    return rep;
}

inline json verification_to_json(const VerificationReport& rep) {
    json suites = json::array();
    for (const auto& s : rep.suites)
        suites.push_back(json{{"name", s.name}, {"pass", s.pass}, {"detail", s.detail}});
    return json{{"all_pass", rep.all_pass()}, {"suites", std::move(suites)}};
}

} // namespace plap
