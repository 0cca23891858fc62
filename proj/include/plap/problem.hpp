#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "plap/expr.hpp"
#include "plap/grid.hpp"
#include "plap/nonlinearity.hpp"

namespace plap {

/// A coefficient given either as a constant or as a spatial expression
/// sampled at grid nodes.
struct CoefficientSpec {
    std::string text = "1";

    static CoefficientSpec constant(double c) {
        CoefficientSpec s;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", c);
        s.text = buf;
        return s;
    }

    static CoefficientSpec expression(std::string e) {
        CoefficientSpec s;
        s.text = std::move(e);
        return s;
    }

    std::vector<double> sample(const Grid& g) const {
        Expr e = Expr::parse(text, g.dims);
        std::vector<double> out(static_cast<std::size_t>(g.num_dofs));
        for (long dof = 0; dof < g.num_dofs; ++dof)
            out[static_cast<std::size_t>(dof)] = e.eval_spatial(g.dof_coords(dof));
        return out;
    }
};

/// The full problem instance. Construction samples the coefficients,
/// validates the contract invariants and applies the lambda >= 0
/// normalization: (lambda, V) and (-lambda, -V) produce the same instance,
/// which makes the flip identity exact.
struct ProblemSpec {
    double p = 2.0;
    double lambda = 0.0;           // normalized, >= 0
    double lambda_original = 0.0;  // as given
    bool flipped = false;

    Grid grid;
    std::vector<double> b;  // per dof, sampled
    std::vector<double> V;  // per dof, sampled (sign flipped if normalized)
    double b0 = 0.0;        // min b, recorded lower bound
    double v_inf = 0.0;     // max |V|
    bool v_plus_nonzero = false;

    NonlinearitySpec f;

    CoefficientSpec b_spec;
    CoefficientSpec v_spec;

    static ProblemSpec make(const GridSpec& gspec, double p, double lambda,
                            const CoefficientSpec& b_spec, const CoefficientSpec& v_spec,
                            const NonlinearitySpec& f) {
        if (!(p > 1.0)) throw std::invalid_argument("ProblemSpec: p must be > 1");
        ProblemSpec s;
        s.p = p;
        s.lambda_original = lambda;
        s.b_spec = b_spec;
        s.v_spec = v_spec;
        s.f = f;
        s.grid = build_grid(gspec);
        s.b = b_spec.sample(s.grid);
        s.V = v_spec.sample(s.grid);

        s.b0 = std::numeric_limits<double>::infinity();
        for (double bv : s.b) s.b0 = std::min(s.b0, bv);
        if (!(s.b0 > 0.0))
            throw std::invalid_argument("ProblemSpec: b must satisfy b >= b0 > 0, sampled min is " +
                                        std::to_string(s.b0));
        for (double vv : s.V) {
            if (!std::isfinite(vv))
                throw std::invalid_argument("ProblemSpec: V must be bounded (finite at all nodes)");
            s.v_inf = std::max(s.v_inf, std::abs(vv));
        }

        if (lambda < 0.0) {
            s.lambda = -lambda;
            s.flipped = true;
            for (double& vv : s.V) vv = -vv;
        } else {
            s.lambda = lambda;
        }
        for (double vv : s.V)
            if (vv > 0.0) s.v_plus_nonzero = true;

        // nonlinearity contract: q > p, subcritical growth where it binds
        if (!(f.q > p))
            throw std::invalid_argument("ProblemSpec: nonlinearity exponent q must exceed p");
        if (!(f.coeff >= 0.0))
            throw std::invalid_argument("ProblemSpec: nonlinearity coeff must be >= 0");
        if (!(f.theta >= 1.0))
            throw std::invalid_argument("ProblemSpec: nonlinearity theta must be >= 1");
        double n_dim = static_cast<double>(s.grid.dims);
        if (s.grid.kind == GridKind::BoxNd && n_dim > p) {
            double p_star = n_dim * p / (n_dim - p);
            if (!(f.q < p_star))
                throw std::invalid_argument(
                    "ProblemSpec: q must be subcritical (q < Np/(N-p) = " + std::to_string(p_star) +
                    ") for box domains with N > p");
        }
        return s;
    }

    long dofs() const { return grid.num_dofs; }

    /// Conjugate-side tolerance used by the cone membership test.
    double cone_tolerance(double H, double I) const {
        return 1e-12 * (H + std::abs(I) + 1.0);
    }

    /// Threshold separating rounding-level fields from genuine solutions.
    double delta_nontrivial() const { return 1e-4 * std::pow(grid.measure, 1.0 / p); }
};

} // namespace plap
