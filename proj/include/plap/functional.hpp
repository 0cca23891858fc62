#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "plap/problem.hpp"

namespace plap {

/// Values of the energy pieces at one field:
///   H = (1/p) sum(|flux|^p + b|u|^p) w,  I = (1/p) sum V|u|^p w,
///   J = sum F(x,u) w,  Phi = H - lambda I - J,  norm_W = (pH)^{1/p}.
struct EnergyBreakdown {
    double H = 0.0;
    double I = 0.0;
    double J = 0.0;
    double Phi = 0.0;
    double norm_W = 0.0;
};

/// Gradients in the quadrature representation: <dE(u), v> = sum_j g_j v_j w_j,
/// i.e. g is the plain derivative of the discrete sum divided by the node
/// weight. On the interior this is the strong-form residual.
struct EnergyGradients {
    Field grad_h;
    Field grad_i;
    Field grad_j;
    Field grad_phi;
};

namespace detail {

[[noreturn]] inline void non_finite_node(const char* what, long node) {
    throw std::runtime_error(std::string(what) + ": non-finite intermediate at node " +
                             std::to_string(node));
}

} // namespace detail

/// Quadrature inner product of two DOF vectors.
inline double inner(const Field& a, const Field& b, const ProblemSpec& s) {
    return dot(a.span(), b.span()) * s.grid.node_weight;
}

/// Quadrature-weighted Euclidean norm; used as the dual-norm proxy for
/// residual vectors.
inline double dual_norm(const Field& g, const ProblemSpec& s) {
    return std::sqrt(dot(g.span(), g.span()) * s.grid.node_weight);
}

inline EnergyBreakdown eval_energy(const Field& u, const ProblemSpec& s) {
    const Grid& g = s.grid;
    g.require_conforming(u, "eval_energy");
    long bad = first_non_finite(u.span());
    if (bad >= 0) detail::non_finite_node("eval_energy", bad);

    const double p = s.p;
    const double w = g.node_weight;

    double flux_sum = 0.0;
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        const auto& ed = g.edges[e];
        double ut = ed.tail_dof >= 0 ? u[static_cast<std::size_t>(ed.tail_dof)] : 0.0;
        double uh = ed.head_dof >= 0 ? u[static_cast<std::size_t>(ed.head_dof)] : 0.0;
        double fx = (uh - ut) * g.inv_spacing[static_cast<std::size_t>(ed.axis)];
        double term = abs_power(fx, p);
        if (!std::isfinite(term))
            detail::non_finite_node("eval_energy (flux term)",
                                    ed.tail_dof >= 0 ? ed.tail_dof : ed.head_dof);
        flux_sum += term;
    }

    double b_sum = 0.0, v_sum = 0.0, j_sum = 0.0;
    const bool power_f = s.f.is_power();
    for (long j = 0; j < g.num_dofs; ++j) {
        std::size_t i = static_cast<std::size_t>(j);
        double up = abs_power(u[i], p);
        double fj = power_f ? s.f.F({}, u[i]) : s.f.F(g.dof_coords(j), u[i]);
        double hb = s.b[i] * up;
        double iv = s.V[i] * up;
        if (!std::isfinite(hb) || !std::isfinite(iv) || !std::isfinite(fj))
            detail::non_finite_node("eval_energy (node term)", j);
        b_sum += hb;
        v_sum += iv;
        j_sum += fj;
    }

    EnergyBreakdown out;
    out.H = (flux_sum + b_sum) * w / p;
    out.I = v_sum * w / p;
    out.J = j_sum * w;
    out.Phi = out.H - s.lambda * out.I - out.J;
    out.norm_W = std::pow(p * out.H, 1.0 / p);
    if (!std::isfinite(out.Phi)) detail::non_finite_node("eval_energy (total)", 0);
    return out;
}

/// Exact gradients of the discrete sums of eval_energy.
inline EnergyGradients grad_energy(const Field& u, const ProblemSpec& s) {
    const Grid& g = s.grid;
    g.require_conforming(u, "grad_energy");
    long bad = first_non_finite(u.span());
    if (bad >= 0) detail::non_finite_node("grad_energy", bad);

    const double p = s.p;
    EnergyGradients out;
    out.grad_h = Field(static_cast<std::size_t>(g.num_dofs), 0.0);
    out.grad_i = Field(static_cast<std::size_t>(g.num_dofs), 0.0);
    out.grad_j = Field(static_cast<std::size_t>(g.num_dofs), 0.0);
    out.grad_phi = Field(static_cast<std::size_t>(g.num_dofs), 0.0);

    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        const auto& ed = g.edges[e];
        double ut = ed.tail_dof >= 0 ? u[static_cast<std::size_t>(ed.tail_dof)] : 0.0;
        double uh = ed.head_dof >= 0 ? u[static_cast<std::size_t>(ed.head_dof)] : 0.0;
        double inv_h = g.inv_spacing[static_cast<std::size_t>(ed.axis)];
        double contrib = odd_power((uh - ut) * inv_h, p) * inv_h;
        if (ed.tail_dof >= 0) out.grad_h[static_cast<std::size_t>(ed.tail_dof)] -= contrib;
        if (ed.head_dof >= 0) out.grad_h[static_cast<std::size_t>(ed.head_dof)] += contrib;
    }

    const bool power_f = s.f.is_power();
    for (long j = 0; j < g.num_dofs; ++j) {
        std::size_t i = static_cast<std::size_t>(j);
        double phi_u = odd_power(u[i], p);
        out.grad_h[i] += s.b[i] * phi_u;
        out.grad_i[i] = s.V[i] * phi_u;
        out.grad_j[i] = power_f ? s.f.f({}, u[i]) : s.f.f(g.dof_coords(j), u[i]);
        out.grad_phi[i] = out.grad_h[i] - s.lambda * out.grad_i[i] - out.grad_j[i];
        if (!std::isfinite(out.grad_phi[i])) detail::non_finite_node("grad_energy", j);
    }
    return out;
}

/// Cerami-weighted residual (1 + ||u||_W) ||Phi'(u)||, the principled
/// stopping quantity for critical point searches.
inline double cerami_residual(const Field& u, const ProblemSpec& s) {
    EnergyBreakdown e = eval_energy(u, s);
    EnergyGradients gr = grad_energy(u, s);
    return (1.0 + e.norm_W) * dual_norm(gr.grad_phi, s);
}

/// <H'(u)-H'(v), u-v> - (||u||^{p-1} - ||v||^{p-1})(||u|| - ||v||).
/// The discrete analog of the monotonicity inequality; the contract is
/// gap >= -1e-10 (1 + ||u||^p + ||v||^p).
inline double monotonicity_gap(const Field& u, const Field& v, const ProblemSpec& s) {
    s.grid.require_conforming(u, "monotonicity_gap");
    s.grid.require_conforming(v, "monotonicity_gap");
    EnergyGradients gu = grad_energy(u, s);
    EnergyGradients gv = grad_energy(v, s);
    Field du = u - v;
    Field dg = gu.grad_h - gv.grad_h;
    double pairing = inner(dg, du, s);
    double nu = eval_energy(u, s).norm_W;
    double nv = eval_energy(v, s).norm_W;
    double lower = (std::pow(nu, s.p - 1.0) - std::pow(nv, s.p - 1.0)) * (nu - nv);
    return pairing - lower;
}

struct ConeMembership {
    bool in_c_minus = false;
    bool in_c_plus = false;
    double H = 0.0;
    double I = 0.0;
    double tol = 0.0;

    bool neither() const { return !in_c_minus && !in_c_plus; }
};

/// Membership in the cones C- = {H <= lambda_m I} and C+ = {H >= lambda_{m+1} I},
/// tested with a scale-aware tolerance. The origin lies in both closed cones.
inline ConeMembership cone_membership(const Field& u, double lambda_m, double lambda_m1,
                                      const ProblemSpec& s) {
    if (!(lambda_m <= lambda_m1))
        throw std::invalid_argument("cone_membership: requires lambda_m <= lambda_m1");
    EnergyBreakdown e = eval_energy(u, s);
    ConeMembership m;
    m.H = e.H;
    m.I = e.I;
    m.tol = s.cone_tolerance(e.H, e.I);
    m.in_c_minus = e.H <= lambda_m * e.I + m.tol;
    m.in_c_plus = e.H >= lambda_m1 * e.I - m.tol;
    return m;
}

} // namespace plap
