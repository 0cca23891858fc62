#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "plap/eigensolve.hpp"
#include "plap/functional.hpp"

namespace plap {

/// Concrete search scaffolding for the cone linking: the index bracket
/// (lambda_m, lambda_{m+1}), the direction e outside C-, the two radii and
/// the level floor alpha on the sphere S+ = {u in C+ : ||u|| = r_plus}.
struct LinkingGeometry {
    int m = 0;
    double lambda_m = std::numeric_limits<double>::quiet_NaN();
    double lambda_m1 = std::numeric_limits<double>::quiet_NaN();
    Field e;               // ||e||_W = 1, e outside C-
    double r_plus = 0.0;
    double r_minus = 0.0;
    double alpha = 0.0;
    std::vector<Field> cone_basis;   // C- model: I-normalized eigenfunctions
    std::string cone_certification;  // exact-p2 | refined | none
    int membership_projections = 0;  // p != 2 cone samples pulled back to the model
};

struct TraceRow {
    int iteration = 0;
    double phi = 0.0;
    double cerami = 0.0;
    double norm = 0.0;
};

struct CriticalPointResult {
    Field u;
    double value = 0.0;   // Phi(u)
    double cerami = 0.0;
    int iterations = 0;
    std::string classification = "trivial";  // or nontrivial-candidate
    LinkingGeometry geometry;
    bool converged = false;
    double minimax_estimate = 0.0;  // min over iterations of max over samples
    double boundary_max_phi = 0.0;
    int boundary_violations = 0;
    std::string message;
    std::vector<TraceRow> trace;
};

struct GeometryOptions {
    std::uint64_t seed = 12345;
    int directions = 16;         // C+ directions sampled for r_plus / alpha
    int fit_radii = 8;           // radii per direction for the c1 r^p - c2 r^q fit
    int boundary_samples = 64;   // samples per radius level when placing r_minus
    int max_shrinks = 60;
    int max_doublings = 60;
};

struct SolveOptions {
    int path_nodes = 41;       // mountain pass
    int samples = 200;         // linking surface
    int max_iterations = 5000;
    int window = 2;            // band nodes refreshed around the peak
    std::uint64_t seed = 12345;
    double delta_nontrivial = -1.0;  // <0: use the spec default
    double boundary_tol = -1.0;      // <0: scale-aware default
};

inline double solve_tolerance_default(double p) { return p == 2.0 ? 1e-8 : 1e-6; }

namespace detail {

inline double norm_w_of(const Field& u, const ProblemSpec& s) {
    return eval_energy(u, s).norm_W;
}

inline Field rough_random_field(const ProblemSpec& s, std::uint64_t seed, std::uint64_t stream) {
    auto rng = make_rng(seed, stream);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Field u(static_cast<std::size_t>(s.dofs()));
    for (auto& v : u.values) v = dist(rng);
    return u;
}

/// Neighbor-averaged noise: random field with O(1) values and O(1) gradients,
/// the representative scale for sphere minima (rough fields hide all their
/// W-norm in the gradient and carry almost no L^q mass).
inline Field smooth_random_field(const ProblemSpec& s, std::uint64_t seed, std::uint64_t stream) {
    Field u = rough_random_field(s, seed, stream);
    const Grid& g = s.grid;
    long passes = 2 + g.num_dofs / 8;
    Field tmp(u.size());
    for (long pass = 0; pass < std::min<long>(passes, 200); ++pass) {
        std::fill(tmp.values.begin(), tmp.values.end(), 0.0);
        std::vector<double> wsum(u.size(), 1.0);
        for (std::size_t i = 0; i < u.size(); ++i) tmp[i] = u[i];
        for (const auto& ed : g.edges) {
            if (ed.tail_dof < 0 || ed.head_dof < 0) continue;
            tmp[static_cast<std::size_t>(ed.tail_dof)] += u[static_cast<std::size_t>(ed.head_dof)];
            tmp[static_cast<std::size_t>(ed.head_dof)] += u[static_cast<std::size_t>(ed.tail_dof)];
            wsum[static_cast<std::size_t>(ed.tail_dof)] += 1.0;
            wsum[static_cast<std::size_t>(ed.head_dof)] += 1.0;
        }
        for (std::size_t i = 0; i < u.size(); ++i) u[i] = tmp[i] / wsum[i];
    }
    return u;
}

/// Random direction in C+ with ||d||_W = 1. Prefers combinations of the
/// computed eigenfunctions above lambda_m (exact C+ members at p = 2) and
/// falls back to smooth random fields filtered by the membership test.
inline Field sample_cplus_direction(const ProblemSpec& s, const LinkingGeometry& g,
                                    const SpectrumEstimate* spectrum, std::uint64_t seed,
                                    std::uint64_t stream) {
    for (int attempt = 0; attempt < 200; ++attempt) {
        Field d;
        std::uint64_t str = stream * 211 + static_cast<std::uint64_t>(attempt);
        bool built = false;
        if (spectrum && attempt % 3 != 2) {
            auto rng = make_rng(seed, str);
            std::normal_distribution<double> coef(0.0, 1.0);
            d = Field(static_cast<std::size_t>(s.dofs()), 0.0);
            for (std::size_t n = static_cast<std::size_t>(g.m); n < spectrum->values.size(); ++n) {
                if (!spectrum->values[n].pair) break;
                axpy(coef(rng), spectrum->values[n].pair->u, d);
                built = true;
            }
        }
        if (!built) d = smooth_random_field(s, seed, str);
        double nw = norm_w_of(d, s);
        if (!(nw > 0.0)) continue;
        d = (1.0 / nw) * d;
        if (g.m >= 1) {
            ConeMembership cm = cone_membership(d, g.lambda_m, g.lambda_m1, s);
            if (!cm.in_c_plus) continue;
        }
        return d;
    }
    throw std::runtime_error("estimate_geometry: could not sample a direction in C+");
}

/// Phi that treats overflow in trial points as +infinity instead of failing.
inline double phi_or_inf(const Field& u, const ProblemSpec& s) {
    if (!all_finite(u.span())) return std::numeric_limits<double>::infinity();
    try {
        return eval_energy(u, s).Phi;
    } catch (const std::runtime_error&) {
        return std::numeric_limits<double>::infinity();
    }
}

inline double cerami_or_inf(const Field& u, const ProblemSpec& s) {
    if (!all_finite(u.span())) return std::numeric_limits<double>::infinity();
    try {
        return cerami_residual(u, s);
    } catch (const std::runtime_error&) {
        return std::numeric_limits<double>::infinity();
    }
}

/// Sample of C- + R+ e with prescribed W-norm. Returns false when the cone
/// model is empty and t = 0 was drawn.
inline bool sample_cone_ray(const ProblemSpec& s, const LinkingGeometry& g, double radius,
                            std::uint64_t seed, std::uint64_t stream, bool force_ray, Field& out) {
    auto rng = make_rng(seed, stream);
    std::normal_distribution<double> coef(0.0, 1.0);
    Field u(static_cast<std::size_t>(s.dofs()), 0.0);
    for (const auto& b : g.cone_basis) axpy(coef(rng), b, u);
    double t = std::abs(coef(rng));
    if (force_ray && t < 0.3) t = 0.3;
    axpy(t, g.e, u);
    double nw = norm_w_of(u, s);
    if (!(nw > 0.0)) return false;
    out = (radius / nw) * u;
    return true;
}

} // namespace detail

/// Estimates the linking geometry of the current problem: fits the radial
/// model c1 r^p - c2 r^q on sampled C+ rays for r_plus and alpha, then
/// doubles the outer radius until the sampled cap of the cone-plus-ray set
/// is nonpositive.
inline LinkingGeometry estimate_geometry(const ProblemSpec& s, const SpectrumEstimate& spectrum,
                                         const GeometryOptions& opts = {}) {
    LinkingGeometry g;

    if (!s.v_plus_nonzero) {
        g.m = 0;
        g.cone_certification = "none";
    } else {
        if (spectrum.values.empty())
            throw std::invalid_argument("estimate_geometry: spectrum estimate is empty");
        g.m = spectrum.index_below(s.lambda);  // throws on resonance
        if (g.m >= static_cast<int>(spectrum.values.size()))
            throw std::runtime_error(
                "estimate_geometry: spectrum too short to bracket lambda; compute more values");
        if (g.m >= 1) {
            g.lambda_m = spectrum.values[static_cast<std::size_t>(g.m - 1)].lambda;
            for (int n = 0; n < g.m; ++n) {
                const auto& sv = spectrum.values[static_cast<std::size_t>(n)];
                if (!sv.pair || !all_finite(sv.pair->u.span()))
                    throw std::runtime_error(
                        "estimate_geometry: cone model needs eigenfunctions for the first m "
                        "values; entry " + std::to_string(n) + " has none");
                g.cone_basis.push_back(sv.pair->u);
            }
            g.cone_certification = s.p == 2.0 ? "exact-p2" : "refined";
        } else {
            g.cone_certification = s.p == 2.0 ? "exact-p2" : "refined";
        }
        g.lambda_m1 = spectrum.values[static_cast<std::size_t>(g.m)].lambda;
    }

    // e: the (m+1)-th eigenfunction when available, else a random field
    // rejected into the complement of C-
    bool have_e = false;
    if (s.v_plus_nonzero && g.m < static_cast<int>(spectrum.values.size())) {
        const auto& sv = spectrum.values[static_cast<std::size_t>(g.m)];
        if (sv.pair && all_finite(sv.pair->u.span())) {
            g.e = sv.pair->u;
            have_e = true;
        }
    }
    for (int attempt = 0; !have_e && attempt < 200; ++attempt) {
        Field cand = detail::rough_random_field(s, opts.seed, 77000 + static_cast<std::uint64_t>(attempt));
        if (g.m >= 1) {
            ConeMembership cm = cone_membership(cand, g.lambda_m, g.lambda_m1, s);
            if (cm.in_c_minus) continue;
        }
        g.e = cand;
        have_e = true;
    }
    if (!have_e) throw std::runtime_error("estimate_geometry: could not find e outside C-");
    {
        double nw = detail::norm_w_of(g.e, s);
        if (!(nw > 0.0)) throw std::runtime_error("estimate_geometry: degenerate direction e");
        g.e = (1.0 / nw) * g.e;
    }
    if (g.m >= 1) {
        ConeMembership cm = cone_membership(g.e, g.lambda_m, g.lambda_m1, s);
        if (cm.in_c_minus)
            throw std::runtime_error("estimate_geometry: chosen e lies in C-, geometry invalid");
    }

    // sample C+ directions and fit Phi(r d) ~ c1 r^p - c2 r^q; e itself is
    // always a direction (it pins alpha below the level along the ray)
    std::vector<Field> dirs;
    if (g.m == 0 || cone_membership(g.e, g.lambda_m, g.lambda_m1, s).in_c_plus)
        dirs.push_back(g.e);
    for (int k = 0; k < opts.directions; ++k)
        dirs.push_back(detail::sample_cplus_direction(s, g, &spectrum, opts.seed,
                                                      static_cast<std::uint64_t>(k)));

    auto phi_at = [&](const Field& d, double r) {
        Field u = r * d;
        return detail::phi_or_inf(u, s);
    };

    double s11 = 0.0, s12 = 0.0, s22 = 0.0, b1 = 0.0, b2 = 0.0;
    const double p = s.p, q = s.f.q;
    for (const auto& d : dirs) {
        // bracket the sign change of Phi along the ray
        double r_hi = 1.0;
        int guard = 0;
        if (phi_at(d, r_hi) > 0.0) {
            while (phi_at(d, r_hi) > 0.0 && guard++ < opts.max_doublings) r_hi *= 2.0;
        } else {
            while (phi_at(d, r_hi) <= 0.0 && guard++ < opts.max_doublings) r_hi *= 0.5;
            r_hi *= 2.0;
        }
        for (int i = 0; i < opts.fit_radii; ++i) {
            double r = r_hi * std::pow(0.5, 1.0 + static_cast<double>(i) / 2.0);
            double phi = phi_at(d, r);
            double xp = std::pow(r, p), xq = -std::pow(r, q);
            s11 += xp * xp;
            s12 += xp * xq;
            s22 += xq * xq;
            b1 += xp * phi;
            b2 += xq * phi;
        }
    }
    double det = s11 * s22 - s12 * s12;
    double c1 = 0.0, c2 = 0.0;
    if (det != 0.0) {
        c1 = (b1 * s22 - b2 * s12) / det;
        c2 = (b2 * s11 - b1 * s12) / det;
    }
    double r_star;
    if (c1 > 0.0 && c2 > 0.0) {
        r_star = std::pow(p * c1 / (q * c2), 1.0 / (q - p));
    } else {
        // fit degenerated; fall back to half the first sign change
        double r_hi = 1.0;
        int guard = 0;
        while (phi_at(dirs[0], r_hi) > 0.0 && guard++ < opts.max_doublings) r_hi *= 2.0;
        r_star = 0.5 * r_hi;
    }

    auto min_on_sphere = [&](double r) {
        double lo = std::numeric_limits<double>::infinity();
        for (const auto& d : dirs) lo = std::min(lo, phi_at(d, r));
        return lo;
    };
    std::vector<std::pair<double, double>> profile;
    double alpha = min_on_sphere(r_star);
    profile.push_back({r_star, alpha});
    int shrinks = 0;
    while (!(alpha > 0.0) && shrinks++ < opts.max_shrinks) {
        r_star *= 0.7;
        alpha = min_on_sphere(r_star);
        profile.push_back({r_star, alpha});
    }
    if (!(alpha > 0.0)) {
        std::ostringstream msg;
        msg << "estimate_geometry: no radius with positive sphere minimum; profile:";
        for (auto& pr : profile) msg << " (r=" << pr.first << ", min=" << pr.second << ")";
        throw std::runtime_error(msg.str());
    }
    g.r_plus = r_star;
    g.alpha = alpha;

    // r_minus: double until the sampled cap of C- + R+ e is nonpositive
    double r = std::max(2.0 * g.r_plus, 1.0);
    int doublings = 0;
    for (;; r *= 2.0) {
        double cap_max = -std::numeric_limits<double>::infinity();
        Field u;
        for (int k = 0; k < opts.boundary_samples; ++k) {
            bool force_ray = k == 0;  // always include the pure ray
            if (!detail::sample_cone_ray(s, g, r, opts.seed, 9000 + static_cast<std::uint64_t>(k),
                                         force_ray, u))
                continue;
            cap_max = std::max(cap_max, eval_energy(u, s).Phi);
        }
        if (cap_max <= 0.0) break;
        if (++doublings >= opts.max_doublings)
            throw std::runtime_error(
                "estimate_geometry: sampled cap of the cone-plus-ray set stayed positive up to r = " +
                std::to_string(r));
    }
    g.r_minus = r;

    // sampled sanity of the frozen boundary: Phi <= 0 on D- and on the cap
    if (g.m >= 1) {
        Field u;
        auto rng = make_rng(opts.seed, 31337);
        std::uniform_real_distribution<double> rad(0.0, 1.0);
        for (int k = 0; k < opts.boundary_samples; ++k) {
            auto sub = make_rng(opts.seed, 40000 + static_cast<std::uint64_t>(k));
            std::normal_distribution<double> coef(0.0, 1.0);
            Field v(static_cast<std::size_t>(s.dofs()), 0.0);
            for (const auto& bfield : g.cone_basis) axpy(coef(sub), bfield, v);
            double nw = detail::norm_w_of(v, s);
            if (!(nw > 0.0)) continue;
            v = (rad(rng) * g.r_minus / nw) * v;
            double phi = eval_energy(v, s).Phi;
            double tol = s.cone_tolerance(eval_energy(v, s).H, eval_energy(v, s).I);
            if (phi > tol)
                throw std::runtime_error("estimate_geometry: Phi > 0 found inside D-, lambda below "
                                         "lambda_m? (phi = " + std::to_string(phi) + ")");
        }
    }
    return g;
}

namespace detail {

/// One Armijo step of gradient descent on Phi. Returns false when the line
/// search cannot certify a decrease at this scale.
inline bool armijo_phi_step(Field& u, double& phi, double& step, const ProblemSpec& s,
                            double max_move = std::numeric_limits<double>::infinity()) {
    EnergyGradients g = grad_energy(u, s);
    double slope = inner(g.grad_phi, g.grad_phi, s);
    if (!(slope > 0.0)) return false;
    double t = step;
    if (std::isfinite(max_move)) t = std::min(t, max_move / std::sqrt(slope));
    for (int bt = 0; bt < 50; ++bt) {
        Field trial = u;
        axpy(-t, g.grad_phi, trial);
        double phi_t = phi_or_inf(trial, s);
        if (phi_t <= phi - 1e-4 * t * slope) {
            u = std::move(trial);
            phi = phi_t;
            step = std::min(2.0 * t, 1e8);
            return true;
        }
        t *= 0.5;
    }
    step = std::max(t, 1e-14);
    return false;
}

/// Damped Newton polish of gradPhi(u) = 0 (p >= 2 only; the Hessian of the
/// p-power terms is unbounded at zeros for p < 2).
inline bool newton_polish_phi(Field& u, const ProblemSpec& s, double tol, int max_iter,
                              int* iterations_out = nullptr) {
    if (s.p < 2.0) return false;
    using SpMat = Eigen::SparseMatrix<double>;
    using Triplet = Eigen::Triplet<double>;
    const Grid& g = s.grid;
    const long M = g.num_dofs;

    auto residual_norm = [&](const Field& uu, Field& grad_out) {
        EnergyGradients gr = grad_energy(uu, s);
        grad_out = std::move(gr.grad_phi);
        return dual_norm(grad_out, s);
    };

    Field grad;
    double fnorm = residual_norm(u, grad);
    double shift = 0.0;
    int it = 0;
    for (; it < max_iter; ++it) {
        if ((1.0 + eval_energy(u, s).norm_W) * fnorm < tol) break;

        std::vector<Triplet> trips;
        trips.reserve(g.edges.size() * 4 + static_cast<std::size_t>(M));
        for (const auto& ed : g.edges) {
            double inv_h = g.inv_spacing[static_cast<std::size_t>(ed.axis)];
            double ut = ed.tail_dof >= 0 ? u[static_cast<std::size_t>(ed.tail_dof)] : 0.0;
            double uh = ed.head_dof >= 0 ? u[static_cast<std::size_t>(ed.head_dof)] : 0.0;
            double sfac = odd_power_derivative((uh - ut) * inv_h, s.p) * inv_h * inv_h;
            if (ed.tail_dof >= 0)
                trips.emplace_back(static_cast<int>(ed.tail_dof), static_cast<int>(ed.tail_dof), sfac);
            if (ed.head_dof >= 0)
                trips.emplace_back(static_cast<int>(ed.head_dof), static_cast<int>(ed.head_dof), sfac);
            if (ed.tail_dof >= 0 && ed.head_dof >= 0) {
                trips.emplace_back(static_cast<int>(ed.tail_dof), static_cast<int>(ed.head_dof), -sfac);
                trips.emplace_back(static_cast<int>(ed.head_dof), static_cast<int>(ed.tail_dof), -sfac);
            }
        }
        const bool power_f = s.f.is_power();
        for (long j = 0; j < M; ++j) {
            std::size_t i = static_cast<std::size_t>(j);
            double dphi = odd_power_derivative(u[i], s.p);
            double fp = power_f ? s.f.f_t({}, u[i]) : s.f.f_t(g.dof_coords(j), u[i]);
            trips.emplace_back(static_cast<int>(j), static_cast<int>(j),
                               s.b[i] * dphi - s.lambda * s.V[i] * dphi - fp + shift);
        }
        SpMat J(M, M);
        J.setFromTriplets(trips.begin(), trips.end());
        Eigen::SparseLU<SpMat> lu;
        lu.compute(J);
        Eigen::VectorXd rhs(M);
        for (long j = 0; j < M; ++j) rhs[j] = -grad[static_cast<std::size_t>(j)];
        bool solved = lu.info() == Eigen::Success;
        Eigen::VectorXd delta;
        if (solved) {
            delta = lu.solve(rhs);
            solved = lu.info() == Eigen::Success && delta.allFinite();
        }
        if (!solved) {
            shift = shift == 0.0 ? 1e-10 : shift * 100.0;
            if (shift > 1e6) return false;
            continue;
        }
        double step = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < 40; ++bt) {
            Field trial = u;
            for (long j = 0; j < M; ++j) trial[static_cast<std::size_t>(j)] += step * delta[j];
            if (all_finite(trial.span())) {
                Field gt;
                double fn = residual_norm(trial, gt);
                if (fn <= (1.0 - 1e-4 * step) * fnorm) {
                    u = std::move(trial);
                    grad = std::move(gt);
                    fnorm = fn;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!accepted) {
            shift = shift == 0.0 ? 1e-10 : shift * 100.0;
            if (shift > 1e6) return false;
        } else if (shift > 0.0) {
            shift *= 0.1;
            if (shift < 1e-14) shift = 0.0;
        }
    }
    if (iterations_out) *iterations_out += it;
    return (1.0 + eval_energy(u, s).norm_W) * fnorm < tol;
}

inline void classify(CriticalPointResult& r, const ProblemSpec& s, double tol, double delta) {
    EnergyBreakdown e = eval_energy(r.u, s);
    r.value = e.Phi;
    r.cerami = cerami_residual(r.u, s);
    bool nontrivial = e.norm_W > delta && r.cerami < tol && r.value > 0.0;
    r.classification = nontrivial ? "nontrivial-candidate" : "trivial";
}

} // namespace detail

/// Mountain pass search between 0 and the sunk endpoint r_minus * e
/// (geometry with m = 0): a discrete path descends around its peak node and
/// is re-splined to equal arclength; the peak is polished to a critical
/// point once the band stabilizes.
inline CriticalPointResult mountain_pass(const ProblemSpec& s, const LinkingGeometry& geom,
                                         double tol, const SolveOptions& opts = {}) {
    if (geom.m != 0)
        throw std::invalid_argument("mountain_pass: geometry must have m = 0 (use linking_minimax)");
    const int K = std::max(opts.path_nodes, 5);
    const double t_e = geom.r_minus;

    CriticalPointResult out;
    out.geometry = geom;
    out.minimax_estimate = std::numeric_limits<double>::infinity();
    double delta = opts.delta_nontrivial > 0.0 ? opts.delta_nontrivial : s.delta_nontrivial();

    std::vector<Field> z;
    for (int j = 0; j < K; ++j)
        z.push_back((t_e * static_cast<double>(j) / static_cast<double>(K - 1)) * geom.e);
    std::vector<double> phi(static_cast<std::size_t>(K));
    for (int j = 0; j < K; ++j) phi[static_cast<std::size_t>(j)] = eval_energy(z[static_cast<std::size_t>(j)], s).Phi;
    if (phi.back() > 0.0)
        throw std::runtime_error("mountain_pass: endpoint Phi(t_e e) = " +
                                 std::to_string(phi.back()) + " > 0; geometry misestimated");

    std::vector<double> steps(static_cast<std::size_t>(K), 1.0);

    auto respline = [&]() {
        // chord lengths in the quadrature L2 metric, then equal-arclength
        // linear reinterpolation (endpoints fixed)
        std::vector<double> cum(static_cast<std::size_t>(K), 0.0);
        for (int j = 1; j < K; ++j) {
            Field d = z[static_cast<std::size_t>(j)] - z[static_cast<std::size_t>(j - 1)];
            cum[static_cast<std::size_t>(j)] =
                cum[static_cast<std::size_t>(j - 1)] + std::sqrt(inner(d, d, s));
        }
        double total = cum.back();
        if (!(total > 0.0)) return;
        std::vector<Field> nz;
        nz.push_back(z.front());
        int seg = 1;
        for (int j = 1; j < K - 1; ++j) {
            double target = total * static_cast<double>(j) / static_cast<double>(K - 1);
            while (seg < K - 1 && cum[static_cast<std::size_t>(seg)] < target) ++seg;
            double lo = cum[static_cast<std::size_t>(seg - 1)], hi = cum[static_cast<std::size_t>(seg)];
            double w = hi > lo ? (target - lo) / (hi - lo) : 0.0;
            Field mix = (1.0 - w) * z[static_cast<std::size_t>(seg - 1)];
            axpy(w, z[static_cast<std::size_t>(seg)], mix);
            nz.push_back(std::move(mix));
        }
        nz.push_back(z.back());
        z = std::move(nz);
        for (int j = 0; j < K; ++j)
            phi[static_cast<std::size_t>(j)] = eval_energy(z[static_cast<std::size_t>(j)], s).Phi;
    };

    double best_peak_cerami = std::numeric_limits<double>::infinity();
    int stagnant = 0;
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        int peak = 0;
        for (int j = 1; j < K; ++j)
            if (phi[static_cast<std::size_t>(j)] > phi[static_cast<std::size_t>(peak)]) peak = j;
        if (peak == 0 || peak == K - 1)
            throw std::runtime_error("mountain_pass: peak slid to an endpoint (path collapse); "
                                     "geometry misestimated");

        const Field& zp = z[static_cast<std::size_t>(peak)];
        double cer = cerami_residual(zp, s);
        double nw = detail::norm_w_of(zp, s);
        out.trace.push_back({it, phi[static_cast<std::size_t>(peak)], cer, nw});
        out.minimax_estimate = std::min(out.minimax_estimate, phi[static_cast<std::size_t>(peak)]);

        if (cer < tol) {
            out.u = zp;
            out.converged = true;
            break;
        }
        if (cer < 0.99 * best_peak_cerami) {
            best_peak_cerami = cer;
            stagnant = 0;
        } else {
            ++stagnant;
        }

        // once the band stabilizes, polish the peak to the critical point
        if (stagnant > 25 || cer < 1e-3 * (1.0 + std::abs(phi[static_cast<std::size_t>(peak)]))) {
            Field cand = zp;
            int polish_iters = 0;
            if (detail::newton_polish_phi(cand, s, tol, 50, &polish_iters)) {
                double phi_cand = eval_energy(cand, s).Phi;
                double cap = out.trace.empty()
                                 ? std::numeric_limits<double>::infinity()
                                 : out.trace.front().phi + 0.05 * (1.0 + std::abs(out.trace.front().phi));
                bool level_ok = phi_cand <= cap &&
                                phi_cand >= geom.alpha - 0.1 * (1.0 + geom.alpha);
                if (level_ok) {
                    out.u = std::move(cand);
                    out.converged = true;
                    out.iterations = it + polish_iters;
                    out.message = "band peak polished by damped newton";
                    double cer_p = cerami_residual(out.u, s);
                    out.trace.push_back({it + 1, phi_cand, cer_p, detail::norm_w_of(out.u, s)});
                    detail::classify(out, s, tol, delta);
                    return out;
                }
            }
            stagnant = 0;  // polish rejected; keep deforming the band
        }

        // Armijo descent on the window neighbors of the peak; a node may move
        // at most a couple of internode spacings so the band stays resolved
        double arclength = 0.0;
        for (int j = 1; j < K; ++j) {
            Field dseg = z[static_cast<std::size_t>(j)] - z[static_cast<std::size_t>(j - 1)];
            arclength += std::sqrt(inner(dseg, dseg, s));
        }
        double max_move = 2.0 * arclength / static_cast<double>(K - 1);
        for (int j = std::max(1, peak - opts.window); j <= std::min(K - 2, peak + opts.window); ++j) {
            if (j == peak) continue;
            detail::armijo_phi_step(z[static_cast<std::size_t>(j)], phi[static_cast<std::size_t>(j)],
                                    steps[static_cast<std::size_t>(j)], s, max_move);
        }
        // transverse descent / tangent ascent for the peak node itself
        {
            Field tau = z[static_cast<std::size_t>(peak + 1)] - z[static_cast<std::size_t>(peak - 1)];
            double tn = std::sqrt(inner(tau, tau, s));
            if (tn > 0.0) {
                tau = (1.0 / tn) * tau;
                EnergyGradients gg = grad_energy(zp, s);
                double along = inner(gg.grad_phi, tau, s);
                Field climb = gg.grad_phi;
                axpy(-2.0 * along, tau, climb);
                double& st = steps[static_cast<std::size_t>(peak)];
                Field trial = zp;
                axpy(-st, climb, trial);
                double cer_t = detail::cerami_or_inf(trial, s);
                if (cer_t < cer) {
                    z[static_cast<std::size_t>(peak)] = std::move(trial);
                    phi[static_cast<std::size_t>(peak)] = eval_energy(z[static_cast<std::size_t>(peak)], s).Phi;
                    st = std::min(st * 1.5, 1e8);
                } else {
                    st *= 0.5;
                }
            }
        }
        respline();
    }
    if (!out.converged) {
        // best effort: return the current peak
        int peak = 0;
        for (int j = 1; j < K; ++j)
            if (phi[static_cast<std::size_t>(j)] > phi[static_cast<std::size_t>(peak)]) peak = j;
        out.u = z[static_cast<std::size_t>(peak)];
        out.message = "iteration cap reached before the peak satisfied the Cerami tolerance";
    }
    out.iterations = it;
    detail::classify(out, s, tol, delta);
    return out;
}

/// Linking minimax over the surface Q = {v + t e : v in the C- model, t >= 0,
/// ||v + t e|| <= r_minus}: interior samples descend while the boundary
/// D- u H stays frozen at nonpositive level; the running max is the minimax
/// estimate and its sample is polished to the critical point.
inline CriticalPointResult linking_minimax(const ProblemSpec& s, const LinkingGeometry& geom,
                                           double tol, const SolveOptions& opts = {}) {
    if (geom.m >= 1 && static_cast<int>(geom.cone_basis.size()) != geom.m)
        throw std::invalid_argument("linking_minimax: cone model basis missing; for p != 2 refine "
                                    "eigenpairs first or fall back to m = 0");
    CriticalPointResult out;
    out.geometry = geom;
    out.minimax_estimate = std::numeric_limits<double>::infinity();
    double delta = opts.delta_nontrivial > 0.0 ? opts.delta_nontrivial : s.delta_nontrivial();
    double bnd_tol = opts.boundary_tol;

    // simplicial sample of Q in the (cone coefficients, t) space
    struct Sample {
        Field u;
        double phi;
        bool frozen;
        double step = 1.0;
    };
    std::vector<Sample> samples;

    const int dim = geom.m + 1;
    int levels = std::max(4, static_cast<int>(std::round(std::sqrt(static_cast<double>(opts.samples) / 2.0))));
    int rays = std::max(dim + 1, (opts.samples + levels - 1) / levels);

    auto push_sample = [&](const Field& u, bool frozen) {
        double phi = eval_energy(u, s).Phi;
        samples.push_back({u, phi, frozen, 1.0});
    };

    for (int rix = 0; rix < rays; ++rix) {
        // direction in coefficient space with t >= 0
        Field dir(static_cast<std::size_t>(s.dofs()), 0.0);
        double t_coef = 0.0;
        if (geom.m == 1) {
            double theta = 3.14159265358979323846 * static_cast<double>(rix) /
                           static_cast<double>(rays - 1);
            axpy(std::cos(theta), geom.cone_basis[0], dir);
            t_coef = std::sin(theta);
        } else if (geom.m == 0) {
            t_coef = 1.0;
        } else {
            auto rng = make_rng(opts.seed, 60000 + static_cast<std::uint64_t>(rix));
            std::normal_distribution<double> coef(0.0, 1.0);
            for (const auto& bfield : geom.cone_basis) axpy(coef(rng), bfield, dir);
            t_coef = std::abs(coef(rng));
        }
        axpy(t_coef, geom.e, dir);
        double nw = detail::norm_w_of(dir, s);
        if (!(nw > 0.0)) continue;
        dir = (1.0 / nw) * dir;

        bool ray_in_cone = t_coef <= 1e-12;  // t = 0 face belongs to D-
        if (ray_in_cone && s.p != 2.0 && geom.m >= 1) {
            ConeMembership cm = cone_membership(dir, geom.lambda_m, geom.lambda_m1, s);
            if (!cm.in_c_minus) {
                // pull the sample back into the cone model along the dominant
                // eigenfunction; every correction is counted
                Field dominant = geom.cone_basis[static_cast<std::size_t>(geom.m - 1)];
                bool fixed = false;
                for (double mix = 0.1; mix <= 1.0; mix += 0.1) {
                    Field cand = (1.0 - mix) * dir;
                    axpy(mix, dominant, cand);
                    double cn = detail::norm_w_of(cand, s);
                    if (!(cn > 0.0)) continue;
                    cand = (1.0 / cn) * cand;
                    if (cone_membership(cand, geom.lambda_m, geom.lambda_m1, s).in_c_minus) {
                        dir = std::move(cand);
                        fixed = true;
                        break;
                    }
                }
                ++out.geometry.membership_projections;
                if (!fixed) continue;
            }
        }

        for (int k = 1; k <= levels; ++k) {
            double r = geom.r_minus * static_cast<double>(k) / static_cast<double>(levels);
            Field u = r * dir;
            bool frozen = (k == levels) || ray_in_cone;
            push_sample(u, frozen);
        }
    }
    if (samples.empty()) throw std::runtime_error("linking_minimax: empty sample set");

    // frozen boundary must start (and hence stay) at nonpositive level
    out.boundary_max_phi = -std::numeric_limits<double>::infinity();
    for (const auto& smp : samples) {
        if (!smp.frozen) continue;
        out.boundary_max_phi = std::max(out.boundary_max_phi, smp.phi);
        double tol_here = bnd_tol > 0.0 ? bnd_tol
                                        : s.cone_tolerance(eval_energy(smp.u, s).H,
                                                           eval_energy(smp.u, s).I);
        if (smp.phi > tol_here) {
            ++out.boundary_violations;
        }
    }
    if (out.boundary_violations > 0)
        throw std::runtime_error("linking_minimax: frozen boundary sample with Phi = " +
                                 std::to_string(out.boundary_max_phi) +
                                 " > 0; geometry inconsistent, re-estimate");

    // the best polish candidate: the argmax sample at the iteration where its
    // weighted residual was smallest while the surface still sat at linking level
    Field best_cand;
    double best_cand_cer = std::numeric_limits<double>::infinity();
    double level_floor = geom.alpha - 1e-9 * (1.0 + geom.alpha);
    double initial_max = -std::numeric_limits<double>::infinity();
    for (const auto& smp : samples) initial_max = std::max(initial_max, smp.phi);
    // d is at most the max over the initial surface (an admissible competitor)
    double level_cap = initial_max + 0.05 * (1.0 + std::abs(initial_max));

    auto try_polish = [&](const Field& from, int it) -> bool {
        Field cand = from;
        int polish_iters = 0;
        if (!detail::newton_polish_phi(cand, s, tol, 60, &polish_iters)) return false;
        double phi_cand = eval_energy(cand, s).Phi;
        bool level_ok = phi_cand >= level_floor && phi_cand <= level_cap;
        if (!level_ok) return false;
        out.u = std::move(cand);
        out.converged = true;
        out.iterations = it + polish_iters;
        out.message = "max sample polished by damped newton";
        out.trace.push_back({it + 1, phi_cand, cerami_residual(out.u, s),
                             detail::norm_w_of(out.u, s)});
        return true;
    };

    int it = 0;
    bool collapsed = false;
    for (; it < opts.max_iterations; ++it) {
        std::size_t peak = 0;
        for (std::size_t i = 1; i < samples.size(); ++i)
            if (samples[i].phi > samples[peak].phi) peak = i;

        double cer = detail::cerami_or_inf(samples[peak].u, s);
        out.trace.push_back({it, samples[peak].phi, cer, detail::norm_w_of(samples[peak].u, s)});

        // surface collapse: the whole sample set fell below the linking level,
        // no further descent can inform the minimax value
        if (samples[peak].phi < level_floor) {
            collapsed = true;
            break;
        }
        out.minimax_estimate = std::min(out.minimax_estimate, samples[peak].phi);

        if (cer < tol) {
            out.u = samples[peak].u;
            out.converged = true;
            break;
        }
        if (cer < best_cand_cer) {
            best_cand_cer = cer;
            best_cand = samples[peak].u;
        }
        if (try_polish(samples[peak].u, it)) {
            detail::classify(out, s, tol, delta);
            return out;
        }

        // one Armijo descent step per interior sample, boundary untouched;
        // moves capped at the sample-grid resolution to keep the deforming
        // surface coherent
        double max_move = 2.0 * geom.r_minus / static_cast<double>(levels);
        for (auto& smp : samples) {
            if (smp.frozen) continue;
            detail::armijo_phi_step(smp.u, smp.phi, smp.step, s, max_move);
        }
    }
    if (!out.converged && best_cand.size() > 0 && try_polish(best_cand, it)) {
        detail::classify(out, s, tol, delta);
        return out;
    }
    if (!out.converged) {
        if (best_cand.size() > 0) {
            out.u = best_cand;
        } else {
            std::size_t peak = 0;
            for (std::size_t i = 1; i < samples.size(); ++i)
                if (samples[i].phi > samples[peak].phi) peak = i;
            out.u = samples[peak].u;
        }
        out.message = collapsed
                          ? "sample surface collapsed below alpha before the Cerami tolerance "
                            "was met; best candidate returned"
                          : "iteration cap reached before the max sample satisfied the Cerami "
                            "tolerance";
    }
    out.iterations = std::max(out.iterations, it);
    detail::classify(out, s, tol, delta);
    return out;
}

/// Armijo descent trace from u0: the desk-scale view of the Cerami property
/// (norms stay bounded while the weighted residual decreases).
inline std::vector<TraceRow> descend_cerami(const Field& u0, const ProblemSpec& s, int budget) {
    if (budget < 1) throw std::invalid_argument("descend_cerami: budget must be >= 1");
    std::vector<TraceRow> trace;
    Field u = u0;
    double phi = eval_energy(u, s).Phi;
    double step = 1.0;
    for (int k = 0; k < budget; ++k) {
        trace.push_back({k, phi, cerami_residual(u, s), detail::norm_w_of(u, s)});
        if (!detail::armijo_phi_step(u, phi, step, s)) break;
    }
    trace.push_back({static_cast<int>(trace.size()), phi, cerami_residual(u, s),
                     detail::norm_w_of(u, s)});
    return trace;
}

/// Verification report for a candidate solution.
struct SolutionReport {
    double cerami = 0.0;
    double strong_residual_max = 0.0;  // max |  -div(|flux|^{p-2}flux) + ... |
    double strong_residual_l2 = 0.0;
    double phi = 0.0;
    double norm_w = 0.0;
    bool nontrivial = false;
    std::string cone_position = "unknown";  // C- | C+ | both | neither
    bool level_consistent = true;            // Phi >= alpha - tol when nontrivial
};

inline SolutionReport verify_solution(const Field& u, const ProblemSpec& s, double tol,
                                      const LinkingGeometry* geom = nullptr) {
    SolutionReport rep;
    EnergyBreakdown e = eval_energy(u, s);
    rep.phi = e.Phi;
    rep.norm_w = e.norm_W;
    rep.cerami = cerami_residual(u, s);
    rep.nontrivial = e.norm_W > s.delta_nontrivial();

    // strong form residual through the divergence route
    Flux fx = forward_difference(u, s.grid);
    for (auto& v : fx.values) v = odd_power(v, s.p);
    Field div = divergence(fx, s.grid);
    const bool power_f = s.f.is_power();
    double l2 = 0.0;
    for (long j = 0; j < s.dofs(); ++j) {
        std::size_t i = static_cast<std::size_t>(j);
        double fj = power_f ? s.f.f({}, u[i]) : s.f.f(s.grid.dof_coords(j), u[i]);
        double r = -div[i] + s.b[i] * odd_power(u[i], s.p) -
                   s.lambda * s.V[i] * odd_power(u[i], s.p) - fj;
        rep.strong_residual_max = std::max(rep.strong_residual_max, std::abs(r));
        l2 += r * r;
    }
    rep.strong_residual_l2 = std::sqrt(l2 * s.grid.node_weight);

    if (geom && geom->m >= 1) {
        ConeMembership cm = cone_membership(u, geom->lambda_m, geom->lambda_m1, s);
        if (cm.in_c_minus && cm.in_c_plus) rep.cone_position = "both";
        else if (cm.in_c_minus) rep.cone_position = "C-";
        else if (cm.in_c_plus) rep.cone_position = "C+";
        else rep.cone_position = "neither";
    }
    if (geom && rep.nontrivial) rep.level_consistent = rep.phi >= geom->alpha - tol;
    return rep;
}

} // namespace plap
