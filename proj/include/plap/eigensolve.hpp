#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "plap/functional.hpp"

namespace plap {

enum class Certification { ExactP2, Refined, UpperBound };

inline const char* certification_name(Certification c) {
    switch (c) {
        case Certification::ExactP2: return "exact-p2";
        case Certification::Refined: return "refined";
        case Certification::UpperBound: return "upper-bound";
    }
    return "?";
}

/// Approximate solution of H'(u) = lambda I'(u), normalized to I(u) = 1.
struct EigenPair {
    double lambda = 0.0;
    Field u;
    double residual = 0.0;              // ||gradH(u) - lambda gradI(u)||
    double normalization_defect = 0.0;  // |I(u) - 1|
    double tol = std::numeric_limits<double>::quiet_NaN();  // tolerance asked of this pair
    bool converged = false;
    int iterations = 0;
    std::string message;
};

/// Residual tolerance the descent can actually resolve: |t|^{p-2}t loses
/// Lipschitz regularity at 0 for p < 2, which floors the reachable residual
/// near minimizers with vanishing flux while lambda stays fully converged.
inline double default_eigen_tol(double p) { return p < 2.0 ? 1e-3 : 1e-7; }

struct SpectrumValue {
    double lambda = 0.0;
    Certification certification = Certification::UpperBound;
    double upper_bound = std::numeric_limits<double>::quiet_NaN();
    std::optional<EigenPair> pair;
};

/// Ascending spectrum values with their provenance. At p = 2 entries are the
/// full discrete pencil; away from p = 2 they are refined solutions paired
/// with their disjoint-support upper bounds.
struct SpectrumEstimate {
    double p = 2.0;
    std::vector<SpectrumValue> values;

    /// m with lambda_m <= lambda < lambda_{m+1} (0 when lambda < lambda_1).
    /// Throws when lambda sits within tol of a listed eigenvalue.
    int index_below(double lambda, double tol_rel = 1e-8) const {
        int m = 0;
        for (const auto& v : values) {
            double tol = tol_rel * std::max({1.0, std::abs(lambda), std::abs(v.lambda)});
            if (std::abs(lambda - v.lambda) <= tol)
                throw std::runtime_error("resonant lambda, index ambiguous: lambda = " +
                                         std::to_string(lambda) + " matches eigenvalue " +
                                         std::to_string(v.lambda));
            if (v.lambda <= lambda) ++m;
        }
        return m;
    }
};

inline double eigen_residual(const Field& u, double lambda, const ProblemSpec& s) {
    EnergyGradients g = grad_energy(u, s);
    Field r = g.grad_h - lambda * g.grad_i;
    return dual_norm(r, s);
}

/// Scales u onto the normalization manifold {I = 1}.
inline Field normalize_to_m(const Field& u, const ProblemSpec& s) {
    double I = eval_energy(u, s).I;
    if (!(I > 0.0))
        throw std::runtime_error(
            "normalize_to_M: not in the positive cone of I (I(u) = " + std::to_string(I) + ")");
    return std::pow(I, -1.0 / s.p) * u;
}

/// Random field supported on {V > 0}, guaranteed I > 0.
inline Field random_positive_i_field(const ProblemSpec& s, std::uint64_t seed,
                                     std::uint64_t stream) {
    auto rng = make_rng(seed, stream);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int tries = 0; tries < 64; ++tries) {
        Field u(static_cast<std::size_t>(s.dofs()));
        for (long j = 0; j < s.dofs(); ++j) {
            std::size_t i = static_cast<std::size_t>(j);
            u[i] = s.V[i] > 0.0 ? dist(rng) : 0.0;
        }
        if (eval_energy(u, s).I > 0.0) return u;
    }
    throw std::runtime_error("random_positive_i_field: could not reach {I > 0}; V+ too thin");
}

struct RayleighOptions {
    int max_iterations = 50000;
    int multistart = 8;  // seeded random inits in addition to the given one
    std::uint64_t seed = 12345;
    const std::vector<char>* support_mask = nullptr;  // restrict descent to these dofs
};

namespace detail {

inline void apply_mask(Field& f, const std::vector<char>* mask) {
    if (!mask) return;
    for (std::size_t i = 0; i < f.size(); ++i)
        if (!(*mask)[i]) f[i] = 0.0;
}

/// Factorization of the linear part -div grad + b, used as a mesh-independent
/// preconditioner for the manifold descent (and exact inverse at p = 2).
class LinearPreconditioner {
public:
    explicit LinearPreconditioner(const ProblemSpec& s) : dofs_(s.dofs()) {
        using Triplet = Eigen::Triplet<double>;
        const Grid& g = s.grid;
        std::vector<Triplet> trips;
        trips.reserve(g.edges.size() * 4 + static_cast<std::size_t>(dofs_));
        for (const auto& ed : g.edges) {
            double inv_h = g.inv_spacing[static_cast<std::size_t>(ed.axis)];
            double sfac = inv_h * inv_h;
            if (ed.tail_dof >= 0)
                trips.emplace_back(static_cast<int>(ed.tail_dof), static_cast<int>(ed.tail_dof), sfac);
            if (ed.head_dof >= 0)
                trips.emplace_back(static_cast<int>(ed.head_dof), static_cast<int>(ed.head_dof), sfac);
            if (ed.tail_dof >= 0 && ed.head_dof >= 0) {
                trips.emplace_back(static_cast<int>(ed.tail_dof), static_cast<int>(ed.head_dof), -sfac);
                trips.emplace_back(static_cast<int>(ed.head_dof), static_cast<int>(ed.tail_dof), -sfac);
            }
        }
        for (long j = 0; j < dofs_; ++j)
            trips.emplace_back(static_cast<int>(j), static_cast<int>(j),
                               s.b[static_cast<std::size_t>(j)]);
        Eigen::SparseMatrix<double> A(dofs_, dofs_);
        A.setFromTriplets(trips.begin(), trips.end());
        llt_.compute(A);
        ok_ = llt_.info() == Eigen::Success;
    }

    bool ok() const { return ok_; }

    Field solve(const Field& r) const {
        Eigen::Map<const Eigen::VectorXd> rv(r.values.data(), dofs_);
        Eigen::VectorXd x = llt_.solve(rv);
        return Field(std::vector<double>(x.data(), x.data() + dofs_));
    }

private:
    long dofs_;
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
    bool ok_ = false;
};

/// Projected Armijo descent of H on {I = 1} from one start. The direction is
/// the preconditioned residual projected onto the tangent space of {I = 1},
/// with exact renormalization after every step; a plain projected gradient
/// fallback keeps the slope sign guaranteed.
inline EigenPair rayleigh_descent(const ProblemSpec& s, Field u, double tol,
                                  const RayleighOptions& opts,
                                  const LinearPreconditioner* precond) {
    apply_mask(u, opts.support_mask);
    u = normalize_to_m(u, s);
    double H = eval_energy(u, s).H;
    double step = 1.0;

    EigenPair best;
    best.residual = std::numeric_limits<double>::infinity();

    int it = 0;
    int since_progress = 0;
    for (; it < opts.max_iterations; ++it) {
        EnergyGradients g = grad_energy(u, s);
        double lambda = H;  // I(u) = 1
        Field rt = g.grad_h - lambda * g.grad_i;
        double res = dual_norm(rt, s);
        if (res < 0.99 * best.residual) since_progress = 0;
        if (res < best.residual) {
            best.lambda = lambda;
            best.u = u;
            best.residual = res;
            best.normalization_defect = std::abs(eval_energy(u, s).I - 1.0);
        }
        if (res < tol) {
            best.converged = true;
            break;
        }
        if (++since_progress > 300) break;  // residual floor reached

        // preconditioned direction, tangent-projected against grad I
        Field d;
        double slope = 0.0;
        if (precond && precond->ok()) {
            Field br = precond->solve(rt);
            Field bi = precond->solve(g.grad_i);
            apply_mask(br, opts.support_mask);
            apply_mask(bi, opts.support_mask);
            double denom = inner(g.grad_i, bi, s);
            double c = denom != 0.0 ? inner(g.grad_i, br, s) / denom : 0.0;
            d = -1.0 * (br - c * bi);
            slope = -inner(rt, d, s);
        }
        if (!(slope > 0.0)) {
            // plain projected gradient (always a descent direction)
            Field mr = rt, mi = g.grad_i;
            apply_mask(mr, opts.support_mask);
            apply_mask(mi, opts.support_mask);
            double denom = inner(mi, mi, s);
            double c = denom != 0.0 ? inner(mi, mr, s) / denom : 0.0;
            d = -1.0 * (mr - c * mi);
            slope = -inner(rt, d, s);
            if (!(slope > 0.0)) break;  // stationary within the mask
        }

        // Armijo with quadratic interpolation; trial values of H go through
        // the exact renormalization
        auto phi = [&](double t, Field& out) -> double {
            Field trial = u;
            axpy(t, d, trial);
            double I_trial = eval_energy(trial, s).I;
            if (!(I_trial > 0.0)) return std::numeric_limits<double>::infinity();
            out = std::pow(I_trial, -1.0 / s.p) * trial;
            return eval_energy(out, s).H;
        };

        bool accepted = false;
        double t = step;
        for (int bt = 0; bt < 60; ++bt) {
            Field cand;
            double Hc = phi(t, cand);
            if (Hc <= H - 1e-4 * t * slope) {
                // one interpolation polish around the accepted step
                double denom = 2.0 * (Hc - H + slope * t);
                if (denom > 0.0) {
                    double tq = slope * t * t / denom;
                    if (tq > 0.0 && tq < 3.0 * t) {
                        Field cq;
                        double Hq = phi(tq, cq);
                        if (Hq < Hc) {
                            Hc = Hq;
                            cand = std::move(cq);
                            t = tq;
                        }
                    }
                }
                u = std::move(cand);
                H = Hc;
                step = std::min(2.0 * t, 1e6);
                accepted = true;
                break;
            }
            double shrink = 0.5 * t;
            if (std::isfinite(Hc)) {
                double denom = 2.0 * (Hc - H + slope * t);
                if (denom > 0.0) {
                    double tq = slope * t * t / denom;
                    shrink = std::min(std::max(tq, 0.1 * t), 0.5 * t);
                }
            }
            t = shrink;
        }
        if (!accepted) break;  // line search stalled at this resolution
    }
    best.iterations = it;
    best.tol = tol;
    if (!best.converged)
        best.message = "rayleigh descent did not reach tolerance (best residual " +
                       std::to_string(best.residual) + ")";
    return best;
}

} // namespace detail

/// Constrained minimization of H on {I = 1}: projected Armijo descent with
/// exact renormalization, multi-started, smallest lambda wins.
inline EigenPair minimize_rayleigh(const ProblemSpec& s, const Field& init, double tol,
                                   const RayleighOptions& opts = {}) {
    if (!s.v_plus_nonzero)
        throw std::runtime_error("minimize_rayleigh: V+ vanishes, the manifold {I=1} is empty");
    s.grid.require_conforming(init, "minimize_rayleigh");
    if (eval_energy(init, s).I <= 0.0)
        throw std::runtime_error("minimize_rayleigh: init is not in the positive cone of I");

    detail::LinearPreconditioner precond(s);
    EigenPair best = detail::rayleigh_descent(s, init, tol, opts, &precond);
    for (int k = 0; k < opts.multistart; ++k) {
        Field u0 = random_positive_i_field(s, opts.seed, static_cast<std::uint64_t>(k) + 1);
        detail::apply_mask(u0, opts.support_mask);
        if (opts.support_mask && !(eval_energy(u0, s).I > 0.0)) continue;
        EigenPair cand = detail::rayleigh_descent(s, u0, tol, opts, &precond);
        bool better;
        if (cand.converged != best.converged) better = cand.converged;
        else if (cand.converged) better = cand.lambda < best.lambda;
        else better = cand.residual < best.residual;
        if (better) best = cand;
    }
    return best;
}

struct SubspaceBound {
    double value = 0.0;
    int argmax = 0;
    std::vector<Field> normalized;  // bumps scaled to I = 1
};

/// Upper bound for lambda_n from n disjoint-support bumps: after I
/// normalization the sup of H over the I-unit sphere of their span is
/// max_i H(bump_i), because disjoint supports make H and I additive.
inline SubspaceBound subspace_minimax_bound(int n, const ProblemSpec& s,
                                            const std::vector<Field>& bumps) {
    if (static_cast<int>(bumps.size()) != n)
        throw std::invalid_argument("subspace_minimax_bound: expected " + std::to_string(n) +
                                    " bumps");
    // supports must not share nodes nor be joined by an edge
    std::vector<int> owner(static_cast<std::size_t>(s.dofs()), -1);
    for (int b = 0; b < n; ++b) {
        s.grid.require_conforming(bumps[static_cast<std::size_t>(b)], "subspace_minimax_bound");
        for (long j = 0; j < s.dofs(); ++j) {
            if (bumps[static_cast<std::size_t>(b)][static_cast<std::size_t>(j)] != 0.0) {
                if (owner[static_cast<std::size_t>(j)] >= 0)
                    throw std::invalid_argument(
                        "subspace_minimax_bound: overlapping supports at node " +
                        std::to_string(j));
                owner[static_cast<std::size_t>(j)] = b;
            }
        }
    }
    for (const auto& ed : s.grid.edges) {
        if (ed.tail_dof >= 0 && ed.head_dof >= 0) {
            int a = owner[static_cast<std::size_t>(ed.tail_dof)];
            int b = owner[static_cast<std::size_t>(ed.head_dof)];
            if (a >= 0 && b >= 0 && a != b)
                throw std::invalid_argument(
                    "subspace_minimax_bound: overlapping supports (adjacent nodes " +
                    std::to_string(ed.tail_dof) + ", " + std::to_string(ed.head_dof) + ")");
        }
    }

    SubspaceBound out;
    out.value = -std::numeric_limits<double>::infinity();
    for (int b = 0; b < n; ++b) {
        Field nb = normalize_to_m(bumps[static_cast<std::size_t>(b)], s);  // throws if I <= 0
        double Hb = eval_energy(nb, s).H;
        if (Hb > out.value) {
            out.value = Hb;
            out.argmax = b;
        }
        out.normalized.push_back(std::move(nb));
    }
    return out;
}

/// Default bump family: tent profiles on n equal arcs (periodic) or slabs
/// (box), kept one node away from each other and masked to {V > 0}.
inline std::vector<Field> make_disjoint_bumps(int n, const ProblemSpec& s) {
    if (n < 1) throw std::invalid_argument("make_disjoint_bumps: n must be >= 1");
    const Grid& g = s.grid;
    std::vector<Field> bumps;

    auto tent = [](double frac) { return 1.0 - std::abs(2.0 * frac - 1.0); };

    if (g.kind == GridKind::Periodic1d) {
        long N = g.num_dofs;
        if (N < 4L * n)
            throw std::invalid_argument("make_disjoint_bumps: grid too coarse for " +
                                        std::to_string(n) + " bumps");
        for (int b = 0; b < n; ++b) {
            long lo = N * b / n;
            long hi = N * (b + 1) / n;  // exclusive
            Field u(static_cast<std::size_t>(N), 0.0);
            for (long j = lo + 1; j < hi; ++j) {  // one-node margin at each arc end
                double frac = static_cast<double>(j - lo) / static_cast<double>(hi - lo);
                std::size_t i = static_cast<std::size_t>(j % N);
                u[i] = s.V[i] > 0.0 ? tent(frac) : 0.0;
            }
            bumps.push_back(std::move(u));
        }
    } else {
        // slabs along axis 0 of the interior index range
        long n0 = g.nodes_per_axis[0];
        long interior = n0 - 2;  // interior coordinates are 1 .. n0-2
        if (interior < 4L * n)
            throw std::invalid_argument("make_disjoint_bumps: grid too coarse for " +
                                        std::to_string(n) + " bumps");
        for (int b = 0; b < n; ++b) {
            long lo = 1 + interior * b / n;
            long hi = 1 + interior * (b + 1) / n;
            Field u(static_cast<std::size_t>(g.num_dofs), 0.0);
            for (long dof = 0; dof < g.num_dofs; ++dof) {
                long rem = g.lattice_of_dof[static_cast<std::size_t>(dof)];
                std::vector<long> c(static_cast<std::size_t>(g.dims));
                for (int a = g.dims - 1; a >= 0; --a) {
                    c[static_cast<std::size_t>(a)] = rem % g.nodes_per_axis[static_cast<std::size_t>(a)];
                    rem /= g.nodes_per_axis[static_cast<std::size_t>(a)];
                }
                if (c[0] <= lo || c[0] >= hi - 1) continue;  // margin within the slab
                double prof = tent(static_cast<double>(c[0] - lo) / static_cast<double>(hi - lo));
                for (int a = 1; a < g.dims; ++a) {
                    long na = g.nodes_per_axis[static_cast<std::size_t>(a)];
                    prof *= tent(static_cast<double>(c[static_cast<std::size_t>(a)]) /
                                 static_cast<double>(na - 1));
                }
                std::size_t i = static_cast<std::size_t>(dof);
                u[i] = s.V[i] > 0.0 ? prof : 0.0;
            }
            bumps.push_back(std::move(u));
        }
    }

    for (int b = 0; b < n; ++b) {
        if (!(eval_energy(bumps[static_cast<std::size_t>(b)], s).I > 0.0))
            throw std::runtime_error("make_disjoint_bumps: bump " + std::to_string(b) +
                                     " misses {V > 0}; choose a different partition");
    }
    return bumps;
}

struct RefineOptions {
    int max_iterations = 80;
};

namespace detail {

/// Bordered Newton system for {gradH - lambda gradI = 0, I = 1} with a
/// Levenberg-style diagonal shift when the Jacobian is (numerically)
/// singular, e.g. at multiple eigenvalues or translation-degenerate pairs.
inline EigenPair refine_newton(const EigenPair& start, const ProblemSpec& s, double tol,
                               const RefineOptions& opts) {
    using SpMat = Eigen::SparseMatrix<double>;
    using Triplet = Eigen::Triplet<double>;

    const Grid& g = s.grid;
    const long M = g.num_dofs;
    const double p = s.p;
    const double w = g.node_weight;

    Field u = start.u;
    double lambda = start.lambda;

    auto evaluate = [&](const Field& uu, double ll, Eigen::VectorXd& F) {
        EnergyGradients gr = grad_energy(uu, s);
        double I = eval_energy(uu, s).I;
        F.resize(M + 1);
        for (long j = 0; j < M; ++j)
            F[j] = gr.grad_h[static_cast<std::size_t>(j)] - ll * gr.grad_i[static_cast<std::size_t>(j)];
        F[M] = I - 1.0;
        return gr;
    };

    Eigen::VectorXd F;
    EnergyGradients gr = evaluate(u, lambda, F);
    double fnorm = F.norm();

    EigenPair best = start;
    best.converged = false;
    best.residual = eigen_residual(u, lambda, s);
    best.normalization_defect = std::abs(eval_energy(u, s).I - 1.0);

    double shift = 0.0;
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        double res = eigen_residual(u, lambda, s);
        double defect = std::abs(eval_energy(u, s).I - 1.0);
        if (res < best.residual || (res == best.residual && defect < best.normalization_defect)) {
            best.u = u;
            best.lambda = lambda;
            best.residual = res;
            best.normalization_defect = defect;
        }
        if (res < tol && defect < 1e-10) {
            best.converged = true;
            break;
        }

        // assemble the bordered Jacobian (rows in quadrature representation)
        std::vector<Triplet> trips;
        trips.reserve(g.edges.size() * 4 + static_cast<std::size_t>(M) * 3 + 2);
        for (const auto& ed : g.edges) {
            double inv_h = g.inv_spacing[static_cast<std::size_t>(ed.axis)];
            double ut = ed.tail_dof >= 0 ? u[static_cast<std::size_t>(ed.tail_dof)] : 0.0;
            double uh = ed.head_dof >= 0 ? u[static_cast<std::size_t>(ed.head_dof)] : 0.0;
            double sfac = odd_power_derivative((uh - ut) * inv_h, p) * inv_h * inv_h;
            if (ed.tail_dof >= 0)
                trips.emplace_back(static_cast<int>(ed.tail_dof), static_cast<int>(ed.tail_dof), sfac);
            if (ed.head_dof >= 0)
                trips.emplace_back(static_cast<int>(ed.head_dof), static_cast<int>(ed.head_dof), sfac);
            if (ed.tail_dof >= 0 && ed.head_dof >= 0) {
                trips.emplace_back(static_cast<int>(ed.tail_dof), static_cast<int>(ed.head_dof), -sfac);
                trips.emplace_back(static_cast<int>(ed.head_dof), static_cast<int>(ed.tail_dof), -sfac);
            }
        }
        for (long j = 0; j < M; ++j) {
            std::size_t i = static_cast<std::size_t>(j);
            double dphi = odd_power_derivative(u[i], p);
            double diag = s.b[i] * dphi - lambda * s.V[i] * dphi + shift;
            trips.emplace_back(static_cast<int>(j), static_cast<int>(j), diag);
            trips.emplace_back(static_cast<int>(j), static_cast<int>(M), -gr.grad_i[i]);
            trips.emplace_back(static_cast<int>(M), static_cast<int>(j),
                               s.V[i] * odd_power(u[i], p) * w);
        }
        trips.emplace_back(static_cast<int>(M), static_cast<int>(M), shift);

        SpMat J(M + 1, M + 1);
        J.setFromTriplets(trips.begin(), trips.end());
        Eigen::SparseLU<SpMat> lu;
        lu.compute(J);
        bool solved = lu.info() == Eigen::Success;
        Eigen::VectorXd delta;
        if (solved) {
            delta = lu.solve(-F);
            solved = lu.info() == Eigen::Success && delta.allFinite();
        }
        if (!solved || delta.norm() > 1e8 * (1.0 + std::abs(lambda))) {
            shift = shift == 0.0 ? 1e-10 * (1.0 + std::abs(lambda)) : shift * 100.0;
            if (shift > 1e4 * (1.0 + std::abs(lambda))) {
                best.message = "singular Jacobian; fall back to descent";
                break;
            }
            continue;
        }

        // backtracking on the residual norm
        double step = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < 40; ++bt) {
            Field u_trial = u;
            for (long j = 0; j < M; ++j) u_trial[static_cast<std::size_t>(j)] += step * delta[j];
            double l_trial = lambda + step * delta[M];
            if (all_finite(u_trial.span())) {
                Eigen::VectorXd Ft;
                EnergyGradients gt = evaluate(u_trial, l_trial, Ft);
                double fn = Ft.norm();
                if (fn <= (1.0 - 1e-4 * step) * fnorm) {
                    u = std::move(u_trial);
                    lambda = l_trial;
                    F = std::move(Ft);
                    gr = std::move(gt);
                    fnorm = fn;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!accepted) {
            shift = shift == 0.0 ? 1e-10 * (1.0 + std::abs(lambda)) : shift * 100.0;
            if (shift > 1e4 * (1.0 + std::abs(lambda))) {
                best.message = "newton stalled (line search exhausted)";
                break;
            }
        } else if (shift > 0.0) {
            shift *= 0.1;
            if (shift < 1e-14) shift = 0.0;
        }
    }
    best.iterations = it;
    best.tol = tol;

    // report lambda as the Rayleigh quotient of the exactly renormalized
    // field when that keeps the tolerance, else keep the converged iterate
    if (best.converged) {
        EnergyBreakdown e = eval_energy(best.u, s);
        if (e.I > 0.0) {
            Field un = normalize_to_m(best.u, s);
            double ln = eval_energy(un, s).H;
            double rn = eigen_residual(un, ln, s);
            if (rn < tol) {
                best.u = std::move(un);
                best.lambda = ln;
                best.residual = rn;
                best.normalization_defect = std::abs(eval_energy(best.u, s).I - 1.0);
            }
        }
    } else if (best.message.empty()) {
        best.message = "newton did not reach tolerance (best residual " +
                       std::to_string(best.residual) + ")";
    }
    return best;
}

/// Damped fixed-point refinement for p in (1,2), where the Newton blocks
/// |t|^{p-2} blow up at zeros of u or of the flux.
inline EigenPair refine_damped(const EigenPair& start, const ProblemSpec& s, double tol,
                               const RefineOptions& opts) {
    Field u = normalize_to_m(start.u, s);
    double tau = 0.1;
    EigenPair best = start;
    best.converged = false;
    best.residual = std::numeric_limits<double>::infinity();

    int it = 0;
    for (; it < opts.max_iterations * 50; ++it) {
        EnergyBreakdown e = eval_energy(u, s);
        double lambda = e.H;  // I = 1
        EnergyGradients g = grad_energy(u, s);
        Field r = g.grad_h - lambda * g.grad_i;
        double res = dual_norm(r, s);
        if (res < best.residual) {
            best.u = u;
            best.lambda = lambda;
            best.residual = res;
            best.normalization_defect = std::abs(e.I - 1.0);
        }
        if (res < tol) {
            best.converged = true;
            break;
        }
        Field trial = u;
        axpy(-tau, r, trial);
        double I_trial = eval_energy(trial, s).I;
        if (I_trial > 0.0) {
            Field c = std::pow(I_trial, -1.0 / s.p) * trial;
            double res_c = eigen_residual(c, eval_energy(c, s).H, s);
            if (res_c < res) {
                u = std::move(c);
                tau = std::min(tau * 1.3, 10.0);
                continue;
            }
        }
        tau *= 0.5;
        if (tau < 1e-14) break;
    }
    best.iterations = it;
    best.tol = tol;
    if (!best.converged && best.message.empty())
        best.message = "damped refinement stalled (best residual " +
                       std::to_string(best.residual) + ")";
    return best;
}

} // namespace detail

/// Refines an approximate eigenpair on the extended system
/// {gradH(u) - lambda gradI(u) = 0, I(u) = 1}. Newton for p >= 2, damped
/// fixed-point for p in (1,2).
inline EigenPair refine_eigenpair(const EigenPair& pair, const ProblemSpec& s, double tol,
                                  const RefineOptions& opts = {}) {
    if (!all_finite(pair.u.span()) || !std::isfinite(pair.lambda))
        throw std::invalid_argument("refine_eigenpair: start pair is not finite");
    s.grid.require_conforming(pair.u, "refine_eigenpair");
    if (s.p >= 2.0) return detail::refine_newton(pair, s, tol, opts);
    return detail::refine_damped(pair, s, tol, opts);
}

/// Dense generalized symmetric solve of the p = 2 pencil K u = lambda W u,
/// restricted to the positive part of the pencil (eigenvalues whose
/// eigenvectors have positive I-form), matching lambda_n >= 0.
inline SpectrumEstimate linear_spectrum_oracle(const ProblemSpec& s, int keep_pairs = 16) {
    if (s.p != 2.0)
        throw std::invalid_argument("linear_spectrum_oracle: requires p = 2 exactly");
    const Grid& g = s.grid;
    const long M = g.num_dofs;
    if (M > 4096)
        throw std::invalid_argument("linear_spectrum_oracle: dense solve capped at 4096 dofs");

    const double w = g.node_weight;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(M, M);
    for (const auto& ed : g.edges) {
        double inv_h = g.inv_spacing[static_cast<std::size_t>(ed.axis)];
        double sfac = inv_h * inv_h * w;
        if (ed.tail_dof >= 0) K(ed.tail_dof, ed.tail_dof) += sfac;
        if (ed.head_dof >= 0) K(ed.head_dof, ed.head_dof) += sfac;
        if (ed.tail_dof >= 0 && ed.head_dof >= 0) {
            K(ed.tail_dof, ed.head_dof) -= sfac;
            K(ed.head_dof, ed.tail_dof) -= sfac;
        }
    }
    Eigen::VectorXd Wdiag(M);
    for (long j = 0; j < M; ++j) {
        K(j, j) += s.b[static_cast<std::size_t>(j)] * w;
        Wdiag[j] = s.V[static_cast<std::size_t>(j)] * w;
    }

    // K is SPD (b > 0): reduce to the symmetric problem C q = mu q with
    // C = L^{-1} W L^{-T}, mu = 1/lambda; mu > 0 is the positive pencil part.
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("linear_spectrum_oracle: stiffness matrix not SPD");
    Eigen::MatrixXd C = llt.matrixL().solve(Wdiag.asDiagonal().toDenseMatrix());
    C = llt.matrixL().solve(C.transpose()).eval();
    C = 0.5 * (C + C.transpose()).eval();  // symmetrize roundoff

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("linear_spectrum_oracle: eigensolver failed");

    double mu_floor = 1e-14 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    SpectrumEstimate out;
    out.p = 2.0;
    // mu descending -> lambda = 1/mu ascending
    for (long i = M - 1; i >= 0; --i) {
        double mu = es.eigenvalues()[i];
        if (mu <= mu_floor) break;
        double lambda = 1.0 / mu;
        SpectrumValue v;
        v.lambda = lambda;
        v.certification = Certification::ExactP2;
        if (static_cast<int>(out.values.size()) < keep_pairs) {
            Eigen::VectorXd q = es.eigenvectors().col(i);
            Eigen::VectorXd uvec = llt.matrixU().solve(q);
            // I(u) = 0.5 u^T W u = mu/2; scale to I = 1
            uvec *= std::sqrt(2.0 / mu);
            EigenPair pair;
            pair.u = Field(std::vector<double>(uvec.data(), uvec.data() + M));
            pair.lambda = lambda;
            pair.residual = eigen_residual(pair.u, lambda, s);
            pair.normalization_defect = std::abs(eval_energy(pair.u, s).I - 1.0);
            pair.tol = 1e-8;
            pair.converged = true;
            v.pair = std::move(pair);
        }
        out.values.push_back(std::move(v));
    }
    return out;
}

/// m = #{n : lambda_n <= lambda} for the p = 2 pencil; errors on resonance.
inline int count_spectrum_below(double lambda, const ProblemSpec& s, double tol_rel = 1e-8) {
    SpectrumEstimate spec = linear_spectrum_oracle(s, 0);
    return spec.index_below(lambda, tol_rel);
}

/// Two eigenpairs are the same solution up to the sign symmetry when
/// ||u_new +- u_old|| / ||u_old|| <= 1e-3 for one of the signs.
inline bool distinct_eigenpair(const EigenPair& candidate, const std::vector<EigenPair>& found,
                               const ProblemSpec& s) {
    for (const auto& old : found) {
        double n_old = eval_energy(old.u, s).norm_W;
        if (n_old <= 0.0) continue;
        Field dp = candidate.u - old.u;
        Field dm = candidate.u + old.u;
        double dist = std::min(eval_energy(dp, s).norm_W, eval_energy(dm, s).norm_W) / n_old;
        if (dist <= 1e-3) return false;
    }
    return true;
}

struct SpectrumOptions {
    int count = 4;
    double tol = 1e-10;
    std::uint64_t seed = 12345;
    int multistart = 8;
};

/// Spectrum assembly. At p = 2 this is the dense oracle; otherwise lambda_1
/// is the multi-start Rayleigh minimum and higher values are reported as
/// (disjoint-support upper bound, refined solution started from the bound's
/// span), keeping the certification gap explicit.
inline SpectrumEstimate estimate_spectrum(const ProblemSpec& s, const SpectrumOptions& opts = {}) {
    if (s.p == 2.0) {
        SpectrumEstimate out = linear_spectrum_oracle(s, opts.count);
        if (static_cast<int>(out.values.size()) > opts.count)
            out.values.resize(static_cast<std::size_t>(opts.count));
        return out;
    }

    SpectrumEstimate out;
    out.p = s.p;

    RayleighOptions ropts;
    ropts.seed = opts.seed;
    ropts.multistart = opts.multistart;
    Field init = random_positive_i_field(s, opts.seed, 0);
    EigenPair ground = minimize_rayleigh(s, init, std::max(opts.tol, 1e-9), ropts);
    if (s.p >= 2.0) {
        EigenPair polished = refine_eigenpair(ground, s, opts.tol);
        if (polished.converged && polished.lambda <= ground.lambda + opts.tol) ground = polished;
    }
    SpectrumValue v1;
    v1.lambda = ground.lambda;
    v1.certification = Certification::Refined;
    v1.pair = ground;
    out.values.push_back(std::move(v1));

    for (int n = 2; n <= opts.count; ++n) {
        auto bumps = make_disjoint_bumps(n, s);
        SubspaceBound bound = subspace_minimax_bound(n, s, bumps);

        // start from the sign-alternating combination in the bound's span;
        // it carries the nodal structure the n-th eigenfunction needs
        Field comb(static_cast<std::size_t>(s.dofs()), 0.0);
        for (int b = 0; b < n; ++b)
            axpy(b % 2 == 0 ? 1.0 : -1.0, bound.normalized[static_cast<std::size_t>(b)], comb);
        EigenPair seed_pair;
        seed_pair.u = normalize_to_m(comb, s);
        seed_pair.lambda = eval_energy(seed_pair.u, s).H;
        seed_pair.residual = eigen_residual(seed_pair.u, seed_pair.lambda, s);

        EigenPair refined = refine_eigenpair(seed_pair, s, opts.tol);
        SpectrumValue v;
        v.upper_bound = bound.value;
        if (refined.converged) {
            v.lambda = refined.lambda;
            v.certification = Certification::Refined;
            v.pair = std::move(refined);
        } else {
            v.lambda = bound.value;
            v.certification = Certification::UpperBound;
            v.pair = std::move(refined);  // best effort iterate, flagged unconverged
        }
        out.values.push_back(std::move(v));
    }
    std::sort(out.values.begin(), out.values.end(),
              [](const SpectrumValue& a, const SpectrumValue& b) { return a.lambda < b.lambda; });
    return out;
}

} // namespace plap
