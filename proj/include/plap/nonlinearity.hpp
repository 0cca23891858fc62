#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "plap/expr.hpp"
#include "plap/util.hpp"

namespace plap {

enum class NonlinearityKind { PurePower, ScaledPower, CustomSampled };

/// The nonlinearity f(x,t) of the right hand side, with its primitive
/// F(x,t) = int_0^t f and the combination scriptF = f(x,t)t - pF(x,t)
/// used by the superlinearity conditions.
///
/// Power kinds evaluate F in closed form; custom expressions integrate f
/// by adaptive Simpson (tolerance 1e-10).
struct NonlinearitySpec {
    NonlinearityKind kind = NonlinearityKind::PurePower;
    double q = 4.0;      // growth exponent, expected > p
    double coeff = 1.0;  // scale, expected >= 0
    double theta = 1.0;  // scaling-monotonicity constant, expected >= 1
    std::optional<Expr> expr;  // CustomSampled: f(x, t)

    static NonlinearitySpec pure_power(double q) {
        NonlinearitySpec f;
        f.kind = NonlinearityKind::PurePower;
        f.q = q;
        f.coeff = 1.0;
        return f;
    }

    static NonlinearitySpec scaled_power(double q, double coeff) {
        NonlinearitySpec f;
        f.kind = NonlinearityKind::ScaledPower;
        f.q = q;
        f.coeff = coeff;
        return f;
    }

    static NonlinearitySpec custom(Expr f_expr, double q, double theta) {
        NonlinearitySpec f;
        f.kind = NonlinearityKind::CustomSampled;
        f.expr = std::move(f_expr);
        f.q = q;
        f.coeff = 1.0;
        f.theta = theta;
        return f;
    }

    bool is_power() const { return kind != NonlinearityKind::CustomSampled; }

    double f(std::span<const double> x, double t) const {
        if (is_power()) return coeff * odd_power(t, q);
        return expr->eval(x, t);
    }

    double F(std::span<const double> x, double t) const {
        if (is_power()) return coeff * abs_power(t, q) / q;
        return integrate_f(x, t);
    }

    double script_f(std::span<const double> x, double t, double p) const {
        return f(x, t) * t - p * F(x, t);
    }

    /// df/dt; central difference for custom expressions.
    double f_t(std::span<const double> x, double t) const {
        if (is_power()) {
            if (q == 2.0) return coeff;
            if (t == 0.0) return 0.0;
            return coeff * (q - 1.0) * std::pow(std::abs(t), q - 2.0);
        }
        double d = 1e-6 * (1.0 + std::abs(t));
        return (expr->eval(x, t + d) - expr->eval(x, t - d)) / (2.0 * d);
    }

private:
    double integrate_f(std::span<const double> x, double t) const {
        if (t == 0.0) return 0.0;
        double a = 0.0, b = t, sign = 1.0;
        if (t < 0.0) {
            a = t;
            b = 0.0;
            sign = -1.0;
        }
        auto g = [&](double s) { return expr->eval(x, s); };
        double fa = g(a), fm = g(0.5 * (a + b)), fb = g(b);
        double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        return sign * simpson(g, a, b, fa, fm, fb, whole, 1e-10, 30);
    }

    template <class G>
    static double simpson(const G& g, double a, double b, double fa, double fm, double fb,
                          double whole, double tol, int depth) {
        double m = 0.5 * (a + b);
        double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
        double flm = g(lm), frm = g(rm);
        double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
            return left + right + (left + right - whole) / 15.0;
        return simpson(g, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
               simpson(g, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    }
};

/// Where check_f_conditions samples: t in [-t_max,-t_min] u [t_min,t_max]
/// log spaced, s uniformly on [0,1], at each listed spatial point.
struct SamplingPlan {
    double t_min = 1e-4;
    double t_max = 1e3;
    int t_count = 64;  // per sign
    int s_count = 17;
    std::vector<std::vector<double>> x_points = {{0.0}};

    void validate() const {
        if (!(t_min > 0.0) || !(t_max > t_min))
            throw std::invalid_argument("SamplingPlan: need 0 < t_min < t_max");
        if (t_count < 8) throw std::invalid_argument("SamplingPlan: t_count must be >= 8");
        if (s_count < 2) throw std::invalid_argument("SamplingPlan: s_count must be >= 2");
        if (x_points.empty()) throw std::invalid_argument("SamplingPlan: no spatial points");
    }

    std::vector<double> t_samples() const {
        std::vector<double> ts;
        double ratio = std::log(t_max / t_min);
        for (int i = 0; i < t_count; ++i) {
            double t = t_min * std::exp(ratio * static_cast<double>(i) /
                                        static_cast<double>(t_count - 1));
            ts.push_back(t);
            ts.push_back(-t);
        }
        return ts;
    }
};

struct ConditionCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct FConditionReport {
    ConditionCheck f1_growth;
    ConditionCheck f1_sign;
    ConditionCheck f2_superlinear;
    ConditionCheck f3_small_o;
    ConditionCheck f4_scaling;
    double growth_constant = 0.0;  // fitted C of |f| <= C(1+|t|^{q-1})
    std::string note = "sampling-based checks: a pass is evidence, not proof";

    bool all_pass() const {
        return f1_growth.pass && f1_sign.pass && f2_superlinear.pass && f3_small_o.pass &&
               f4_scaling.pass;
    }
};

/// Samples the contract conditions on f. Violating nonlinearities are
/// diagnosed here rather than rejected at construction.
inline FConditionReport check_f_conditions(const NonlinearitySpec& f, double p,
                                           const SamplingPlan& plan) {
    plan.validate();
    FConditionReport rep;
    std::vector<double> ts = plan.t_samples();

    // (f1) sign and growth-constant fit
    bool sign_ok = true;
    double worst_sign = 0.0;
    double c_fit = 0.0;
    std::vector<std::pair<double, double>> tail_ratio;  // (log|t|, log ratio)
    for (const auto& x : plan.x_points) {
        for (double t : ts) {
            double ft = f.f(x, t);
            double s = ft * t;
            if (s < -1e-12 * (1.0 + std::abs(ft) * std::abs(t))) {
                sign_ok = false;
                worst_sign = std::min(worst_sign, s);
            }
            double g = 1.0 + abs_power(t, f.q - 1.0);
            double ratio = std::abs(ft) / g;
            c_fit = std::max(c_fit, ratio);
            if (std::abs(t) >= plan.t_max / 10.0 && ratio > 0.0)
                tail_ratio.push_back({std::log(std::abs(t)), std::log(ratio)});
        }
    }
    rep.growth_constant = c_fit;
    rep.f1_sign.name = "f1-sign";
    rep.f1_sign.pass = sign_ok;
    rep.f1_sign.detail = sign_ok ? "f(x,t)t >= 0 on all samples"
                                 : "f(x,t)t < 0 found, worst " + std::to_string(worst_sign);

    // growth passes when |f|/(1+|t|^{q-1}) does not keep growing with |t|
    double slope = 0.0;
    if (tail_ratio.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (auto& pr : tail_ratio) {
            sx += pr.first;
            sy += pr.second;
            sxx += pr.first * pr.first;
            sxy += pr.first * pr.second;
        }
        double n = static_cast<double>(tail_ratio.size());
        double denom = n * sxx - sx * sx;
        slope = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
    }
    rep.f1_growth.name = "f1-growth";
    rep.f1_growth.pass = slope <= 0.05;
    rep.f1_growth.detail = "fitted C = " + std::to_string(c_fit) +
                           ", tail log-log slope of |f|/(1+|t|^{q-1}) = " + std::to_string(slope);

    // (f2) f(t)t/|t|^p increasing on the sampled tail
    bool f2_ok = true;
    double f2_first = 0.0, f2_last = 0.0;
    for (const auto& x : plan.x_points) {
        for (int sgn = 0; sgn < 2; ++sgn) {
            std::vector<double> gs;
            for (int i = 0; i < plan.t_count; ++i) {
                double t = ts[static_cast<std::size_t>(2 * i + sgn)];
                if (std::abs(t) < plan.t_max / 10.0) continue;
                gs.push_back(f.f(x, t) * t / abs_power(t, p));
            }
            if (gs.size() < 2) continue;
            for (std::size_t i = 1; i < gs.size(); ++i)
                if (gs[i] < gs[i - 1] * (1.0 - 1e-9) - 1e-12) f2_ok = false;
            if (!(gs.back() > gs.front() * 1.05 + 1e-12)) f2_ok = false;
            f2_first = gs.front();
            f2_last = gs.back();
        }
    }
    rep.f2_superlinear.name = "f2-superlinear";
    rep.f2_superlinear.pass = f2_ok;
    rep.f2_superlinear.detail = "tail of f(x,t)t/|t|^p: " + std::to_string(f2_first) + " -> " +
                                std::to_string(f2_last);

    // (f3) f(t)/|t|^{p-1} -> 0 near 0
    bool f3_ok = true;
    double h_min_report = 0.0, h_ref_report = 0.0;
    for (const auto& x : plan.x_points) {
        for (int sgn = 0; sgn < 2; ++sgn) {
            double h_small = std::abs(f.f(x, ts[static_cast<std::size_t>(sgn)])) /
                             abs_power(plan.t_min, p - 1.0);
            double t_ref = std::min(1.0, std::sqrt(plan.t_min * plan.t_max));
            double h_ref = std::abs(f.f(x, sgn == 0 ? t_ref : -t_ref)) / abs_power(t_ref, p - 1.0);
            if (!(h_small <= 0.05 * h_ref + 1e-12)) f3_ok = false;
            h_min_report = h_small;
            h_ref_report = h_ref;
        }
    }
    rep.f3_small_o.name = "f3-small-o";
    rep.f3_small_o.pass = f3_ok;
    rep.f3_small_o.detail = "|f|/|t|^{p-1} at t_min = " + std::to_string(h_min_report) +
                            ", at reference = " + std::to_string(h_ref_report);

    // (f4) theta * scriptF(x,t) >= scriptF(x,st) on the (t,s) sample grid
    bool f4_ok = true;
    double worst_gap = 0.0;
    for (const auto& x : plan.x_points) {
        for (double t : ts) {
            double lhs = f.theta * f.script_f(x, t, p);
            for (int j = 0; j < plan.s_count; ++j) {
                double s = static_cast<double>(j) / static_cast<double>(plan.s_count - 1);
                double rhs = f.script_f(x, s * t, p);
                double gap = lhs - rhs;
                double scale = 1.0 + std::abs(lhs) + std::abs(rhs);
                if (gap < -1e-9 * scale) {
                    f4_ok = false;
                    worst_gap = std::min(worst_gap, gap / scale);
                }
            }
        }
    }
    rep.f4_scaling.name = "f4-scaling";
    rep.f4_scaling.pass = f4_ok;
    rep.f4_scaling.detail =
        f4_ok ? "theta*scriptF(t) >= scriptF(st) on all samples"
              : "violated, worst scaled gap " + std::to_string(worst_gap);
    return rep;
}

} // namespace plap
