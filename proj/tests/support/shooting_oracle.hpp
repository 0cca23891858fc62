#pragma once

// Shooting-method oracle for the periodic eigenvalues of the 1D problem
//
//   -(|u'|^{p-2}u')' + |u|^{p-2}u = lambda |u|^{p-2}u   on R/(length Z).
//
// Independent of the solver library: integrates the first-order system
//   u' = |v|^{1/(p-1)} sign(v),   v' = -mu |u|^{p-2} u,   v = |u'|^{p-2}u'
// with RK4 from u(0)=0, u'(0)=1, locates the first descending zero of u
// (the half period T/2), and solves T(mu) = length/k for mu by bisection.
// The k-th nonconstant periodic eigenvalue is lambda = 1 + mu.
//
// Cross-check available in closed form: mu_k = (p-1) (2 k pi_p / length)^p
// with pi_p = 2 pi / (p sin(pi/p)).

#include <cmath>
#include <stdexcept>

namespace shooting {

inline double pi_p(double p) {
    const double pi = 3.14159265358979323846;
    return 2.0 * pi / (p * std::sin(pi / p));
}

/// Closed-form nonconstant periodic eigenvalue (k full periods on the circle).
inline double closed_form_lambda(double p, int k, double length = 1.0) {
    double omega = 2.0 * static_cast<double>(k) * pi_p(p) / length;
    return 1.0 + (p - 1.0) * std::pow(omega, p);
}

namespace detail {

struct State {
    double u;
    double v;
};

inline State rhs(const State& s, double mu, double p) {
    double conj = 1.0 / (p - 1.0);
    double du = s.v == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(s.v), conj), s.v);
    double dv = s.u == 0.0 ? 0.0 : -mu * std::copysign(std::pow(std::abs(s.u), p - 1.0), s.u);
    return {du, dv};
}

inline State rk4_step(const State& s, double h, double mu, double p) {
    State k1 = rhs(s, mu, p);
    State k2 = rhs({s.u + 0.5 * h * k1.u, s.v + 0.5 * h * k1.v}, mu, p);
    State k3 = rhs({s.u + 0.5 * h * k2.u, s.v + 0.5 * h * k2.v}, mu, p);
    State k4 = rhs({s.u + h * k3.u, s.v + h * k3.v}, mu, p);
    return {s.u + h / 6.0 * (k1.u + 2.0 * k2.u + 2.0 * k3.u + k4.u),
            s.v + h / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v)};
}

} // namespace detail

/// First x > 0 with u(x) = 0, starting from u = 0, u' = 1.
inline double half_period(double mu, double p, int steps = 50000) {
    using detail::State;
    double scale = pi_p(p) * std::pow((p - 1.0) / mu, 1.0 / p);
    double h = scale / static_cast<double>(steps);
    State s{0.0, 1.0};  // v = |u'|^{p-2} u' = 1 at u' = 1
    double x = 0.0;
    for (long i = 0; i < 8L * steps; ++i) {
        State prev = s;
        s = detail::rk4_step(s, h, mu, p);
        if (prev.u > 0.0 && s.u <= 0.0) {
            // bisect the step fraction for the crossing
            double lo = 0.0, hi = h;
            for (int it = 0; it < 80; ++it) {
                double mid = 0.5 * (lo + hi);
                State sm = detail::rk4_step(prev, mid, mu, p);
                if (sm.u > 0.0) lo = mid; else hi = mid;
            }
            return x + 0.5 * (lo + hi);
        }
        x += h;
    }
    throw std::runtime_error("shooting oracle: no zero crossing found");
}

/// k-th nonconstant periodic eigenvalue on a circle of the given length,
/// by bisection on the half-period equation T(mu)/2 = length/(2k).
inline double periodic_eigenvalue(double p, int k, double length = 1.0, int steps = 50000) {
    if (k < 1) throw std::invalid_argument("periodic_eigenvalue: k must be >= 1");
    double target = length / (2.0 * static_cast<double>(k));
    // T(mu) decreases in mu; bracket around the closed-form guess
    double guess = closed_form_lambda(p, k, length) - 1.0;
    double lo = guess * 0.5, hi = guess * 2.0;
    while (half_period(lo, p, steps) < target) lo *= 0.5;
    while (half_period(hi, p, steps) > target) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (half_period(mid, p, steps) > target) lo = mid; else hi = mid;
        if (hi - lo < 1e-12 * (1.0 + hi)) break;
    }
    return 1.0 + 0.5 * (lo + hi);
}

} // namespace shooting
