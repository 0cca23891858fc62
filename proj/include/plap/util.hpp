#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace plap {

/// Odd power map t -> |t|^{p-2} t, extended by 0 at t = 0 (its pointwise
/// limit for every p > 1). This is the nonlinearity of the p-Laplacian flux
/// and of the node terms b|u|^{p-2}u.
inline double odd_power(double t, double p) {
    if (t == 0.0) return 0.0;
    if (p == 2.0) return t;
    return std::copysign(std::pow(std::abs(t), p - 1.0), t);
}

/// |t|^p with fast paths for the common exponents.
inline double abs_power(double t, double p) {
    if (p == 2.0) return t * t;
    if (t == 0.0) return 0.0;
    return std::pow(std::abs(t), p);
}

/// Derivative weight of odd_power: d/dt |t|^{p-2}t = (p-1)|t|^{p-2}.
/// Finite for p >= 2 (value p-1 at t=0 when p=2, 0 when p>2).
inline double odd_power_derivative(double t, double p) {
    if (p == 2.0) return 1.0;
    if (t == 0.0) return 0.0;
    return (p - 1.0) * std::pow(std::abs(t), p - 2.0);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Quadrature inner product sum_i a_i b_i w_i for uniform node weight w.
inline double dot_weighted(std::span<const double> a, std::span<const double> b, double w) {
    return dot(a, b) * w;
}

inline double norm_weighted(std::span<const double> a, double w) {
    return std::sqrt(dot(a, a) * w);
}

inline bool all_finite(std::span<const double> a) {
    for (double x : a)
        if (!std::isfinite(x)) return false;
    return true;
}

/// First non-finite entry, or -1 if all finite.
inline long first_non_finite(std::span<const double> a) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!std::isfinite(a[i])) return static_cast<long>(i);
    return -1;
}

/// Deterministic per-(seed, index) stream: two independent runs with the
/// same seed produce identical draws regardless of scheduling.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    // splitmix64 mix of (seed, stream)
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z = z ^ (z >> 31);
    return std::mt19937_64(z);
}

/// Runs fn(i) for i in [0, count). Results must be written to per-index
/// slots by the caller so the outcome is schedule independent.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
    for (std::size_t t = 0; t < nt; ++t) {
        pool.emplace_back([&, t]() {
            for (std::size_t i = t; i < count; i += nt) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace plap
