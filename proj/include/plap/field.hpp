#pragma once

#include <span>
#include <vector>

namespace plap {

/// Coefficient vector of a discrete function, one entry per grid DOF
/// (all nodes on periodic grids, interior nodes in Dirichlet mode).
struct Field {
    std::vector<double> values;

    Field() = default;
    explicit Field(std::size_t n, double fill = 0.0) : values(n, fill) {}
    explicit Field(std::vector<double> v) : values(std::move(v)) {}

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    std::span<const double> span() const { return values; }
    std::span<double> span() { return values; }
};

/// Per-edge difference quotients (one value per grid edge).
struct Flux {
    std::vector<double> values;

    Flux() = default;
    explicit Flux(std::size_t n, double fill = 0.0) : values(n, fill) {}

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
};

inline Field operator+(const Field& a, const Field& b) {
    Field r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline Field operator-(const Field& a, const Field& b) {
    Field r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Field operator*(double s, const Field& a) {
    Field r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = s * a[i];
    return r;
}

inline void axpy(double s, const Field& x, Field& y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

} // namespace plap
