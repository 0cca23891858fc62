#pragma once

#include <array>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "plap/field.hpp"
#include "plap/util.hpp"

namespace plap {

enum class GridKind { Periodic1d, BoxNd };
enum class BoundaryKind { Periodic, ZeroDirichlet };

/// Domain descriptor, part of the run configuration.
struct GridSpec {
    GridKind kind = GridKind::Periodic1d;
    int dims = 1;
    std::vector<int> nodes_per_axis;  // one entry, broadcast, or per axis
    std::vector<double> extents;      // circumference (periodic) / box lengths

    static GridSpec periodic_1d(int nodes, double length = 1.0) {
        GridSpec s;
        s.kind = GridKind::Periodic1d;
        s.dims = 1;
        s.nodes_per_axis = {nodes};
        s.extents = {length};
        return s;
    }

    static GridSpec box_nd(int dims, int nodes_per_axis, double length_per_axis) {
        GridSpec s;
        s.kind = GridKind::BoxNd;
        s.dims = dims;
        s.nodes_per_axis.assign(static_cast<std::size_t>(dims), nodes_per_axis);
        s.extents.assign(static_cast<std::size_t>(dims), length_per_axis);
        return s;
    }
};

/// Uniform lattice with quadrature weights chosen so that every discrete
/// energy is a plain weighted sum. All data is immutable after build_grid;
/// grids are safe to share across threads.
///
/// DOF layout: periodic grids expose every lattice node; zero-Dirichlet
/// boxes expose interior nodes only, the boundary ring is held at 0.
class Grid {
public:
    struct Edge {
        long tail_dof;  // -1 encodes a Dirichlet boundary endpoint (value 0)
        long head_dof;
        int axis;
    };

    GridKind kind;
    BoundaryKind boundary;
    int dims;
    std::vector<int> nodes_per_axis;
    std::vector<double> extents;
    std::vector<double> spacing;  // h_a = extents[a] / nodes_per_axis[a]

    long lattice_size = 0;
    long num_dofs = 0;
    double node_weight = 0.0;  // prod h_a, identical for every node
    double measure = 0.0;      // prod extents

    std::vector<Edge> edges;
    std::vector<double> inv_spacing;   // 1/h_a per axis
    std::vector<long> lattice_of_dof;  // dof -> lattice index
    std::vector<double> dof_xyz;       // dofs x dims, row major

    long dof_count() const { return num_dofs; }

    /// Physical coordinates of a DOF node.
    std::span<const double> dof_coords(long dof) const {
        return {dof_xyz.data() + static_cast<std::size_t>(dof) * static_cast<std::size_t>(dims),
                static_cast<std::size_t>(dims)};
    }

    bool conforms(const Field& u) const {
        return static_cast<long>(u.size()) == num_dofs;
    }

    void require_conforming(const Field& u, const char* what) const {
        if (!conforms(u))
            throw std::invalid_argument(std::string(what) + ": field has " +
                                        std::to_string(u.size()) + " values, grid has " +
                                        std::to_string(num_dofs) + " dofs");
    }
};

namespace detail {

inline long lattice_index(const std::vector<long>& coord, const std::vector<int>& n) {
    long idx = 0;
    for (std::size_t a = 0; a < n.size(); ++a) idx = idx * n[a] + coord[a];
    return idx;
}

} // namespace detail

/// Builds a grid from its descriptor. Deterministic: the same descriptor
/// yields a bitwise identical grid.
inline Grid build_grid(const GridSpec& spec) {
    Grid g;
    g.kind = spec.kind;
    g.dims = spec.dims;
    if (g.dims < 1) throw std::invalid_argument("build_grid: dims must be >= 1");
    if (spec.kind == GridKind::Periodic1d && spec.dims != 1)
        throw std::invalid_argument("build_grid: periodic-1d requires dims = 1");
    g.boundary = spec.kind == GridKind::Periodic1d ? BoundaryKind::Periodic
                                                   : BoundaryKind::ZeroDirichlet;

    auto broadcast = [&](auto src, const char* what) {
        if (src.size() == 1) src.assign(static_cast<std::size_t>(g.dims), src[0]);
        if (static_cast<int>(src.size()) != g.dims)
            throw std::invalid_argument(std::string("build_grid: ") + what +
                                        " needs 1 or dims entries");
        return src;
    };
    g.nodes_per_axis = broadcast(spec.nodes_per_axis, "nodes-per-axis");
    g.extents = broadcast(spec.extents, "extents");

    for (int a = 0; a < g.dims; ++a) {
        int n = g.nodes_per_axis[static_cast<std::size_t>(a)];
        double len = g.extents[static_cast<std::size_t>(a)];
        if (n < 4)
            throw std::invalid_argument("build_grid: nodes-per-axis must be >= 4, got " +
                                        std::to_string(n));
        if (!(len > 0.0))
            throw std::invalid_argument("build_grid: extents must be positive");
        g.spacing.push_back(len / static_cast<double>(n));
        g.inv_spacing.push_back(static_cast<double>(n) / len);
    }

    g.lattice_size = 1;
    g.node_weight = 1.0;
    g.measure = 1.0;
    for (int a = 0; a < g.dims; ++a) {
        g.lattice_size *= g.nodes_per_axis[static_cast<std::size_t>(a)];
        g.node_weight *= g.spacing[static_cast<std::size_t>(a)];
        g.measure *= g.extents[static_cast<std::size_t>(a)];
    }

    // DOF map
    std::vector<long> dof_of_lattice(static_cast<std::size_t>(g.lattice_size), -1);
    std::vector<long> coord(static_cast<std::size_t>(g.dims), 0);
    for (long idx = 0; idx < g.lattice_size; ++idx) {
        bool is_boundary = false;
        if (g.boundary == BoundaryKind::ZeroDirichlet) {
            long rem = idx;
            for (int a = g.dims - 1; a >= 0; --a) {
                long n = g.nodes_per_axis[static_cast<std::size_t>(a)];
                long c = rem % n;
                rem /= n;
                if (c == 0 || c == n - 1) is_boundary = true;
            }
        }
        if (!is_boundary) {
            dof_of_lattice[static_cast<std::size_t>(idx)] = g.num_dofs++;
            g.lattice_of_dof.push_back(idx);
        }
    }

    g.dof_xyz.resize(static_cast<std::size_t>(g.num_dofs) * static_cast<std::size_t>(g.dims));
    for (long dof = 0; dof < g.num_dofs; ++dof) {
        long rem = g.lattice_of_dof[static_cast<std::size_t>(dof)];
        for (int a = g.dims - 1; a >= 0; --a) {
            long n = g.nodes_per_axis[static_cast<std::size_t>(a)];
            long c = rem % n;
            rem /= n;
            g.dof_xyz[static_cast<std::size_t>(dof) * static_cast<std::size_t>(g.dims) +
                      static_cast<std::size_t>(a)] =
                static_cast<double>(c) * g.spacing[static_cast<std::size_t>(a)];
        }
    }

    // Edges per axis. Periodic wraps; the box keeps every lattice edge that
    // touches at least one DOF (pure boundary-boundary edges carry no energy).
    std::fill(coord.begin(), coord.end(), 0);
    std::vector<long> strides(static_cast<std::size_t>(g.dims), 1);
    for (int a = g.dims - 2; a >= 0; --a)
        strides[static_cast<std::size_t>(a)] =
            strides[static_cast<std::size_t>(a + 1)] * g.nodes_per_axis[static_cast<std::size_t>(a + 1)];

    for (long idx = 0; idx < g.lattice_size; ++idx) {
        // decode coordinates
        long rem = idx;
        for (int a = g.dims - 1; a >= 0; --a) {
            long n = g.nodes_per_axis[static_cast<std::size_t>(a)];
            coord[static_cast<std::size_t>(a)] = rem % n;
            rem /= n;
        }
        for (int a = 0; a < g.dims; ++a) {
            long n = g.nodes_per_axis[static_cast<std::size_t>(a)];
            long c = coord[static_cast<std::size_t>(a)];
            long head;
            if (g.boundary == BoundaryKind::Periodic) {
                head = (c + 1 < n) ? idx + strides[static_cast<std::size_t>(a)]
                                   : idx - c * strides[static_cast<std::size_t>(a)];
            } else {
                if (c + 1 >= n) continue;
                head = idx + strides[static_cast<std::size_t>(a)];
            }
            long td = dof_of_lattice[static_cast<std::size_t>(idx)];
            long hd = dof_of_lattice[static_cast<std::size_t>(head)];
            if (td < 0 && hd < 0) continue;
            g.edges.push_back({td, hd, a});
        }
    }
    return g;
}

/// Forward difference quotients (u_head - u_tail) / h on every edge.
/// Dirichlet endpoints contribute the boundary value 0.
inline Flux forward_difference(const Field& u, const Grid& g) {
    g.require_conforming(u, "forward_difference");
    Flux f(g.edges.size());
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        const auto& ed = g.edges[e];
        double ut = ed.tail_dof >= 0 ? u[static_cast<std::size_t>(ed.tail_dof)] : 0.0;
        double uh = ed.head_dof >= 0 ? u[static_cast<std::size_t>(ed.head_dof)] : 0.0;
        f[e] = (uh - ut) * g.inv_spacing[static_cast<std::size_t>(ed.axis)];
    }
    return f;
}

/// Discrete divergence, the negative adjoint of forward_difference under the
/// quadrature inner products: sum_e g_e flux(v)_e w = -sum_j div(g)_j v_j w.
inline Field divergence(const Flux& flux, const Grid& g) {
    if (flux.size() != g.edges.size())
        throw std::invalid_argument("divergence: flux does not match grid edge count");
    Field d(static_cast<std::size_t>(g.num_dofs), 0.0);
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        const auto& ed = g.edges[e];
        double scaled = flux[e] * g.inv_spacing[static_cast<std::size_t>(ed.axis)];
        if (ed.tail_dof >= 0) d[static_cast<std::size_t>(ed.tail_dof)] += scaled;
        if (ed.head_dof >= 0) d[static_cast<std::size_t>(ed.head_dof)] -= scaled;
    }
    return d;
}

} // namespace plap
