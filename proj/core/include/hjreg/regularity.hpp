#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "hjreg/grid.hpp"
#include "hjreg/lagrangian.hpp"

namespace hjreg {

struct RegularityOptions {
    /// A node is differentiable when its 5-point quadratic-fit residual is
    /// below fit_factor h^2 and its one-sided slope spread below spread_factor h.
    double fit_factor = 10.0;
    double spread_factor = 5.0;
    /// Upper bound on second differences accepted as semiconcave; defaults to 0.5 / h.
    std::optional<double> semiconcavity_bound;
    /// Neighborhood radius and cluster tolerance used by `singular_set`, in
    /// multiples of the smallest spacing.
    double radius_factor = 6.0;
    double cluster_factor = 10.0;
};

/// co D*u(x) from grid limiting gradients.
struct SuperdiffSet {
    Vec x;
    std::vector<Vec> limiting;
    std::vector<Vec> hull;
    double diameter = 0.0;

    [[nodiscard]] nlohmann::json to_json() const;
};

bool is_differentiable_node(const GridFunction& u, std::size_t flat, const RegularityOptions& options = {});

/// Central-difference gradient at a node.
Vec node_gradient(const GridFunction& u, std::size_t flat);

/// Limiting gradients at x: gradients of differentiable nodes within `radius`,
/// clustered by single linkage with `cluster_tol`; each cluster is
/// extrapolated to x by a least-squares quadratic (affine for small
/// clusters). Throws InsufficientSamples with fewer than
/// n + 1 differentiable nodes.
std::vector<Vec> limiting_differentials(const GridFunction& u, const Vec& x, double radius, double cluster_tol,
                                        const RegularityOptions& options = {});

/// Throws NotSemiconcave when second differences near x exceed the bound.
SuperdiffSet superdifferential(const GridFunction& u, const Vec& x, double radius, double cluster_tol,
                               const RegularityOptions& options = {});

/// Vertices of the convex hull of points: interval in 1D, counter-clockwise
/// gift wrapping in 2D, vertex test by simplex projection in 3D.
std::vector<Vec> convex_hull(const std::vector<Vec>& points, double tol = 1e-12);

/// True when p lies on the boundary of the hull (a vertex in 3D).
bool on_hull_boundary(const std::vector<Vec>& hull, const Vec& p, double tol);

struct HMinimum {
    Vec q;
    double value = 0.0;
    /// Independent pairwise Frank-Wolfe solution.
    Vec q_fw;
    int iterations = 0;
};

/// argmin of the strictly convex H(t, x, .) over co(S.hull) by projected
/// gradient on simplex weights, cross-checked by pairwise Frank-Wolfe.
/// Throws NonConvergence when the two disagree by more than 1e-8.
HMinimum min_H_over_superdiff(const Hamiltonian& hamiltonian, double t, const Vec& x, const SuperdiffSet& set);

/// Nodes whose superdifferential diameter exceeds `diam_threshold`; candidates
/// are non-differentiable nodes that are local minima of the second difference
/// along their most concave axis.
std::vector<std::size_t> singular_set(const GridFunction& u, double diam_threshold,
                                      const RegularityOptions& options = {});

struct SemiconcavityEstimate {
    /// Signed max of (u(x+z) + u(x-z) - 2u(x)) / |z|^2 over unmasked samples.
    double constant = 0.0;
    std::size_t samples = 0;
    /// Samples whose segment crosses a masked (singular) node.
    std::size_t masked = 0;
    double masked_max = 0.0;
};

/// Samples node-aligned x in [lo, hi] and offsets z with entries in {-2..2} h.
SemiconcavityEstimate semiconcavity_constant(const GridFunction& u, const Vec& lo, const Vec& hi,
                                             const std::vector<std::size_t>& masked_nodes = {});

}  // namespace hjreg
