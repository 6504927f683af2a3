#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "hjreg/lagrangian.hpp"

namespace hjreg {

enum class Interpolation { kPiecewiseLinear, kHermite };

/// Curve on [times.front(), times.back()] through `nodes`. Piecewise-linear
/// curves carry three-point finite-difference node velocities; Hermite
/// curves carry the exact node slopes of the cubic interpolant.
struct Curve {
    std::vector<double> times;
    std::vector<Vec> nodes;
    std::vector<Vec> velocities;
    Interpolation interpolation = Interpolation::kPiecewiseLinear;

    [[nodiscard]] Vec position(double tau) const;
    [[nodiscard]] Vec velocity(double tau) const;
    [[nodiscard]] Vec acceleration(double tau) const;
};

/// Momentum p(tau) = L_v(tau, xi(tau), xi'(tau)) along a curve.
struct DualArc {
    std::vector<double> times;
    std::vector<Vec> momenta;
};

struct FundamentalSolution {
    double s = 0.0;
    double t = 0.0;
    Vec x;
    Vec y;
    double value = 0.0;
    Curve minimizer;
    DualArc dual;
    Vec grad_x;  // -L_v at s
    Vec grad_y;  //  L_v at t
    /// Largest Euler-Lagrange defect at the collocation points.
    double residual = 0.0;
    /// Estimated Lipschitz constant of tau -> xi'(tau).
    double velocity_lipschitz = 0.0;
    int starts_tried = 1;
};

struct ActionOptions {
    int n_segments = 16;
    double tol = 1e-8;
    /// Randomized bent starts added for multi-well Lagrangians on long horizons.
    int multistart_bent = 4;
    double multistart_threshold = 0.5;
    std::uint64_t seed = 0;
    int descent_iterations = 400;
    int newton_iterations = 60;
};

/// A_{s,t}(x, y): descent on a piecewise-linear curve followed by Hermite
/// collocation of the Euler-Lagrange equation.
/// Throws OutOfWindow, InvalidArgument or NoConvergence.
FundamentalSolution minimize_action(const TonelliLagrangian& lagrangian, double s, double t, const Vec& x,
                                    const Vec& y, const ActionOptions& options = {});

DualArc dual_arc(const TonelliLagrangian& lagrangian, const Curve& curve);

/// Cone S(x, T') = {(t - s, |y - x|) : 0 < t - s <= T', |y - x| < lambda (t - s)}.
struct CertifiedCone {
    double lambda = 1.0;
    double t_prime = 1.0;

    [[nodiscard]] bool contains(double gap, double distance) const {
        return gap > 0.0 && gap <= t_prime && distance < lambda * gap;
    }
};

/// Endpoint gradients (grad_x, grad_y) of A. Throws NoConvergence when the
/// solution is not converged and ConeViolation outside the given cone.
std::pair<Vec, Vec> gradients_A(const FundamentalSolution& solution, double tol = 1e-8,
                                const std::optional<CertifiedCone>& cone = std::nullopt);

/// CSV with columns tau, x_1..x_n, p_1..p_n.
void write_curve_csv(std::ostream& out, const Curve& curve, const DualArc& dual);

}  // namespace hjreg
