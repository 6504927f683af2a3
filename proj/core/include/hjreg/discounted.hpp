#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "hjreg/action.hpp"
#include "hjreg/grid.hpp"

namespace hjreg {

struct DiscountedOptions {
    int max_iterations = 500000;
    /// Every this many iterations the inner minimization scans all velocity
    /// cells instead of walking from the previous optimum.
    int rescan_every = 25;
    /// Slope-spread threshold, in multiples of the spacing, above which a node
    /// is treated as a kink (no residual, no calibrated curve).
    double kink_factor = 10.0;
};

struct DiscountedSolution {
    double lambda = 0.0;
    double dt = 0.0;
    GridFunction u;
    /// Optimal velocity per node from the last sweep.
    std::vector<Vec> controls;
    /// max |lambda u + H(x, Du)| over nodes with a unique slope.
    double residual = 0.0;
    int iterations = 0;
    /// e^{-lambda dt}.
    double contraction_factor = 0.0;
    /// Geometric mean of successive update ratios over the second half of the run.
    double measured_contraction = 0.0;
    double fixed_point_defect = 0.0;
    DiscountedOptions options;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// One step of the discounted dynamic-programming operator
/// (T u)(x) = min_v { w L(x - sbar v, v) + e^{-lambda dt} u(x - dt v) },
/// w = (1 - e^{-lambda dt}) / lambda and sbar the e^{-lambda s}-weighted mean
/// of s over [0, dt]. Optimal velocities are written to
/// `controls` (which also provides the warm start when non-empty).
/// Throws BoxExhausted when an optimal foot point leaves a constant-extend box.
GridFunction discounted_step(const TonelliLagrangian& lagrangian, double lambda, double dt, const GridFunction& u,
                             std::vector<Vec>& controls, bool full_scan = true);

/// Fixed point of the discounted operator, stopped once
/// ||T u - u|| <= tol_fp (1 - e^{-lambda dt}).
/// Throws InvalidArgument, NonContraction, BoxExhausted, NonConvergence.
DiscountedSolution solve_discounted(const TonelliLagrangian& lagrangian, double lambda, const GridSpec& grid,
                                    double dt, double tol_fp, const DiscountedOptions& options = {});

/// v(t, x) = e^{lambda t} u(x).
GridFunction lift_to_evolution(const DiscountedSolution& solution, double t);

/// One-sided slope spread at the node nearest x (largest over axes).
double slope_spread(const GridFunction& u, const Vec& x);

struct CalibratedCurve {
    Vec x;
    double tau = 0.0;
    double horizon = 0.0;
    /// Curve on [tau - horizon, tau], times ascending.
    Curve curve;
    /// Evolution momenta e^{lambda s} L_v along the curve.
    DualArc dual;
    /// Largest |v(tau, x) - v(s, gamma(s)) - int_s^tau L^lambda| over the steps.
    double calibration_defect = 0.0;
};

/// Integrates the Euler-Lagrange flow of L^lambda backward from x with
/// evolution momentum e^{lambda tau} Du(x). Throws SingularStart when the
/// slope spread at x exceeds the kink threshold.
CalibratedCurve backward_calibrated_curve(const DiscountedSolution& solution, const TonelliLagrangian& lagrangian,
                                          const Vec& x, double tau, double horizon, double dt);

}  // namespace hjreg
