#pragma once

#include <optional>
#include <vector>

#include "hjreg/grid.hpp"
#include "hjreg/kernel.hpp"
#include "hjreg/probe_report.hpp"

namespace hjreg {

/// Maximizers of the barrier psi(y) = u(y) - A_{t0,t}(x, y) at one base point
/// (for the negative operator, minimizers of u(y) + A_{t0,t}(y, x)).
struct MaximizerRecord {
    Vec x;
    double gap = 0.0;
    std::vector<Vec> maximizers;
    /// Barrier values; for the negative operator these are u(y) + A(y, x)
    /// and `maximize` is false.
    std::vector<double> values;
    bool maximize = true;
    bool unique = true;
};

struct LaxOptions {
    /// Output nodes. Defaults to the input grid for periodic inputs and to the
    /// largest aligned sub-box whose search balls stay inside the input box.
    std::optional<GridSpec> output;
    /// Overrides the bootstrap localization constant.
    std::optional<double> kappa0;
    double value_tol = 1e-7;
    /// Spatial uniqueness tolerance in multiples of the smallest spacing.
    double spatial_tol_factor = 2.0;
    int coarse_points = 16;
    int seeds = 3;
    KernelChoice kernel = KernelChoice::kAuto;
    ActionOptions action;
};

struct LaxPoint {
    double value = 0.0;
    MaximizerRecord record;
    /// Gradient of the operator at x when the maximizer is unique.
    std::optional<Vec> gradient;
    /// Velocity at time t0 of the minimizer reaching the best maximizer.
    Vec velocity_start;
    double kappa0 = 0.0;
    /// A maximizer landed within one spacing of the search-ball boundary.
    bool boundary_hit = false;
};

struct LaxResult {
    GridFunction value;
    std::vector<MaximizerRecord> records;
    std::vector<std::optional<Vec>> gradients;
    /// Largest bootstrap radius constant used over the output nodes.
    double kappa0_bound = 0.0;
    /// max |y - x| / (t - t0) over all returned maximizers.
    double kappa0_empirical = 0.0;
    int boundary_hits = 0;
};

/// sup{r >= 0 : theta(r) - c0 - L0 - lip r <= 0} with
/// L0 = max over a few times of L(tau, x, 0).
double kappa0_bootstrap(const TonelliLagrangian& lagrangian, double lip, double t0, double t, const Vec& x);

/// psi(y) = u(y) - A_{t0,t}(x, y).
double barrier(const GridFunction& u, const ActionKernel& kernel, double t0, double t, const Vec& x, const Vec& y);
double barrier(const GridFunction& u, const TonelliLagrangian& lagrangian, double t0, double t, const Vec& x,
               const Vec& y, const ActionOptions& options = {});

/// T^+_{s,t} u at one point. Throws SearchBallClipped when the search ball
/// leaves a constant-extend box.
LaxPoint lax_plus_at(const GridFunction& u, const ActionKernel& kernel, double s, double t, const Vec& x,
                     const LaxOptions& options = {});
LaxPoint lax_minus_at(const GridFunction& u, const ActionKernel& kernel, double s, double t, const Vec& x,
                      const LaxOptions& options = {});

/// T^+_{s,t} u(x) = sup_y u(y) - A_{s,t}(x, y) on the output grid.
LaxResult lax_plus(const GridFunction& u, const ActionKernel& kernel, double s, double t,
                   const LaxOptions& options = {});
LaxResult lax_plus(const GridFunction& u, const TonelliLagrangian& lagrangian, double s, double t,
                   const LaxOptions& options = {});

/// T^-_{s,t} u(x) = inf_y u(y) + A_{s,t}(y, x) on the output grid.
LaxResult lax_minus(const GridFunction& u, const ActionKernel& kernel, double s, double t,
                    const LaxOptions& options = {});
LaxResult lax_minus(const GridFunction& u, const TonelliLagrangian& lagrangian, double s, double t,
                    const LaxOptions& options = {});

/// Composes T^- over n_steps equal substeps of [t0, t]. The `output` option
/// applies to the last step only.
GridFunction solve_cauchy(const GridFunction& u0, const TonelliLagrangian& lagrangian, double t0, double t,
                          int n_steps, const LaxOptions& options = {});

/// Empirical kappa0 = max |y_{t,x} - x| / (t - t0) over sample points for each
/// t in `t_grid`, for u and for 2u. Checks that kappa0 does not grow as
/// t -> t0 and that every maximizer obeys the bound.
/// Constants: "kappa0", "kappa0_bound", "lip", "kappa0_scaled", "lip_scaled",
/// "kappa0_ratio", "lip_ratio". Table "kappa0_by_t".
ProbeReport estimate_kappa0(const GridFunction& u, const ActionKernel& kernel, double t0,
                            const std::vector<double>& t_grid, const std::vector<Vec>& sample_points,
                            const LaxOptions& options = {});

/// True iff all maximizers within `value_tol` of the best lie within
/// `spatial_tol` of each other.
bool check_condition_M(const MaximizerRecord& record, double value_tol, double spatial_tol);

}  // namespace hjreg
