#pragma once

#include <optional>
#include <ostream>
#include <vector>

#include <nlohmann/json.hpp>

#include "hjreg/discounted.hpp"
#include "hjreg/laxoleinik.hpp"
#include "hjreg/probe_report.hpp"
#include "hjreg/regularity.hpp"

namespace hjreg {

struct LasryLionsOptions {
    LaxOptions lax;
    RegularityOptions regularity;
    /// Agreement required between three successive extrapolants.
    double cauchy_tol = 1e-3;
    /// Singularity threshold on the superdifferential diameter and trace
    /// continuity tolerance, in multiples of the smallest spacing.
    double singular_factor = 4.0;
    double continuity_factor = 2.0;
    /// Half-width of the box around x0 on which the semiconcavity constant of
    /// u^lambda is measured.
    double concavity_radius = 0.25;
    /// Samples per horizon for the kernel convexity probe.
    int convexity_samples = 24;
    /// Compute the full regularized field for every t, not only probe values.
    bool full_field = true;
};

/// One application of the intrinsic regularization T^_t u^lambda.
struct Regularization {
    double t = 0.0;
    GridFunction value;
    /// Gradient at each output node with a unique maximizer.
    std::vector<std::optional<Vec>> gradients;
    /// max |T^_t u - u| over the output nodes.
    double sup_error = 0.0;
    /// Largest difference quotient of the gradient field between adjacent nodes.
    double gradient_lipschitz = 0.0;
    double kappa0 = 0.0;
    std::vector<Vec> probe_points;
    std::vector<LaxPoint> probes;
};

/// T^_t u^lambda(x) = sup_y u^lambda(y) - A^lambda_{0,t}(x, y) with
/// L^lambda = e^{lambda s} L. Throws NonUniqueMaximizer when a probe point
/// has several maximizers.
Regularization intrinsic_regularize(const DiscountedSolution& solution, const TonelliLagrangian& lagrangian,
                                    double t, const std::vector<Vec>& probe_points,
                                    const LasryLionsOptions& options = {});

/// Vector-sequence extrapolation over a geometric grid: Aitken delta-squared
/// per component with a Richardson step where the ratio is unreliable.
struct Extrapolation {
    std::vector<Vec> extrapolants;
    std::optional<Vec> limit;
    /// Largest spread among the last three extrapolants.
    double spread = 0.0;
    bool converged = false;
};
Extrapolation extrapolate(const std::vector<Vec>& sequence, double tol);

struct ProbeSequence {
    Vec x;
    /// Gradient and v_t = (y_t - x) / t per t; empty entries where the
    /// maximizer was not unique.
    std::vector<std::optional<Vec>> gradients;
    std::vector<std::optional<Vec>> velocities;
    Extrapolation gradient_limit;
    Extrapolation velocity_limit;
};

struct RegularizationSweep {
    double lambda = 0.0;
    std::vector<double> t_grid;
    std::vector<Regularization> steps;
    std::vector<ProbeSequence> probes;
    /// Sup-norm errors are nonincreasing along the grid.
    bool monotone = true;

    [[nodiscard]] nlohmann::json to_json() const;
    /// Columns t, sup_error, gradient_lipschitz, kappa0.
    void write_errors_csv(std::ostream& out) const;
};

/// Runs the regularization along a decreasing t grid. Every step uses the
/// output grid of the first (largest) t.
RegularizationSweep convergence_sweep(const DiscountedSolution& solution, const TonelliLagrangian& lagrangian,
                                      const std::vector<double>& t_grid, const std::vector<Vec>& probe_points,
                                      const LasryLionsOptions& options = {});

struct GradientLimitComparison {
    Vec x;
    std::optional<Vec> limit;
    SuperdiffSet superdiff;
    HMinimum q;
    /// Euclidean distance between the limit and q (infinite without a limit).
    double distance = 0.0;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// Compares lim D T^_t u(x) with the minimizer of H(x, .) over D+u(x).
GradientLimitComparison gradient_limit_vs_qx(const RegularizationSweep& sweep, const Hamiltonian& hamiltonian,
                                             const GridFunction& u, const Vec& x,
                                             const LasryLionsOptions& options = {});

struct ConcavityWindow {
    /// Largest t with unique maximizers at x0 for it and every smaller t.
    double t1 = 0.0;
    /// Largest t (not above t1) with C'''(t) / t > C2 for it and every smaller t.
    double t2 = 0.0;
    double c2 = 0.0;
    ProbeReport convexity;
};

ConcavityWindow strict_concavity_window(const DiscountedSolution& solution, const TonelliLagrangian& lagrangian,
                                        const Vec& x0, const std::vector<double>& t_grid,
                                        const LasryLionsOptions& options = {});

struct SingularTrace {
    Vec x0;
    std::vector<double> t_grid;
    std::vector<MaximizerRecord> records;
    /// Best maximizer y_{t,x0} per t.
    std::vector<Vec> maximizers;
    std::vector<double> diameters;
    std::vector<bool> singular;
    std::vector<double> kappa0;
    bool localized = true;
    /// Largest |y_{t_k} - y_{t_{k+1}}| over t in (0, t1].
    double max_jump = 0.0;
    Extrapolation right_derivative;
    SuperdiffSet superdiff;
    /// Momentum q^lambda_{x0} and velocity v0 = H_p(x0, q).
    HMinimum q;
    Vec v0;
    ConcavityWindow window;

    [[nodiscard]] nlohmann::json to_json() const;
    /// Columns t, y1..yn, diameter, singular, unique.
    void write_csv(std::ostream& out) const;
};

/// Follows the maximizers y_{t,x0} of u^lambda(y) - A^lambda_{0,t}(x0, y).
/// Throws NotSingular when the superdifferential at x0 is too small.
SingularTrace trace_singularity(const DiscountedSolution& solution, const TonelliLagrangian& lagrangian,
                                const Hamiltonian& hamiltonian, const Vec& x0, const std::vector<double>& t_grid,
                                const LasryLionsOptions& options = {});

/// Tabulates q^lambda_x across a decreasing lambda grid. When the Lagrangian
/// has no potential the stationary solutions are constant and q_x = 0 is
/// reported alongside. No inequality checks are recorded.
ProbeReport lambda_sweep_problem_probe(const TonelliLagrangian& lagrangian, const Hamiltonian& hamiltonian,
                                       const std::vector<double>& lambda_grid, const std::vector<Vec>& x_points,
                                       const GridSpec& grid, double dt, double tol_fp,
                                       const LasryLionsOptions& options = {});

}  // namespace hjreg
